#ifndef TXNFM_H
#define TXNFM_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Transaction direction as seen from the account.
typedef enum TxnfmDirection {
  TXNFM_DIRECTION_DEBIT = 0,
  TXNFM_DIRECTION_CREDIT = 1,
} TxnfmDirection;

// Result of every fallible call. `TXNFM_STATUS_OK` is zero.
typedef enum TxnfmStatus {
  TXNFM_STATUS_OK = 0,
  TXNFM_STATUS_NULL_POINTER = 1,
  TXNFM_STATUS_INVALID_UTF8 = 2,
  TXNFM_STATUS_BUFFER_TOO_SMALL = 3,
  TXNFM_STATUS_MALFORMED_SENTENCE = 4,
  TXNFM_STATUS_INVALID_CONFIG = 5,
  TXNFM_STATUS_INVALID_INPUT = 6,
  TXNFM_STATUS_SHAPE_MISMATCH = 7,
  TXNFM_STATUS_UNKNOWN_TASK = 8,
  TXNFM_STATUS_UNKNOWN_TOKEN_ID = 9,
  TXNFM_STATUS_METRIC_UNDEFINED = 10,
  TXNFM_STATUS_MISSING_PREREQUISITE = 11,
  TXNFM_STATUS_CORRUPT_FILE = 12,
  TXNFM_STATUS_IO = 13,
  TXNFM_STATUS_JSON = 14,
  TXNFM_STATUS_PANIC = 15,
} TxnfmStatus;

// Encoder weights plus the vocabulary they were trained with.
typedef struct TxnfmEncoder TxnfmEncoder;

// A trained subword vocabulary together with its amount-bucket scheme.
typedef struct TxnfmVocab TxnfmVocab;

// Static, NUL-terminated name of a status code.
const char *txnfm_status_name(enum TxnfmStatus status);

// Copy of the calling thread's last error message, or null if the last call
// succeeded. Free with [`txnfm_string_free`].
char *txnfm_last_error_message(void);

// # Safety
// `s` is null or a string returned by this library and not yet freed.
void txnfm_string_free(char *s);

// Loads a vocabulary file written by `txnfm train-vocab`.
//
// # Safety
// `path` is a NUL-terminated string; `out` is valid for one write.
enum TxnfmStatus txnfm_vocab_load(const char *path, struct TxnfmVocab **out);

// # Safety
// `vocab` is null or a handle from [`txnfm_vocab_load`] not yet freed.
void txnfm_vocab_free(struct TxnfmVocab *vocab);

// Number of tokens, reserved ones included. Zero for a null handle.
//
// # Safety
// `vocab` is null or a live handle.
size_t txnfm_vocab_len(const struct TxnfmVocab *vocab);

// Renders one transaction as `[TYPE] <dir> [AMT] <bucket> [NAME] <desc>` using
// the vocabulary's bucket scheme.
//
// # Safety
// `vocab` is a live handle; `description` is a NUL-terminated string; `out`
// is valid for one write.
enum TxnfmStatus txnfm_serialize_transaction(const struct TxnfmVocab *vocab,
                                             enum TxnfmDirection direction,
                                             uint64_t amount_cents,
                                             const char *description,
                                             char **out);

// Checks that `sentence` is a well-formed rendered transaction.
//
// # Safety
// `vocab` is a live handle; `sentence` is a NUL-terminated string.
enum TxnfmStatus txnfm_validate_sentence(const struct TxnfmVocab *vocab, const char *sentence);

// Encodes a rendered document into exactly `max_context` ids (padded with
// `[PAD]`). `capacity` must be at least `max_context`; `out_n_real` receives
// the number of non-padding ids.
//
// # Safety
// `ids` is valid for `capacity` writes; `out_n_real` is null or valid for one
// write.
enum TxnfmStatus txnfm_encode(const struct TxnfmVocab *vocab,
                              const char *document,
                              size_t max_context,
                              uint32_t *ids,
                              size_t capacity,
                              size_t *out_n_real);

// Inverse of [`txnfm_encode`]: drops `[CLS]` and `[PAD]`, joins subwords.
//
// # Safety
// `ids` is valid for `len` reads; `out` is valid for one write.
enum TxnfmStatus txnfm_decode(const struct TxnfmVocab *vocab,
                              const uint32_t *ids,
                              size_t len,
                              char **out);

// Loads an encoder checkpoint and the vocabulary it was trained with.
//
// # Safety
// Both paths are NUL-terminated strings; `out` is valid for one write.
enum TxnfmStatus txnfm_encoder_load(const char *checkpoint_path,
                                    const char *vocab_path,
                                    struct TxnfmEncoder **out);

// # Safety
// `encoder` is null or a handle from [`txnfm_encoder_load`] not yet freed.
void txnfm_encoder_free(struct TxnfmEncoder *encoder);

// Embedding width (`d_model`). Zero for a null handle.
//
// # Safety
// `encoder` is null or a live handle.
size_t txnfm_encoder_dim(const struct TxnfmEncoder *encoder);

// Context length the encoder was trained with.
//
// # Safety
// `encoder` is null or a live handle.
size_t txnfm_encoder_max_context(const struct TxnfmEncoder *encoder);

// `[CLS]` embedding of a rendered document, truncated to the most recent
// sentences that fit the encoder's context. Writes `txnfm_encoder_dim` floats.
//
// # Safety
// `document` is a NUL-terminated string; `out` is valid for `capacity` writes.
enum TxnfmStatus txnfm_embed_document(const struct TxnfmEncoder *encoder,
                                      const char *document,
                                      float *out,
                                      size_t capacity);

#endif  /* TXNFM_H */
