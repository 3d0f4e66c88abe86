//! C ABI over the transaction grammar, the tokenizer and the encoder.
//!
//! Every fallible call returns a [`TxnfmStatus`]; on failure the message is
//! available from [`txnfm_last_error_message`] on the same thread. Handles are
//! opaque, created by `*_load` and released by the matching `*_free`. Strings
//! returned through out-pointers are owned by the caller and released with
//! [`txnfm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use txnfm::encoder::{cls_embedding, load_encoder, Params};
use txnfm::grammar::{parse_sentence, serialize_transaction};
use txnfm::synthgen::{Direction, Transaction};
use txnfm::tokenizer::{decode, encode, Vocabulary};
use txnfm::Error;

/// Result of every fallible call. `TXNFM_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxnfmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    BufferTooSmall = 3,
    MalformedSentence = 4,
    InvalidConfig = 5,
    InvalidInput = 6,
    ShapeMismatch = 7,
    UnknownTask = 8,
    UnknownTokenId = 9,
    MetricUndefined = 10,
    MissingPrerequisite = 11,
    CorruptFile = 12,
    Io = 13,
    Json = 14,
    Panic = 15,
}

impl From<&Error> for TxnfmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::MalformedSentence { .. } => TxnfmStatus::MalformedSentence,
            Error::InvalidConfig(_) => TxnfmStatus::InvalidConfig,
            Error::InvalidInput(_) => TxnfmStatus::InvalidInput,
            Error::ShapeMismatch { .. } => TxnfmStatus::ShapeMismatch,
            Error::UnknownTask(_) => TxnfmStatus::UnknownTask,
            Error::UnknownTokenId(_) => TxnfmStatus::UnknownTokenId,
            Error::MetricUndefined { .. } => TxnfmStatus::MetricUndefined,
            Error::Prerequisite(_) => TxnfmStatus::MissingPrerequisite,
            Error::CorruptFile { .. } => TxnfmStatus::CorruptFile,
            Error::Io { .. } => TxnfmStatus::Io,
            Error::Json(_) => TxnfmStatus::Json,
        }
    }
}

/// Transaction direction as seen from the account.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxnfmDirection {
    Debit = 0,
    Credit = 1,
}

/// A trained subword vocabulary together with its amount-bucket scheme.
pub struct TxnfmVocab {
    vocab: Vocabulary,
}

/// Encoder weights plus the vocabulary they were trained with.
pub struct TxnfmEncoder {
    params: Params<f32>,
    vocab: Vocabulary,
}

struct Failure {
    status: TxnfmStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: TxnfmStatus::from(&e),
            message: e.to_string(),
        }
    }
}

fn fail(status: TxnfmStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

/// Runs `body`, converting errors and panics into a status and a message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TxnfmStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(fail(TxnfmStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TxnfmStatus::Ok
        }
        Err(f) => {
            set_last_error(&f.message);
            f.status
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(TxnfmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TxnfmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `out` is null or valid for one write.
unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(TxnfmStatus::NullPointer, "output pointer is null"));
    }
    let c = CString::new(text).map_err(|_| fail(TxnfmStatus::InvalidInput, "output contains a NUL byte"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(TxnfmStatus::NullPointer, format!("{what} handle is null")))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn txnfm_status_name(status: TxnfmStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        TxnfmStatus::Ok => b"ok\0",
        TxnfmStatus::NullPointer => b"null_pointer\0",
        TxnfmStatus::InvalidUtf8 => b"invalid_utf8\0",
        TxnfmStatus::BufferTooSmall => b"buffer_too_small\0",
        TxnfmStatus::MalformedSentence => b"malformed_sentence\0",
        TxnfmStatus::InvalidConfig => b"invalid_config\0",
        TxnfmStatus::InvalidInput => b"invalid_input\0",
        TxnfmStatus::ShapeMismatch => b"shape_mismatch\0",
        TxnfmStatus::UnknownTask => b"unknown_task\0",
        TxnfmStatus::UnknownTokenId => b"unknown_token_id\0",
        TxnfmStatus::MetricUndefined => b"metric_undefined\0",
        TxnfmStatus::MissingPrerequisite => b"missing_prerequisite\0",
        TxnfmStatus::CorruptFile => b"corrupt_file\0",
        TxnfmStatus::Io => b"io\0",
        TxnfmStatus::Json => b"json\0",
        TxnfmStatus::Panic => b"panic\0",
    };
    name.as_ptr().cast()
}

/// Copy of the calling thread's last error message, or null if the last call
/// succeeded. Free with [`txnfm_string_free`].
#[no_mangle]
pub extern "C" fn txnfm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn txnfm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a vocabulary file written by `txnfm train-vocab`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn txnfm_vocab_load(path: *const c_char, out: *mut *mut TxnfmVocab) -> TxnfmStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        if out.is_null() {
            return Err(fail(TxnfmStatus::NullPointer, "output pointer is null"));
        }
        let vocab = Vocabulary::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(TxnfmVocab { vocab }));
        Ok(())
    })
}

/// # Safety
/// `vocab` is null or a handle from [`txnfm_vocab_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn txnfm_vocab_free(vocab: *mut TxnfmVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Number of tokens, reserved ones included. Zero for a null handle.
///
/// # Safety
/// `vocab` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn txnfm_vocab_len(vocab: *const TxnfmVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.vocab.len())
}

/// Renders one transaction as `[TYPE] <dir> [AMT] <bucket> [NAME] <desc>` using
/// the vocabulary's bucket scheme.
///
/// # Safety
/// `vocab` is a live handle; `description` is a NUL-terminated string; `out`
/// is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn txnfm_serialize_transaction(
    vocab: *const TxnfmVocab,
    direction: TxnfmDirection,
    amount_cents: u64,
    description: *const c_char,
    out: *mut *mut c_char,
) -> TxnfmStatus {
    guard(|| {
        let v = handle(vocab, "vocabulary")?;
        let desc = read_str(description, "description")?;
        let t = Transaction {
            ts: 0,
            dir: match direction {
                TxnfmDirection::Debit => Direction::Debit,
                TxnfmDirection::Credit => Direction::Credit,
            },
            amount_cents,
            desc: desc.to_string(),
        };
        let sentence = serialize_transaction(&t, v.vocab.buckets())?;
        write_string(out, sentence.render())
    })
}

/// Checks that `sentence` is a well-formed rendered transaction.
///
/// # Safety
/// `vocab` is a live handle; `sentence` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn txnfm_validate_sentence(vocab: *const TxnfmVocab, sentence: *const c_char) -> TxnfmStatus {
    guard(|| {
        let v = handle(vocab, "vocabulary")?;
        parse_sentence(read_str(sentence, "sentence")?, v.vocab.buckets())?;
        Ok(())
    })
}

/// Encodes a rendered document into exactly `max_context` ids (padded with
/// `[PAD]`). `capacity` must be at least `max_context`; `out_n_real` receives
/// the number of non-padding ids.
///
/// # Safety
/// `ids` is valid for `capacity` writes; `out_n_real` is null or valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn txnfm_encode(
    vocab: *const TxnfmVocab,
    document: *const c_char,
    max_context: usize,
    ids: *mut u32,
    capacity: usize,
    out_n_real: *mut usize,
) -> TxnfmStatus {
    guard(|| {
        let v = handle(vocab, "vocabulary")?;
        let text = read_str(document, "document")?;
        if max_context == 0 {
            return Err(fail(TxnfmStatus::InvalidInput, "max_context must be positive"));
        }
        if ids.is_null() {
            return Err(fail(TxnfmStatus::NullPointer, "ids buffer is null"));
        }
        if capacity < max_context {
            return Err(fail(
                TxnfmStatus::BufferTooSmall,
                format!("ids buffer holds {capacity}, need {max_context}"),
            ));
        }
        let seq = encode(text, &v.vocab, max_context);
        std::slice::from_raw_parts_mut(ids, seq.ids.len()).copy_from_slice(&seq.ids);
        if !out_n_real.is_null() {
            *out_n_real = seq.n_real();
        }
        Ok(())
    })
}

/// Inverse of [`txnfm_encode`]: drops `[CLS]` and `[PAD]`, joins subwords.
///
/// # Safety
/// `ids` is valid for `len` reads; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn txnfm_decode(
    vocab: *const TxnfmVocab,
    ids: *const u32,
    len: usize,
    out: *mut *mut c_char,
) -> TxnfmStatus {
    guard(|| {
        let v = handle(vocab, "vocabulary")?;
        let ids: &[u32] = if len == 0 {
            &[]
        } else if ids.is_null() {
            return Err(fail(TxnfmStatus::NullPointer, "ids is null"));
        } else {
            std::slice::from_raw_parts(ids, len)
        };
        write_string(out, decode(ids, &v.vocab)?)
    })
}

/// Loads an encoder checkpoint and the vocabulary it was trained with.
///
/// # Safety
/// Both paths are NUL-terminated strings; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn txnfm_encoder_load(
    checkpoint_path: *const c_char,
    vocab_path: *const c_char,
    out: *mut *mut TxnfmEncoder,
) -> TxnfmStatus {
    guard(|| {
        let ck = read_str(checkpoint_path, "checkpoint path")?;
        let vp = read_str(vocab_path, "vocabulary path")?;
        if out.is_null() {
            return Err(fail(TxnfmStatus::NullPointer, "output pointer is null"));
        }
        let (params, _) = load_encoder(Path::new(ck))?;
        let vocab = Vocabulary::load(Path::new(vp))?;
        if vocab.len() != params.config.vocab_size {
            return Err(Error::ShapeMismatch {
                expected: params.config.vocab_size,
                actual: vocab.len(),
            }
            .into());
        }
        *out = Box::into_raw(Box::new(TxnfmEncoder { params, vocab }));
        Ok(())
    })
}

/// # Safety
/// `encoder` is null or a handle from [`txnfm_encoder_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn txnfm_encoder_free(encoder: *mut TxnfmEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Embedding width (`d_model`). Zero for a null handle.
///
/// # Safety
/// `encoder` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn txnfm_encoder_dim(encoder: *const TxnfmEncoder) -> usize {
    encoder.as_ref().map_or(0, |e| e.params.config.d_model)
}

/// Context length the encoder was trained with.
///
/// # Safety
/// `encoder` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn txnfm_encoder_max_context(encoder: *const TxnfmEncoder) -> usize {
    encoder.as_ref().map_or(0, |e| e.params.config.max_context)
}

/// `[CLS]` embedding of a rendered document, truncated to the most recent
/// sentences that fit the encoder's context. Writes `txnfm_encoder_dim` floats.
///
/// # Safety
/// `document` is a NUL-terminated string; `out` is valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn txnfm_embed_document(
    encoder: *const TxnfmEncoder,
    document: *const c_char,
    out: *mut f32,
    capacity: usize,
) -> TxnfmStatus {
    guard(|| {
        let e = handle(encoder, "encoder")?;
        let text = read_str(document, "document")?;
        let dim = e.params.config.d_model;
        if out.is_null() {
            return Err(fail(TxnfmStatus::NullPointer, "output buffer is null"));
        }
        if capacity < dim {
            return Err(fail(TxnfmStatus::BufferTooSmall, format!("output holds {capacity}, need {dim}")));
        }
        let seq = encode(text, &e.vocab, e.params.config.max_context);
        let v = cls_embedding(&e.params, &seq)?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&v);
        Ok(())
    })
}
