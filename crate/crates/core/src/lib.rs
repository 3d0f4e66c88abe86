//! Transaction foundation model.
//!
//! Bank transactions are rendered into a small structured language
//! (`[TYPE] DEBIT [AMT] AMT_100_150 [NAME] netflix.com`), tokenized into
//! subwords, and used to pretrain a bidirectional transformer encoder with
//! masked language modeling. The `[CLS]` vector of an account's document is its
//! embedding. Embeddings are compared against two baselines (handcrafted
//! aggregation features and a contrastive recurrent encoder) by linear probing
//! on a synthetic corpus whose account attributes are planted and known.
//!
//! Pipeline order: [`synthgen`] → [`grammar`] → [`tokenizer`] → [`encoder`] /
//! [`pretrain`] → [`baselines`] → [`probe`]. The [`cli`] module wires the stages
//! to files.

// `!(x > 0.0)` is how config validation rejects NaN along with non-positive
// values; index loops mirror the math in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments, clippy::type_complexity)]

pub mod baselines;
pub mod cli;
pub mod encoder;
pub mod error;
pub mod grammar;
pub mod pretrain;
pub mod probe;
pub mod synthgen;
pub mod tokenizer;
pub mod util;

pub use error::{Error, Result};
