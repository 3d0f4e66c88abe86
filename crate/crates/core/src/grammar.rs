//! Transaction sentences and account documents.
//!
//! A transaction renders as `[TYPE] <DEBIT|CREDIT> [AMT] <bucket> [NAME] <desc>`
//! and an account as its chronologically ordered sentences joined by ` [SEP] `.
//! Timestamps only fix the order; they are not rendered.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::synthgen::{Direction, Transaction};
use crate::{Error, Result};

pub const TYPE_MARKER: &str = "[TYPE]";
pub const AMT_MARKER: &str = "[AMT]";
pub const NAME_MARKER: &str = "[NAME]";
pub const SEP_MARKER: &str = "[SEP]";
pub const EMPTY_DESC: &str = "EMPTY_DESC";

pub const RESERVED_MARKERS: [&str; 7] =
    ["[TYPE]", "[AMT]", "[NAME]", "[SEP]", "[CLS]", "[MASK]", "[PAD]"];

const SENTENCE_SEPARATOR: &str = " [SEP] ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct BucketConfig {
    pub width_cents: u64,
    pub max_index: u32,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self {
            width_cents: 5000,
            max_index: 200,
        }
    }
}

impl BucketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width_cents == 0 || self.width_cents % 100 != 0 {
            return Err(Error::config(format!(
                "bucket width must be a positive whole-dollar amount in cents, got {}",
                self.width_cents
            )));
        }
        Ok(())
    }

    pub fn n_buckets(&self) -> usize {
        self.max_index as usize + 1
    }

    /// Token for bucket `index`, without validation.
    pub fn token(&self, index: u32) -> String {
        let width = self.width_cents / 100;
        let lo = index as u64 * width;
        if index >= self.max_index {
            format!("AMT_{lo}_INF")
        } else {
            format!("AMT_{lo}_{}", lo + width)
        }
    }

    /// Inverse of [`BucketConfig::token`]; `None` for anything that is not a bucket token.
    pub fn parse_token(&self, token: &str) -> Option<u32> {
        let rest = token.strip_prefix("AMT_")?;
        let (lo, hi) = rest.split_once('_')?;
        let lo: u64 = parse_plain_u64(lo)?;
        let width = self.width_cents / 100;
        if width == 0 || lo % width != 0 {
            return None;
        }
        let index = u32::try_from(lo / width).ok()?;
        if index > self.max_index {
            return None;
        }
        if index == self.max_index {
            (hi == "INF").then_some(index)
        } else {
            (parse_plain_u64(hi)? == lo + width).then_some(index)
        }
    }
}

/// Decimal digits without sign or leading zeros (except "0" itself).
fn parse_plain_u64(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return None;
    }
    s.parse().ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AmountBucket {
    pub index: u32,
    pub width_cents: u64,
    pub max_index: u32,
}

impl AmountBucket {
    pub fn config(&self) -> BucketConfig {
        BucketConfig {
            width_cents: self.width_cents,
            max_index: self.max_index,
        }
    }

    pub fn token(&self) -> String {
        self.config().token(self.index)
    }
}

/// `index = min(floor(amount / width), max_index)`. Direction is not encoded.
pub fn bucket_amount(amount_cents: i64, width_cents: i64, max_index: u32) -> Result<AmountBucket> {
    if amount_cents <= 0 {
        return Err(Error::input(format!("amount must be positive, got {amount_cents}")));
    }
    if width_cents <= 0 {
        return Err(Error::input(format!("bucket width must be positive, got {width_cents}")));
    }
    let index = (amount_cents / width_cents).min(max_index as i64) as u32;
    Ok(AmountBucket {
        index,
        width_cents: width_cents as u64,
        max_index,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub direction: Direction,
    pub amount_bucket: AmountBucket,
    pub description: String,
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{TYPE_MARKER} {} {AMT_MARKER} {} {NAME_MARKER} {}",
            self.direction,
            self.amount_bucket.token(),
            self.description
        )
    }
}

impl Sentence {
    pub fn render(&self) -> String {
        self.to_string()
    }
}

fn remove_markers(text: &str) -> String {
    let mut out = text.to_string();
    loop {
        let mut changed = false;
        for marker in RESERVED_MARKERS {
            // Case-insensitive: "[sep]" would survive lowercasing otherwise.
            while let Some(pos) = out.to_ascii_uppercase().find(marker) {
                out.replace_range(pos..pos + marker.len(), "");
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Description normalization: drop reserved markers, lowercase, collapse
/// whitespace, trim. Empty results become `EMPTY_DESC`.
pub fn normalize_description(raw: &str) -> String {
    let cleaned = remove_markers(raw).to_lowercase();
    let joined = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    if joined.is_empty() {
        EMPTY_DESC.to_string()
    } else {
        joined
    }
}

pub fn serialize_transaction(t: &Transaction, buckets: &BucketConfig) -> Result<Sentence> {
    let amount = i64::try_from(t.amount_cents)
        .map_err(|_| Error::input(format!("amount {} out of range", t.amount_cents)))?;
    Ok(Sentence {
        direction: t.dir,
        amount_bucket: bucket_amount(amount, buckets.width_cents as i64, buckets.max_index)?,
        description: normalize_description(&t.desc),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub account_id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn render(&self) -> String {
        self.sentences
            .iter()
            .map(Sentence::render)
            .collect::<Vec<_>>()
            .join(SENTENCE_SEPARATOR)
    }
}

/// Sentences in ascending timestamp order (stable for equal timestamps).
pub fn serialize_document(
    account_id: &str,
    transactions: &[Transaction],
    buckets: &BucketConfig,
) -> Result<Document> {
    if transactions.is_empty() {
        return Err(Error::input(format!("account {account_id} has no transactions")));
    }
    let mut ordered: Vec<&Transaction> = transactions.iter().collect();
    ordered.sort_by_key(|t| t.ts);
    Ok(Document {
        account_id: account_id.to_string(),
        sentences: ordered
            .into_iter()
            .map(|t| serialize_transaction(t, buckets))
            .collect::<Result<_>>()?,
    })
}

fn malformed(position: usize, reason: impl Into<String>) -> Error {
    Error::MalformedSentence {
        position,
        reason: reason.into(),
    }
}

fn parse_sentence_at(text: &str, buckets: &BucketConfig, position: usize) -> Result<Sentence> {
    let rest = text
        .strip_prefix("[TYPE] ")
        .ok_or_else(|| malformed(position, "expected leading `[TYPE] `"))?;
    let (dir, rest) = rest
        .split_once(" [AMT] ")
        .ok_or_else(|| malformed(position, "missing `[AMT]` marker"))?;
    let direction = match dir {
        "DEBIT" => Direction::Debit,
        "CREDIT" => Direction::Credit,
        other => return Err(malformed(position, format!("unknown direction `{other}`"))),
    };
    let (bucket, desc) = rest
        .split_once(" [NAME] ")
        .ok_or_else(|| malformed(position, "missing `[NAME]` marker"))?;
    let index = buckets
        .parse_token(bucket)
        .ok_or_else(|| malformed(position, format!("bad amount bucket `{bucket}`")))?;
    if desc.is_empty() {
        return Err(malformed(position, "empty description"));
    }
    if RESERVED_MARKERS.iter().any(|m| desc.contains(m)) {
        return Err(malformed(position, "description contains a reserved marker"));
    }
    if desc != desc.split_whitespace().collect::<Vec<_>>().join(" ") {
        return Err(malformed(position, "description is not whitespace-normalized"));
    }
    Ok(Sentence {
        direction,
        amount_bucket: AmountBucket {
            index,
            width_cents: buckets.width_cents,
            max_index: buckets.max_index,
        },
        description: desc.to_string(),
    })
}

/// Strict inverse of [`Sentence::render`].
pub fn parse_sentence(text: &str, buckets: &BucketConfig) -> Result<Sentence> {
    parse_sentence_at(text, buckets, 0)
}

/// Splits on ` [SEP] ` and parses every sentence; errors carry the sentence position.
pub fn parse_document(account_id: &str, text: &str, buckets: &BucketConfig) -> Result<Document> {
    let sentences = text
        .split(SENTENCE_SEPARATOR)
        .enumerate()
        .map(|(i, s)| parse_sentence_at(s, buckets, i))
        .collect::<Result<_>>()?;
    Ok(Document {
        account_id: account_id.to_string(),
        sentences,
    })
}
