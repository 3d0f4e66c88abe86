use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::tokenizer::{TokenSequence, AMT_ID, CLS_ID, DEBIT_ID, MASK_ID, NAME_ID, PAD_ID, SEP_ID, TYPE_ID, UNK_ID};
use crate::util::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingConfig {
    pub mask_prob: f64,
    pub replace_mask_frac: f64,
    pub replace_random_frac: f64,
    pub keep_frac: f64,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            mask_prob: 0.15,
            replace_mask_frac: 0.8,
            replace_random_frac: 0.1,
            keep_frac: 0.1,
        }
    }
}

impl MaskingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_prob > 0.0 && self.mask_prob < 1.0) {
            return Err(Error::config("mask_prob must be in (0, 1)"));
        }
        let fr = [self.replace_mask_frac, self.replace_random_frac, self.keep_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::config("masking fractions must be in [0, 1]"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("masking fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Direction tokens, amount buckets and description pieces can be masked.
/// Structural markers and `[UNK]` (which has no recoverable identity) cannot.
pub fn is_maskable(id: u32) -> bool {
    !matches!(id, PAD_ID | UNK_ID | CLS_ID | SEP_ID | MASK_ID | TYPE_ID | AMT_ID | NAME_ID)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedSequence {
    pub corrupted: TokenSequence,
    pub positions: Vec<usize>,
    pub targets: Vec<u32>,
}

/// BERT-style corruption. Random replacements are drawn uniformly from the
/// maskable id range `DEBIT_ID..vocab_size`.
pub fn apply_masking(seq: &TokenSequence, cfg: &MaskingConfig, vocab_size: usize, rng: &mut Rng) -> MaskedSequence {
    let mut corrupted = seq.clone();
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    let n = seq.n_real();
    for i in 0..n {
        let id = seq.ids[i];
        if !is_maskable(id) || rng.gen::<f64>() >= cfg.mask_prob {
            continue;
        }
        positions.push(i);
        targets.push(id);
        let u = rng.gen::<f64>();
        if u < cfg.replace_mask_frac {
            corrupted.ids[i] = MASK_ID;
        } else if u < cfg.replace_mask_frac + cfg.replace_random_frac {
            corrupted.ids[i] = rng.gen_range(DEBIT_ID..vocab_size as u32);
        }
    }
    MaskedSequence {
        corrupted,
        positions,
        targets,
    }
}
