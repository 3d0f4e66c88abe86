//! Masked-language-model pretraining and distillation of the encoder.
//!
//! All randomness is derived statelessly from `(seed, step, batch slot)`, so a
//! run resumed from a checkpoint continues bit-identically.

mod adam;
mod masking;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use masking::{apply_masking, is_maskable, MaskedSequence, MaskingConfig};

use crate::encoder::{
    accumulate_gradients, forward, load_encoder, save_encoder, DistillWeights, LossSpec, ModelConfig, Params,
};
use crate::grammar::{serialize_document, BucketConfig};
use crate::synthgen::{Account, Provenance};
use crate::tokenizer::{encode, TokenSequence, Vocabulary};
use crate::util::{rng_for, unit_hash};
use crate::{Error, Result};

const TAG_EPOCH: u64 = 0xE9;
const TAG_MASK: u64 = 0x3A5;
const TAG_DROPOUT: u64 = 0xD0;
const TAG_EVAL: u64 = 0xE7A1;
pub const HELDOUT_SALT: &str = "mlm-heldout";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub batch_size: usize,
    pub total_steps: u64,
    pub seed: u64,
    /// Steps between probe/checkpoint ticks.
    pub probe_cadence: u64,
    pub heldout_frac: f64,
    /// Cap on held-out sequences used for loss evaluation (0 = all).
    pub eval_max_sequences: usize,
    pub adam: AdamConfig,
    pub masking: MaskingConfig,
    pub distill: DistillWeights,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            total_steps: 10_000,
            seed: 0,
            probe_cadence: 500,
            heldout_frac: 0.05,
            eval_max_sequences: 0,
            adam: AdamConfig::default(),
            masking: MaskingConfig::default(),
            distill: DistillWeights::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_steps == 0 || self.probe_cadence == 0 {
            return Err(Error::config("batch_size, total_steps and probe_cadence must be positive"));
        }
        if !(0.0..1.0).contains(&self.heldout_frac) {
            return Err(Error::config("heldout_frac must be in [0, 1)"));
        }
        self.adam.validate()?;
        self.masking.validate()
    }
}

/// Encoded documents in corpus order.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenizedCorpus {
    pub account_ids: Vec<String>,
    pub sequences: Vec<TokenSequence>,
}

impl TokenizedCorpus {
    pub fn build(accounts: &[Account], vocab: &Vocabulary, max_context: usize, buckets: &BucketConfig) -> Result<Self> {
        let sequences = accounts
            .par_iter()
            .map(|a| {
                let doc = serialize_document(&a.account_id, &a.transactions, buckets)?;
                Ok(encode(&doc.render(), vocab, max_context))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            account_ids: accounts.iter().map(|a| a.account_id.clone()).collect(),
            sequences,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// `(train, heldout)` indices; membership depends only on the account id.
    pub fn split(&self, heldout_frac: f64) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| unit_hash(&self.account_ids[i], HELDOUT_SALT) >= heldout_frac)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub step: u64,
    pub task: String,
    pub metric: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: Params<f32>,
    pub adam: Adam<f32>,
    /// Completed optimizer steps.
    pub step: u64,
    pub seed: u64,
    pub loss_history: Vec<StepLog>,
}

impl TrainState {
    pub fn new(params: Params<f32>, cfg: &PretrainConfig) -> Self {
        Self {
            adam: Adam::new(params.values.len(), &cfg.adam),
            params,
            step: 0,
            seed: cfg.seed,
            loss_history: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path, lineage: Vec<String>, provenance: Option<&Provenance>) -> Result<()> {
        let extra = serde_json::json!({
            "adam_t": self.adam.t,
            "loss_history": self.loss_history,
        });
        save_encoder(
            path,
            &self.params,
            Some((self.adam.m.clone(), self.adam.v.clone())),
            self.step,
            self.seed,
            lineage,
            provenance,
            extra,
        )
    }

    pub fn load(path: &Path, adam: &AdamConfig) -> Result<Self> {
        let (params, ck) = load_encoder(path)?;
        let (m, v) = ck.moments.ok_or_else(|| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: "checkpoint has no optimizer state".into(),
        })?;
        let extra = &ck.header.extra;
        let loss_history = serde_json::from_value(extra.get("loss_history").cloned().unwrap_or_default())
            .unwrap_or_default();
        Ok(Self {
            adam: Adam {
                m,
                v,
                t: extra.get("adam_t").and_then(|t| t.as_u64()).unwrap_or(ck.header.step),
                beta1: adam.beta1,
                beta2: adam.beta2,
                eps: adam.eps,
            },
            params,
            step: ck.header.step,
            seed: ck.header.seed,
            loss_history,
        })
    }
}

/// What the student is fitted to.
#[derive(Clone, Copy)]
pub enum Objective<'a> {
    Mlm,
    Distill {
        teacher: &'a Params<f32>,
        weights: DistillWeights,
    },
}

/// Training-set indices of batch `step`: consecutive slices of a fresh
/// permutation per epoch.
pub fn batch_indices(train: &[usize], seed: u64, step: u64, batch_size: usize) -> Vec<usize> {
    let n = train.len() as u64;
    let mut cached: Option<(u64, Vec<usize>)> = None;
    (0..batch_size as u64)
        .map(|b| {
            let g = step * batch_size as u64 + b;
            let epoch = g / n;
            if cached.as_ref().map(|c| c.0) != Some(epoch) {
                let mut perm = train.to_vec();
                perm.shuffle(&mut rng_for(seed, &[TAG_EPOCH, epoch]));
                cached = Some((epoch, perm));
            }
            cached.as_ref().expect("filled above").1[(g % n) as usize]
        })
        .collect()
}

/// One optimizer step. Returns the batch loss, or `None` if no position was masked.
pub fn train_step(
    corpus: &TokenizedCorpus,
    train: &[usize],
    state: &mut TrainState,
    cfg: &PretrainConfig,
    objective: Objective<'_>,
) -> Result<Option<f64>> {
    let step = state.step;
    let vocab = state.params.config.vocab_size;
    let batch = batch_indices(train, cfg.seed, step, cfg.batch_size);
    let masked: Vec<MaskedSequence> = batch
        .iter()
        .enumerate()
        .map(|(b, &i)| {
            apply_masking(
                &corpus.sequences[i],
                &cfg.masking,
                vocab,
                &mut rng_for(cfg.seed, &[TAG_MASK, step, b as u64]),
            )
        })
        .collect();
    let total: usize = masked.iter().map(|m| m.targets.len()).sum();
    let lr = cfg.adam.lr_at(step, cfg.total_steps);
    if total == 0 {
        state.step += 1;
        return Ok(None);
    }
    let params = &state.params;
    let per_seq: Vec<(f64, f64, Vec<f32>)> = masked
        .par_iter()
        .enumerate()
        .filter(|(_, m)| !m.targets.is_empty())
        .map(|(b, m)| {
            let weight = m.targets.len() as f64 / total as f64;
            let mut grads = vec![0f32; params.values.len()];
            let mut drop_rng = rng_for(cfg.seed, &[TAG_DROPOUT, step, b as u64]);
            let teacher_logits;
            let spec = match objective {
                Objective::Mlm => LossSpec::Mlm {
                    positions: &m.positions,
                    targets: &m.targets,
                },
                Objective::Distill { teacher, weights } => {
                    teacher_logits = forward(teacher, &m.corrupted, &m.positions)?.mlm_logits;
                    LossSpec::Distill {
                        positions: &m.positions,
                        targets: &m.targets,
                        teacher_logits: &teacher_logits,
                        weights,
                    }
                }
            };
            let loss = accumulate_gradients(params, &m.corrupted, spec, weight, Some(&mut drop_rng), &mut grads)?;
            Ok((loss, weight, grads))
        })
        .collect::<Result<_>>()?;
    // Fixed-order reduction keeps the update independent of thread count.
    let mut grads = vec![0f32; state.params.values.len()];
    let mut loss = 0.0;
    for (l, w, g) in &per_seq {
        loss += l * w;
        for (a, b) in grads.iter_mut().zip(g) {
            *a += *b;
        }
    }
    state.adam.step(&mut state.params.values, &grads, lr)?;
    state.step += 1;
    state.loss_history.push(StepLog { step: state.step, loss, lr });
    Ok(Some(loss))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    /// Mean cross-entropy over all masked held-out positions.
    pub loss: f64,
    pub top1: f64,
    /// Accuracy of always predicting the most frequent held-out target.
    pub majority_baseline: f64,
    pub n_targets: usize,
}

/// Held-out MLM evaluation with masks fixed by `seed`, identical across calls.
pub fn evaluate_heldout(
    params: &Params<f32>,
    corpus: &TokenizedCorpus,
    heldout: &[usize],
    masking: &MaskingConfig,
    seed: u64,
    max_sequences: usize,
) -> Result<EvalStats> {
    let take = if max_sequences == 0 { heldout.len() } else { max_sequences.min(heldout.len()) };
    let vsz = params.config.vocab_size;
    let rows: Vec<(f64, usize, Vec<u32>)> = heldout[..take]
        .par_iter()
        .map(|&i| {
            let m = apply_masking(&corpus.sequences[i], masking, vsz, &mut rng_for(seed, &[TAG_EVAL, i as u64]));
            if m.targets.is_empty() {
                return Ok((0.0, 0, m.targets));
            }
            let out = forward(params, &m.corrupted, &m.positions)?;
            let (loss, _) = crate::encoder::mlm_loss(&out.mlm_logits, vsz, &m.targets)?;
            let correct = out
                .mlm_logits
                .chunks(vsz)
                .zip(&m.targets)
                .filter(|(row, &t)| argmax(row) == t as usize)
                .count();
            Ok((loss * m.targets.len() as f64, correct, m.targets))
        })
        .collect::<Result<_>>()?;
    let n: usize = rows.iter().map(|r| r.2.len()).sum();
    if n == 0 {
        return Err(Error::input("held-out split produced no masked positions"));
    }
    let mut counts = std::collections::HashMap::new();
    for r in &rows {
        for &t in &r.2 {
            *counts.entry(t).or_insert(0usize) += 1;
        }
    }
    let majority = counts.values().copied().max().unwrap_or(0);
    Ok(EvalStats {
        loss: rows.iter().map(|r| r.0).sum::<f64>() / n as f64,
        top1: rows.iter().map(|r| r.1).sum::<usize>() as f64 / n as f64,
        majority_baseline: majority as f64 / n as f64,
        n_targets: n,
    })
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

pub type ProbeHook<'a> = dyn FnMut(u64, &Params<f32>) -> Result<Vec<ProbeRecord>> + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub initial: EvalStats,
    pub last: EvalStats,
    pub losses: Vec<StepLog>,
    pub probes: Vec<ProbeRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Where and how the loop persists its progress.
#[derive(Clone, Debug, Default)]
pub struct Persist<'a> {
    pub checkpoint_dir: Option<&'a Path>,
    pub lineage: Vec<String>,
    pub provenance: Option<&'a Provenance>,
}

/// Runs from `state.step` up to `until` (at most `cfg.total_steps`). At every
/// multiple of `probe_cadence` the probe hook sees a snapshot and a checkpoint
/// is written.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_loop(
    corpus: &TokenizedCorpus,
    state: &mut TrainState,
    cfg: &PretrainConfig,
    objective: Objective<'_>,
    until: u64,
    probe_hook: &mut ProbeHook<'_>,
    persist: &Persist<'_>,
) -> Result<PretrainReport> {
    cfg.validate()?;
    let (train, heldout) = corpus.split(cfg.heldout_frac);
    if train.is_empty() || heldout.is_empty() {
        return Err(Error::input("corpus too small for a train/held-out split"));
    }
    let until = until.min(cfg.total_steps);
    let initial = evaluate_heldout(&state.params, corpus, &heldout, &cfg.masking, cfg.seed, cfg.eval_max_sequences)?;
    let mut probes = Vec::new();
    let mut checkpoints = Vec::new();
    while state.step < until {
        train_step(corpus, &train, state, cfg, objective)?;
        if let Some(last) = state.loss_history.last() {
            if state.step % 100 == 0 {
                log::info!("step {} loss {:.4} lr {:.2e}", state.step, last.loss, last.lr);
            }
        }
        if state.step % cfg.probe_cadence == 0 {
            let snapshot = state.params.clone();
            probes.extend(probe_hook(state.step, &snapshot)?);
            if let Some(dir) = persist.checkpoint_dir {
                let path = dir.join(format!("step{:06}.ckpt", state.step));
                state.save(&path, persist.lineage.clone(), persist.provenance)?;
                checkpoints.push(path);
            }
        }
    }
    let last = evaluate_heldout(&state.params, corpus, &heldout, &cfg.masking, cfg.seed, cfg.eval_max_sequences)?;
    Ok(PretrainReport {
        initial,
        last,
        losses: state.loss_history.clone(),
        probes,
        checkpoints,
    })
}

/// Fresh model for `vocab`, sized by `model` with the vocabulary size filled in.
pub fn fresh_state(model: &ModelConfig, vocab: &Vocabulary, cfg: &PretrainConfig) -> Result<TrainState> {
    let mc = ModelConfig {
        vocab_size: vocab.len(),
        ..model.clone()
    };
    mc.validate()?;
    Ok(TrainState::new(crate::encoder::init_params(&mc, cfg.seed), cfg))
}

pub(crate) fn provenance_comment(provenance: Option<&Provenance>) -> String {
    provenance.map_or(String::new(), |p| format!("# config_hash={} seed={}\n", p.config_hash, p.seed))
}

pub fn write_loss_csv(path: &Path, losses: &[StepLog], provenance: Option<&Provenance>) -> Result<()> {
    let mut s = provenance_comment(provenance);
    s.push_str("step,loss,lr\n");
    for l in losses {
        s.push_str(&format!("{},{:.6},{:.6e}\n", l.step, l.loss, l.lr));
    }
    write_text(path, &s)
}

pub fn write_probe_csv(path: &Path, probes: &[ProbeRecord], provenance: Option<&Provenance>) -> Result<()> {
    let mut s = provenance_comment(provenance);
    s.push_str("step,task,metric,score\n");
    for p in probes {
        s.push_str(&format!("{},{},{},{:.6}\n", p.step, p.task, p.metric, p.score));
    }
    write_text(path, &s)
}

pub fn read_probe_csv(path: &Path) -> Result<Vec<ProbeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::CorruptFile {
        path: path.to_path_buf(),
        reason,
    };
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step,") && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(corrupt(format!("bad probe row `{l}`")));
            }
            Ok(ProbeRecord {
                step: f[0].parse().map_err(|_| corrupt(format!("bad step in `{l}`")))?,
                task: f[1].to_string(),
                metric: f[2].to_string(),
                score: f[3].parse().map_err(|_| corrupt(format!("bad score in `{l}`")))?,
            })
        })
        .collect()
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
