//! Linear-probe benchmark: per method and task, standard-scale embeddings
//! with training-split statistics, fit logistic regression on the training
//! split, and score the held-out split.

pub mod logreg;
pub mod metrics;
pub mod scale;
pub mod table;
pub mod tasks;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use logreg::{fit_logreg, LogReg, LogRegConfig};
pub use metrics::{accuracy, evaluate, f1_macro, pr_auc, roc_auc, roc_auc_ovr, score_probabilities};
pub use scale::{standard_scale, Scaler};
pub use table::{rank_distribution, ScoreEntry, ScoreTable};
pub use tasks::{all_tasks, find_task, Metric, TaskGroup, TaskKind, TaskSpec, Undersample};

use crate::baselines::{coles_embed_accounts, feat_eng, ColesModel};
use crate::encoder::{cls_embedding, Params};
use crate::pretrain::{provenance_comment, write_text, TokenizedCorpus};
use crate::synthgen::{Account, LabelTable, Provenance};
use crate::tokenizer::Vocabulary;
use crate::util::{rng_for, unit_hash};
use crate::{Error, Result};

const SPLIT_SALT: &str = "probe-split";
const TAG_UNDERSAMPLE: u64 = 0x05DE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Share of accounts, by id hash, in the training split.
    pub train_frac: f64,
    pub logreg: LogRegConfig,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            logreg: LogRegConfig::default(),
            seed: 0,
        }
    }
}

/// Split membership depends only on the account id.
pub fn is_train(account_id: &str, train_frac: f64) -> bool {
    unit_hash(account_id, SPLIT_SALT) < train_frac
}

/// `(train, eval)` indices into `account_ids`.
pub fn split_indices(account_ids: &[String], train_frac: f64) -> (Vec<usize>, Vec<usize>) {
    (0..account_ids.len()).partition(|&i| is_train(&account_ids[i], train_frac))
}

/// Keeps every rare row and at most `ratio` times as many other rows, drawn
/// without replacement. Returns sorted positions into `labels`.
pub fn undersample(labels: &[u32], rare_label: u32, ratio: usize, seed: u64) -> Result<Vec<usize>> {
    let (rare, common): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == rare_label);
    if rare.is_empty() {
        return Err(Error::input("undersampling needs at least one rare-class row"));
    }
    let keep = (rare.len() * ratio).min(common.len());
    let mut rng = rng_for(seed, &[TAG_UNDERSAMPLE]);
    let mut out = rare;
    out.extend(sample(&mut rng, common.len(), keep).into_iter().map(|k| common[k]));
    out.sort_unstable();
    Ok(out)
}

/// A fitted probe and its held-out scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOutcome {
    pub scaler: Scaler,
    pub model: LogReg,
    pub scores: BTreeMap<Metric, f64>,
    pub n_train: usize,
    pub n_eval: usize,
}

/// Probes one task. Scaler, undersampling and fit see only `train` rows.
pub fn probe_task(
    embeddings: &[Vec<f64>],
    labels: &[u32],
    train: &[usize],
    eval: &[usize],
    spec: &TaskSpec,
    metrics: &[Metric],
    cfg: &ProbeConfig,
) -> Result<ProbeOutcome> {
    let mut train: Vec<usize> = train.to_vec();
    if let Some(u) = &spec.undersample {
        let train_labels: Vec<u32> = train.iter().map(|&i| labels[i]).collect();
        let keep = undersample(&train_labels, u.rare_label, u.ratio, cfg.seed)?;
        train = keep.into_iter().map(|k| train[k]).collect();
    }
    let rows = |idx: &[usize]| idx.iter().map(|&i| embeddings[i].clone()).collect::<Vec<_>>();
    let ys = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<u32>>();
    let scaler = Scaler::fit(&rows(&train))?;
    let x_train = scaler.transform(&rows(&train))?;
    let x_eval = scaler.transform(&rows(eval))?;
    let model = fit_logreg(&x_train, &ys(&train), spec.n_classes, &cfg.logreg)?;
    let scores = evaluate(&model, &x_eval, &ys(eval), spec.kind, metrics)?;
    Ok(ProbeOutcome {
        scaler,
        model,
        scores,
        n_train: train.len(),
        n_eval: eval.len(),
    })
}

/// Where account vectors come from.
pub enum Embedder<'a> {
    /// `[CLS]` vector of the final encoder layer.
    Encoder { params: &'a Params<f32>, vocab: &'a Vocabulary },
    Coles(&'a ColesModel),
    FeatEng,
}

/// One vector per account, constant dimension per embedder.
pub fn extract_embeddings(embedder: &Embedder<'_>, accounts: &[Account]) -> Result<Vec<Vec<f64>>> {
    let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
    match embedder {
        Embedder::Encoder { params, vocab } => {
            let corpus = TokenizedCorpus::build(accounts, vocab, params.config.max_context, vocab.buckets())?;
            corpus.sequences.par_iter().map(|s| cls_embedding(params, s).map(widen)).collect()
        }
        Embedder::Coles(model) => Ok(coles_embed_accounts(accounts, model)?.into_iter().map(widen).collect()),
        Embedder::FeatEng => accounts.par_iter().map(|a| feat_eng(&a.transactions)).collect(),
    }
}

/// Per-task label vectors aligned with `account_ids`.
pub fn task_labels(account_ids: &[String], labels: &LabelTable, spec: &TaskSpec) -> Result<Vec<u32>> {
    account_ids
        .iter()
        .map(|id| {
            labels
                .get(id)
                .and_then(|row| row.get(spec.id()))
                .copied()
                .ok_or_else(|| Error::input(format!("no `{}` label for account `{id}`", spec.id())))
        })
        .collect()
}

/// Probes every (method, task) pair and returns a finalized table. Pairs
/// whose split lacks a needed class are skipped with a warning.
pub fn run_probes(
    methods: &[(String, Vec<Vec<f64>>)],
    account_ids: &[String],
    label_table: &LabelTable,
    tasks: &[TaskSpec],
    cfg: &ProbeConfig,
) -> Result<ScoreTable> {
    let (train, eval) = split_indices(account_ids, cfg.train_frac);
    let labels: Vec<Vec<u32>> = tasks.iter().map(|t| task_labels(account_ids, label_table, t)).collect::<Result<_>>()?;
    for (name, emb) in methods {
        if emb.len() != account_ids.len() {
            return Err(Error::input(format!("method `{name}` has {} vectors for {} accounts", emb.len(), account_ids.len())));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..methods.len()).flat_map(|m| (0..tasks.len()).map(move |t| (m, t))).collect();
    let results: Vec<Option<(usize, usize, BTreeMap<Metric, f64>)>> = jobs
        .par_iter()
        .map(|&(m, t)| {
            let spec = &tasks[t];
            match probe_task(&methods[m].1, &labels[t], &train, &eval, spec, &spec.metrics, cfg) {
                Ok(o) => Some((m, t, o.scores)),
                Err(e) => {
                    log::warn!("skipping {} on {}: {e}", methods[m].0, spec.id());
                    None
                }
            }
        })
        .collect();
    let mut table = ScoreTable {
        split: format!("account-id hash, train_frac={}", cfg.train_frac),
        seeds: vec![cfg.seed],
        ..Default::default()
    };
    for (m, t, scores) in results.into_iter().flatten() {
        for (metric, v) in scores {
            table.push(&methods[m].0, tasks[t].id(), metric, v);
        }
    }
    table.finalize();
    Ok(table)
}

/// Probes an encoder snapshot on `tasks` with each task's own metrics.
/// Used for learning curves during pretraining.
pub fn probe_snapshot(
    params: &Params<f32>,
    vocab: &Vocabulary,
    accounts: &[Account],
    label_table: &LabelTable,
    tasks: &[TaskSpec],
    cfg: &ProbeConfig,
) -> Result<Vec<(String, Metric, f64)>> {
    let emb = extract_embeddings(&Embedder::Encoder { params, vocab }, accounts)?;
    let ids: Vec<String> = accounts.iter().map(|a| a.account_id.clone()).collect();
    let (train, eval) = split_indices(&ids, cfg.train_frac);
    let mut out = Vec::new();
    for spec in tasks {
        let labels = task_labels(&ids, label_table, spec)?;
        let o = probe_task(&emb, &labels, &train, &eval, spec, &spec.metrics, cfg)?;
        out.extend(o.scores.into_iter().map(|(m, v)| (spec.id().to_string(), m, v)));
    }
    Ok(out)
}

/// Writes `account_id,e0,..,e{d-1}` rows after a provenance comment.
/// Values use the shortest representation that parses back exactly.
pub fn write_embeddings(path: &Path, account_ids: &[String], vectors: &[Vec<f64>], provenance: Option<&Provenance>) -> Result<()> {
    let d = vectors.first().map_or(0, Vec::len);
    let mut s = provenance_comment(provenance);
    s.push_str("account_id");
    for j in 0..d {
        s.push_str(&format!(",e{j}"));
    }
    s.push('\n');
    for (id, v) in account_ids.iter().zip(vectors) {
        if v.len() != d {
            return Err(Error::ShapeMismatch { expected: d, actual: v.len() });
        }
        s.push_str(id);
        for x in v {
            s.push_str(&format!(",{x}"));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::CorruptFile { path: path.to_path_buf(), reason };
    let mut ids = Vec::new();
    let mut vectors = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("account_id") && !l.is_empty()) {
        let mut fields = line.split(',');
        ids.push(fields.next().unwrap_or_default().to_string());
        let v = fields
            .map(|f| f.parse::<f64>().map_err(|_| corrupt(format!("bad value `{f}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if vectors.first().is_some_and(|f: &Vec<f64>| f.len() != v.len()) {
            return Err(corrupt("rows differ in dimension".into()));
        }
        vectors.push(v);
    }
    Ok((ids, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undersample_ratio_and_cap() {
        let mut labels = vec![1u32; 10];
        labels.extend(vec![0; 1000]);
        let keep = undersample(&labels, 1, 4, 0).unwrap();
        assert_eq!(keep.len(), 50);
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 1).count(), 10);
        assert_eq!(keep, undersample(&labels, 1, 4, 0).unwrap());

        let mut small = vec![1u32; 10];
        small.extend(vec![0; 20]);
        assert_eq!(undersample(&small, 1, 4, 0).unwrap().len(), 30);
        assert!(undersample(&[0, 0], 1, 4, 0).is_err());
    }

    #[test]
    fn embeddings_file_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let ids = vec!["a".to_string(), "b".to_string()];
        let v = vec![vec![0.1, -1e-300, 1.0 / 3.0], vec![f64::MAX, 0.0, -2.5]];
        write_embeddings(&p, &ids, &v, None).unwrap();
        assert_eq!(read_embeddings(&p).unwrap(), (ids, v));
    }

    #[test]
    fn split_is_stable_and_near_target() {
        let ids: Vec<String> = (0..5000).map(|i| format!("acct{i:06}")).collect();
        let (a, b) = split_indices(&ids, 0.8);
        assert_eq!((a.clone(), b), split_indices(&ids, 0.8));
        let frac = a.len() as f64 / ids.len() as f64;
        assert!((frac - 0.8).abs() < 0.03, "{frac}");
    }
}
