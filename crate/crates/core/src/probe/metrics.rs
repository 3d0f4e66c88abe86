//! Classification metrics. Scores are higher-is-better throughout.

use std::collections::{BTreeMap, BTreeSet};

use super::logreg::{argmax, LogReg};
use super::tasks::{Metric, TaskKind};
use crate::{Error, Result};

fn undefined(metric: Metric, reason: impl Into<String>) -> Error {
    Error::MetricUndefined {
        metric: metric.as_str().into(),
        reason: reason.into(),
    }
}

pub fn accuracy(pred: &[u32], labels: &[u32]) -> Result<f64> {
    if pred.is_empty() || pred.len() != labels.len() {
        return Err(undefined(Metric::Accuracy, "empty or mismatched inputs"));
    }
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / pred.len() as f64)
}

/// 1-based ranks with ties sharing their average rank.
fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney form of ROC AUC: the probability that a random positive
/// outscores a random negative, ties counting one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || scores.len() != positive.len() {
        return Err(undefined(Metric::RocAuc, "labels with a single class"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Macro average of one-vs-rest ROC AUC over classes that have both
/// positives and negatives in `labels`.
pub fn roc_auc_ovr(proba: &[Vec<f64>], labels: &[u32]) -> Result<f64> {
    let n_classes = proba.first().map_or(0, Vec::len);
    let mut aucs = Vec::new();
    for c in 0..n_classes {
        let pos: Vec<bool> = labels.iter().map(|&l| l as usize == c).collect();
        if pos.iter().all(|&p| p) || !pos.iter().any(|&p| p) {
            continue;
        }
        let scores: Vec<f64> = proba.iter().map(|p| p[c]).collect();
        aucs.push(roc_auc(&scores, &pos)?);
    }
    if aucs.is_empty() {
        return Err(undefined(Metric::RocAuc, "labels with a single class"));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Average precision: `sum_k (R_k - R_{k-1}) P_k` over descending score
/// thresholds, with tied scores forming one threshold.
pub fn pr_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 || scores.len() != positive.len() {
        return Err(undefined(Metric::PrAuc, "labels without positives"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let new_tp = idx[i..=j].iter().filter(|&&k| positive[k]).count();
        tp += new_tp;
        seen += j - i + 1;
        ap += new_tp as f64 / n_pos as f64 * (tp as f64 / seen as f64);
        i = j + 1;
    }
    Ok(ap)
}

/// Unweighted mean of per-class F1 over classes seen in labels or predictions;
/// a class never predicted or never present scores 0.
pub fn f1_macro(pred: &[u32], labels: &[u32]) -> Result<f64> {
    if pred.is_empty() || pred.len() != labels.len() {
        return Err(undefined(Metric::F1Macro, "empty or mismatched inputs"));
    }
    let classes: BTreeSet<u32> = pred.iter().chain(labels).copied().collect();
    let mut total = 0.0;
    for &c in &classes {
        let tp = pred.iter().zip(labels).filter(|(&p, &l)| p == c && l == c).count() as f64;
        let fp = pred.iter().zip(labels).filter(|(&p, &l)| p == c && l != c).count() as f64;
        let fn_ = pred.iter().zip(labels).filter(|(&p, &l)| p != c && l == c).count() as f64;
        if tp > 0.0 {
            total += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    Ok(total / classes.len() as f64)
}

/// Scores from class probabilities. Binary tasks treat label 1 as positive.
pub fn score_probabilities(proba: &[Vec<f64>], labels: &[u32], kind: TaskKind, metrics: &[Metric]) -> Result<BTreeMap<Metric, f64>> {
    if proba.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: proba.len(),
            actual: labels.len(),
        });
    }
    let pred: Vec<u32> = proba.iter().map(|p| argmax(p) as u32).collect();
    let positive: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
    let p1: Vec<f64> = proba.iter().map(|p| p.get(1).copied().unwrap_or(0.0)).collect();
    let mut out = BTreeMap::new();
    for &m in metrics {
        if !m.valid_for(kind) {
            return Err(undefined(m, format!("{kind:?} tasks")));
        }
        let v = match (m, kind) {
            (Metric::Accuracy, _) => accuracy(&pred, labels)?,
            (Metric::F1Macro, _) => f1_macro(&pred, labels)?,
            (Metric::RocAuc, TaskKind::Binary) => roc_auc(&p1, &positive)?,
            (Metric::RocAuc, TaskKind::Multiclass) => roc_auc_ovr(proba, labels)?,
            (Metric::PrAuc, _) => pr_auc(&p1, &positive)?,
        };
        out.insert(m, v);
    }
    Ok(out)
}

pub fn evaluate(model: &LogReg, rows: &[Vec<f64>], labels: &[u32], kind: TaskKind, metrics: &[Metric]) -> Result<BTreeMap<Metric, f64>> {
    score_probabilities(&model.predict_proba(rows)?, labels, kind, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_roc_case() {
        // Positive-negative pairs: (.9,.8) (.9,.1) (.3,.8) (.3,.1) -> 3 of 4 ordered.
        let auc = roc_auc(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn roc_identity_and_inversion() {
        let pos = [true, false, true, true, false];
        let s: Vec<f64> = pos.iter().map(|&p| f64::from(p)).collect();
        assert_eq!(roc_auc(&s, &pos).unwrap(), 1.0);
        let inv: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(roc_auc(&inv, &pos).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 5], &pos).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn average_precision_hand_case() {
        // Ranked: + - + -  ->  P@1 = 1, P@3 = 2/3, AP = (1 + 2/3) / 2.
        let ap = pr_auc(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        // All tied: one threshold at the base rate.
        assert_eq!(pr_auc(&[0.5; 4], &[true, false, false, false]).unwrap(), 0.25);
    }

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        assert_eq!(accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(f1_macro(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn f1_counts_unpredicted_classes_as_zero() {
        // Class 0: tp 1, fp 1 -> 2/3. Class 1: never predicted -> 0.
        assert!((f1_macro(&[0, 0], &[0, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pr_auc_is_invalid_for_multiclass() {
        let p = vec![vec![0.2, 0.3, 0.5]];
        assert!(score_probabilities(&p, &[2], TaskKind::Multiclass, &[Metric::PrAuc]).is_err());
    }
}
