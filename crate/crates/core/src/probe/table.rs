//! Cross-method score aggregation: min-max normalization and ranks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tasks::Metric;
use crate::pretrain::{provenance_comment, write_text};
use crate::synthgen::{Provenance, TaskId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub method: String,
    pub task: String,
    pub metric: Metric,
    pub raw: f64,
    /// Filled by [`ScoreTable::finalize`].
    pub normalized: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub entries: Vec<ScoreEntry>,
    pub split: String,
    pub seeds: Vec<u64>,
}

fn task_position(task: &str) -> usize {
    TaskId::ALL.iter().position(|t| t.as_str() == task).unwrap_or(usize::MAX)
}

impl ScoreTable {
    pub fn push(&mut self, method: &str, task: &str, metric: Metric, raw: f64) {
        self.entries.push(ScoreEntry {
            method: method.into(),
            task: task.into(),
            metric,
            raw,
            normalized: f64::NAN,
            rank: 0,
        });
    }

    /// Sorts into reporting order and fills normalized scores and ranks.
    /// Per (task, metric): `(x - min) / (max - min)`, all-equal groups map to
    /// 1.0, and ranks are competition ranks on raw score (ties share the
    /// better rank).
    pub fn finalize(&mut self) {
        self.entries.sort_by(|a, b| {
            (task_position(&a.task), &a.task, a.metric, &a.method).cmp(&(task_position(&b.task), &b.task, b.metric, &b.method))
        });
        let mut start = 0;
        while start < self.entries.len() {
            let key = (self.entries[start].task.clone(), self.entries[start].metric);
            let end = start + self.entries[start..].iter().take_while(|e| (e.task.clone(), e.metric) == key).count();
            let group = &mut self.entries[start..end];
            let raws: Vec<f64> = group.iter().map(|e| e.raw).collect();
            let lo = raws.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for e in group.iter_mut() {
                e.normalized = if hi > lo { (e.raw - lo) / (hi - lo) } else { 1.0 };
                e.rank = 1 + raws.iter().filter(|&&r| r > e.raw).count();
            }
            start = end;
        }
    }

    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.entries.iter().map(|e| e.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Distinct (task, metric) pairs in reporting order.
    pub fn pairs(&self) -> Vec<(String, Metric)> {
        let mut out: Vec<(String, Metric)> = Vec::new();
        for e in &self.entries {
            if !out.iter().any(|(t, m)| *t == e.task && *m == e.metric) {
                out.push((e.task.clone(), e.metric));
            }
        }
        out
    }

    pub fn get(&self, method: &str, task: &str, metric: Metric) -> Option<&ScoreEntry> {
        self.entries.iter().find(|e| e.method == method && e.task == task && e.metric == metric)
    }

    pub fn write_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut s = provenance_comment(provenance);
        s.push_str("method,task,metric,raw,normalized,rank\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{:.6},{:.6},{}\n", e.method, e.task, e.metric, e.raw, e.normalized, e.rank));
        }
        write_text(path, &s)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |reason: String| Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut table = ScoreTable::default();
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("method,") && !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(corrupt(format!("bad score row `{line}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| corrupt(format!("bad number in `{line}`")));
            table.entries.push(ScoreEntry {
                method: f[0].into(),
                task: f[1].into(),
                metric: Metric::parse(f[2]).map_err(|_| corrupt(format!("bad metric in `{line}`")))?,
                raw: num(f[3])?,
                normalized: num(f[4])?,
                rank: f[5].parse().map_err(|_| corrupt(format!("bad rank in `{line}`")))?,
            });
        }
        Ok(table)
    }
}

/// Per method, how many (task, metric) pairs placed it at rank `r` (index `r - 1`).
pub fn rank_distribution(table: &ScoreTable) -> BTreeMap<String, Vec<usize>> {
    let methods = table.methods();
    let mut hist: BTreeMap<String, Vec<usize>> = methods.iter().map(|m| (m.clone(), vec![0; methods.len()])).collect();
    for e in &table.entries {
        if let Some(h) = hist.get_mut(&e.method) {
            if (1..=h.len()).contains(&e.rank) {
                h[e.rank - 1] += 1;
            }
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(raws: &[(&str, f64)]) -> ScoreTable {
        let mut t = ScoreTable::default();
        for (m, r) in raws {
            t.push(m, "gender", Metric::Accuracy, *r);
        }
        t.finalize();
        t
    }

    #[test]
    fn min_max_affine_map() {
        let t = table(&[("a", 0.9), ("b", 0.7), ("c", 0.5), ("d", 0.5)]);
        for (e, want) in t.entries.iter().zip([1.0, 0.5, 0.0, 0.0]) {
            assert!((e.normalized - want).abs() < 1e-12, "{} {}", e.method, e.normalized);
        }
        let ranks: Vec<usize> = t.entries.iter().map(|e| e.rank).collect();
        assert_eq!(ranks, vec![1, 2, 3, 3]);
    }

    #[test]
    fn all_equal_maps_to_one() {
        let t = table(&[("a", 0.8), ("b", 0.8)]);
        assert!(t.entries.iter().all(|e| e.normalized == 1.0 && e.rank == 1));
    }

    #[test]
    fn csv_round_trip() {
        let t = table(&[("a", 0.25), ("b", 0.75)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        t.write_csv(&p, None).unwrap();
        let back = ScoreTable::read_csv(&p).unwrap();
        assert_eq!(back.entries, t.entries);
    }
}
