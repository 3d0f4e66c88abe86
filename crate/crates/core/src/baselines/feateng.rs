//! Handcrafted aggregation features: six statistics over signed dollar
//! amounts (credits positive, debits negative), overall and per direction.

use std::collections::BTreeMap;

use crate::synthgen::{Direction, Transaction};
use crate::{Error, Result};

const STATS: [&str; 6] = ["sum", "count", "mean", "min", "max", "std"];

/// Feature names in index order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = STATS.iter().map(|s| format!("overall_{s}")).collect();
    for group in ["debit", "credit"] {
        names.extend(STATS.iter().map(|s| format!("{group}_{s}")));
        names.push(format!("{group}_present"));
    }
    names
}

pub fn schema_len() -> usize {
    STATS.len() * 3 + 2
}

/// JSON-serializable name-to-index manifest.
pub fn schema_manifest() -> BTreeMap<String, usize> {
    feature_names().into_iter().enumerate().map(|(i, n)| (n, i)).collect()
}

/// `[sum, count, mean, min, max, population std]`; zeros for an empty group.
fn stats(xs: &[f64]) -> [f64; 6] {
    if xs.is_empty() {
        return [0.0; 6];
    }
    let n = xs.len() as f64;
    let sum: f64 = xs.iter().sum();
    let mean = sum / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [sum, n, mean, min, max, var.sqrt()]
}

/// Permutation-invariant aggregate vector of length [`schema_len`].
pub fn feat_eng(transactions: &[Transaction]) -> Result<Vec<f64>> {
    if transactions.is_empty() {
        return Err(Error::input("feat_eng needs at least one transaction"));
    }
    // Sorting makes the floating-point summation order independent of input order.
    let mut all: Vec<(Direction, f64)> = transactions.iter().map(|t| (t.dir, t.signed_dollars())).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1));
    let values: Vec<f64> = all.iter().map(|a| a.1).collect();
    let mut out = Vec::with_capacity(schema_len());
    out.extend(stats(&values));
    for dir in [Direction::Debit, Direction::Credit] {
        let group: Vec<f64> = all.iter().filter(|a| a.0 == dir).map(|a| a.1).collect();
        out.extend(stats(&group));
        out.push(if group.is_empty() { 0.0 } else { 1.0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(dir: Direction, cents: u64) -> Transaction {
        Transaction {
            ts: 0,
            dir,
            amount_cents: cents,
            desc: "x".into(),
        }
    }

    #[test]
    fn single_credit() {
        let f = feat_eng(&[tx(Direction::Credit, 1000)]).unwrap();
        assert_eq!(&f[..6], &[10.0, 1.0, 10.0, 10.0, 10.0, 0.0]);
        assert_eq!(&f[6..13], &[0.0; 7]);
        assert_eq!(&f[13..], &[10.0, 1.0, 10.0, 10.0, 10.0, 0.0, 1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let f = feat_eng(&[tx(Direction::Credit, 1000), tx(Direction::Debit, 1000)]).unwrap();
        assert_eq!(&f[..6], &[0.0, 2.0, 0.0, -10.0, 10.0, 10.0]);
    }

    #[test]
    fn schema_is_consistent() {
        assert_eq!(feature_names().len(), schema_len());
        assert_eq!(schema_manifest()["credit_present"], 19);
        assert!(feat_eng(&[]).is_err());
    }
}
