//! Standard scaling with training-split statistics.

use crate::{Error, Result};

/// Per-dimension training mean and population std.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::input("standard scaling needs at least two training rows"));
        }
        let d = train[0].len();
        if let Some(bad) = train.iter().find(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for r in train {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in train {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// Zero-variance dimensions map to 0.
    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.mean.len() {
                    return Err(Error::ShapeMismatch {
                        expected: self.mean.len(),
                        actual: r.len(),
                    });
                }
                Ok(r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
                    .collect())
            })
            .collect()
    }
}

/// Scales both splits with statistics of `train` alone.
pub fn standard_scale(train: &[Vec<f64>], eval: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let s = Scaler::fit(train)?;
    Ok((s.transform(train)?, s.transform(eval)?))
}
