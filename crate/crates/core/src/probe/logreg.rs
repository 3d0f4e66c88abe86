//! L2-regularized logistic regression fitted by full-batch accelerated
//! gradient descent from a zero start.
//!
//! Objective: `mean_i CE(softmax(W^T x_i + b), y_i) + l2/2 * ||W||^2`, with a
//! single sigmoid output when there are two classes. The bias is not
//! penalized.

use serde::{Deserialize, Serialize};

use crate::encoder::scalar::{gemm, View, ViewMut};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2_strength: f64,
    pub max_iter: usize,
    /// Stop once the gradient 2-norm falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2_strength: 1e-4,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub n_features: usize,
    pub n_classes: usize,
    /// Row-major `n_features x n_outputs`; one output column when binary.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogReg {
    fn n_outputs(&self) -> usize {
        self.bias.len()
    }

    fn logits(&self, x: &[f64], n: usize) -> Vec<f64> {
        let k = self.n_outputs();
        let mut z: Vec<f64> = (0..n).flat_map(|_| self.bias.iter().copied()).collect();
        gemm(
            1.0,
            View::rm(x, n, self.n_features),
            View::rm(&self.weights, self.n_features, k),
            1.0,
            ViewMut::rm(&mut z, n, k),
        );
        z
    }

    /// Row-wise class probabilities (`n x n_classes`).
    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let x = flatten(rows, self.n_features)?;
        let z = self.logits(&x, rows.len());
        let k = self.n_outputs();
        Ok(z.chunks(k)
            .map(|r| {
                if k == 1 {
                    let p = sigmoid(r[0]);
                    vec![1.0 - p, p]
                } else {
                    softmax(r)
                }
            })
            .collect())
    }

    /// Most probable class; ties resolve to the lowest label.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<u32>> {
        Ok(self.predict_proba(rows)?.iter().map(|p| argmax(p) as u32).collect())
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn flatten(rows: &[Vec<f64>], d: usize) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(rows.len() * d);
    for r in rows {
        if r.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                actual: r.len(),
            });
        }
        x.extend_from_slice(r);
    }
    Ok(x)
}

/// Largest eigenvalue of `[X 1]^T [X 1] / n` by power iteration.
fn gram_spectral_bound(x: &[f64], n: usize, d: usize) -> f64 {
    let mut v = vec![1.0; d + 1];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        let mut w = vec![0.0; d + 1];
        for r in 0..n {
            let row = &x[r * d..(r + 1) * d];
            let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[d];
            for (wi, a) in w.iter_mut().zip(row) {
                *wi += s * a;
            }
            w[d] += s;
        }
        w.iter_mut().for_each(|a| *a /= n as f64);
        lambda = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = w;
    }
    lambda
}

/// Objective value and gradient at `(w, b)`.
fn objective(x: &[f64], y: &[u32], n: usize, d: usize, k: usize, w: &[f64], b: &[f64], l2: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let mut z: Vec<f64> = (0..n).flat_map(|_| b.iter().copied()).collect();
    gemm(1.0, View::rm(x, n, d), View::rm(w, d, k), 1.0, ViewMut::rm(&mut z, n, k));
    let mut loss = 0.0;
    for (r, &label) in z.chunks_mut(k).zip(y) {
        if k == 1 {
            let p = sigmoid(r[0]);
            let t = f64::from(label == 1);
            // Stable binary cross-entropy: softplus(z) - t z.
            loss += r[0].max(0.0) + (-r[0].abs()).exp().ln_1p() - t * r[0];
            r[0] = p - t;
        } else {
            let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + r.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - r[label as usize];
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
            }
            r[label as usize] -= 1.0;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    gemm(inv_n, View::rm(x, n, d).t(), View::rm(&z, n, k), 1.0, ViewMut::rm(&mut gw, d, k));
    let mut gb = vec![0.0; k];
    for r in z.chunks(k) {
        for (g, v) in gb.iter_mut().zip(r) {
            *g += v * inv_n;
        }
    }
    let reg = 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss * inv_n + reg, gw, gb)
}

/// Objective value of a fitted model on `(rows, labels)`.
pub fn logreg_objective(model: &LogReg, rows: &[Vec<f64>], labels: &[u32], l2: f64) -> Result<f64> {
    let x = flatten(rows, model.n_features)?;
    Ok(objective(&x, labels, rows.len(), model.n_features, model.n_outputs(), &model.weights, &model.bias, l2).0)
}

/// Fits on `rows` with labels in `0..n_classes`.
pub fn fit_logreg(rows: &[Vec<f64>], labels: &[u32], n_classes: usize, cfg: &LogRegConfig) -> Result<LogReg> {
    if rows.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: rows.len(),
            actual: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
        return Err(Error::input(format!("label {bad} outside 0..{n_classes}")));
    }
    let mut present = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::input("logistic regression needs at least two classes in the training labels"));
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let x = flatten(rows, d)?;
    let k = if n_classes == 2 { 1 } else { n_classes };
    let curvature = if k == 1 { 0.25 } else { 0.5 };
    // Power iteration approaches the top eigenvalue from below; the margin keeps 1/L safe.
    let lipschitz = 1.1 * curvature * gram_spectral_bound(&x, n, d) + cfg.l2_strength;
    let step = 1.0 / lipschitz;

    let mut w = vec![0.0; d * k];
    let mut b = vec![0.0; k];
    let (mut w_prev, mut b_prev) = (w.clone(), b.clone());
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let yw: Vec<f64> = w.iter().zip(&w_prev).map(|(a, p)| a + beta * (a - p)).collect();
        let yb: Vec<f64> = b.iter().zip(&b_prev).map(|(a, p)| a + beta * (a - p)).collect();
        let (_, gw, gb) = objective(&x, labels, n, d, k, &yw, &yb, cfg.l2_strength);
        let gnorm = gw.iter().chain(&gb).map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < cfg.tol {
            w = yw;
            b = yb;
            converged = true;
            break;
        }
        let nw: Vec<f64> = yw.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
        let nb: Vec<f64> = yb.iter().zip(&gb).map(|(a, g)| a - step * g).collect();
        // Gradient-based adaptive restart: drop momentum when it opposes descent.
        let uphill: f64 = gw.iter().zip(nw.iter().zip(&w)).map(|(g, (a, p))| g * (a - p)).sum::<f64>()
            + gb.iter().zip(nb.iter().zip(&b)).map(|(g, (a, p))| g * (a - p)).sum::<f64>();
        t = if uphill > 0.0 { 1.0 } else { t_next };
        w_prev = std::mem::replace(&mut w, nw);
        b_prev = std::mem::replace(&mut b, nb);
        iterations += 1;
    }
    Ok(LogReg {
        n_features: d,
        n_classes,
        weights: w,
        bias: b,
        iterations,
        converged,
    })
}
