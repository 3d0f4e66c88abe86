//! Output-layer losses. Each returns the mean loss over rows and its gradient
//! with respect to the logits, already divided by the row count.

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::{Error, Result};

fn softmax_row(row: &[f64], temperature: f64, out: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = ((x - m) / temperature).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn check_shape<F>(logits: &[F], vocab: usize, rows: usize) -> Result<()> {
    if vocab == 0 || logits.len() != rows * vocab {
        return Err(Error::ShapeMismatch {
            expected: rows * vocab,
            actual: logits.len(),
        });
    }
    Ok(())
}

/// Mean cross-entropy of `targets` under row-wise softmax of `logits` (`rows x vocab`).
///
/// Exponentials run in `F`; row sums accumulate in f64.
pub fn mlm_loss<F: Scalar>(logits: &[F], vocab: usize, targets: &[u32]) -> Result<(f64, Vec<F>)> {
    if targets.is_empty() {
        return Err(Error::input("mlm loss needs at least one target position"));
    }
    check_shape(logits, vocab, targets.len())?;
    let rows = targets.len();
    let mut grad = vec![F::zero(); logits.len()];
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let t = t as usize;
        if t >= vocab {
            return Err(Error::UnknownTokenId(t as u32));
        }
        let row = &logits[r * vocab..(r + 1) * vocab];
        let g = &mut grad[r * vocab..(r + 1) * vocab];
        let m = row.iter().copied().fold(F::neg_infinity(), F::max);
        for (gj, &x) in g.iter_mut().zip(row) {
            *gj = x - m;
        }
        F::exp_slice(g);
        let z: f64 = g.iter().map(|e| e.as_f64()).sum();
        total += z.ln() - (row[t] - m).as_f64();
        let scale = F::from_f64_lossy(1.0 / (z * rows as f64));
        for gj in g.iter_mut() {
            *gj *= scale;
        }
        g[t] -= F::from_f64_lossy(1.0 / rows as f64);
    }
    Ok((total / rows as f64, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillWeights {
    pub temperature: f64,
    pub w_soft: f64,
    pub w_hard: f64,
}

impl Default for DistillWeights {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            w_soft: 0.5,
            w_hard: 0.5,
        }
    }
}

/// `w_soft * T^2 * KL(softmax(teacher/T) || softmax(student/T)) + w_hard * CE(student, hard)`,
/// averaged over rows. `hard_targets` may be empty when `w_hard == 0`.
pub fn distill_loss<F: Scalar>(
    student: &[F],
    teacher: &[F],
    vocab: usize,
    hard_targets: &[u32],
    w: DistillWeights,
) -> Result<(f64, Vec<F>)> {
    if !(w.temperature > 0.0 && w.temperature.is_finite()) {
        return Err(Error::config(format!("temperature must be positive, got {}", w.temperature)));
    }
    if student.len() != teacher.len() {
        return Err(Error::ShapeMismatch {
            expected: student.len(),
            actual: teacher.len(),
        });
    }
    if vocab == 0 || student.is_empty() || student.len() % vocab != 0 {
        return Err(Error::input("distillation logits must be a non-empty rows x vocab block"));
    }
    let rows = student.len() / vocab;
    let use_hard = w.w_hard != 0.0;
    if use_hard && hard_targets.len() != rows {
        return Err(Error::ShapeMismatch {
            expected: rows,
            actual: hard_targets.len(),
        });
    }
    let t = w.temperature;
    let mut grad = vec![F::zero(); student.len()];
    let (mut s, mut te) = (vec![0.0; vocab], vec![0.0; vocab]);
    let (mut ps_t, mut pt_t, mut p1) = (vec![0.0; vocab], vec![0.0; vocab], vec![0.0; vocab]);
    let mut total = 0.0;
    for r in 0..rows {
        let span = r * vocab..(r + 1) * vocab;
        for j in 0..vocab {
            s[j] = student[span.start + j].as_f64();
            te[j] = teacher[span.start + j].as_f64();
        }
        softmax_row(&s, t, &mut ps_t);
        softmax_row(&te, t, &mut pt_t);
        // KL via log-partition differences to stay finite for tiny probabilities.
        let s_scaled: Vec<f64> = s.iter().map(|x| x / t).collect();
        let t_scaled: Vec<f64> = te.iter().map(|x| x / t).collect();
        let (lz_s, lz_t) = (crate::util::log_sum_exp(&s_scaled), crate::util::log_sum_exp(&t_scaled));
        let kl: f64 = (0..vocab)
            .filter(|&j| pt_t[j] > 0.0)
            .map(|j| pt_t[j] * ((t_scaled[j] - lz_t) - (s_scaled[j] - lz_s)))
            .sum();
        let mut row_loss = w.w_soft * t * t * kl.max(0.0);
        let target = if use_hard {
            let tg = hard_targets[r] as usize;
            if tg >= vocab {
                return Err(Error::UnknownTokenId(tg as u32));
            }
            softmax_row(&s, 1.0, &mut p1);
            row_loss += w.w_hard * (crate::util::log_sum_exp(&s) - s[tg]);
            Some(tg)
        } else {
            None
        };
        total += row_loss;
        for j in 0..vocab {
            let mut g = w.w_soft * t * (ps_t[j] - pt_t[j]);
            if let Some(tg) = target {
                g += w.w_hard * (p1[j] - if j == tg { 1.0 } else { 0.0 });
            }
            grad[span.start + j] = F::from_f64_lossy(g / rows as f64);
        }
    }
    Ok((total / rows as f64, grad))
}
