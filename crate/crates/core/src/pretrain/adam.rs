use serde::{Deserialize, Serialize};

use crate::encoder::Scalar;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Fraction of total steps spent in linear warmup; the rest decays linearly to 0.
    pub warmup_frac: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_frac: 0.01,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::config("adam needs lr > 0, betas in [0, 1), eps > 0"));
        }
        if !(0.0..=1.0).contains(&self.warmup_frac) {
            return Err(Error::config("warmup_frac must be in [0, 1]"));
        }
        Ok(())
    }

    /// Learning rate for the 0-based `step` of a `total`-step run.
    pub fn lr_at(&self, step: u64, total: u64) -> f64 {
        let warm = ((self.warmup_frac * total as f64).ceil() as u64).max(1);
        let s = step + 1;
        if s <= warm {
            self.lr * s as f64 / warm as f64
        } else {
            let rest = total.saturating_sub(warm).max(1);
            self.lr * (1.0 - (s - warm) as f64 / rest as f64).max(0.0)
        }
    }
}

/// Bias-corrected Adam state over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    /// Number of updates applied so far.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(n: usize, cfg: &AdamConfig) -> Self {
        Self {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    pub fn step(&mut self, params: &mut [F], grads: &[F], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len(),
                actual: params.len().min(grads.len()),
            });
        }
        self.t += 1;
        let (b1, b2) = (F::from_f64_lossy(self.beta1), F::from_f64_lossy(self.beta2));
        let (c1, c2) = (F::one() - b1, F::one() - b2);
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = F::from_f64_lossy(lr / bc1);
        let inv_bc2 = F::from_f64_lossy(1.0 / bc2);
        let eps = F::from_f64_lossy(self.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + c1 * g;
            self.v[i] = b2 * self.v[i] + c2 * g * g;
            params[i] -= step * self.m[i] / ((self.v[i] * inv_bc2).sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params_and_decay_moments() {
        let cfg = AdamConfig::default();
        let mut a = Adam::<f64>::new(2, &cfg);
        a.m = vec![1.0, -1.0];
        a.v = vec![4.0, 4.0];
        let mut p = vec![0.5, 0.25];
        a.step(&mut p, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(p, vec![0.5, 0.25]);
        assert_eq!(a.m, vec![0.9, -0.9]);
        assert!((a.v[0] - 4.0 * 0.999).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_parabola() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..Default::default()
        };
        let mut a = Adam::<f64>::new(1, &cfg);
        let mut x = vec![1.0];
        for _ in 0..2000 {
            let g = [2.0 * x[0]];
            a.step(&mut x, &g, cfg.lr).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "{}", x[0]);
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let cfg = AdamConfig::default();
        assert!((cfg.lr_at(0, 1000) - cfg.lr * 0.1).abs() < 1e-15);
        assert!((cfg.lr_at(9, 1000) - cfg.lr).abs() < 1e-15);
        assert!(cfg.lr_at(500, 1000) < cfg.lr);
        assert_eq!(cfg.lr_at(999, 1000), 0.0);
    }
}
