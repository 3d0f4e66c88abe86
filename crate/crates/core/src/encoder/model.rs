//! Pre-norm transformer encoder: forward pass with an activation cache and the
//! matching hand-derived backward pass.
//!
//! Only the real (unpadded) prefix of a sequence is computed. Since padding is
//! always a suffix, this is exactly attention with `-inf` scores on padded keys,
//! and padded rows of the output are defined to be zero.

use rand::Rng as _;

use super::loss::{distill_loss, mlm_loss, DistillWeights};
use super::params::{LayerOffsets, Params};
use super::scalar::{gemm, Scalar, View, ViewMut};
use crate::tokenizer::TokenSequence;
use crate::util::Rng;
use crate::{Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximation GELU over a slice; returns `(gelu(u), tanh term)` so the
/// backward pass can reuse the tanh.
fn gelu<F: Scalar>(u: &[F]) -> (Vec<F>, Vec<F>) {
    let c = F::from_f64_lossy(GELU_C);
    let a = F::from_f64_lossy(GELU_A);
    let half = F::from_f64_lossy(0.5);
    let mut t: Vec<F> = u.iter().map(|&x| c * (x + a * x * x * x)).collect();
    F::tanh_slice(&mut t);
    let g = u.iter().zip(&t).map(|(&x, &t)| half * x * (F::one() + t)).collect();
    (g, t)
}

fn gelu_grad<F: Scalar>(x: F, t: F) -> F {
    let c = F::from_f64_lossy(GELU_C);
    let a3 = F::from_f64_lossy(3.0 * GELU_A);
    let half = F::from_f64_lossy(0.5);
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + a3 * x * x)
}

pub struct LnCache<F> {
    pub xhat: Vec<F>,
    pub rstd: Vec<F>,
}

/// Row-wise layer norm of `x` (`rows x d`).
fn layer_norm<F: Scalar>(x: &[F], d: usize, gain: &[F], bias: &[F], eps: f64) -> (Vec<F>, LnCache<F>) {
    let rows = x.len() / d;
    let mut y = vec![F::zero(); x.len()];
    let mut xhat = vec![F::zero(); x.len()];
    let mut rstd = vec![F::zero(); rows];
    let inv_d = F::from_f64_lossy(1.0 / d as f64);
    let eps = F::from_f64_lossy(eps);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<F>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() * inv_d;
        let rs = F::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (row[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * gain[j] + bias[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Accumulates gain/bias gradients and returns the input gradient.
fn layer_norm_backward<F: Scalar>(
    dy: &[F],
    d: usize,
    cache: &LnCache<F>,
    gain: &[F],
    dgain: &mut [F],
    dbias: &mut [F],
) -> Vec<F> {
    let rows = dy.len() / d;
    let mut dx = vec![F::zero(); dy.len()];
    let inv_d = F::from_f64_lossy(1.0 / d as f64);
    let mut dxhat = vec![F::zero(); d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = F::zero();
        let mut mean_dxhat_xhat = F::zero();
        for j in 0..d {
            dgain[j] += dyr[j] * xh[j];
            dbias[j] += dyr[j];
            dxhat[j] = dyr[j] * gain[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xh[j];
        }
        mean_dxhat *= inv_d;
        mean_dxhat_xhat *= inv_d;
        let rs = cache.rstd[r];
        for j in 0..d {
            dx[r * d + j] = rs * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
    }
    dx
}

/// `y = x W + b` for row-major `x` (`rows x din`) and `W` (`din x dout`).
fn linear<F: Scalar>(x: &[F], w: &[F], b: &[F], din: usize, dout: usize) -> Vec<F> {
    let rows = x.len() / din;
    let mut y = vec![F::zero(); rows * dout];
    for r in 0..rows {
        y[r * dout..(r + 1) * dout].copy_from_slice(b);
    }
    gemm(F::one(), View::rm(x, rows, din), View::rm(w, din, dout), F::one(), ViewMut::rm(&mut y, rows, dout));
    y
}

/// Accumulates `dW += x^T dy`, `db += colsum(dy)` and returns `dx = dy W^T`.
#[allow(clippy::too_many_arguments)]
fn linear_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    dy: &[F],
    din: usize,
    dout: usize,
    dw: &mut [F],
    db: &mut [F],
    want_dx: bool,
) -> Vec<F> {
    let rows = dy.len() / dout;
    gemm(F::one(), View::rm(x, rows, din).t(), View::rm(dy, rows, dout), F::one(), ViewMut::rm(dw, din, dout));
    for r in 0..rows {
        for (g, &v) in db.iter_mut().zip(&dy[r * dout..(r + 1) * dout]) {
            *g += v;
        }
    }
    if !want_dx {
        return Vec::new();
    }
    let mut dx = vec![F::zero(); rows * din];
    gemm(F::one(), View::rm(dy, rows, dout), View::rm(w, din, dout).t(), F::zero(), ViewMut::rm(&mut dx, rows, din));
    dx
}

/// Inverted-dropout mask: entries are 0 or `1 / (1 - rate)`.
fn dropout_mask<F: Scalar>(len: usize, rate: f64, rng: &mut Rng) -> Vec<F> {
    let keep = F::from_f64_lossy(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { F::zero() } else { keep })
        .collect()
}

fn apply_mask<F: Scalar>(x: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

pub struct LayerCache<F> {
    pub x_in: Vec<F>,
    pub ln1: LnCache<F>,
    pub h1: Vec<F>,
    pub q: Vec<F>,
    pub k: Vec<F>,
    pub v: Vec<F>,
    /// Attention probabilities, `n_heads x n x n`.
    pub probs: Vec<F>,
    pub ctx: Vec<F>,
    pub attn_drop: Option<Vec<F>>,
    pub x_mid: Vec<F>,
    pub ln2: LnCache<F>,
    pub h2: Vec<F>,
    pub u: Vec<F>,
    pub g: Vec<F>,
    /// tanh term of the GELU at each entry of `u`.
    pub gelu_t: Vec<F>,
    pub ffn_drop: Option<Vec<F>>,
}

pub struct ForwardCache<F> {
    /// Number of real positions.
    pub n: usize,
    pub ids: Vec<u32>,
    pub emb_drop: Option<Vec<F>>,
    pub layers: Vec<LayerCache<F>>,
    pub lnf: LnCache<F>,
    /// Final hidden states of the real prefix, `n x d_model`.
    pub hidden: Vec<F>,
    pub logit_positions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput<F> {
    /// `max_context x d_model`; rows of padded positions are zero.
    pub hidden_states: Vec<F>,
    pub cls_vector: Vec<F>,
    /// `positions.len() x vocab_size`, rows in the order positions were requested.
    pub mlm_logits: Vec<F>,
}

fn check_sequence<F: Scalar>(params: &Params<F>, seq: &TokenSequence) -> Result<usize> {
    let c = &params.config;
    if seq.ids.len() != c.max_context {
        return Err(Error::ShapeMismatch {
            expected: c.max_context,
            actual: seq.ids.len(),
        });
    }
    seq.validate()?;
    if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= c.vocab_size) {
        return Err(Error::UnknownTokenId(bad));
    }
    Ok(seq.n_real())
}

/// Forward pass keeping every activation needed by [`backward_from_logits`].
///
/// `dropout` enables train mode; `None` is inference.
pub fn forward_cached<F: Scalar>(
    params: &Params<F>,
    seq: &TokenSequence,
    logit_positions: &[usize],
    mut dropout: Option<&mut Rng>,
) -> Result<(ForwardOutput<F>, ForwardCache<F>)> {
    let n = check_sequence(params, seq)?;
    if let Some(&p) = logit_positions.iter().find(|&&p| p >= n) {
        return Err(Error::input(format!("logit position {p} is outside the {n} real positions")));
    }
    let c = &params.config;
    let (d, dff, nh) = (c.d_model, c.d_ff, c.n_heads);
    let dh = d / nh;
    let rate = if dropout.is_some() { c.dropout_rate } else { 0.0 };
    let w = &params.values;
    let lay = &params.layout;
    let mut mask = |len: usize| -> Option<Vec<F>> {
        match dropout.as_deref_mut() {
            Some(rng) if rate > 0.0 => Some(dropout_mask(len, rate, rng)),
            _ => None,
        }
    };

    let mut x = vec![F::zero(); n * d];
    for i in 0..n {
        let t = seq.ids[i] as usize;
        let te = &w[lay.tok_emb + t * d..lay.tok_emb + (t + 1) * d];
        let pe = &w[lay.pos_emb + i * d..lay.pos_emb + (i + 1) * d];
        for j in 0..d {
            x[i * d + j] = te[j] + pe[j];
        }
    }
    let emb_drop = mask(n * d);
    apply_mask(&mut x, &emb_drop);

    let scale = F::from_f64_lossy(1.0 / (dh as f64).sqrt());
    let mut layers = Vec::with_capacity(c.n_layers);
    for lo in &lay.layers {
        let p = |off: usize, len: usize| &w[off..off + len];
        let (h1, ln1) = layer_norm(&x, d, p(lo.ln1_g, d), p(lo.ln1_b, d), c.layernorm_epsilon);
        let q = linear(&h1, p(lo.wq, d * d), p(lo.bq, d), d, d);
        let k = linear(&h1, p(lo.wk, d * d), p(lo.bk, d), d, d);
        let v = linear(&h1, p(lo.wv, d * d), p(lo.bv, d), d, d);
        let mut probs = vec![F::zero(); nh * n * n];
        let mut ctx = vec![F::zero(); n * d];
        for h in 0..nh {
            let ph = &mut probs[h * n * n..(h + 1) * n * n];
            gemm(
                scale,
                View::strided(&q[h * dh..], n, dh, d, 1),
                View::strided(&k[h * dh..], dh, n, 1, d),
                F::zero(),
                ViewMut::rm(ph, n, n),
            );
            for r in 0..n {
                let row = &mut ph[r * n..(r + 1) * n];
                let m = row.iter().copied().fold(F::neg_infinity(), F::max);
                for s in row.iter_mut() {
                    *s -= m;
                }
                F::exp_slice(row);
                let inv = F::one() / row.iter().copied().sum::<F>();
                for s in row.iter_mut() {
                    *s *= inv;
                }
            }
            gemm(
                F::one(),
                View::rm(ph, n, n),
                View::strided(&v[h * dh..], n, dh, d, 1),
                F::zero(),
                ViewMut::strided(&mut ctx[h * dh..], n, dh, d, 1),
            );
        }
        let mut a = linear(&ctx, p(lo.wo, d * d), p(lo.bo, d), d, d);
        let attn_drop = mask(n * d);
        apply_mask(&mut a, &attn_drop);
        let x_mid: Vec<F> = x.iter().zip(&a).map(|(&u, &v)| u + v).collect();

        let (h2, ln2) = layer_norm(&x_mid, d, p(lo.ln2_g, d), p(lo.ln2_b, d), c.layernorm_epsilon);
        let u = linear(&h2, p(lo.w1, d * dff), p(lo.b1, dff), d, dff);
        let (g, gelu_t) = gelu(&u);
        let mut f = linear(&g, p(lo.w2, dff * d), p(lo.b2, d), dff, d);
        let ffn_drop = mask(n * d);
        apply_mask(&mut f, &ffn_drop);
        let x_out: Vec<F> = x_mid.iter().zip(&f).map(|(&u, &v)| u + v).collect();

        layers.push(LayerCache {
            x_in: std::mem::replace(&mut x, x_out),
            ln1,
            h1,
            q,
            k,
            v,
            probs,
            ctx,
            attn_drop,
            x_mid,
            ln2,
            h2,
            u,
            g,
            gelu_t,
            ffn_drop,
        });
    }
    let (hidden, lnf) = layer_norm(&x, d, &w[lay.lnf_g..lay.lnf_g + d], &w[lay.lnf_b..lay.lnf_b + d], c.layernorm_epsilon);

    let mlm_logits = tied_logits(params, &hidden, logit_positions);
    let mut hidden_states = vec![F::zero(); c.max_context * d];
    hidden_states[..n * d].copy_from_slice(&hidden);
    let out = ForwardOutput {
        cls_vector: hidden[..d].to_vec(),
        hidden_states,
        mlm_logits,
    };
    let cache = ForwardCache {
        n,
        ids: seq.ids[..n].to_vec(),
        emb_drop,
        layers,
        lnf,
        hidden,
        logit_positions: logit_positions.to_vec(),
    };
    Ok((out, cache))
}

/// MLM head with the output projection tied to the token embedding table.
fn tied_logits<F: Scalar>(params: &Params<F>, hidden: &[F], positions: &[usize]) -> Vec<F> {
    let c = &params.config;
    let (d, vsz) = (c.d_model, c.vocab_size);
    if positions.is_empty() {
        return Vec::new();
    }
    let lay = &params.layout;
    let t = positions.len();
    let mut ht = vec![F::zero(); t * d];
    for (r, &p) in positions.iter().enumerate() {
        ht[r * d..(r + 1) * d].copy_from_slice(&hidden[p * d..(p + 1) * d]);
    }
    let bias = &params.values[lay.mlm_bias..lay.mlm_bias + vsz];
    let mut logits = Vec::with_capacity(t * vsz);
    for _ in 0..t {
        logits.extend_from_slice(bias);
    }
    let emb = &params.values[lay.tok_emb..lay.tok_emb + vsz * d];
    gemm(F::one(), View::rm(&ht, t, d), View::rm(emb, vsz, d).t(), F::one(), ViewMut::rm(&mut logits, t, vsz));
    logits
}

/// Inference forward pass (dropout off).
pub fn forward<F: Scalar>(params: &Params<F>, seq: &TokenSequence, logit_positions: &[usize]) -> Result<ForwardOutput<F>> {
    forward_cached(params, seq, logit_positions, None).map(|(o, _)| o)
}

/// Position-0 hidden state with dropout off.
pub fn cls_embedding<F: Scalar>(params: &Params<F>, seq: &TokenSequence) -> Result<Vec<F>> {
    forward(params, seq, &[]).map(|o| o.cls_vector)
}

/// Back-propagates `dlogits` (`positions x vocab`, as returned by the losses)
/// and accumulates parameter gradients into `grads`.
pub fn backward_from_logits<F: Scalar>(params: &Params<F>, cache: &ForwardCache<F>, dlogits: &[F], grads: &mut [F]) -> Result<()> {
    let c = &params.config;
    let (d, dff, nh, vsz) = (c.d_model, c.d_ff, c.n_heads, c.vocab_size);
    let dh = d / nh;
    let n = cache.n;
    let lay = &params.layout;
    let w = &params.values;
    if grads.len() != params.values.len() {
        return Err(Error::ShapeMismatch {
            expected: params.values.len(),
            actual: grads.len(),
        });
    }
    let t = cache.logit_positions.len();
    if dlogits.len() != t * vsz {
        return Err(Error::ShapeMismatch {
            expected: t * vsz,
            actual: dlogits.len(),
        });
    }

    // Tied MLM head.
    let mut dhidden = vec![F::zero(); n * d];
    if t > 0 {
        let mut ht = vec![F::zero(); t * d];
        for (r, &p) in cache.logit_positions.iter().enumerate() {
            ht[r * d..(r + 1) * d].copy_from_slice(&cache.hidden[p * d..(p + 1) * d]);
        }
        for r in 0..t {
            for (g, &v) in grads[lay.mlm_bias..lay.mlm_bias + vsz].iter_mut().zip(&dlogits[r * vsz..(r + 1) * vsz]) {
                *g += v;
            }
        }
        gemm(
            F::one(),
            View::rm(dlogits, t, vsz).t(),
            View::rm(&ht, t, d),
            F::one(),
            ViewMut::rm(&mut grads[lay.tok_emb..lay.tok_emb + vsz * d], vsz, d),
        );
        let mut dht = vec![F::zero(); t * d];
        gemm(
            F::one(),
            View::rm(dlogits, t, vsz),
            View::rm(&w[lay.tok_emb..lay.tok_emb + vsz * d], vsz, d),
            F::zero(),
            ViewMut::rm(&mut dht, t, d),
        );
        for (r, &p) in cache.logit_positions.iter().enumerate() {
            for j in 0..d {
                dhidden[p * d + j] += dht[r * d + j];
            }
        }
    }

    let (gf, rest) = grads.split_at_mut(lay.lnf_b);
    let mut dx = layer_norm_backward(
        &dhidden,
        d,
        &cache.lnf,
        &w[lay.lnf_g..lay.lnf_g + d],
        &mut gf[lay.lnf_g..lay.lnf_g + d],
        &mut rest[..d],
    );

    let scale = F::from_f64_lossy(1.0 / (dh as f64).sqrt());
    for (lo, lc) in lay.layers.iter().zip(&cache.layers).rev() {
        let LayerOffsets {
            ln1_g,
            ln1_b,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ln2_g,
            ln2_b,
            w1,
            b1,
            w2,
            b2,
        } = *lo;
        // FFN branch.
        let mut df = dx.clone();
        apply_mask(&mut df, &lc.ffn_drop);
        let (gw, gb) = two_mut(grads, w2, dff * d, b2, d);
        let mut du = linear_backward(&lc.g, &w[w2..w2 + dff * d], &df, dff, d, gw, gb, true);
        for ((z, &u), &t) in du.iter_mut().zip(&lc.u).zip(&lc.gelu_t) {
            *z *= gelu_grad(u, t);
        }
        let (gw, gb) = two_mut(grads, w1, d * dff, b1, dff);
        let dh2 = linear_backward(&lc.h2, &w[w1..w1 + d * dff], &du, d, dff, gw, gb, true);
        let (gg, gb) = two_mut(grads, ln2_g, d, ln2_b, d);
        let dmid = layer_norm_backward(&dh2, d, &lc.ln2, &w[ln2_g..ln2_g + d], gg, gb);
        for (a, b) in dx.iter_mut().zip(&dmid) {
            *a += *b;
        }

        // Attention branch; `dx` is now the gradient at x_mid.
        let mut da = dx.clone();
        apply_mask(&mut da, &lc.attn_drop);
        let (gw, gb) = two_mut(grads, wo, d * d, bo, d);
        let dctx = linear_backward(&lc.ctx, &w[wo..wo + d * d], &da, d, d, gw, gb, true);
        let mut dq = vec![F::zero(); n * d];
        let mut dk = vec![F::zero(); n * d];
        let mut dv = vec![F::zero(); n * d];
        let mut dp = vec![F::zero(); n * n];
        for h in 0..nh {
            let ph = &lc.probs[h * n * n..(h + 1) * n * n];
            gemm(
                F::one(),
                View::strided(&dctx[h * dh..], n, dh, d, 1),
                View::strided(&lc.v[h * dh..], dh, n, 1, d),
                F::zero(),
                ViewMut::rm(&mut dp, n, n),
            );
            gemm(
                F::one(),
                View::rm(ph, n, n).t(),
                View::strided(&dctx[h * dh..], n, dh, d, 1),
                F::zero(),
                ViewMut::strided(&mut dv[h * dh..], n, dh, d, 1),
            );
            // Softmax backward, in place: dS = P * (dP - rowdot(dP, P)).
            for r in 0..n {
                let pr = &ph[r * n..(r + 1) * n];
                let dr = &mut dp[r * n..(r + 1) * n];
                let dot = pr.iter().zip(dr.iter()).map(|(&a, &b)| a * b).sum::<F>();
                for (g, &p) in dr.iter_mut().zip(pr) {
                    *g = p * (*g - dot);
                }
            }
            gemm(
                scale,
                View::rm(&dp, n, n),
                View::strided(&lc.k[h * dh..], n, dh, d, 1),
                F::zero(),
                ViewMut::strided(&mut dq[h * dh..], n, dh, d, 1),
            );
            gemm(
                scale,
                View::rm(&dp, n, n).t(),
                View::strided(&lc.q[h * dh..], n, dh, d, 1),
                F::zero(),
                ViewMut::strided(&mut dk[h * dh..], n, dh, d, 1),
            );
        }
        let mut dh1 = vec![F::zero(); n * d];
        for (wo_, bo_, dy) in [(wq, bq, &dq), (wk, bk, &dk), (wv, bv, &dv)] {
            let (gw, gb) = two_mut(grads, wo_, d * d, bo_, d);
            let part = linear_backward(&lc.h1, &w[wo_..wo_ + d * d], dy, d, d, gw, gb, true);
            for (a, b) in dh1.iter_mut().zip(&part) {
                *a += *b;
            }
        }
        let (gg, gb) = two_mut(grads, ln1_g, d, ln1_b, d);
        let din = layer_norm_backward(&dh1, d, &lc.ln1, &w[ln1_g..ln1_g + d], gg, gb);
        for (a, b) in dx.iter_mut().zip(&din) {
            *a += *b;
        }
    }

    apply_mask(&mut dx, &cache.emb_drop);
    for i in 0..n {
        let tok = cache.ids[i] as usize;
        for j in 0..d {
            grads[lay.tok_emb + tok * d + j] += dx[i * d + j];
            grads[lay.pos_emb + i * d + j] += dx[i * d + j];
        }
    }
    Ok(())
}

/// Disjoint mutable views of two parameter blocks, `a` before `b`.
fn two_mut<F>(g: &mut [F], a: usize, alen: usize, b: usize, blen: usize) -> (&mut [F], &mut [F]) {
    assert!(a + alen <= b, "blocks must be ordered and disjoint");
    let (lo, hi) = g.split_at_mut(b);
    (&mut lo[a..a + alen], &mut hi[..blen])
}

/// Objective applied to the MLM logits of one sequence.
#[derive(Clone, Copy, Debug)]
pub enum LossSpec<'a, F> {
    Mlm {
        positions: &'a [usize],
        targets: &'a [u32],
    },
    Distill {
        positions: &'a [usize],
        targets: &'a [u32],
        /// `positions.len() x vocab_size`.
        teacher_logits: &'a [F],
        weights: DistillWeights,
    },
}

impl<F> LossSpec<'_, F> {
    pub fn positions(&self) -> &[usize] {
        match self {
            LossSpec::Mlm { positions, .. } | LossSpec::Distill { positions, .. } => positions,
        }
    }
}

/// Loss of one sequence and its gradient accumulated into `grads` with factor
/// `weight`. Returns the unweighted loss (mean over the sequence's positions).
pub fn accumulate_gradients<F: Scalar>(
    params: &Params<F>,
    seq: &TokenSequence,
    spec: LossSpec<'_, F>,
    weight: f64,
    dropout: Option<&mut Rng>,
    grads: &mut [F],
) -> Result<f64> {
    let (out, cache) = forward_cached(params, seq, spec.positions(), dropout)?;
    let vsz = params.config.vocab_size;
    let (loss, mut dlogits) = match spec {
        LossSpec::Mlm { targets, .. } => mlm_loss(&out.mlm_logits, vsz, targets)?,
        LossSpec::Distill {
            targets,
            teacher_logits,
            weights,
            ..
        } => distill_loss(&out.mlm_logits, teacher_logits, vsz, targets, weights)?,
    };
    if weight != 1.0 {
        let wf = F::from_f64_lossy(weight);
        for g in dlogits.iter_mut() {
            *g *= wf;
        }
    }
    backward_from_logits(params, &cache, &dlogits, grads)?;
    Ok(loss)
}

/// Loss and exact gradient of one sequence with dropout off.
pub fn backward<F: Scalar>(params: &Params<F>, seq: &TokenSequence, spec: LossSpec<'_, F>) -> Result<(f64, Vec<F>)> {
    let mut grads = vec![F::zero(); params.values.len()];
    let loss = accumulate_gradients(params, seq, spec, 1.0, None, &mut grads)?;
    Ok((loss, grads))
}

/// Loss of one sequence without gradients.
pub fn loss_only<F: Scalar>(params: &Params<F>, seq: &TokenSequence, spec: LossSpec<'_, F>) -> Result<f64> {
    let out = forward(params, seq, spec.positions())?;
    let vsz = params.config.vocab_size;
    Ok(match spec {
        LossSpec::Mlm { targets, .. } => mlm_loss(&out.mlm_logits, vsz, targets)?.0,
        LossSpec::Distill {
            targets,
            teacher_logits,
            weights,
            ..
        } => distill_loss(&out.mlm_logits, teacher_logits, vsz, targets, weights)?.0,
    })
}
