//! Contrastive sequence baseline: a single-layer GRU over per-transaction
//! feature vectors, trained so that random subsequences of one account embed
//! close together and subsequences of different accounts embed apart.

use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::scalar::{gemm, View, ViewMut};
use crate::encoder::{Checkpoint, CheckpointHeader, Init, ParamGroup, Scalar};
use crate::pretrain::{batch_indices, Adam, AdamConfig};
use crate::synthgen::{Account, Direction, Provenance, Transaction};
use crate::util::{mix64, rng_for, Rng};
use crate::{Error, Result};

pub const N_TRIGRAM_BUCKETS: usize = 64;
/// Signed log-amount, direction one-hot, trigram bag.
pub const INPUT_DIM: usize = 3 + N_TRIGRAM_BUCKETS;

const TAG_SAMPLE: u64 = 0xC01E5;
const TAG_RETRIEVAL: u64 = 0x4E7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColesConfig {
    pub hidden: usize,
    pub n_subsequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Softmax temperature applied to cosine similarities.
    pub temperature: f64,
    /// Weight of the in-batch repulsion term; 0 leaves pure attraction.
    pub repulsion: f64,
    pub batch_accounts: usize,
    pub steps: u64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ColesConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            n_subsequences: 5,
            min_len: 10,
            max_len: 100,
            temperature: 0.1,
            repulsion: 1.0,
            batch_accounts: 32,
            steps: 1000,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl ColesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.n_subsequences == 0 || self.batch_accounts < 2 {
            return Err(Error::config("coles needs hidden > 0, n_subsequences > 0, batch_accounts >= 2"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::config("coles needs 1 <= min_len <= max_len"));
        }
        if !(self.temperature > 0.0) || !(self.lr > 0.0) || self.repulsion < 0.0 {
            return Err(Error::config("coles needs temperature > 0, lr > 0, repulsion >= 0"));
        }
        Ok(())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Feature vector of one transaction. The trigram bag covers the lowercased
/// description padded with one space on each side and sums to 1.
pub fn transaction_features(t: &Transaction) -> [f32; INPUT_DIM] {
    let mut f = [0f32; INPUT_DIM];
    let dollars = t.amount_cents as f64 / 100.0;
    let sign = t.dir.sign();
    f[0] = (sign * dollars.ln_1p()) as f32;
    f[1] = f32::from(t.dir == Direction::Debit);
    f[2] = f32::from(t.dir == Direction::Credit);
    let text: Vec<char> = format!(" {} ", t.desc.to_lowercase()).chars().collect();
    let n = text.len().saturating_sub(2);
    for w in text.windows(3) {
        let tri: String = w.iter().collect();
        let b = (mix64(fnv1a(tri.as_bytes())) % N_TRIGRAM_BUCKETS as u64) as usize;
        f[3 + b] += 1.0 / n as f32;
    }
    f
}

/// Row-major `len x INPUT_DIM` features in the given (chronological) order.
pub fn account_features(transactions: &[Transaction]) -> Vec<f32> {
    transactions.iter().flat_map(transaction_features).collect()
}

/// Flat GRU parameters: `wx [in, 3H]`, `bx [3H]`, `uh [H, 3H]`, `bh [3H]`,
/// gate blocks ordered update, reset, candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Gru<F> {
    pub input: usize,
    pub hidden: usize,
    pub values: Vec<F>,
}

impl<F: Scalar> Gru<F> {
    /// Uniform(-1/sqrt(H), 1/sqrt(H)) for every parameter.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let n = Self::n_params(input, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = rng_for(seed, &[0x6E0]);
        Self {
            input,
            hidden,
            values: (0..n).map(|_| F::from_f64_lossy(dist.sample(&mut rng))).collect(),
        }
    }

    pub fn n_params(input: usize, hidden: usize) -> usize {
        let g = 3 * hidden;
        input * g + g + hidden * g + g
    }

    pub fn groups(&self) -> Vec<ParamGroup> {
        let (i, h) = (self.input, self.hidden);
        let g = 3 * h;
        let mut off = 0;
        let mut mk = |name: &str, shape: Vec<usize>| {
            let grp = ParamGroup {
                name: name.into(),
                offset: off,
                shape,
                init: Init::Normal,
            };
            off += grp.len();
            grp
        };
        vec![mk("gru.wx", vec![i, g]), mk("gru.bx", vec![g]), mk("gru.uh", vec![h, g]), mk("gru.bh", vec![g])]
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let g = 3 * self.hidden;
        let bx = self.input * g;
        let uh = bx + g;
        let bh = uh + self.hidden * g;
        (0, bx, uh, bh)
    }
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Sequences packed time-major, longest first, so the rows active at step
/// `t` are always a prefix.
pub struct Packed<F> {
    /// Original index of each packed row.
    pub order: Vec<usize>,
    /// `active[t]` rows are still running at step `t`.
    pub active: Vec<usize>,
    /// Row offset of step `t` in `x`.
    pub offsets: Vec<usize>,
    pub x: Vec<F>,
}

impl<F: Scalar> Packed<F> {
    /// `seqs[i]` is a row-major `len_i x input` block with `len_i >= 1`.
    pub fn new(seqs: &[&[f32]], input: usize) -> Result<Self> {
        if seqs.iter().any(|s| s.is_empty() || s.len() % input != 0) {
            return Err(Error::input("every sequence needs at least one full feature row"));
        }
        let lens: Vec<usize> = seqs.iter().map(|s| s.len() / input).collect();
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        order.sort_by(|&a, &b| lens[b].cmp(&lens[a]).then(a.cmp(&b)));
        let tmax = order.first().map_or(0, |&i| lens[i]);
        let mut active = Vec::with_capacity(tmax);
        let mut offsets = Vec::with_capacity(tmax);
        let mut x = Vec::new();
        let mut rows = 0;
        for t in 0..tmax {
            let b = order.iter().take_while(|&&i| lens[i] > t).count();
            active.push(b);
            offsets.push(rows);
            for &i in &order[..b] {
                x.extend(seqs[i][t * input..(t + 1) * input].iter().map(|&v| F::from_f64_lossy(v as f64)));
            }
            rows += b;
        }
        Ok(Self { order, active, offsets, x })
    }

    pub fn n_rows(&self) -> usize {
        self.active.iter().sum()
    }
}

pub struct GruCache<F> {
    ax: Vec<F>,
    h_prev: Vec<F>,
    z: Vec<F>,
    r: Vec<F>,
    n: Vec<F>,
    hh_n: Vec<F>,
}

/// Final hidden state of each sequence, in the original order (`B x H`).
pub fn gru_forward<F: Scalar>(gru: &Gru<F>, packed: &Packed<F>) -> (Vec<F>, GruCache<F>) {
    let (i_dim, h) = (gru.input, gru.hidden);
    let g3 = 3 * h;
    let (wx, bx, uh, bh) = gru.offsets();
    let w = &gru.values;
    let rows = packed.n_rows();
    let mut ax = vec![F::zero(); rows * g3];
    for r in 0..rows {
        ax[r * g3..(r + 1) * g3].copy_from_slice(&w[bx..bx + g3]);
    }
    gemm(
        F::one(),
        View::rm(&packed.x, rows, i_dim),
        View::rm(&w[wx..wx + i_dim * g3], i_dim, g3),
        F::one(),
        ViewMut::rm(&mut ax, rows, g3),
    );
    let batch = packed.order.len();
    let mut state = vec![F::zero(); batch * h];
    let mut cache = GruCache {
        h_prev: vec![F::zero(); rows * h],
        z: vec![F::zero(); rows * h],
        r: vec![F::zero(); rows * h],
        n: vec![F::zero(); rows * h],
        hh_n: vec![F::zero(); rows * h],
        ax: Vec::new(),
    };
    let mut hh = vec![F::zero(); batch * g3];
    for (&b, &o) in packed.active.iter().zip(&packed.offsets) {
        for r in 0..b {
            hh[r * g3..(r + 1) * g3].copy_from_slice(&w[bh..bh + g3]);
        }
        gemm(
            F::one(),
            View::rm(&state[..b * h], b, h),
            View::rm(&w[uh..uh + h * g3], h, g3),
            F::one(),
            ViewMut::rm(&mut hh[..b * g3], b, g3),
        );
        cache.h_prev[o * h..(o + b) * h].copy_from_slice(&state[..b * h]);
        for r in 0..b {
            let a = &ax[(o + r) * g3..(o + r + 1) * g3];
            let q = &hh[r * g3..(r + 1) * g3];
            for j in 0..h {
                let z = sigmoid(a[j] + q[j]);
                let rr = sigmoid(a[h + j] + q[h + j]);
                let n = (a[2 * h + j] + rr * q[2 * h + j]).tanh();
                let k = (o + r) * h + j;
                cache.z[k] = z;
                cache.r[k] = rr;
                cache.n[k] = n;
                cache.hh_n[k] = q[2 * h + j];
                let hp = state[r * h + j];
                state[r * h + j] = (F::one() - z) * n + z * hp;
            }
        }
    }
    cache.ax = ax;
    let mut out = vec![F::zero(); batch * h];
    for (p, &orig) in packed.order.iter().enumerate() {
        out[orig * h..(orig + 1) * h].copy_from_slice(&state[p * h..(p + 1) * h]);
    }
    (out, cache)
}

/// Accumulates parameter gradients given `d_final` (`B x H`, original order).
pub fn gru_backward<F: Scalar>(gru: &Gru<F>, packed: &Packed<F>, cache: &GruCache<F>, d_final: &[F], grads: &mut [F]) {
    let (i_dim, h) = (gru.input, gru.hidden);
    let g3 = 3 * h;
    let (wx, bx, uh, bh) = gru.offsets();
    let w = &gru.values;
    let rows = packed.n_rows();
    let batch = packed.order.len();
    let mut dh = vec![F::zero(); batch * h];
    for (p, &orig) in packed.order.iter().enumerate() {
        dh[p * h..(p + 1) * h].copy_from_slice(&d_final[orig * h..(orig + 1) * h]);
    }
    let mut dax = vec![F::zero(); rows * g3];
    let mut dhh = vec![F::zero(); batch * g3];
    let mut dprev = vec![F::zero(); batch * h];
    for (&b, &o) in packed.active.iter().zip(&packed.offsets).rev() {
        for r in 0..b {
            for j in 0..h {
                let k = (o + r) * h + j;
                let (z, rr, n, hhn, hp) = (cache.z[k], cache.r[k], cache.n[k], cache.hh_n[k], cache.h_prev[k]);
                let d = dh[r * h + j];
                let dz_pre = d * (hp - n) * z * (F::one() - z);
                let dn_pre = d * (F::one() - z) * (F::one() - n * n);
                let dr_pre = dn_pre * hhn * rr * (F::one() - rr);
                let ra = (o + r) * g3;
                dax[ra + j] = dz_pre;
                dax[ra + h + j] = dr_pre;
                dax[ra + 2 * h + j] = dn_pre;
                dhh[r * g3 + j] = dz_pre;
                dhh[r * g3 + h + j] = dr_pre;
                dhh[r * g3 + 2 * h + j] = dn_pre * rr;
                dprev[r * h + j] = d * z;
            }
        }
        let (gw, rest) = grads.split_at_mut(bh);
        gemm(
            F::one(),
            View::rm(&cache.h_prev[o * h..(o + b) * h], b, h).t(),
            View::rm(&dhh[..b * g3], b, g3),
            F::one(),
            ViewMut::rm(&mut gw[uh..uh + h * g3], h, g3),
        );
        for r in 0..b {
            for (g, &v) in rest[..g3].iter_mut().zip(&dhh[r * g3..(r + 1) * g3]) {
                *g += v;
            }
        }
        gemm(
            F::one(),
            View::rm(&dhh[..b * g3], b, g3),
            View::rm(&w[uh..uh + h * g3], h, g3).t(),
            F::one(),
            ViewMut::rm(&mut dprev[..b * h], b, h),
        );
        dh[..b * h].copy_from_slice(&dprev[..b * h]);
    }
    gemm(
        F::one(),
        View::rm(&packed.x, rows, i_dim).t(),
        View::rm(&dax, rows, g3),
        F::one(),
        ViewMut::rm(&mut grads[wx..wx + i_dim * g3], i_dim, g3),
    );
    for r in 0..rows {
        for (g, &v) in grads[bx..bx + g3].iter_mut().zip(&dax[r * g3..(r + 1) * g3]) {
            *g += v;
        }
    }
}

/// Multi-positive softmax-contrastive loss over L2-normalized embeddings.
///
/// For anchor `i` with positives `P(i)` (same group, excluding `i`):
/// `-mean_{p in P(i)} s_ip + repulsion * logsumexp_{j != i} s_ij`, with
/// `s_ij = cos(e_i, e_j) / temperature`. Anchors without positives are skipped.
/// Returns the mean over anchors and its gradient with respect to `emb`.
pub fn contrastive_loss<F: Scalar>(
    emb: &[F],
    dim: usize,
    groups: &[usize],
    temperature: f64,
    repulsion: f64,
) -> Result<(f64, Vec<F>)> {
    let n = groups.len();
    if emb.len() != n * dim {
        return Err(Error::ShapeMismatch {
            expected: n * dim,
            actual: emb.len(),
        });
    }
    let raw: Vec<f64> = emb.iter().map(|x| x.as_f64()).collect();
    let norms: Vec<f64> = (0..n)
        .map(|i| raw[i * dim..(i + 1) * dim].iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12))
        .collect();
    let e: Vec<f64> = (0..n * dim).map(|k| raw[k] / norms[k / dim]).collect();
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sim[i * n + j] = (0..dim).map(|k| e[i * dim + k] * e[j * dim + k]).sum::<f64>() / temperature;
        }
    }
    let mut dsim = vec![0.0; n * n];
    let mut total = 0.0;
    let mut anchors = 0usize;
    for i in 0..n {
        let pos: Vec<usize> = (0..n).filter(|&j| j != i && groups[j] == groups[i]).collect();
        if pos.is_empty() {
            continue;
        }
        anchors += 1;
        let inv_p = 1.0 / pos.len() as f64;
        for &p in &pos {
            total -= sim[i * n + p] * inv_p;
            dsim[i * n + p] -= inv_p;
        }
        if repulsion > 0.0 {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sim[i * n + j]).collect();
            let lse = crate::util::log_sum_exp(&others);
            total += repulsion * lse;
            for j in (0..n).filter(|&j| j != i) {
                dsim[i * n + j] += repulsion * (sim[i * n + j] - lse).exp();
            }
        }
    }
    if anchors == 0 {
        return Err(Error::input("contrastive loss needs at least one anchor with a positive"));
    }
    let scale = 1.0 / (anchors as f64 * temperature);
    let mut de = vec![0.0; n * dim];
    for i in 0..n {
        for j in 0..n {
            let g = dsim[i * n + j] * scale;
            if g == 0.0 {
                continue;
            }
            for k in 0..dim {
                de[i * dim + k] += g * e[j * dim + k];
                de[j * dim + k] += g * e[i * dim + k];
            }
        }
    }
    let mut grad = vec![F::zero(); n * dim];
    for i in 0..n {
        let ei = &e[i * dim..(i + 1) * dim];
        let dei = &de[i * dim..(i + 1) * dim];
        let dot: f64 = ei.iter().zip(dei).map(|(a, b)| a * b).sum();
        for k in 0..dim {
            grad[i * dim + k] = F::from_f64_lossy((dei[k] - ei[k] * dot) / norms[i]);
        }
    }
    Ok((total / anchors as f64, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subsequence {
    /// Index into the batch passed to the sampler.
    pub account: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledPairs {
    pub subsequences: Vec<Subsequence>,
    /// Per subsequence: other subsequences of the same account.
    pub positives: Vec<Vec<usize>>,
    /// Per subsequence: all subsequences of other accounts.
    pub negatives: Vec<Vec<usize>>,
    /// Accounts shorter than `min_len`.
    pub skipped: usize,
}

/// Draws `n_subsequences` contiguous windows per account with length uniform
/// in `[min_len, min(max_len, n)]` and a uniform start.
pub fn coles_sample_pairs(lengths: &[usize], cfg: &ColesConfig, n_subsequences: usize, rng: &mut Rng) -> Result<SampledPairs> {
    if lengths.len() < 2 {
        return Err(Error::input("contrastive sampling needs at least two accounts"));
    }
    let mut subsequences = Vec::new();
    let mut skipped = 0;
    for (a, &n) in lengths.iter().enumerate() {
        if n < cfg.min_len {
            skipped += 1;
            continue;
        }
        let hi = cfg.max_len.min(n);
        for _ in 0..n_subsequences {
            let len = rng.gen_range(cfg.min_len..=hi);
            let start = rng.gen_range(0..=n - len);
            subsequences.push(Subsequence { account: a, start, len });
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} accounts shorter than min_len {}", cfg.min_len);
    }
    let m = subsequences.len();
    let positives = (0..m)
        .map(|i| (0..m).filter(|&j| j != i && subsequences[j].account == subsequences[i].account).collect())
        .collect();
    let negatives = (0..m)
        .map(|i| (0..m).filter(|&j| subsequences[j].account != subsequences[i].account).collect())
        .collect();
    Ok(SampledPairs {
        subsequences,
        positives,
        negatives,
        skipped,
    })
}

/// A trained (or freshly initialized) CoLES encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ColesModel {
    pub config: ColesConfig,
    pub gru: Gru<f32>,
    pub step: u64,
}

impl ColesModel {
    pub fn init(config: &ColesConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            gru: Gru::init(INPUT_DIM, config.hidden, config.seed),
            config: config.clone(),
            step: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.hidden
    }
}

fn subsequence_slices<'a>(features: &'a [Vec<f32>], batch: &[usize], pairs: &SampledPairs) -> Vec<&'a [f32]> {
    pairs
        .subsequences
        .iter()
        .map(|s| {
            let f = &features[batch[s.account]];
            &f[s.start * INPUT_DIM..(s.start + s.len) * INPUT_DIM]
        })
        .collect()
}

/// Loss and gradient of one sampled batch.
pub fn coles_batch_gradient<F: Scalar>(gru: &Gru<F>, seqs: &[&[f32]], groups: &[usize], cfg: &ColesConfig) -> Result<(f64, Vec<F>)> {
    let packed = Packed::<F>::new(seqs, gru.input)?;
    let (emb, cache) = gru_forward(gru, &packed);
    let (loss, demb) = contrastive_loss(&emb, gru.hidden, groups, cfg.temperature, cfg.repulsion)?;
    let mut grads = vec![F::zero(); gru.values.len()];
    gru_backward(gru, &packed, &cache, &demb, &mut grads);
    Ok((loss, grads))
}

/// Trains from `model.step` to `model.config.steps`; returns the per-step losses.
pub fn coles_train(model: &mut ColesModel, features: &[Vec<f32>]) -> Result<Vec<f64>> {
    let cfg = model.config.clone();
    cfg.validate()?;
    let eligible: Vec<usize> = (0..features.len()).filter(|&i| features[i].len() / INPUT_DIM >= cfg.min_len).collect();
    if eligible.len() < 2 {
        return Err(Error::input("fewer than two accounts reach the CoLES minimum length"));
    }
    let batch_size = cfg.batch_accounts.min(eligible.len());
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    };
    let mut adam = Adam::<f32>::new(model.gru.values.len(), &adam_cfg);
    let mut losses = Vec::new();
    while model.step < cfg.steps {
        let batch = batch_indices(&eligible, cfg.seed, model.step, batch_size);
        let lengths: Vec<usize> = batch.iter().map(|&i| features[i].len() / INPUT_DIM).collect();
        let mut rng = rng_for(cfg.seed, &[TAG_SAMPLE, model.step]);
        let pairs = coles_sample_pairs(&lengths, &cfg, cfg.n_subsequences, &mut rng)?;
        let seqs = subsequence_slices(features, &batch, &pairs);
        let groups: Vec<usize> = pairs.subsequences.iter().map(|s| s.account).collect();
        let (loss, grads) = coles_batch_gradient(&model.gru, &seqs, &groups, &cfg)?;
        adam.step(&mut model.gru.values, &grads, cfg.lr)?;
        model.step += 1;
        losses.push(loss);
        if model.step % 100 == 0 {
            log::info!("coles step {} loss {:.4}", model.step, loss);
        }
    }
    Ok(losses)
}

/// Final GRU state over the full history, read in the given order.
pub fn coles_embed(transactions: &[Transaction], model: &ColesModel) -> Result<Vec<f32>> {
    if transactions.is_empty() {
        return Err(Error::input("coles_embed needs at least one transaction"));
    }
    let f = account_features(transactions);
    let packed = Packed::<f32>::new(&[&f], INPUT_DIM)?;
    Ok(gru_forward(&model.gru, &packed).0)
}

/// Embeddings of many accounts, batched by similar length.
pub fn coles_embed_accounts(accounts: &[Account], model: &ColesModel) -> Result<Vec<Vec<f32>>> {
    let features: Vec<Vec<f32>> = accounts.par_iter().map(|a| account_features(&a.transactions)).collect();
    if features.iter().any(|f| f.is_empty()) {
        return Err(Error::input("coles_embed needs at least one transaction per account"));
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by_key(|&i| (features[i].len(), i));
    let h = model.dim();
    let chunks: Vec<Vec<usize>> = order.chunks(64).map(|c| c.to_vec()).collect();
    let parts: Vec<(Vec<usize>, Vec<f32>)> = chunks
        .into_par_iter()
        .map(|idx| {
            let seqs: Vec<&[f32]> = idx.iter().map(|&i| features[i].as_slice()).collect();
            let packed = Packed::<f32>::new(&seqs, INPUT_DIM)?;
            Ok((idx, gru_forward(&model.gru, &packed).0))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); features.len()];
    for (idx, emb) in parts {
        for (k, &i) in idx.iter().enumerate() {
            out[i] = emb[k * h..(k + 1) * h].to_vec();
        }
    }
    Ok(out)
}

/// In-batch retrieval: two subsequences per account; a query is correct when
/// its nearest other subsequence (cosine) comes from the same account.
/// Returns `(accuracy, chance)` where chance is `1 / (2B - 1)`.
pub fn retrieval_accuracy(model: &ColesModel, features: &[Vec<f32>], batch_accounts: usize, n_batches: usize, seed: u64) -> Result<(f64, f64)> {
    let cfg = &model.config;
    let eligible: Vec<usize> = (0..features.len()).filter(|&i| features[i].len() / INPUT_DIM >= cfg.min_len).collect();
    let b = batch_accounts.min(eligible.len());
    if b < 2 {
        return Err(Error::input("retrieval needs at least two eligible accounts"));
    }
    let h = model.dim();
    let mut hits = 0usize;
    let mut total = 0usize;
    for k in 0..n_batches as u64 {
        let batch = batch_indices(&eligible, seed ^ TAG_RETRIEVAL, k, b);
        let lengths: Vec<usize> = batch.iter().map(|&i| features[i].len() / INPUT_DIM).collect();
        let pairs = coles_sample_pairs(&lengths, cfg, 2, &mut rng_for(seed, &[TAG_RETRIEVAL, k]))?;
        let seqs = subsequence_slices(features, &batch, &pairs);
        let packed = Packed::<f32>::new(&seqs, INPUT_DIM)?;
        let emb = gru_forward(&model.gru, &packed).0;
        let m = seqs.len();
        let unit: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let v: Vec<f64> = emb[i * h..(i + 1) * h].iter().map(|&x| x as f64).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        for i in 0..m {
            let best = (0..m)
                .filter(|&j| j != i)
                .max_by(|&a, &c| {
                    let sa: f64 = unit[i].iter().zip(&unit[a]).map(|(x, y)| x * y).sum();
                    let sc: f64 = unit[i].iter().zip(&unit[c]).map(|(x, y)| x * y).sum();
                    sa.total_cmp(&sc).then(c.cmp(&a))
                })
                .expect("at least two subsequences");
            hits += usize::from(pairs.subsequences[best].account == pairs.subsequences[i].account);
            total += 1;
        }
    }
    Ok((hits as f64 / total as f64, 1.0 / (2 * b - 1) as f64))
}

pub fn save_coles(path: &std::path::Path, model: &ColesModel, provenance: Option<&Provenance>) -> Result<()> {
    let header = CheckpointHeader {
        kind: "coles".into(),
        step: model.step,
        seed: model.config.seed,
        lineage: vec![format!("seed:{}", model.config.seed)],
        provenance: provenance.cloned(),
        model: serde_json::to_value(&model.config)?,
        layout: model.gru.groups(),
        n_values: 0,
        has_moments: false,
        payload_sha256: String::new(),
        extra: serde_json::Value::Null,
    };
    Checkpoint::new(header, model.gru.values.clone(), None)?.save(path)
}

pub fn load_coles(path: &std::path::Path) -> Result<ColesModel> {
    let ck = Checkpoint::load(path)?;
    let corrupt = |reason: String| Error::CorruptFile {
        path: path.to_path_buf(),
        reason,
    };
    if ck.header.kind != "coles" {
        return Err(corrupt(format!("expected a coles checkpoint, found `{}`", ck.header.kind)));
    }
    let config: ColesConfig = serde_json::from_value(ck.header.model).map_err(|e| corrupt(e.to_string()))?;
    if ck.values.len() != Gru::<f32>::n_params(INPUT_DIM, config.hidden) {
        return Err(corrupt("parameter count does not match the stored config".into()));
    }
    Ok(ColesModel {
        gru: Gru {
            input: INPUT_DIM,
            hidden: config.hidden,
            values: ck.values,
        },
        config,
        step: ck.header.step,
    })
}
