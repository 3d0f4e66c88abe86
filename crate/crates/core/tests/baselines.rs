// Oracles index coordinates directly, as the math they mirror does.
#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txnfm::baselines::coles::{
    account_features, coles_batch_gradient, coles_embed, coles_sample_pairs, coles_train, contrastive_loss,
    gru_forward, load_coles, retrieval_accuracy, save_coles, ColesConfig, ColesModel, Gru, Packed, INPUT_DIM,
};
use txnfm::baselines::{feat_eng, feature_names, schema_len};
use txnfm::synthgen::{generate_corpus, Direction, GeneratorConfig, Transaction};
use txnfm::util::rng_for;

fn random_tx(rng: &mut ChaCha8Rng, ts: i64) -> Transaction {
    Transaction {
        ts,
        dir: if rng.gen_bool(0.5) { Direction::Debit } else { Direction::Credit },
        amount_cents: rng.gen_range(1..2_000_000),
        desc: ["walmart", "payroll acme corp", "zelle payment", "rent payment"][rng.gen_range(0..4)].into(),
    }
}

/// Welford running moments plus running extrema, fed one value at a time.
#[derive(Default)]
struct Streaming {
    n: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Streaming {
    fn push(&mut self, x: f64) {
        if self.n == 0.0 {
            self.min = x;
            self.max = x;
        }
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn stats(&self) -> Vec<f64> {
        if self.n == 0.0 {
            return vec![0.0; 6];
        }
        vec![self.mean * self.n, self.n, self.mean, self.min, self.max, (self.m2 / self.n).sqrt()]
    }
}

#[test]
fn feat_eng_matches_streaming_oracle_on_random_accounts() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let txs: Vec<Transaction> = (0..n).map(|i| random_tx(&mut rng, i)).collect();
        let (mut all, mut deb, mut cred) = (Streaming::default(), Streaming::default(), Streaming::default());
        for t in &txs {
            let x = t.signed_dollars();
            all.push(x);
            match t.dir {
                Direction::Debit => deb.push(x),
                Direction::Credit => cred.push(x),
            }
        }
        let mut expected = all.stats();
        for g in [&deb, &cred] {
            expected.extend(g.stats());
            expected.push(f64::from(g.n > 0.0));
        }
        let got = feat_eng(&txs).unwrap();
        assert_eq!(got.len(), schema_len());
        for (k, (a, b)) in got.iter().zip(&expected).enumerate() {
            let tol = 1e-9 * b.abs().max(1.0);
            assert!((a - b).abs() <= tol, "{}: {a} vs {b}", feature_names()[k]);
        }
    }
}

proptest! {
    #[test]
    fn feat_eng_is_permutation_invariant(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let txs: Vec<Transaction> = (0..n).map(|i| random_tx(&mut rng, i as i64)).collect();
        let mut shuffled = txs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(feat_eng(&txs).unwrap(), feat_eng(&shuffled).unwrap());
    }

    #[test]
    fn sampled_windows_respect_bounds(lengths in prop::collection::vec(0usize..150, 2..8), seed in any::<u64>()) {
        let cfg = ColesConfig { min_len: 10, max_len: 40, ..Default::default() };
        let pairs = coles_sample_pairs(&lengths, &cfg, 3, &mut rng_for(seed, &[1])).unwrap();
        let eligible = lengths.iter().filter(|&&n| n >= 10).count();
        prop_assert_eq!(pairs.skipped, lengths.len() - eligible);
        prop_assert_eq!(pairs.subsequences.len(), 3 * eligible);
        for (i, s) in pairs.subsequences.iter().enumerate() {
            let n = lengths[s.account];
            prop_assert!(s.len >= 10 && s.len <= 40.min(n));
            prop_assert!(s.start + s.len <= n);
            prop_assert_eq!(pairs.positives[i].len(), 2);
            prop_assert_eq!(pairs.negatives[i].len(), 3 * (eligible - 1));
        }
    }
}

#[test]
fn feat_eng_rejects_empty_input() {
    assert!(feat_eng(&[]).is_err());
}

#[test]
fn two_accounts_two_subsequences_each() {
    let cfg = ColesConfig::default();
    let pairs = coles_sample_pairs(&[30, 30], &cfg, 2, &mut rng_for(0, &[0])).unwrap();
    for i in 0..4 {
        assert_eq!(pairs.positives[i].len(), 1);
        assert_eq!(pairs.negatives[i].len(), 2);
    }
}

#[test]
fn short_account_contributes_nothing() {
    let cfg = ColesConfig::default();
    let pairs = coles_sample_pairs(&[30, 5, 30], &cfg, 2, &mut rng_for(0, &[0])).unwrap();
    assert_eq!(pairs.skipped, 1);
    assert!(pairs.subsequences.iter().all(|s| s.account != 1));
    assert!(coles_sample_pairs(&[30], &cfg, 2, &mut rng_for(0, &[0])).is_err());
}

#[test]
fn sampled_lengths_are_uniform() {
    let cfg = ColesConfig { min_len: 10, max_len: 19, ..Default::default() };
    let mut rng = rng_for(3, &[0]);
    let mut counts = [0usize; 10];
    let mut draws = 0;
    while draws < 10_000 {
        let pairs = coles_sample_pairs(&[50, 50], &cfg, 5, &mut rng).unwrap();
        for s in pairs.subsequences {
            counts[s.len - 10] += 1;
            draws += 1;
        }
    }
    let p = 0.1;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gru_contrastive_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let input = 4;
    let mut gru = Gru::<f64>::init(input, 3, 11);
    for v in gru.values.iter_mut() {
        *v *= 2.0;
    }
    let lens = [5usize, 3, 4, 1, 2];
    let data: Vec<Vec<f32>> = lens.iter().map(|&l| (0..l * input).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let seqs: Vec<&[f32]> = data.iter().map(|d| d.as_slice()).collect();
    let groups = [0, 0, 1, 1, 2];
    for repulsion in [0.0, 1.0] {
        let cfg = ColesConfig { temperature: 0.5, repulsion, ..Default::default() };
        let (_, grads) = coles_batch_gradient(&gru, &seqs, &groups, &cfg).unwrap();
        let h = 1e-6;
        for k in 0..gru.values.len() {
            let orig = gru.values[k];
            gru.values[k] = orig + h;
            let up = coles_batch_gradient(&gru, &seqs, &groups, &cfg).unwrap().0;
            gru.values[k] = orig - h;
            let down = coles_batch_gradient(&gru, &seqs, &groups, &cfg).unwrap().0;
            gru.values[k] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(rel_err(fd, grads[k]) < 1e-5, "param {k}: fd {fd} analytic {}", grads[k]);
        }
    }
}

#[test]
fn pure_attraction_shrinks_pair_distance_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut e: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cos = |e: &[f64]| {
        let (a, b) = e.split_at(4);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    let mut prev = 1.0 - cos(&e);
    // Stop once the pair is collinear to rounding.
    while prev > 1e-12 {
        let (_, g) = contrastive_loss(&e, 4, &[0, 0], 0.1, 0.0).unwrap();
        for (x, gx) in e.iter_mut().zip(&g) {
            *x -= 0.001 * gx;
        }
        let d = 1.0 - cos(&e);
        assert!(d < prev, "{d} >= {prev}");
        prev = d;
    }
}

fn small_corpus(n: usize, seed: u64) -> Vec<Vec<f32>> {
    let corpus = generate_corpus(&GeneratorConfig { n_accounts: n, seed, ..Default::default() }).unwrap();
    corpus.accounts.iter().map(|a| account_features(&a.transactions)).collect()
}

#[test]
fn loss_strictly_decreases_on_a_fixed_batch() {
    let features = small_corpus(16, 2);
    let cfg = ColesConfig { hidden: 16, ..Default::default() };
    let model = ColesModel::init(&cfg).unwrap();
    let mut gru = model.gru.clone();
    let idx: Vec<usize> = (0..features.len()).filter(|&i| features[i].len() / INPUT_DIM >= cfg.min_len).take(8).collect();
    let lengths: Vec<usize> = idx.iter().map(|&i| features[i].len() / INPUT_DIM).collect();
    let pairs = coles_sample_pairs(&lengths, &cfg, 3, &mut rng_for(0, &[0])).unwrap();
    let seqs: Vec<&[f32]> = pairs
        .subsequences
        .iter()
        .map(|s| &features[idx[s.account]][s.start * INPUT_DIM..(s.start + s.len) * INPUT_DIM])
        .collect();
    let groups: Vec<usize> = pairs.subsequences.iter().map(|s| s.account).collect();
    let mut prev = f64::INFINITY;
    for step in 0..100 {
        let (loss, grads) = coles_batch_gradient(&gru, &seqs, &groups, &cfg).unwrap();
        assert!(loss < prev, "step {step}: {loss} >= {prev}");
        prev = loss;
        for (w, g) in gru.values.iter_mut().zip(&grads) {
            *w -= 0.005 * g;
        }
    }
}

#[test]
fn coles_embed_is_deterministic_and_order_sensitive() {
    let corpus = generate_corpus(&GeneratorConfig { n_accounts: 20, seed: 4, ..Default::default() }).unwrap();
    let model = ColesModel::init(&ColesConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for acct in corpus.accounts.iter().filter(|a| a.transactions.len() >= 2) {
        let e = coles_embed(&acct.transactions, &model).unwrap();
        assert_eq!(e, coles_embed(&acct.transactions, &model).unwrap());
        assert_eq!(e.len(), 64);
        let mut shuffled = acct.transactions.clone();
        use rand::seq::SliceRandom;
        loop {
            shuffled.shuffle(&mut rng);
            if shuffled != acct.transactions {
                break;
            }
        }
        assert_ne!(e, coles_embed(&shuffled, &model).unwrap());
    }
    assert!(coles_embed(&[], &model).is_err());
}

#[test]
fn single_transaction_embedding_is_one_gru_step() {
    let model = ColesModel::init(&ColesConfig { hidden: 5, ..Default::default() }).unwrap();
    let tx = Transaction { ts: 0, dir: Direction::Debit, amount_cents: 1234, desc: "netflix.com".into() };
    let got = coles_embed(std::slice::from_ref(&tx), &model).unwrap();
    let x = account_features(std::slice::from_ref(&tx));
    let h = 5;
    let g3 = 3 * h;
    let w = &model.gru.values;
    let (bx, uh) = (INPUT_DIM * g3, INPUT_DIM * g3 + g3);
    let bh = uh + h * g3;
    let pre = |c: usize| -> f64 {
        (0..INPUT_DIM).map(|i| x[i] as f64 * w[i * g3 + c] as f64).sum::<f64>() + w[bx + c] as f64
    };
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for j in 0..h {
        let z = sig(pre(j) + w[bh + j] as f64);
        let r = sig(pre(h + j) + w[bh + h + j] as f64);
        let n = (pre(2 * h + j) + r * w[bh + 2 * h + j] as f64).tanh();
        assert!(((1.0 - z) * n - got[j] as f64).abs() < 1e-5);
    }
}

#[test]
fn packed_batch_matches_individual_runs() {
    let features = small_corpus(6, 8);
    let model = ColesModel::init(&ColesConfig { hidden: 8, ..Default::default() }).unwrap();
    let seqs: Vec<&[f32]> = features.iter().map(|f| f.as_slice()).collect();
    let packed = Packed::<f32>::new(&seqs, INPUT_DIM).unwrap();
    let (all, _) = gru_forward(&model.gru, &packed);
    for (i, s) in seqs.iter().enumerate() {
        let one = gru_forward(&model.gru, &Packed::<f32>::new(&[s], INPUT_DIM).unwrap()).0;
        for (a, b) in one.iter().zip(&all[i * 8..(i + 1) * 8]) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn training_beats_chance_retrieval_and_round_trips() {
    let features = small_corpus(300, 12);
    let cfg = ColesConfig { hidden: 32, steps: 150, batch_accounts: 16, n_subsequences: 3, seed: 3, ..Default::default() };
    let mut model = ColesModel::init(&cfg).unwrap();
    let (untrained, chance) = retrieval_accuracy(&model, &features, 16, 10, 99).unwrap();
    let losses = coles_train(&mut model, &features).unwrap();
    assert_eq!(losses.len(), 150);
    let (trained, _) = retrieval_accuracy(&model, &features, 16, 10, 99).unwrap();
    println!("retrieval untrained {untrained:.3} trained {trained:.3} chance {chance:.3}");
    assert!(trained >= 2.0 * chance);
    assert!(trained > untrained);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coles.ckpt");
    save_coles(&path, &model, None).unwrap();
    assert_eq!(load_coles(&path).unwrap(), model);
}
