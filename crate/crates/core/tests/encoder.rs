use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use txnfm::encoder::{
    backward, cls_embedding, forward, forward_cached, init_params, loss_only, DistillWeights, LossSpec, ModelConfig,
    Params,
};
use txnfm::tokenizer::{TokenSequence, CLS_ID, PAD_ID};

const VOCAB: usize = 23;

fn random_seq(rng: &mut ChaCha8Rng, ctx: usize, n_real: usize) -> TokenSequence {
    let mut ids = vec![CLS_ID];
    ids.extend((1..n_real).map(|_| rng.gen_range(5..VOCAB as u32)));
    TokenSequence::from_ids(ids, ctx)
}

/// Larger-than-init weights so every nonlinearity is exercised.
fn spread_params(cfg: &ModelConfig, seed: u64) -> Params<f64> {
    let mut p = init_params::<f64>(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for x in p.values.iter_mut() {
        *x += rng.gen_range(-0.4..0.4);
    }
    p
}

/// Relative error with a 1e-6 denominator floor: central differences at h = 1e-5
/// carry ~1e-11 rounding noise, so exactly-zero gradients (the key bias, which
/// shifts every score of a softmax row equally) are compared on that scale.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn fd_check(spec_for: impl Fn(&Params<f64>) -> f64, grads: &[f64], params: &Params<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for g in &params.layout.groups {
        for _ in 0..20 {
            let i = g.offset + rng.gen_range(0..g.len());
            let mut up = params.clone();
            up.values[i] += h;
            let mut dn = params.clone();
            dn.values[i] -= h;
            let fd = (spec_for(&up) - spec_for(&dn)) / (2.0 * h);
            let e = rel_err(fd, grads[i]);
            assert!(e < 1e-4, "{} coord {i}: fd {fd} analytic {}", g.name, grads[i]);
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn mlm_gradient_matches_finite_differences() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_seq(&mut rng, cfg.max_context, 12);
    let positions = [0usize, 3, 7, 11];
    let targets = [6u32, 9, 12, 9];
    let spec = LossSpec::Mlm {
        positions: &positions,
        targets: &targets,
    };
    let (_, grads) = backward(&params, &seq, spec).unwrap();
    fd_check(|p| loss_only(p, &seq, spec).unwrap(), &grads, &params, &mut rng);
}

#[test]
fn distill_gradient_matches_finite_differences() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seq = random_seq(&mut rng, cfg.max_context, 16);
    let positions = [2usize, 5, 15];
    let targets = [7u32, 8, 20];
    let teacher: Vec<f64> = (0..positions.len() * VOCAB).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let spec = LossSpec::Distill {
        positions: &positions,
        targets: &targets,
        teacher_logits: &teacher,
        weights: DistillWeights {
            temperature: 2.0,
            w_soft: 0.6,
            w_hard: 0.4,
        },
    };
    let (_, grads) = backward(&params, &seq, spec).unwrap();
    fd_check(|p| loss_only(p, &seq, spec).unwrap(), &grads, &params, &mut rng);
}

#[test]
fn parameter_count_matches_shape_arithmetic() {
    let cfg = ModelConfig::default();
    let p = init_params::<f32>(&cfg, 0);
    let (v, c, d, f) = (8192usize, 512usize, 128usize, 512usize);
    let embeddings = v * d + c * d;
    let attention = 4 * d * d + 4 * d;
    let norms = 2 * 2 * d;
    let ffn = d * f + f + f * d + d;
    let head = 2 * d + v;
    assert_eq!(p.values.len(), embeddings + 4 * (attention + norms + ffn) + head);
    assert_eq!(p.values.len(), cfg.n_params());
}

#[test]
fn init_is_deterministic_with_unit_gains_and_zero_biases() {
    let cfg = ModelConfig::tiny(VOCAB);
    let a = init_params::<f32>(&cfg, 9);
    assert_eq!(a.values, init_params::<f32>(&cfg, 9).values);
    assert_ne!(a.values, init_params::<f32>(&cfg, 10).values);
    for g in &a.layout.groups {
        let vals = &a.values[g.range()];
        if g.name.ends_with("gain") {
            assert!(vals.iter().all(|&x| x == 1.0), "{}", g.name);
        } else if g.name.contains(".b") || g.name.ends_with("bias") {
            assert!(vals.iter().all(|&x| x == 0.0), "{}", g.name);
        }
    }
}

#[test]
fn padded_ids_do_not_affect_any_output() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let seq = random_seq(&mut rng, cfg.max_context, 9);
    let base = forward(&params, &seq, &[]).unwrap();
    let mut altered = seq.clone();
    altered.ids[10] = 17;
    altered.ids[13] = 5;
    altered.ids.swap(10, 13);
    let out = forward(&params, &altered, &[]).unwrap();
    assert_eq!(base.hidden_states, out.hidden_states);
    assert_eq!(base.cls_vector, out.cls_vector);
}

#[test]
fn identical_tokens_without_positions_give_identical_states() {
    let cfg = ModelConfig::tiny(VOCAB);
    let mut params = spread_params(&cfg, 7);
    let pos = params.layout.group("pos_emb").unwrap().range();
    params.values[pos].fill(0.0);
    let seq = TokenSequence::from_ids(vec![12; 10], cfg.max_context);
    let out = forward(&params, &seq, &[]).unwrap();
    let d = cfg.d_model;
    for i in 1..10 {
        for j in 0..d {
            assert!((out.hidden_states[i * d + j] - out.hidden_states[j]).abs() < 1e-12);
        }
    }
    assert!(out.hidden_states[10 * d..].iter().all(|&x| x == 0.0));
}

#[test]
fn attention_rows_are_distributions() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let seq = random_seq(&mut rng, cfg.max_context, 11);
    let (_, cache) = forward_cached(&params, &seq, &[], None).unwrap();
    let n = cache.n;
    for layer in &cache.layers {
        for row in layer.probs.chunks(n) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn cls_embedding_is_position_zero_and_sensitive() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.gen_range(2..=cfg.max_context);
        let seq = random_seq(&mut rng, cfg.max_context, n);
        let out = forward(&params, &seq, &[]).unwrap();
        let cls = cls_embedding(&params, &seq).unwrap();
        assert_eq!(cls, out.hidden_states[..cfg.d_model]);
        assert_eq!(cls, cls_embedding(&params, &seq).unwrap());
        let mut changed = seq.clone();
        let i = rng.gen_range(1..n);
        changed.ids[i] = if changed.ids[i] == 5 { 6 } else { 5 };
        assert_ne!(cls, cls_embedding(&params, &changed).unwrap());
    }
}

#[test]
fn padded_position_rows_get_zero_gradient() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = spread_params(&cfg, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let seq = random_seq(&mut rng, cfg.max_context, 6);
    let (_, grads) = backward(
        &params,
        &seq,
        LossSpec::Mlm {
            positions: &[1, 4],
            targets: &[8, 9],
        },
    )
    .unwrap();
    let pos = params.layout.pos_emb;
    let d = cfg.d_model;
    assert!(grads[pos + 6 * d..pos + cfg.max_context * d].iter().all(|&g| g == 0.0));
    assert!(grads[pos..pos + 6 * d].iter().any(|&g| g != 0.0));
}

#[test]
fn small_gradient_step_lowers_the_loss() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = init_params::<f64>(&cfg, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let seq = random_seq(&mut rng, cfg.max_context, 14);
    let spec = LossSpec::Mlm {
        positions: &[2, 6, 9],
        targets: &[10, 11, 12],
    };
    let (l0, g) = backward(&params, &seq, spec).unwrap();
    let mut stepped = params.clone();
    for (x, gi) in stepped.values.iter_mut().zip(&g) {
        *x -= 0.05 * gi;
    }
    assert!(loss_only(&stepped, &seq, spec).unwrap() < l0);
}

#[test]
fn output_head_reads_the_token_embedding_table() {
    let cfg = ModelConfig::tiny(VOCAB);
    let mut params = spread_params(&cfg, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let seq = random_seq(&mut rng, cfg.max_context, 8);
    // Changing an embedding row of a token absent from the input moves only its own logit.
    let absent = (5..VOCAB as u32).find(|t| !seq.ids[..8].contains(t)).unwrap() as usize;
    let before = forward(&params, &seq, &[3]).unwrap();
    let d = cfg.d_model;
    let row = params.layout.tok_emb + absent * d;
    let delta: Vec<f64> = (0..d).map(|j| 0.1 * (j as f64 + 1.0)).collect();
    for (v, dv) in params.values[row..row + d].iter_mut().zip(&delta) {
        *v += dv;
    }
    let after = forward(&params, &seq, &[3]).unwrap();
    assert_eq!(before.hidden_states, after.hidden_states);
    let h = &before.hidden_states[3 * d..4 * d];
    let expect: f64 = h.iter().zip(&delta).map(|(a, b)| a * b).sum();
    for t in 0..VOCAB {
        let diff = after.mlm_logits[t] - before.mlm_logits[t];
        if t == absent {
            assert!((diff - expect).abs() < 1e-12);
        } else {
            assert_eq!(diff, 0.0);
        }
    }
}

#[test]
fn shape_errors_are_reported() {
    let cfg = ModelConfig::tiny(VOCAB);
    let params = init_params::<f64>(&cfg, 0);
    let short = TokenSequence::from_ids(vec![CLS_ID, 5], 8);
    assert!(forward(&params, &short, &[]).is_err());
    let mut bad = TokenSequence::from_ids(vec![CLS_ID, 5], cfg.max_context);
    bad.ids[1] = VOCAB as u32;
    assert!(forward(&params, &bad, &[]).is_err());
    let ok = TokenSequence::from_ids(vec![CLS_ID, 5, PAD_ID], cfg.max_context);
    assert!(forward(&params, &ok, &[5]).is_err());
}
