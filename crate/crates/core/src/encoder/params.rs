//! Flat parameter storage with a named layout.
//!
//! Every tensor is a contiguous row-major block of one `Vec`. Offsets are fixed
//! by the config alone, so checkpoints are a raw dump in layout order.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::ModelConfig;
use crate::util::rng_for;

pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Normal,
    Zero,
    One,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamGroup {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub groups: Vec<ParamGroup>,
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub layers: Vec<LayerOffsets>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub mlm_bias: usize,
    pub total: usize,
}

struct Builder {
    groups: Vec<ParamGroup>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let offset = self.next;
        let g = ParamGroup {
            name,
            offset,
            shape,
            init,
        };
        self.next += g.len();
        self.groups.push(g);
        offset
    }
}

impl ParamLayout {
    pub fn new(c: &ModelConfig) -> Self {
        let (d, f) = (c.d_model, c.d_ff);
        let mut b = Builder {
            groups: Vec::new(),
            next: 0,
        };
        let tok_emb = b.add("tok_emb".into(), vec![c.vocab_size, d], Init::Normal);
        let pos_emb = b.add("pos_emb".into(), vec![c.max_context, d], Init::Normal);
        let mut layers = Vec::with_capacity(c.n_layers);
        for l in 0..c.n_layers {
            let mut add = |n: &str, shape: Vec<usize>, init| b.add(format!("layer{l}.{n}"), shape, init);
            layers.push(LayerOffsets {
                ln1_g: add("ln1.gain", vec![d], Init::One),
                ln1_b: add("ln1.bias", vec![d], Init::Zero),
                wq: add("attn.wq", vec![d, d], Init::Normal),
                bq: add("attn.bq", vec![d], Init::Zero),
                wk: add("attn.wk", vec![d, d], Init::Normal),
                bk: add("attn.bk", vec![d], Init::Zero),
                wv: add("attn.wv", vec![d, d], Init::Normal),
                bv: add("attn.bv", vec![d], Init::Zero),
                wo: add("attn.wo", vec![d, d], Init::Normal),
                bo: add("attn.bo", vec![d], Init::Zero),
                ln2_g: add("ln2.gain", vec![d], Init::One),
                ln2_b: add("ln2.bias", vec![d], Init::Zero),
                w1: add("ffn.w1", vec![d, f], Init::Normal),
                b1: add("ffn.b1", vec![f], Init::Zero),
                w2: add("ffn.w2", vec![f, d], Init::Normal),
                b2: add("ffn.b2", vec![d], Init::Zero),
            });
        }
        let lnf_g = b.add("final_ln.gain".into(), vec![d], Init::One);
        let lnf_b = b.add("final_ln.bias".into(), vec![d], Init::Zero);
        let mlm_bias = b.add("mlm.bias".into(), vec![c.vocab_size], Init::Zero);
        Self {
            total: b.next,
            groups: b.groups,
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            mlm_bias,
        }
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params<F> {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub values: Vec<F>,
}

impl<F: Scalar> Params<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let layout = ParamLayout::new(config);
        Self {
            config: config.clone(),
            values: vec![F::zero(); layout.total],
            layout,
        }
    }

    pub fn from_values(config: &ModelConfig, values: Vec<F>) -> crate::Result<Self> {
        let layout = ParamLayout::new(config);
        if values.len() != layout.total {
            return Err(crate::Error::ShapeMismatch {
                expected: layout.total,
                actual: values.len(),
            });
        }
        Ok(Self {
            config: config.clone(),
            layout,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, offset: usize, len: usize) -> &[F] {
        &self.values[offset..offset + len]
    }

    pub fn group_values(&self, name: &str) -> Option<&[F]> {
        self.layout.group(name).map(|g| &self.values[g.range()])
    }

    pub fn cast<G: Scalar>(&self) -> Params<G> {
        Params {
            config: self.config.clone(),
            layout: self.layout.clone(),
            values: self.values.iter().map(|&x| G::from_f64_lossy(x.as_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Normal(0, 0.02) weights, zero biases, unit layer-norm gains.
///
/// Each group draws from its own stream so adding layers never perturbs the
/// values of earlier groups.
pub fn init_params<F: Scalar>(config: &ModelConfig, seed: u64) -> Params<F> {
    let mut p = Params::<F>::zeros(config);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    for (gi, g) in p.layout.groups.clone().iter().enumerate() {
        let dst = &mut p.values[g.range()];
        match g.init {
            Init::Zero => dst.fill(F::zero()),
            Init::One => dst.fill(F::one()),
            Init::Normal => {
                let mut rng = rng_for(seed, &[0x1417, gi as u64]);
                for x in dst.iter_mut() {
                    *x = F::from_f64_lossy(normal.sample(&mut rng));
                }
            }
        }
    }
    p
}
