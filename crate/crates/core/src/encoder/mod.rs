//! Bidirectional transformer encoder with exact analytic gradients.
//!
//! The same code serves the full model and the depth-reduced distilled
//! student; they differ only in [`ModelConfig::n_layers`].

mod checkpoint;
mod loss;
mod model;
mod params;
pub mod scalar;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use loss::{distill_loss, mlm_loss, DistillWeights};
pub use model::{
    accumulate_gradients, backward, backward_from_logits, cls_embedding, forward, forward_cached, loss_only,
    ForwardCache, ForwardOutput, LayerCache, LossSpec,
};
pub use params::{init_params, Init, LayerOffsets, ParamGroup, ParamLayout, Params, INIT_STD};
pub use scalar::Scalar;

use crate::synthgen::Provenance;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub max_context: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub dropout_rate: f64,
    pub layernorm_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 8192,
            max_context: 512,
            d_model: 128,
            n_heads: 4,
            n_layers: 4,
            d_ff: 512,
            dropout_rate: 0.1,
            layernorm_epsilon: 1e-5,
        }
    }
}

impl ModelConfig {
    /// The configuration used for finite-difference checks.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            max_context: 16,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            dropout_rate: 0.0,
            layernorm_epsilon: 1e-5,
        }
    }

    /// Same widths with half the depth (at least one layer).
    pub fn distilled(&self) -> Self {
        Self {
            n_layers: (self.n_layers / 2).max(1),
            ..self.clone()
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("max_context", self.max_context),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_ff", self.d_ff),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("{name} must be positive")));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must be in [0, 1)"));
        }
        if !(self.layernorm_epsilon > 0.0) {
            return Err(Error::config("layernorm_epsilon must be positive"));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn n_params(&self) -> usize {
        let (v, c, d, f, l) = (self.vocab_size, self.max_context, self.d_model, self.d_ff, self.n_layers);
        let per_layer = 4 * (d * d + d) + 2 * d * f + f + d + 4 * d;
        v * d + c * d + l * per_layer + 2 * d + v
    }
}

/// Saves encoder weights (and optionally Adam moments) with run metadata.
#[allow(clippy::too_many_arguments)]
pub fn save_encoder(
    path: &std::path::Path,
    params: &Params<f32>,
    moments: Option<(Vec<f32>, Vec<f32>)>,
    step: u64,
    seed: u64,
    lineage: Vec<String>,
    provenance: Option<&Provenance>,
    extra: serde_json::Value,
) -> Result<()> {
    let header = CheckpointHeader {
        kind: "encoder".into(),
        step,
        seed,
        lineage,
        provenance: provenance.cloned(),
        model: serde_json::to_value(&params.config)?,
        layout: params.layout.groups.clone(),
        n_values: 0,
        has_moments: false,
        payload_sha256: String::new(),
        extra,
    };
    Checkpoint::new(header, params.values.clone(), moments)?.save(path)
}

/// Loads an encoder checkpoint, checking that its layout matches its config.
pub fn load_encoder(path: &std::path::Path) -> Result<(Params<f32>, Checkpoint)> {
    let ck = Checkpoint::load(path)?;
    let corrupt = |reason: String| Error::CorruptFile {
        path: path.to_path_buf(),
        reason,
    };
    if ck.header.kind != "encoder" {
        return Err(corrupt(format!("expected an encoder checkpoint, found `{}`", ck.header.kind)));
    }
    let config: ModelConfig = serde_json::from_value(ck.header.model.clone()).map_err(|e| corrupt(e.to_string()))?;
    config.validate()?;
    let params = Params::from_values(&config, ck.values.clone())?;
    if params.layout.groups != ck.header.layout {
        return Err(corrupt("parameter layout does not match the stored config".into()));
    }
    Ok((params, ck))
}
