//! Run configuration: one TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::ColesConfig;
use crate::encoder::ModelConfig;
use crate::grammar::BucketConfig;
use crate::pretrain::PretrainConfig;
use crate::probe::ProbeConfig;
use crate::synthgen::{GeneratorConfig, Provenance};
use crate::tokenizer::TokenizerConfig;
use crate::util::sha256_hex;
use crate::{Error, Result};

pub const METHODS: [&str; 4] = ["bert", "distilbert", "coles", "feateng"];

/// Artifact locations. Relative paths resolve against `out_dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub out_dir: PathBuf,
    pub corpus: PathBuf,
    pub labels: PathBuf,
    pub vocab: PathBuf,
    pub checkpoints: PathBuf,
    pub logs: PathBuf,
    pub embeddings: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
            corpus: PathBuf::from("corpus.jsonl"),
            labels: PathBuf::from("labels.jsonl"),
            vocab: PathBuf::from("vocab.txt"),
            checkpoints: PathBuf::from("checkpoints"),
            logs: PathBuf::from("logs"),
            embeddings: PathBuf::from("embeddings"),
            reports: PathBuf::from("reports"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabSettings {
    pub vocab_size: usize,
    pub min_frequency: u64,
    pub buckets: BucketConfig,
}

impl Default for VocabSettings {
    fn default() -> Self {
        let t = TokenizerConfig::default();
        Self {
            vocab_size: t.target_size,
            min_frequency: t.min_frequency,
            buckets: BucketConfig::default(),
        }
    }
}

#[derive(Clone, Default, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillSettings {
    /// Student steps; 0 reuses the teacher's `total_steps`.
    pub total_steps: u64,
    /// Student depth; 0 halves the teacher.
    pub n_layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveSettings {
    /// Tasks probed at every checkpoint tick during pretraining.
    pub tasks: Vec<String>,
    /// Accounts (in corpus order) used by those probes; 0 = all.
    pub max_accounts: usize,
}

impl Default for CurveSettings {
    fn default() -> Self {
        Self {
            tasks: ["gender", "nsf", "act_prof", "state_1"].map(String::from).to_vec(),
            max_accounts: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed; copied into every sub-config seed.
    pub seed: u64,
    /// Worker cap; 0 uses every core. Not part of the config hash.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub methods: Vec<String>,
    pub paths: Paths,
    pub generator: GeneratorConfig,
    pub vocab: VocabSettings,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub distill: DistillSettings,
    pub coles: ColesConfig,
    pub probe: ProbeConfig,
    pub curve: CurveSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            methods: METHODS.map(String::from).to_vec(),
            paths: Paths::default(),
            generator: GeneratorConfig::default(),
            vocab: VocabSettings::default(),
            model: ModelConfig::default(),
            pretrain: PretrainConfig::default(),
            distill: DistillSettings::default(),
            coles: ColesConfig::default(),
            probe: ProbeConfig::default(),
            curve: CurveSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Propagates the master seed and checks every sub-config.
    pub fn finish(mut self) -> Result<Self> {
        self.generator.seed = self.seed;
        self.pretrain.seed = self.seed;
        self.coles.seed = self.seed;
        self.probe.seed = self.seed;
        self.generator.validate()?;
        self.vocab.buckets.validate()?;
        self.pretrain.validate()?;
        self.coles.validate()?;
        for m in &self.methods {
            if !METHODS.contains(&m.as_str()) {
                return Err(Error::config(format!("unknown method `{m}`; expected one of {METHODS:?}")));
            }
        }
        Ok(self)
    }

    pub fn tokenizer(&self) -> TokenizerConfig {
        TokenizerConfig {
            target_size: self.vocab.vocab_size,
            min_frequency: self.vocab.min_frequency,
        }
    }

    /// Hex sha256 prefix of the canonical JSON form. Paths and the thread cap
    /// do not change any output bytes, so they are excluded.
    pub fn config_hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("paths");
        }
        let json = serde_json::to_string(&value)?;
        Ok(sha256_hex(json.as_bytes())[..16].to_string())
    }

    pub fn provenance(&self) -> Result<Provenance> {
        Ok(Provenance {
            config_hash: self.config_hash()?,
            seed: self.seed,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.paths.out_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.paths.corpus)
    }

    pub fn labels_path(&self) -> PathBuf {
        self.resolve(&self.paths.labels)
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.resolve(&self.paths.vocab)
    }

    /// Directory of one method's checkpoints.
    pub fn checkpoint_dir(&self, method: &str) -> PathBuf {
        self.resolve(&self.paths.checkpoints).join(method)
    }

    pub fn final_checkpoint(&self, method: &str) -> PathBuf {
        self.checkpoint_dir(method).join("final.ckpt")
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.resolve(&self.paths.logs)
    }

    pub fn embeddings_path(&self, method: &str) -> PathBuf {
        self.resolve(&self.paths.embeddings).join(format!("{method}.csv"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.resolve(&self.paths.reports)
    }

    pub fn student_model(&self) -> ModelConfig {
        let mut m = self.model.distilled();
        if self.distill.n_layers > 0 {
            m.n_layers = self.distill.n_layers;
        }
        m
    }

    pub fn student_pretrain(&self) -> PretrainConfig {
        let mut p = self.pretrain.clone();
        if self.distill.total_steps > 0 {
            p.total_steps = self.distill.total_steps;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash_stability() {
        let cfg = RunConfig::default().finish().unwrap();
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back.finish().unwrap(), cfg);
        let mut threaded = cfg.clone();
        threaded.threads = 3;
        threaded.paths.out_dir = "elsewhere".into();
        assert_eq!(threaded.config_hash().unwrap(), cfg.config_hash().unwrap());
        let mut reseeded = cfg.clone();
        reseeded.seed = 1;
        assert_ne!(reseeded.finish().unwrap().config_hash().unwrap(), cfg.config_hash().unwrap());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 7\n[generator]\nn_accounts = 12\n").unwrap();
        let cfg = cfg.finish().unwrap();
        assert_eq!(cfg.generator.n_accounts, 12);
        assert_eq!(cfg.generator.seed, 7);
        assert_eq!(cfg.model, ModelConfig::default());
    }

    #[test]
    fn unknown_method_is_rejected() {
        let cfg = RunConfig {
            methods: vec!["gpt".into()],
            ..Default::default()
        };
        assert!(cfg.finish().is_err());
    }
}
