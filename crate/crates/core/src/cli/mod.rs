//! The `txnfm` command-line tool.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::*;
pub use config::{RunConfig, METHODS};

use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "txnfm", version, about = "Transaction foundation model pipeline")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread cap (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory for every artifact.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Continue from the newest step checkpoint.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the corpus and its labels.
    Generate {
        #[arg(long)]
        n_accounts: Option<usize>,
        #[arg(long)]
        signal_strength: Option<f64>,
    },
    /// Learn the subword vocabulary from the corpus.
    TrainVocab {
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Masked-language-model pretraining of the full encoder.
    Pretrain(TrainArgs),
    /// Distill the pretrained encoder into a shallower student.
    Distill(TrainArgs),
    /// Train the contrastive GRU baseline.
    TrainColes {
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Write one vector per account for a method.
    Embed {
        #[arg(long)]
        method: String,
    },
    /// Linear-probe every configured method on every task.
    Probe {
        /// Comma-separated subset of bert,distilbert,coles,feateng.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Render tables, rank histogram and learning curves.
    Report,
    /// Run every stage in order.
    All,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

impl Cli {
    /// File config, then global flags, then command flags.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(o) = &self.out {
            cfg.paths.out_dir = o.clone();
        }
        let train = |cfg: &mut RunConfig, a: &TrainArgs, student: bool| {
            if let Some(s) = a.steps {
                if student {
                    cfg.distill.total_steps = s;
                } else {
                    cfg.pretrain.total_steps = s;
                }
            }
            if let Some(b) = a.batch_size {
                cfg.pretrain.batch_size = b;
            }
        };
        match &self.command {
            Command::Generate { n_accounts, signal_strength } => {
                if let Some(n) = n_accounts {
                    cfg.generator.n_accounts = *n;
                }
                if let Some(s) = signal_strength {
                    cfg.generator.signal_strength = *s;
                }
            }
            Command::TrainVocab { vocab_size: Some(v) } => cfg.vocab.vocab_size = *v,
            Command::Pretrain(a) => train(&mut cfg, a, false),
            Command::Distill(a) => train(&mut cfg, a, true),
            Command::TrainColes { steps: Some(s) } => cfg.coles.steps = *s,
            Command::Probe { methods: Some(m) } => cfg.methods = m.clone(),
            _ => {}
        }
        cfg.finish()
    }

    pub fn run(&self) -> Result<()> {
        let cfg = self.resolve_config()?;
        match &self.command {
            Command::Generate { .. } => cmd_generate(&cfg),
            Command::TrainVocab { .. } => cmd_train_vocab(&cfg),
            Command::Pretrain(a) => cmd_pretrain(&cfg, a.resume).map(|_| ()),
            Command::Distill(a) => cmd_distill(&cfg, a.resume).map(|_| ()),
            Command::TrainColes { .. } => cmd_train_coles(&cfg).map(|_| ()),
            Command::Embed { method } => cmd_embed(&cfg, method).map(|_| ()),
            Command::Probe { .. } => cmd_probe(&cfg).map(|_| ()),
            Command::Report => cmd_report(&cfg).map(|_| ()),
            Command::All => cmd_all(&cfg),
            Command::ShowConfig => {
                print!("{}", cfg.to_toml()?);
                Ok(())
            }
        }
    }
}
