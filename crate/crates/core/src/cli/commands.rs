//! One function per pipeline stage. Each reads its inputs from the paths in
//! [`RunConfig`] and writes its outputs there.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::report;
use crate::baselines::coles::{account_features, load_coles, save_coles};
use crate::baselines::{coles_train, ColesModel};
use crate::encoder::{load_encoder, Params};
use crate::grammar::serialize_document;
use crate::pretrain::{
    fresh_state, pretrain_loop, read_probe_csv, write_loss_csv, write_probe_csv, write_text, EvalStats, Objective,
    Persist, PretrainReport, ProbeRecord, StepLog, TokenizedCorpus, TrainState,
};
use crate::probe::{
    all_tasks, extract_embeddings, find_task, probe_snapshot, rank_distribution, read_embeddings, run_probes,
    write_embeddings, Embedder, ScoreTable, TaskSpec,
};
use crate::synthgen::{generate_corpus, read_corpus, read_labels, write_corpus, write_labels, Account, LabelTable};
use crate::tokenizer::{train_vocab, Vocabulary};
use crate::{Error, Result};

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Prerequisite(format!("{} not found; run `txnfm {stage}` first", path.display())))
    }
}

fn load_accounts(cfg: &RunConfig) -> Result<Vec<Account>> {
    let path = cfg.corpus_path();
    require(&path, "generate")?;
    read_corpus(&path)
}

fn load_labels(cfg: &RunConfig) -> Result<LabelTable> {
    let path = cfg.labels_path();
    require(&path, "generate")?;
    read_labels(&path)
}

fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    let path = cfg.vocab_path();
    require(&path, "train-vocab")?;
    Vocabulary::load(&path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let corpus = generate_corpus(&cfg.generator)?;
    let prov = cfg.provenance()?;
    write_corpus(&cfg.corpus_path(), &corpus.accounts, Some(&prov))?;
    write_labels(&cfg.labels_path(), &corpus.labels, Some(&prov))?;
    log::info!("wrote {} accounts to {}", corpus.accounts.len(), cfg.corpus_path().display());
    Ok(())
}

pub fn cmd_train_vocab(cfg: &RunConfig) -> Result<()> {
    let accounts = load_accounts(cfg)?;
    let docs = accounts
        .iter()
        .map(|a| Ok(serialize_document(&a.account_id, &a.transactions, &cfg.vocab.buckets)?.render()))
        .collect::<Result<Vec<String>>>()?;
    let vocab = train_vocab(&docs, cfg.vocab.buckets, &cfg.tokenizer())?;
    vocab.save(&cfg.vocab_path(), Some(&cfg.provenance()?))?;
    log::info!("vocabulary of {} tokens", vocab.len());
    Ok(())
}

/// Highest-step `stepNNNNNN.ckpt` in `dir`.
fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("step") && n.ends_with(".ckpt"))
        })
        .collect();
    found.sort();
    found.pop()
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    method: &'a str,
    steps: u64,
    initial: &'a EvalStats,
    last: &'a EvalStats,
}

fn curve_tasks(cfg: &RunConfig) -> Result<Vec<TaskSpec>> {
    let tasks = all_tasks(&cfg.generator.cardinalities);
    cfg.curve.tasks.iter().map(|t| find_task(&tasks, t).cloned()).collect()
}

/// Shared driver for the teacher and the distilled student.
fn train_encoder(cfg: &RunConfig, method: &str, teacher: Option<(&Params<f32>, String)>, resume: bool) -> Result<PretrainReport> {
    let accounts = load_accounts(cfg)?;
    let labels = load_labels(cfg)?;
    let vocab = load_vocab(cfg)?;
    let (model, pcfg) = if teacher.is_some() {
        (cfg.student_model(), cfg.student_pretrain())
    } else {
        (cfg.model.clone(), cfg.pretrain.clone())
    };
    let corpus = TokenizedCorpus::build(&accounts, &vocab, model.max_context, vocab.buckets())?;
    let dir = cfg.checkpoint_dir(method);
    let prov = cfg.provenance()?;
    let mut state = match latest_checkpoint(&dir).filter(|_| resume) {
        Some(path) => {
            log::info!("resuming {method} from {}", path.display());
            TrainState::load(&path, &pcfg.adam)?
        }
        None => fresh_state(&model, &vocab, &pcfg)?,
    };
    let start = state.step;
    let tasks = curve_tasks(cfg)?;
    let n_curve = if cfg.curve.max_accounts == 0 { accounts.len() } else { cfg.curve.max_accounts.min(accounts.len()) };
    let curve_accounts = &accounts[..n_curve];
    let mut hook = |step: u64, params: &Params<f32>| -> Result<Vec<ProbeRecord>> {
        if tasks.is_empty() {
            return Ok(Vec::new());
        }
        let scores = probe_snapshot(params, &vocab, curve_accounts, &labels, &tasks, &cfg.probe)?;
        Ok(scores
            .into_iter()
            .map(|(task, metric, score)| ProbeRecord { step, task, metric: metric.as_str().into(), score })
            .collect())
    };
    let mut lineage = vec![format!("seed:{}", cfg.seed)];
    let objective = match &teacher {
        Some((params, id)) => {
            lineage.push(format!("teacher:{id}"));
            Objective::Distill { teacher: params, weights: pcfg.distill }
        }
        None => Objective::Mlm,
    };
    let persist = Persist { checkpoint_dir: Some(&dir), lineage: lineage.clone(), provenance: Some(&prov) };
    let report = pretrain_loop(&corpus, &mut state, &pcfg, objective, pcfg.total_steps, &mut hook, &persist)?;
    state.save(&cfg.final_checkpoint(method), lineage, Some(&prov))?;

    let logs = cfg.logs_dir();
    write_loss_csv(&logs.join(format!("{method}_loss.csv")), &state.loss_history, Some(&prov))?;
    let probe_path = logs.join(format!("{method}_probe.csv"));
    let mut probes: Vec<ProbeRecord> = if start > 0 && probe_path.exists() {
        read_probe_csv(&probe_path)?.into_iter().filter(|p| p.step <= start).collect()
    } else {
        Vec::new()
    };
    probes.extend(report.probes.iter().cloned());
    write_probe_csv(&probe_path, &probes, Some(&prov))?;
    write_json(
        &logs.join(format!("{method}_eval.json")),
        &serde_json::json!({
            "provenance": prov,
            "eval": EvalSummary { method, steps: state.step, initial: &report.initial, last: &report.last },
        }),
    )?;
    log::info!("{method}: held-out loss {:.4} -> {:.4}", report.initial.loss, report.last.loss);
    Ok(report)
}

pub fn cmd_pretrain(cfg: &RunConfig, resume: bool) -> Result<PretrainReport> {
    train_encoder(cfg, "bert", None, resume)
}

pub fn cmd_distill(cfg: &RunConfig, resume: bool) -> Result<PretrainReport> {
    let teacher_path = cfg.final_checkpoint("bert");
    require(&teacher_path, "pretrain")?;
    let (teacher, ck) = load_encoder(&teacher_path)?;
    train_encoder(cfg, "distilbert", Some((&teacher, ck.header.payload_sha256.clone())), resume)
}

pub fn cmd_train_coles(cfg: &RunConfig) -> Result<Vec<f64>> {
    let accounts = load_accounts(cfg)?;
    let features: Vec<Vec<f32>> = accounts.iter().map(|a| account_features(&a.transactions)).collect();
    let mut model = ColesModel::init(&cfg.coles)?;
    let losses = coles_train(&mut model, &features)?;
    let prov = cfg.provenance()?;
    save_coles(&cfg.final_checkpoint("coles"), &model, Some(&prov))?;
    let log: Vec<StepLog> = losses
        .iter()
        .enumerate()
        .map(|(i, &loss)| StepLog { step: i as u64 + 1, loss, lr: cfg.coles.lr })
        .collect();
    write_loss_csv(&cfg.logs_dir().join("coles_loss.csv"), &log, Some(&prov))?;
    Ok(losses)
}

/// Embeds every corpus account with `method`.
pub fn cmd_embed(cfg: &RunConfig, method: &str) -> Result<PathBuf> {
    let accounts = load_accounts(cfg)?;
    let vectors = match method {
        "bert" | "distilbert" => {
            let ck = cfg.final_checkpoint(method);
            require(&ck, if method == "bert" { "pretrain" } else { "distill" })?;
            let vocab = load_vocab(cfg)?;
            let (params, _) = load_encoder(&ck)?;
            extract_embeddings(&Embedder::Encoder { params: &params, vocab: &vocab }, &accounts)?
        }
        "coles" => {
            let ck = cfg.final_checkpoint("coles");
            require(&ck, "train-coles")?;
            extract_embeddings(&Embedder::Coles(&load_coles(&ck)?), &accounts)?
        }
        "feateng" => extract_embeddings(&Embedder::FeatEng, &accounts)?,
        other => return Err(Error::config(format!("unknown method `{other}`"))),
    };
    let ids: Vec<String> = accounts.iter().map(|a| a.account_id.clone()).collect();
    let path = cfg.embeddings_path(method);
    write_embeddings(&path, &ids, &vectors, Some(&cfg.provenance()?))?;
    Ok(path)
}

#[derive(Serialize)]
struct ProbeSummary {
    provenance: crate::synthgen::Provenance,
    split: String,
    methods: Vec<String>,
    n_entries: usize,
    mean_normalized: std::collections::BTreeMap<String, f64>,
    rank_distribution: std::collections::BTreeMap<String, Vec<usize>>,
}

pub fn cmd_probe(cfg: &RunConfig) -> Result<ScoreTable> {
    let labels = load_labels(cfg)?;
    let mut methods = Vec::new();
    let mut ids: Option<Vec<String>> = None;
    for m in &cfg.methods {
        let path = cfg.embeddings_path(m);
        require(&path, &format!("embed --method {m}"))?;
        let (these, vectors) = read_embeddings(&path)?;
        if ids.as_ref().is_some_and(|i| *i != these) {
            return Err(Error::input(format!("{} covers different accounts than the other methods", path.display())));
        }
        ids = Some(these);
        methods.push((m.clone(), vectors));
    }
    let ids = ids.ok_or_else(|| Error::config("no methods to probe"))?;
    let tasks = all_tasks(&cfg.generator.cardinalities);
    let table = run_probes(&methods, &ids, &labels, &tasks, &cfg.probe)?;
    let prov = cfg.provenance()?;
    let dir = cfg.reports_dir();
    table.write_csv(&dir.join("scores.csv"), Some(&prov))?;
    let mean_normalized = table
        .methods()
        .into_iter()
        .map(|m| {
            let v: Vec<f64> = table.entries.iter().filter(|e| e.method == m).map(|e| e.normalized).collect();
            let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
            (m, mean)
        })
        .collect();
    write_json(
        &dir.join("summary.json"),
        &ProbeSummary {
            provenance: prov,
            split: table.split.clone(),
            methods: table.methods(),
            n_entries: table.entries.len(),
            mean_normalized,
            rank_distribution: rank_distribution(&table),
        },
    )?;
    Ok(table)
}

/// Renders tables, the rank histogram and learning curves from earlier outputs.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let scores = cfg.reports_dir().join("scores.csv");
    require(&scores, "probe")?;
    let table = ScoreTable::read_csv(&scores)?;
    let prov = cfg.provenance()?;
    let dir = cfg.reports_dir();
    let tasks = all_tasks(&cfg.generator.cardinalities);
    let mut written = Vec::new();

    let tables = dir.join("tables.md");
    write_text(&tables, &report::render_tables(&table, &tasks, &prov))?;
    written.push(tables);

    let hist = rank_distribution(&table);
    let hist_csv = dir.join("rank_distribution.csv");
    write_text(&hist_csv, &report::rank_csv(&hist, &prov))?;
    written.push(hist_csv);
    let hist_svg = dir.join("rank_histogram.svg");
    write_text(&hist_svg, &report::rank_histogram_svg(&hist, &prov))?;
    written.push(hist_svg);

    let mut curves = Vec::new();
    for method in ["bert", "distilbert"] {
        let path = cfg.logs_dir().join(format!("{method}_probe.csv"));
        if path.exists() {
            curves.push((method.to_string(), read_probe_csv(&path)?));
        }
    }
    if !curves.is_empty() {
        let svg = dir.join("learning_curve.svg");
        write_text(&svg, &report::learning_curve_svg(&curves, &prov))?;
        written.push(svg);
    }
    Ok(written)
}

/// Every stage in order for the configured methods.
pub fn cmd_all(cfg: &RunConfig) -> Result<()> {
    cmd_generate(cfg)?;
    cmd_train_vocab(cfg)?;
    let wants = |m: &str| cfg.methods.iter().any(|x| x == m);
    if wants("bert") || wants("distilbert") {
        cmd_pretrain(cfg, false)?;
    }
    if wants("distilbert") {
        cmd_distill(cfg, false)?;
    }
    if wants("coles") {
        cmd_train_coles(cfg)?;
    }
    for m in &cfg.methods {
        cmd_embed(cfg, m)?;
    }
    cmd_probe(cfg)?;
    cmd_report(cfg)?;
    Ok(())
}
