use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use txnfm::cli::{cmd_probe, RunConfig};

const TINY: &str = r#"
seed = 5
[generator]
n_accounts = 120
[generator.length_distribution]
log_mean = 3.0
log_std = 0.5
max_len = 50
[vocab]
vocab_size = 500
[model]
max_context = 48
d_model = 16
n_heads = 2
n_layers = 2
d_ff = 32
[pretrain]
batch_size = 4
total_steps = 20
probe_cadence = 10
[coles]
hidden = 8
steps = 10
[curve]
tasks = ["gender"]
max_accounts = 120
"#;

fn setup(dir: &Path) -> PathBuf {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, format!("{TINY}\n[paths]\nout_dir = {:?}\n", dir.join("out"))).unwrap();
    cfg
}

fn txnfm(cfg: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txnfm"))
        .arg("--config")
        .arg(cfg)
        .args(["--threads", "1"])
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn load(cfg: &Path) -> RunConfig {
    RunConfig::load(cfg).unwrap().finish().unwrap()
}

/// Every regular file under `root`, relative path to bytes.
fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_pipeline_emits_every_report_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    ok(txnfm(&cfg_path, &["all"]));
    let cfg = load(&cfg_path);
    let hash = cfg.config_hash().unwrap();
    let reports = cfg.reports_dir();
    for name in ["scores.csv", "summary.json", "tables.md", "rank_distribution.csv", "rank_histogram.svg", "learning_curve.svg"] {
        let text = fs::read_to_string(reports.join(name)).unwrap();
        assert!(text.contains(&hash), "{name} lacks the config hash");
        assert!(text.contains("seed"), "{name} lacks the seed");
    }
    for method in txnfm::cli::METHODS {
        let emb = fs::read_to_string(cfg.embeddings_path(method)).unwrap();
        assert!(emb.starts_with(&format!("# config_hash={hash} seed=5")));
        // Comment, header, then one row per account.
        assert_eq!(emb.lines().count(), 2 + 120);
    }
    let scores = fs::read_to_string(reports.join("scores.csv")).unwrap();
    let rows = scores.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert!(rows >= 4 * 10);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(reports.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_entries"].as_u64(), Some(rows as u64));
}

#[test]
fn probe_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    ok(txnfm(&cfg_path, &["all"]));
    let cfg = load(&cfg_path);
    let scores = cfg.reports_dir().join("scores.csv");
    let first = fs::read(&scores).unwrap();
    cmd_probe(&cfg).unwrap();
    assert_eq!(first, fs::read(&scores).unwrap());
    ok(txnfm(&cfg_path, &["probe"]));
    assert_eq!(first, fs::read(&scores).unwrap());
}

#[test]
fn identical_config_and_seed_reproduce_every_artifact() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(txnfm(&setup(a.path()), &["all"]));
    ok(txnfm(&setup(b.path()), &["all"]));
    let sa = snapshot(&a.path().join("out"));
    let sb = snapshot(&b.path().join("out"));
    assert_eq!(sa.iter().map(|x| &x.0).collect::<Vec<_>>(), sb.iter().map(|x| &x.0).collect::<Vec<_>>());
    for ((name, x), (_, y)) in sa.iter().zip(&sb) {
        assert!(x == y, "{} differs between runs", name.display());
    }
}

#[test]
fn resumed_pretraining_matches_an_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    for stage in ["generate", "train-vocab", "pretrain"] {
        ok(txnfm(&cfg_path, &[stage]));
    }
    let cfg = load(&cfg_path);
    let ckdir = cfg.checkpoint_dir("bert");
    let final_path = cfg.final_checkpoint("bert");
    let logs = cfg.logs_dir();
    let expected = [
        fs::read(&final_path).unwrap(),
        fs::read(logs.join("bert_loss.csv")).unwrap(),
        fs::read(logs.join("bert_probe.csv")).unwrap(),
    ];
    // Simulate an interruption right after the step-10 checkpoint.
    fs::remove_file(ckdir.join("step000020.ckpt")).unwrap();
    fs::remove_file(&final_path).unwrap();
    ok(txnfm(&cfg_path, &["pretrain", "--resume"]));
    assert_eq!(expected[0], fs::read(&final_path).unwrap());
    assert_eq!(expected[1], fs::read(logs.join("bert_loss.csv")).unwrap());
    assert_eq!(expected[2], fs::read(logs.join("bert_probe.csv")).unwrap());
}

#[test]
fn distill_without_a_teacher_is_a_prerequisite_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    ok(txnfm(&cfg_path, &["generate"]));
    ok(txnfm(&cfg_path, &["train-vocab"]));
    let out = txnfm(&cfg_path, &["distill"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[missing_prerequisite]"), "{err}");
    assert!(err.contains("txnfm pretrain"), "{err}");
}

#[test]
fn stages_out_of_order_and_bad_configs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    let out = txnfm(&cfg_path, &["train-vocab"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("txnfm generate"));

    let out = txnfm(&cfg_path, &["probe", "--methods", "bert,gpt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[invalid_config]"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[generator]\nsignal_strength = 1.5\n").unwrap();
    let out = txnfm(&bad, &["generate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = setup(dir.path());
    ok(txnfm(&cfg_path, &["--seed", "9", "generate", "--n-accounts", "7", "--signal-strength", "0.25"]));
    let shown = ok(txnfm(&cfg_path, &["--seed", "9", "show-config"]));
    let text = String::from_utf8(shown.stdout).unwrap();
    assert!(text.starts_with("seed = 9"));
    let corpus = fs::read_to_string(dir.path().join("out/corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 1 + 7);
    assert!(corpus.contains("\"seed\":9"));
}
