//! Command-line behavior: config precedence, validation, artifact wiring.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ngnn")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

fn stderr_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small generated world plus a 2-epoch checkpoint, shared by the tests.
struct Quickstart {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    visual: PathBuf,
    textual: PathBuf,
    checkpoint: PathBuf,
    scratch: PathBuf,
}

fn quickstart() -> &'static Quickstart {
    static FIXTURE: OnceLock<Quickstart> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        run_ok(&[
            "gen-synth",
            "--out",
            data.to_str().unwrap(),
            "--seed",
            "3",
            "--categories",
            "8",
            "--items-per-category",
            "15",
            "--train-outfits",
            "120",
            "--valid-outfits",
            "25",
            "--test-outfits",
            "30",
        ]);
        let train_out = dir.path().join("run");
        let corpus = data.join("corpus.jsonl");
        let visual = data.join("visual.feat");
        let textual = data.join("textual.feat");
        run_ok(&[
            "train",
            "--corpus",
            corpus.to_str().unwrap(),
            "--visual-features",
            visual.to_str().unwrap(),
            "--textual-features",
            textual.to_str().unwrap(),
            "--out",
            train_out.to_str().unwrap(),
            "--keep-threshold",
            "0",
            "--epochs",
            "2",
            "--seed",
            "3",
        ]);
        let scratch = dir.path().join("scratch");
        std::fs::create_dir_all(&scratch).unwrap();
        Quickstart {
            corpus,
            visual,
            textual,
            checkpoint: train_out.join("checkpoint.ngnn"),
            scratch,
            _dir: dir,
        }
    })
}

fn eval_args<'a>(q: &'a Quickstart, subcommand: &'a str) -> Vec<&'a str> {
    vec![
        subcommand,
        "--corpus",
        q.corpus.to_str().unwrap(),
        "--checkpoint",
        q.checkpoint.to_str().unwrap(),
        "--visual-features",
        q.visual.to_str().unwrap(),
        "--textual-features",
        q.textual.to_str().unwrap(),
        "--keep-threshold",
        "0",
        "--seed",
        "5",
    ]
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        r#"
seed = 9

[synth]
categories = 6
items_per_category = 12
train_outfits = 40
valid_outfits = 10
test_outfits = 10
max_items = 5
"#,
    )
    .unwrap();

    // Values come from the file...
    let out_a = dir.path().join("a");
    let summary = run_ok(&[
        "--config",
        config_path.to_str().unwrap(),
        "gen-synth",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert_eq!(summary["categories"], 6);
    assert_eq!(summary["seed"], 9);

    // ...and flags beat the file.
    let out_b = dir.path().join("b");
    let summary = run_ok(&[
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "11",
        "gen-synth",
        "--out",
        out_b.to_str().unwrap(),
        "--categories",
        "8",
    ]);
    assert_eq!(summary["categories"], 8);
    assert_eq!(summary["seed"], 11);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(&config_path, "[synth]\nbogus_knob = 1\n").unwrap();
    let stderr = stderr_of(&[
        "--config",
        config_path.to_str().unwrap(),
        "gen-synth",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(stderr.starts_with("error: config:"), "{stderr}");
    assert!(stderr.contains("bogus_knob"), "{stderr}");
}

#[test]
fn validation_reports_every_problem_at_once() {
    let stderr = stderr_of(&["train", "--epochs", "0", "--learning-rate=-1"]);
    for expected in ["--corpus", "--out", "epochs", "learning_rate"] {
        assert!(stderr.contains(expected), "missing '{expected}' in: {stderr}");
    }
    // Machine-parsable single line.
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: config:"), "{stderr}");
}

#[test]
fn missing_input_paths_fail_before_running() {
    let stderr = stderr_of(&[
        "eval-auc",
        "--corpus",
        "/no/such/corpus.jsonl",
        "--checkpoint",
        "/no/such/checkpoint.ngnn",
    ]);
    assert!(stderr.contains("corpus"), "{stderr}");
    assert!(stderr.contains("checkpoint"), "{stderr}");
}

#[test]
fn exported_eval_set_reimports_to_the_same_report() {
    let q = quickstart();
    let set_path = q.scratch.join("fitb-set.jsonl");
    let mut export = eval_args(q, "eval-fitb");
    export.extend(["--export-set", set_path.to_str().unwrap()]);
    let first = run_ok(&export);

    let mut import = eval_args(q, "eval-fitb");
    import.extend(["--import-set", set_path.to_str().unwrap()]);
    let second = run_ok(&import);

    assert_eq!(first["value"], second["value"]);
    assert_eq!(first["eval_set_hash"], second["eval_set_hash"]);
    assert_eq!(first["tie_count"], second["tie_count"]);
}

#[test]
fn eval_seeds_change_the_set_but_not_the_checkpoint() {
    let q = quickstart();
    let report_a = run_ok(&eval_args(q, "eval-auc"));
    let mut args_b: Vec<&str> = eval_args(q, "eval-auc");
    let len = args_b.len();
    args_b[len - 1] = "6";
    let report_b = run_ok(&args_b);
    assert_ne!(report_a["eval_set_hash"], report_b["eval_set_hash"]);
    assert_eq!(report_a["checkpoint_hash"], report_b["checkpoint_hash"]);
}

#[test]
fn inspect_checkpoint_reports_the_operating_point() {
    let q = quickstart();
    let info = run_ok(&[
        "inspect-checkpoint",
        "--checkpoint",
        q.checkpoint.to_str().unwrap(),
    ]);
    assert_eq!(info["config"]["latent_dim"], 12);
    assert_eq!(info["config"]["steps"], 3);
    assert_eq!(info["config"]["variant"], "ngnn");
    assert_eq!(info["config"]["modality"], "multimodal");
    assert_eq!(info["channels"].as_array().unwrap().len(), 2);
    assert!(info["total_params"].as_u64().unwrap() > 0);
}

#[test]
fn bench_writes_scaling_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let summary = run_ok(&[
        "bench",
        "--min-nodes",
        "2",
        "--max-nodes",
        "8",
        "--latent-dim",
        "4",
        "--feature-dim",
        "6",
        "--repetitions",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(summary["fits"]["ngnn"]["param_verdict"], "linear");
    assert_eq!(summary["fits"]["ggnn"]["param_verdict"], "linear");
    assert_eq!(summary["fits"]["egnn"]["param_verdict"], "quadratic");
    assert!(out.join("bench.tsv").exists());
    assert!(out.join("bench.dat").exists());
}

#[test]
fn build_graph_exports_are_consistent() {
    let q = quickstart();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("graph");
    let summary = run_ok(&[
        "build-graph",
        "--corpus",
        q.corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--keep-threshold",
        "0",
    ]);
    assert_eq!(summary["categories"], 8);
    let edges = std::fs::read_to_string(out.join("edges.tsv")).unwrap();
    // Header plus one line per directed edge.
    assert_eq!(edges.lines().count() - 1, summary["edges"].as_u64().unwrap() as usize);
    assert!(Path::new(&out.join("vocab.tsv")).exists());
    assert!(Path::new(&out.join("text_vocab.tsv")).exists());
    // Encoded titles come out as a loadable textual feature store.
    let text_features = ngnn::features::FeatureStore::read_from_path(
        &out.join("textual.feat"),
        Some(summary["text_vocab_words"].as_u64().unwrap() as usize),
    )
    .unwrap();
    assert_eq!(text_features.kind(), ngnn::features::FeatureKind::Textual);
    assert!(!text_features.is_empty());
}

#[test]
fn degenerate_fusion_weight_is_refused_with_guidance() {
    let q = quickstart();
    let stderr = stderr_of(&[
        "train",
        "--corpus",
        q.corpus.to_str().unwrap(),
        "--visual-features",
        q.visual.to_str().unwrap(),
        "--textual-features",
        q.textual.to_str().unwrap(),
        "--out",
        q.scratch.join("dead-channel").to_str().unwrap(),
        "--fusion-weight",
        "1.0",
        "--epochs",
        "1",
    ]);
    assert!(stderr.contains("--modality visual"), "{stderr}");
}
