use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use streamctr_cli::commands::run::{RunSummary, TimestampRecord};
use streamctr_cli::manifest::{read_json, read_jsonl, ExperimentManifest};
use streamctr_core::metrics::MetricSeries;

fn streamctr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamctr")).args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = streamctr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    streamctr(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_RUN: &str = r#"
schema_version = 1
batch_size = 64
[model]
kind = "deepfm"
embed_dim = 4
mlp_widths = [16]
norm_mlp = "bn"
dropout = 0.1
[replay]
enabled = true
capacity = 500
"#;

/// Synthesizes and prepares a small stream; returns the prepared directory.
fn prepared(dir: &Path, hours: usize, per_hour: usize) -> PathBuf {
    let data = dir.join("data.csv");
    ok(&[
        "synth",
        "--out",
        s(&data),
        "--hours",
        &hours.to_string(),
        "--samples-per-hour",
        &per_hour.to_string(),
    ]);
    let out = dir.join("prep");
    ok(&["prepare", "--data", s(&data), "--out", s(&out)]);
    out
}

#[test]
fn prepare_reports_the_split_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    ok(&["synth", "--out", s(&data), "--hours", "240", "--samples-per-hour", "20"]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let stdout = ok(&["prepare", "--data", s(&data), "--out", s(&a)]);
    assert!(stdout.contains("168 pretrain"), "{stdout}");
    ok(&["prepare", "--data", s(&data), "--out", s(&b)]);
    let (ma, mb) = (ExperimentManifest::read(&a).unwrap(), ExperimentManifest::read(&b).unwrap());
    let meta = ma.schedule.as_ref().unwrap();
    assert_eq!((meta.total_hours, meta.pretrain_hours, meta.horizon), (240, 168, 72));
    assert_eq!(ma.id, mb.id);
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(std::fs::read(a.join("samples.csv")).unwrap(), std::fs::read(b.join("samples.csv")).unwrap());
}

#[test]
fn synthetic_logs_round_trip_through_prepare() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "g.toml",
        "schema_version = 1\ncardinalities = [3, 4]\nhours = 6\nsamples_per_hour = 300\nzipf_exponent = 0.0\n",
    );
    let data = dir.path().join("g.csv");
    ok(&["synth", "--spec", s(&spec), "--out", s(&data)]);
    let cfg = write(dir.path(), "p.toml", "schema_version = 1\nmin_count = 1\npretrain_fraction = 0.5\n");
    let out = dir.path().join("p");
    ok(&["prepare", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    let m = ExperimentManifest::read(&out).unwrap();
    assert_eq!(m.field_names.unwrap(), vec!["C1", "C2"]);
    assert_eq!(m.schedule.unwrap().total_hours, 6);
    let vocab: serde_json::Value = read_json(&out.join("vocab.json")).unwrap();
    assert!(vocab.to_string().contains("f1_2"));
    let samples = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 6 * 300);
}

#[test]
fn runs_are_byte_reproducible_and_summaries_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 150);
    let cfg = write(dir.path(), "run.toml", SMALL_RUN);
    let (a, b) = (dir.path().join("ra"), dir.path().join("rb"));
    for out in [&a, &b] {
        ok(&[
            "run",
            "--prepared",
            s(&prep),
            "--config",
            s(&cfg),
            "--out",
            s(out),
            "--seed",
            "3",
            "--checkpoint-every",
            "2",
            "--epoch-sweep",
            "2",
        ]);
    }
    for f in ["series.json", "metrics.jsonl", "summary.json", "epoch_sweep.jsonl", "checkpoints/m_0002.ckpt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let manifest = ExperimentManifest::read(&a).unwrap();
    let summary: RunSummary = read_json(&a.join("summary.json")).unwrap();
    let records: Vec<TimestampRecord> = read_jsonl(&a.join("metrics.jsonl")).unwrap();
    assert!(records.iter().all(|r| r.manifest_id == manifest.id));
    assert_eq!(summary.manifest_id, manifest.id);
    assert_eq!(manifest.parent, Some(ExperimentManifest::read(&prep).unwrap().id));
    assert!(manifest.outputs.contains_key("checkpoints/m_0000.ckpt"));

    let rebuilt = MetricSeries::from_timestamps(
        summary.horizon,
        records.into_iter().map(|r| r.metrics).collect(),
        summary.pretrain.clone(),
        summary.weighting,
    );
    assert_eq!(rebuilt.oauc, summary.oauc);
    assert_eq!(rebuilt.cauc, summary.cauc);
    assert_eq!(rebuilt.bauc, summary.bauc);
    assert_eq!(rebuilt.iauc, summary.iauc);
    assert_eq!(rebuilt.pauc, summary.pauc);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 100);
    let cfg = write(dir.path(), "run.toml", SMALL_RUN);
    let out = dir.path().join("r");
    ok(&[
        "run",
        "--prepared",
        s(&prep),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--set",
        "model.kind=fm",
        "--set",
        "batch_size=32",
        "--seed",
        "9",
    ]);
    let m = ExperimentManifest::read(&out).unwrap();
    assert_eq!(m.config["model"]["kind"], "fm");
    assert_eq!(m.config["batch_size"], 32);
    assert_eq!(m.config["seed"], 9);
    assert_eq!(m.config["model"]["embed_dim"], 4);
}

#[test]
fn exit_codes_distinguish_config_data_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 100);
    let out = |n: &str| dir.path().join(n);

    let unknown = write(dir.path(), "u.toml", "schema_version = 1\nbatch_sise = 3\n");
    assert_eq!(code(&["run", "--prepared", s(&prep), "--config", s(&unknown), "--out", s(&out("u"))]), 2);
    let unversioned = write(dir.path(), "v.toml", "batch_size = 3\n");
    assert_eq!(code(&["run", "--prepared", s(&prep), "--config", s(&unversioned), "--out", s(&out("v"))]), 2);
    assert_eq!(code(&["run", "--prepared", s(&prep), "--set", "model.bogus=1", "--out", s(&out("w"))]), 2);
    assert_eq!(code(&["run", "--nonsense"]), 2);

    assert_eq!(code(&["prepare", "--data", s(&out("missing.csv")), "--out", s(&out("m"))]), 3);
    let bad = write(dir.path(), "bad.csv", "id,click,hour,C1\n0,7,14102100,a\n");
    assert_eq!(code(&["prepare", "--data", s(&bad), "--out", s(&out("b"))]), 3);
    assert_eq!(code(&["run", "--prepared", s(&out("nowhere")), "--out", s(&out("x"))]), 3);

    let n = out("n");
    let diverge = [
        "run",
        "--prepared",
        s(&prep),
        "--out",
        s(&n),
        "--set",
        "optim.kind=sgd",
        "--set",
        "optim.learning_rate=1e300",
        "--set",
        "batch_size=64",
    ];
    assert_eq!(code(&diverge), 4);
}

#[test]
fn tampered_samples_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 50);
    let samples = prep.join("samples.csv");
    let mut text = std::fs::read_to_string(&samples).unwrap();
    text.push_str("5,1,1,1,1,1,1,1,1,1\n");
    std::fs::write(&samples, text).unwrap();
    assert_eq!(code(&["run", "--prepared", s(&prep), "--out", s(&dir.path().join("r"))]), 3);
}

#[test]
fn sweep_results_do_not_depend_on_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 120);
    let spec = write(
        dir.path(),
        "sweep.toml",
        r#"
schema_version = 1
seeds = [0, 1]
[base]
batch_size = 64
[base.model]
kind = "dnn"
embed_dim = 4
mlp_widths = [8]
[[axis]]
path = "model.norm_mlp"
values = ["none", "bn"]
[[axis]]
path = "preset"
values = ["no_dropout"]
"#,
    );
    let dry = streamctr(&["sweep", "--prepared", s(&prep), "--spec", s(&spec), "--out", "unused", "--dry-run"]);
    assert!(String::from_utf8_lossy(&dry.stderr).contains("2 cells x 2 seeds = 4 runs"));

    let (a, b) = (dir.path().join("s1"), dir.path().join("s2"));
    ok(&["sweep", "--prepared", s(&prep), "--spec", s(&spec), "--out", s(&a), "--parallelism", "1"]);
    ok(&["sweep", "--prepared", s(&prep), "--spec", s(&spec), "--out", s(&b), "--parallelism", "3"]);
    let read = |p: &Path| std::fs::read_to_string(p.join("comparison.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let rows: serde_json::Value = serde_json::from_str(&read(&a)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["oauc_rel"], 0.0);
    assert!(a.join("cell-001/seed-1/manifest.json").is_file());
    let csv = std::fs::read_to_string(a.join("comparison.csv")).unwrap();
    assert!(csv.starts_with("cell,label,seeds,pauc,oauc"));
}

#[test]
fn analyze_exports_tables_and_flags_undefined_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let prep = prepared(dir.path(), 8, 120);
    let runs = dir.path().join("runs");
    for name in ["a", "b"] {
        ok(&[
            "run",
            "--prepared",
            s(&prep),
            "--out",
            s(&runs.join(name)),
            "--set",
            "model.kind=lr",
            "--set",
            "batch_size=64",
            "--epoch-sweep",
            "2",
        ]);
    }
    let out = dir.path().join("an");
    ok(&["analyze", "--runs", &format!("{}/*", runs.display()), "--out", s(&out)]);
    let corr: serde_json::Value = read_json(&out.join("correlation.json")).unwrap();
    assert_eq!(corr["runs"], 2);
    assert_eq!(corr["pairs"][0]["x"], "bauc");
    assert_eq!(corr["pairs"][0]["spearman_defined"], false);
    let trends = std::fs::read_to_string(out.join("trends.csv")).unwrap();
    assert_eq!(trends.lines().count(), 1 + 2 * 2);
    assert!(out.join("epoch_summary.csv").is_file());
    assert!(out.join("runs.csv").is_file());

    assert_eq!(code(&["analyze", "--runs", &format!("{}/nothing-*", runs.display()), "--out", s(&out)]), 2);
}

#[test]
fn shipped_configs_parse_and_validate() {
    use streamctr_cli::commands::sweep::expand;
    use streamctr_cli::config::{load, PrepareConfig, SweepSpec};
    use streamctr_core::engine::{DriftSpec, RunConfig};

    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    load::<PrepareConfig>(&root.join("prepare.toml")).unwrap();
    load::<DriftSpec>(&root.join("synth.toml")).unwrap().validate().unwrap();
    load::<RunConfig>(&root.join("run_dnn.toml")).unwrap().validate().unwrap();
    let sweep: SweepSpec = load(&root.join("sweep_norm.toml")).unwrap();
    assert_eq!(expand(&sweep).unwrap().len(), 9);
}
