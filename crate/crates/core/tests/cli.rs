use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use pinnsnn::table::Table;

const BIN: &str = env!("CARGO_BIN_EXE_pinnsnn");

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = run(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed ({:?}): {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn table(out: &Path, run: &str, name: &str) -> Table {
    Table::read(&out.join(run).join("csv").join(format!("{name}.csv"))).unwrap()
}

fn num(t: &Table, col: &str) -> Vec<f64> {
    t.column(col).unwrap().iter().map(|v| v.parse().unwrap()).collect()
}

const SIN: &[&str] = &["--problem", "sin-regression", "--layers", "1x16", "--epochs", "400", "--seed", "3"];

fn args<'a>(verb: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    verb.iter().chain(SIN).chain(extra).copied().collect()
}

struct Trained {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn trained() -> &'static Path {
    static T: OnceLock<Trained> = OnceLock::new();
    &T.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        ok(&root, &args(&["train"], &[]));
        Trained { _dir: dir, root }
    })
    .root
}

fn fresh_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = trained().join("sin_regression").join("model.json");
    let dst = dir.path().join("sin_regression");
    std::fs::create_dir_all(&dst).unwrap();
    std::fs::copy(src, dst.join("model.json")).unwrap();
    dir
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["train"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["train", "--problem", "heat"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["train", "--problem", "poisson", "--layers", "x40"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "epoch = 3\n").unwrap();
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "train", "--problem", "poisson"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(dir.path(), &["report"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &args(&["convert"], &[]));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train"));
}

#[test]
fn training_is_deterministic_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &args(&["train"], &[]));
    let a = std::fs::read(dir.path().join("sin_regression/model.json")).unwrap();
    let b = std::fs::read(trained().join("sin_regression/model.json")).unwrap();
    assert_eq!(a, b);
    let log_a = std::fs::read(dir.path().join("sin_regression/csv/train_log.csv")).unwrap();
    let log_b = std::fs::read(trained().join("sin_regression/csv/train_log.csv")).unwrap();
    assert_eq!(log_a, log_b);
    let log = table(dir.path(), "sin_regression", "train_log");
    let loss = num(&log, "loss");
    assert!(loss.iter().all(|v| v.is_finite()));
    assert!(loss.last().unwrap() < &loss[0]);
    assert!(dir.path().join("sin_regression/config/train.toml").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "epochs = 5\nlayers = \"1x8\"\nrun = \"from-file\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    ok(dir.path(), &["--config", c, "train", "--problem", "sin-regression", "--epochs", "7"]);
    let written = std::fs::read_to_string(dir.path().join("from-file/config/train.toml")).unwrap();
    let parsed: toml::Value = toml::from_str(&written).unwrap();
    assert_eq!(parsed["problem"]["train"]["epochs"].as_integer(), Some(7));
    assert_eq!(parsed["network"]["hidden"].as_array().unwrap().len(), 1);
    assert_eq!(parsed["network"]["hidden"][0].as_integer(), Some(8));
}

#[test]
fn advanced_calibration_never_worsens_layers() {
    let dir = fresh_run();
    let out = dir.path();
    for mode in ["none", "advanced"] {
        ok(out, &args(&["convert"], &["--mode", mode, "-T", "16"]));
        ok(out, &args(&["eval"], &["--mode", mode, "-T", "16"]));
    }
    let cal = table(out, "sin_regression", "calibration_advanced-t16");
    for (pre, post) in num(&cal, "pre_ec_norm").iter().zip(num(&cal, "post_ec_norm")) {
        assert!(post <= *pre, "post {post} > pre {pre}");
    }
    let none = num(&table(out, "sin_regression", "metrics_none-t16_rate"), "rel_l2_ann")[0];
    let adv = num(&table(out, "sin_regression", "metrics_advanced-t16_rate"), "rel_l2_ann")[0];
    assert!(adv <= none, "advanced {adv} vs none {none}");
    let rate = num(&table(out, "sin_regression", "metrics_advanced-t16_rate"), "spike_rate")[0];
    assert!(rate > 0.0 && rate < 1.0);
}

#[test]
fn ann_eval_matches_itself() {
    let dir = fresh_run();
    ok(dir.path(), &args(&["eval"], &["--target", "ann"]));
    let m = table(dir.path(), "sin_regression", "metrics_ann");
    assert_eq!(num(&m, "l2_ann")[0], 0.0);
    assert!(num(&m, "rel_l2_ref")[0] < 0.5);
    let field = table(dir.path(), "sin_regression", "field_ann");
    assert_eq!(field.rows.len(), 1000);
}

#[test]
fn event_simulation_matches_rate_pass_for_one_hidden_layer() {
    let dir = fresh_run();
    ok(dir.path(), &args(&["convert"], &["--mode", "none", "-T", "24"]));
    let stdout = ok(dir.path(), &args(&["eval"], &["--mode", "none", "-T", "24", "--sim", "event"]));
    assert!(stdout.contains("event vs rate"));
    let diff = num(&table(dir.path(), "sin_regression", "metrics_none-t24_event"), "event_rate_max_diff")[0];
    assert!(diff <= 1e-9, "event/rate difference {diff}");
}

#[test]
fn analysis_verbs_write_their_tables() {
    let dir = fresh_run();
    let out = dir.path();
    let extra = ["--mode", "light", "-T", "8", "--t", "2,4,8,16,32,64"];
    ok(out, &args(&["analyze", "sweep-t"], &extra));
    let sweep = table(out, "sin_regression", "sweep_t");
    assert_eq!(sweep.rows.len(), 6);
    assert!(num(&sweep, "error").iter().all(|e| e.is_finite() && *e >= 0.0));
    assert!(sweep.column("slope").is_some());

    ok(out, &args(&["convert"], &["--mode", "light", "-T", "8"]));
    ok(out, &args(&["analyze", "validate-bound"], &["--mode", "light", "-T", "8"]));
    let bound = table(out, "sin_regression", "bound_light-t8");
    assert!(bound.column("satisfied").unwrap().iter().all(|v| *v == "true"));
    for (l, r) in num(&bound, "lhs").iter().zip(num(&bound, "rhs")) {
        assert!(*l <= r);
    }

    ok(out, &args(&["analyze", "smooth"], &["--mode", "light", "-T", "8"]));
    let sm = table(out, "sin_regression", "smooth_metrics_light-t8");
    let idem: f64 = sm.column("idempotence_residual").unwrap()[1].parse().unwrap();
    assert!(idem <= 1e-12);

    ok(out, &args(&["analyze", "hessian-check"], &[]));
    let h = table(out, "sin_regression", "hessian_check");
    assert!(num(&h, "rel_error").iter().all(|e| *e < 1e-3));

    let text = ok(out, &["report", "--run", "sin_regression"]);
    assert!(text.contains("sweep_t"));
    let report = table(out, "sin_regression", "report");
    assert!(report.rows.iter().any(|r| r[0] == "hessian_check"));
}

#[test]
fn missing_snn_is_a_runtime_error() {
    let dir = fresh_run();
    let o = run(dir.path(), &args(&["eval"], &["--mode", "advanced", "-T", "99"]));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("convert"));
}
