//! End-to-end checks of the binary: determinism of outputs, the exit-code
//! contract, and the file schemas.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn decorr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decorr"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn doubling_config(out: &Path) -> String {
    format!(
        r#"{{
  "version": 1,
  "seed": 42,
  "system": {{"kind": "doubling"}},
  "observables": [{{"kind": "sawtooth"}}],
  "estimator": {{"n_points": 20000, "burn_in": 1000, "spacing": 16, "n_max": 8}},
  "output": "{}"
}}"#,
        out.display()
    )
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn simulate_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("a");
    let out2 = tmp.path().join("b");
    let cfg = write_config(tmp.path(), "cfg.json", &doubling_config(&out1));

    let s1 = run(decorr().args(["simulate", "--config"]).arg(&cfg));
    assert!(s1.status.success(), "{}", String::from_utf8_lossy(&s1.stderr));
    let s2 = run(decorr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out2));
    assert!(s2.status.success());

    let a = fs::read(out1.join("ensemble.csv")).unwrap();
    let b = fs::read(out2.join("ensemble.csv")).unwrap();
    assert_eq!(a, b, "same config and seed must give identical bytes");

    // A different seed changes the data.
    let out3 = tmp.path().join("c");
    let s3 = run(decorr()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--seed", "43"])
        .arg("--out")
        .arg(&out3));
    assert!(s3.status.success());
    let c = fs::read(out3.join("ensemble.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn correlate_writes_schema_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "cfg.json", &doubling_config(&out));
    let s = run(decorr().args(["correlate", "--config"]).arg(&cfg));
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let corr = fs::read_to_string(out.join("correlation.csv")).unwrap();
    assert!(corr.starts_with("n,estimate,std_error,estimator,N,seed\n"));
    assert_eq!(corr.lines().count(), 10); // header + lags 0..=8
    let plot = fs::read_to_string(out.join("plotdata.csv")).unwrap();
    assert!(plot.starts_with("n,estimate,std_error,bound\n"));
    assert!(out.join("plot.gp").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["config"]["seed"], 42);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown field.
    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{"version": 1, "seed": 1, "system": {"kind": "doubling"}, "typo_field": true}"#,
    );
    let s = run(decorr().args(["simulate", "--config"]).arg(&bad));
    assert_eq!(s.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&s.stderr);
    assert!(msg.contains("line"), "config errors cite a position: {msg}");

    // Missing seed.
    let noseed = write_config(
        tmp.path(),
        "noseed.json",
        r#"{"version": 1, "system": {"kind": "doubling"}}"#,
    );
    let s = run(decorr().args(["simulate", "--config"]).arg(&noseed));
    assert_eq!(s.status.code(), Some(2));

    // Bad parameters.
    let badsys = write_config(
        tmp.path(),
        "badsys.json",
        r#"{"version": 1, "seed": 1, "system": {"kind": "intermittent_circle", "gamma": 1.5, "d": 2}}"#,
    );
    let s = run(decorr().args(["simulate", "--config"]).arg(&badsys));
    assert_eq!(s.status.code(), Some(2));
}

#[test]
fn missing_ensemble_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "version": 1,
  "seed": 5,
  "system": {{"kind": "doubling"}},
  "observables": [{{"kind": "sawtooth"}}],
  "estimator": {{"n_points": 1000, "burn_in": 100, "spacing": 4, "n_max": 4, "reuse_ensemble": true}},
  "output": "{}"
}}"#,
            out.display()
        ),
    );
    let s = run(decorr().args(["correlate", "--config"]).arg(&cfg));
    assert_eq!(s.status.code(), Some(3));
}

#[test]
fn remainder_threshold_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // A shallow tower on the intermittent map leaves substantial mass
    // unresolved; a strict threshold must fail construction.
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "version": 1,
  "seed": 5,
  "system": {{"kind": "intermittent_circle", "gamma": 0.5, "d": 2}},
  "tower": {{"depth": 20, "cutoff": 1000, "remainder_threshold": 1e-6, "max_truncation": 0.001,
             "delta_grid": [5], "sample_budget": 20}},
  "output": "{}"
}}"#,
            out.display()
        ),
    );
    let s = run(decorr().args(["tower", "--config"]).arg(&cfg));
    assert_eq!(s.status.code(), Some(4));
}

#[test]
fn unsupported_cases_exit_5() {
    // Induced tower for the planar map is unsupported.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "version": 1,
  "seed": 5,
  "system": {{"kind": "henon", "a": 1.4, "b": 0.3}},
  "output": "{}"
}}"#,
            out.display()
        ),
    );
    let s = run(decorr().args(["tower", "--config"]).arg(&cfg));
    assert_eq!(s.status.code(), Some(5));

    // Unknown prediction class.
    let s = run(decorr().args([
        "predict",
        "--modulus",
        "cauchy",
        "--system-class",
        "solenoid",
        "--gamma",
        "0.5",
    ]));
    assert_eq!(s.status.code(), Some(5));
    let msg = String::from_utf8_lossy(&s.stderr);
    assert!(msg.contains("supported"), "{msg}");
}

#[test]
fn predict_prints_the_law_table() {
    let s = run(decorr().args([
        "predict",
        "--modulus",
        "hoelder",
        "--alpha",
        "0.5",
        "--system-class",
        "solenoid",
        "--gamma",
        "0.5",
    ]));
    assert!(s.status.success());
    let text = String::from_utf8_lossy(&s.stdout);
    // min(alpha/gamma, 1/gamma - 1) = min(1, 1) = 1.
    assert!(text.contains("dominant law : polynomial"), "{text}");
    assert!(text.contains("p = 1"), "{text}");

    let s = run(decorr().args([
        "predict",
        "--modulus",
        "exp_log_power",
        "--alpha",
        "0.7",
        "--system-class",
        "henon",
        "--theta",
        "0.5",
    ]));
    assert!(s.status.success());
    let text = String::from_utf8_lossy(&s.stdout);
    assert!(text.contains("stretched exponential"), "{text}");
    assert!(text.contains("parameters not verified"), "{text}");
}

#[test]
fn tower_and_verify_run_on_synthetic_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &format!(
            r#"{{
  "version": 1,
  "seed": 11,
  "system": {{"kind": "intermittent_circle", "gamma": 0.5, "d": 2}},
  "observables": [
    {{"kind": "radial_bump", "class": {{"class": "hoelder", "alpha": 0.5}}, "anchor": 0.2}},
    {{"kind": "radial_bump", "class": {{"class": "hoelder", "alpha": 0.5}}, "anchor": 0.6}}
  ],
  "estimator": {{"n_points": 5000, "burn_in": 500, "spacing": 4, "n_max": 8}},
  "tower": {{"depth": 500, "cutoff": 1000, "remainder_threshold": 0.01, "max_truncation": 0.001,
             "delta_grid": [5, 10, 20], "sample_budget": 50}},
  "analysis": {{"fit_window": [1, 6], "candidates": ["exponential"], "slack": 2.0,
               "k_grid": [2], "bound_overlay": true}},
  "output": "{}"
}}"#,
            out.display()
        ),
    );
    let s = run(decorr().args(["tower", "--config"]).arg(&cfg));
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(out.join("tower.txt").exists());
    let tail = fs::read_to_string(out.join("tail.csv")).unwrap();
    assert!(tail.starts_with("n,tail\n"));
    let delta = fs::read_to_string(out.join("delta_bar.csv")).unwrap();
    assert!(delta.starts_with("k,delta_bar,samples\n"));
    assert_eq!(delta.lines().count(), 4);

    // The tower file round-trips through the reader.
    let parsed: decorr::TowerModel =
        decorr::tower::io::read_tower(fs::File::open(out.join("tower.txt")).unwrap()).unwrap();
    assert_eq!(parsed.max_return(), 500);

    let out2 = tmp.path().join("verify_out");
    let s = run(decorr()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out2));
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let verdicts = fs::read_to_string(out2.join("verify.csv")).unwrap();
    assert!(verdicts.starts_with("check,lhs,rhs,verdict\n"));
    assert!(verdicts.contains("semiconjugacy_relative"));
    assert!(!verdicts.contains(",fail\n"), "{verdicts}");
}

#[test]
fn lockfile_blocks_concurrent_ownership() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".decorr.lock"), "held\n").unwrap();
    let cfg = write_config(tmp.path(), "cfg.json", &doubling_config(&out));
    let s = run(decorr().args(["simulate", "--config"]).arg(&cfg));
    assert_eq!(s.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&s.stderr).contains("locked"));
}
