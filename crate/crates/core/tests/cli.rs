//! End-to-end tests of the binary: exit codes, JSON schema, config
//! precedence and the simulate -> estimate pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_superhedge")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): stdout={} stderr={}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn plugin_estimate_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0\n1\n2\n").unwrap();
    let out = run(
        &["estimate", "--method", "plugin", "--data", "d.csv", "--payoff", "pos(1-r)"],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json_of(&out);
    assert_eq!(v["schema"], 1);
    assert!((v["price"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((v["strategy"][0].as_f64().unwrap() + 0.5).abs() < 1e-9);
    assert_eq!(v["na_check"]["arbitrage_free"], true);
}

#[test]
fn check_na_exit_code_on_arbitrage() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("up.csv"), "1.5\n1.2\n2.0\n").unwrap();
    let out = run(&["check-na", "--data", "up.csv"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("arbitrage direction"), "stderr: {err}");
}

#[test]
fn check_na_passes_on_straddling_sample() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.csv"), "0.5\n1.0\n1.5\n").unwrap();
    let out = run(&["check-na", "--data", "ok.csv"], dir.path());
    assert!(out.status.success());
    let v = json_of(&out);
    assert_eq!(v["arbitrage_free"], true);
}

#[test]
fn missing_data_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["estimate", "--method", "plugin", "--payoff", "pos(1-r)"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_data_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["estimate", "--method", "plugin", "--data", "nope.csv", "--payoff", "pos(1-r)"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn lipschitz_audit_refusal_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0.5\n1.0\n1.5\n").unwrap();
    let out = run(
        &["estimate", "--method", "wasserstein", "--data", "d.csv", "--payoff", "(r-1)^2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("penalty"), "audit refusal should point at the penalty estimator: {err}");
}

#[test]
fn simulate_then_estimate_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sim_args = [
        "simulate", "--model", "lgarch", "--omega", "0.02", "--alpha", "0.8", "--beta", "0.1",
        "--innov", "t5", "--n", "400", "--seed", "7", "--out", "r.csv",
    ];
    let out = run(&sim_args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv1 = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();

    let est = run(
        &["estimate", "--method", "plugin", "--data", "r.csv", "--payoff", "pos(r-1)"],
        dir.path(),
    );
    assert!(est.status.success());
    let v1 = json_of(&est);

    // same seed, same everything
    let out = run(&sim_args, dir.path());
    assert!(out.status.success());
    assert_eq!(csv1, std::fs::read_to_string(dir.path().join("r.csv")).unwrap());
    let est2 = run(
        &["estimate", "--method", "plugin", "--data", "r.csv", "--payoff", "pos(r-1)"],
        dir.path(),
    );
    assert_eq!(v1, json_of(&est2));
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0\n1\n2\n").unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "method=plugin\npayoff=pos(1-r)\ndata=d.csv\n",
    )
    .unwrap();
    let from_config = run(&["estimate", "--config", "run.cfg"], dir.path());
    assert!(from_config.status.success(), "{}", String::from_utf8_lossy(&from_config.stderr));
    let v = json_of(&from_config);
    assert!((v["price"].as_f64().unwrap() - 0.5).abs() < 1e-9);

    // explicit flag overrides the config's payoff
    let overridden = run(
        &["estimate", "--config", "run.cfg", "--payoff", "pos(r-1)"],
        dir.path(),
    );
    let v2 = json_of(&overridden);
    assert_eq!(v2["resolved_config"]["payoff"], "pos(r-1)");
    assert!((v2["price"].as_f64().unwrap() - 0.5).abs() < 1e-9); // call on {0,1,2} is also 0.5
}

#[test]
fn resolved_config_echo_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0.2\n0.8\n1.1\n1.9\n").unwrap();
    let first = run(
        &[
            "estimate", "--method", "wasserstein", "--data", "d.csv", "--payoff", "abs(r-1)",
            "--gamma", "0.4", "--box", "2.0",
        ],
        dir.path(),
    );
    assert!(first.status.success());
    let v1 = json_of(&first);

    // write the echoed config back out and rerun from it alone
    let echo = v1["resolved_config"].as_object().unwrap();
    let cfg_text: String = echo
        .iter()
        .map(|(k, v)| format!("{k}={}\n", v.as_str().unwrap()))
        .collect();
    std::fs::write(dir.path().join("echo.cfg"), cfg_text).unwrap();
    let second = run(&["estimate", "--config", "echo.cfg"], dir.path());
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    assert_eq!(v1, json_of(&second));
}

#[test]
fn option_quotes_flow_through() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0\n1\n2\n").unwrap();
    let out = run(
        &[
            "estimate", "--method", "plugin", "--data", "d.csv", "--payoff", "pos(r-1)",
            "--option", "pos(1-r)@0.5",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json_of(&out);
    assert!((v["price"].as_f64().unwrap() - 0.5).abs() < 1e-7);
}

#[test]
fn multiperiod_method() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "0\n1\n2\n").unwrap();
    let out = run(
        &[
            "estimate", "--method", "multiperiod", "--data", "d.csv", "--T", "2", "--payoff",
            "pos(1-x2)",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert!((v["price"].as_f64().unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn rates_study_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "rates", "--law", "uniform(0,2)", "--payoff", "abs(r-1)", "--n-grid", "20,40,80",
            "--runs", "20", "--reference", "1.0", "--out-dir", "study",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["n_grid"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("study/study.csv").exists());
    assert!(dir.path().join("study/summary.json").exists());
    assert!(dir.path().join("study/config.txt").exists());
    let csv = std::fs::read_to_string(dir.path().join("study/study.csv")).unwrap();
    assert!(csv.starts_with("study,N,run,value\n"));
}

#[test]
fn robustness_study_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "robustness", "--law", "uniform(0,2)", "--payoff", "abs(r-1)", "--perturb",
            "winf-shift:0.01", "--n", "50", "--runs", "20",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert!(v["estimate_distance"].as_f64().unwrap() >= 0.0);
}

#[test]
fn backtest_runs_on_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(
        &[
            "simulate", "--model", "lgarch", "--omega", "0.02", "--alpha", "0.3", "--beta",
            "0.4", "--innov", "normal", "--n", "150", "--seed", "5", "--out", "r.csv",
        ],
        dir.path(),
    );
    assert!(sim.status.success());
    let out = run(
        &[
            "backtest", "--data", "r.csv", "--payoff", "pos(r-1)", "--window", "50", "--level",
            "0.05", "--smoothing", "10", "--out-dir", "bt",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    let plugin = v["plugin"].as_array().unwrap();
    let wass = v["wasserstein"].as_array().unwrap();
    assert_eq!(plugin.len(), 101);
    for (p, w) in plugin.iter().zip(wass) {
        assert!(w.as_f64().unwrap() >= p.as_f64().unwrap() - 1e-9);
    }
    assert!(dir.path().join("bt/backtest.csv").exists());
}
