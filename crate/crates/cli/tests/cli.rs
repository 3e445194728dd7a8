use std::path::Path;
use std::process::{Command, Output};

use mssm_core::inference::{PosteriorFile, PosteriorFit, PriorSet, ParamLayout};

fn mssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mssm")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small simulated run directory.
fn simulate(dir: &Path) {
    let out = mssm(&[
        "simulate", "--out-dir", s(dir), "--harmonics", "1", "--coarse-steps", "60", "--fine-steps", "150", "--seed", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn fit_map(dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.json");
    let post = dir.join("post.json");
    let mut args = vec!["fit", "--config", s(&cfg), "--method", "map", "--out", s(&post)];
    args.extend_from_slice(extra);
    mssm(&args)
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(code(&mssm(&["--help"])), 0);
    assert_eq!(code(&mssm(&["fit", "--no-such-flag"])), 1);
}

#[test]
fn fit_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = dir.path().join("run.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    json["seed"] = serde_json::Value::Null;
    std::fs::write(&cfg, json.to_string()).unwrap();
    let out = fit_map(dir.path(), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert_eq!(code(&fit_map(dir.path(), &["--seed", "1"])), 0);
}

#[test]
fn missing_posterior_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let out = mssm(&[
        "forecast", "--config", s(&dir.path().join("run.json")), "--posterior", s(&dir.path().join("nope.json")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn iteration_limit_exits_two_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = dir.path().join("run.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    json["fit"] = serde_json::json!({"map": {"optimizer": {"max_evaluations": 20, "restarts": 0}}});
    std::fs::write(&cfg, json.to_string()).unwrap();
    let out = fit_map(dir.path(), &["--check"]);
    assert_eq!(code(&out), 2);
    assert!(dir.path().join("post.json").exists());
    assert!(dir.path().join("post.trace.csv").exists());
}

#[test]
fn resume_starts_from_stored_posterior() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    assert_eq!(code(&fit_map(dir.path(), &[])), 0);
    let first = PosteriorFile::load(dir.path().join("post.json")).unwrap();
    let next = dir.path().join("next.json");
    let out = mssm(&[
        "fit", "--config", s(&dir.path().join("run.json")), "--resume", s(&dir.path().join("post.json")), "--method", "vi",
        "--vi-steps", "30", "--out", s(&next), "--check",
    ]);
    assert!(code(&out) != 1, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("next.trace.csv")).unwrap();
    // no MAP stage when resuming into VI
    assert!(trace.lines().skip(1).all(|l| l.starts_with("vi,")));
    assert_eq!(trace.lines().count(), 31);
    let resumed = PosteriorFile::load(&next).unwrap();
    let PosteriorFit::Vi { surrogate } = &resumed.fit else { panic!("expected a surrogate") };
    for (a, b) in surrogate.mean.iter().zip(first.center()) {
        assert!((a - b).abs() < 0.5);
    }
}

#[test]
fn resume_rejects_other_structures() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    assert_eq!(code(&fit_map(dir.path(), &[])), 0);
    let cfg = dir.path().join("run.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    json["spec"]["ar"] = serde_json::Value::Bool(false);
    std::fs::write(&cfg, json.to_string()).unwrap();
    let out = fit_map(dir.path(), &["--resume", s(&dir.path().join("post.json")), "--out", s(&dir.path().join("b.json"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn empty_dataset_returns_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "timestamp,value\n").unwrap();
    let spec = r#"{"seed":0,"spec":{"fine_step_seconds":1800,"seasonal":[{"period":48,"harmonics":1}]},
                 "data":{"inputs":[{"path":"empty.csv"}],"holdout_steps":0}}"#;
    std::fs::write(dir.path().join("run.json"), spec).unwrap();
    let out = fit_map(dir.path(), &["--check"]);
    assert!(code(&out) != 1, "{}", String::from_utf8_lossy(&out.stderr));
    let file = PosteriorFile::load(dir.path().join("post.json")).unwrap();
    let center = PriorSet::default().center(&ParamLayout::new(&file.spec));
    for (a, b) in file.center().iter().zip(&center) {
        assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }
}

#[test]
fn data_dir_resolves_relative_inputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let cfg = dir.path().join("run.json");
    let post = dir.path().join("p.json");
    let out = Command::new(env!("CARGO_BIN_EXE_mssm"))
        .args(["fit", "--config", s(&cfg), "--method", "map", "--data", "fine.csv", "--out", s(&post)])
        .env("MSSM_DATA_DIR", dir.path())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(code(&out) != 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(post.exists());
}

#[test]
fn forecast_outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    assert_eq!(code(&fit_map(dir.path(), &[])), 0);
    // a surrogate so that the mixture has many components
    let vi = dir.path().join("vi.json");
    let out = mssm(&[
        "fit", "--config", s(&dir.path().join("run.json")), "--resume", s(&dir.path().join("post.json")),
        "--vi-steps", "20", "--out", s(&vi),
    ]);
    assert!(code(&out) != 1);
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let (f, r) = (dir.path().join(format!("f{threads}.csv")), dir.path().join(format!("r{threads}.json")));
        let out = mssm(&[
            "forecast", "--config", s(&dir.path().join("run.json")), "--posterior", s(&vi), "--threads", threads,
            "--samples", "12", "--out", s(&f), "--report", s(&r), "--check",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push((std::fs::read(&f).unwrap(), std::fs::read(&r).unwrap()));
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn single_sample_ribbon_is_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    assert_eq!(code(&fit_map(dir.path(), &[])), 0);
    let f = dir.path().join("f.csv");
    let out = mssm(&[
        "forecast", "--config", s(&dir.path().join("run.json")), "--posterior", s(&dir.path().join("post.json")),
        "--samples", "1", "--horizon", "96", "--out", s(&f), "--report", s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&f).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 96);
    // two days of half-hour steps
    assert_eq!(rows[95][0] - rows[0][0], 95.0 * 1800.0);
    for r in &rows {
        let (mean, median, q05, q25, q75, q95) = (r[1], r[2], r[3], r[4], r[5], r[6]);
        let sigma = (q95 - q05) / (2.0 * 1.644_853_626_951_472_2);
        assert!((median - mean).abs() < 1e-5 * sigma.max(1.0));
        assert!(((q75 - q25) / (2.0 * 0.674_489_750_196_081_7) - sigma).abs() < 1e-4 * sigma);
    }
}

#[test]
fn eval_rejects_horizon_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let report = |h: usize| {
        serde_json::json!({"expected_mae":{"mean":1.0,"std_error":0.1},"holdout_log_likelihood":null,
                           "point_mae_mean":null,"point_mae_median":null,"num_mc_samples":100,"horizon":h})
        .to_string()
    };
    std::fs::write(dir.path().join("a.json"), report(96)).unwrap();
    std::fs::write(dir.path().join("b.json"), report(48)).unwrap();
    let out = mssm(&["eval", "--baseline", s(&dir.path().join("a.json")), "--candidate", s(&dir.path().join("b.json"))]);
    assert_eq!(code(&out), 1);
    let out = mssm(&["eval", "--baseline", s(&dir.path().join("a.json")), "--candidate", s(&dir.path().join("a.json"))]);
    assert_eq!(code(&out), 0);
    let c: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(c["expected_mae_ratio"], 1.0);
}

#[test]
fn aggregate_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "timestamp,value\n0,1\n60,3\n120,0\n180,4\n").unwrap();
    let output = dir.path().join("out.csv");
    let out = mssm(&["aggregate", "--input", s(&input), "--ratio", "2", "--output", s(&output), "--check"]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "timestamp,value\n0,2\n120,2\n");
    let out = mssm(&[
        "aggregate", "--input", s(&input), "--ratio", "2", "--mode", "geometric", "--floor", "reject", "--output", s(&output),
    ]);
    assert_eq!(code(&out), 1);
}
