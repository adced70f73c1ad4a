use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvpsvd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvpsvd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ESTIMATE: &str = r#"
[run]
draws = 400
burn_in = 200
seed = 5

[prior]
family = "g"
clustering = true
kappa = 0.01

[prior.mixture]
groups = 6

[data]
kind = "regression"
path = "sim/step.csv"
target = "y"
"#;

#[test]
fn simulate_step_writes_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvpsvd(dir.path(), &["simulate", "--dgp", "step", "--close-gap", "--out", "sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sim/step.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "date,y,beta_tilde,m");
    assert_eq!(lines.count(), 160);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = tvpsvd(dir.path(), &["simulate", "--dgp", "rw", "--seed", "9", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/random_walk.csv")).unwrap();
    let b = fs::read(dir.path().join("b/random_walk.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvpsvd(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[prior]\nkappa = -1.0\n").unwrap();
    let o = tvpsvd(dir.path(), &["estimate", "-c", "bad.toml", "--dry-run"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let line: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(line["error"], "config");

    fs::write(dir.path().join("typo.toml"), "[run]\ndraw = 10\n").unwrap();
    let o = tvpsvd(dir.path(), &["estimate", "-c", "typo.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("est.toml"), ESTIMATE).unwrap();
    let o = tvpsvd(dir.path(), &["estimate", "-c", "est.toml"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let line: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(line["error"], "data");
}

#[test]
fn dry_run_validates_without_sampling() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tvpsvd(dir.path(), &["simulate", "--dgp", "step", "--out", "sim"]).status.success());
    fs::write(dir.path().join("est.toml"), ESTIMATE).unwrap();
    let o = tvpsvd(dir.path(), &["estimate", "-c", "est.toml", "--dry-run", "--out", "est"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("T = 160, K = 1"));
    assert!(!dir.path().join("est").exists());
}

#[test]
fn estimate_writes_chains_and_group_table() {
    let dir = tempfile::tempdir().unwrap();
    assert!(tvpsvd(dir.path(), &["simulate", "--dgp", "step", "--out", "sim"]).status.success());
    fs::write(dir.path().join("est.toml"), ESTIMATE).unwrap();
    let o = tvpsvd(dir.path(), &["estimate", "-c", "est.toml", "--out", "est", "--store-paths"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("G0 ="), "{out}");
    assert!(out.contains("beta_t"), "{out}");

    let table = fs::read_to_string(dir.path().join("est/g0_table.csv")).unwrap();
    let probs: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 6);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let chain = dir.path().join("est/chain_1");
    for f in ["beta.csv", "h.csv", "gamma.csv", "manifest.json", "beta_draws.csv"] {
        assert!(chain.join(f).exists(), "{f} missing");
    }
    let resolved = fs::read_to_string(dir.path().join("est/config.toml")).unwrap();
    assert!(resolved.contains("store_paths = true"));
}

#[test]
fn bench_writes_timings_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let o = tvpsvd(
        dir.path(),
        &["bench", "--k", "4,6,8,10,12", "--reps", "5", "--samplers", "SVD-block", "--out", "b"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(dir.path().join("b/timings.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    assert!(dir.path().join("b/scaling_fit.txt").exists());

    let o = tvpsvd(dir.path(), &["bench", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn forecast_sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = vec!["simulate", "--dgp", "macro", "--out", "m"];
    assert!(tvpsvd(dir.path(), &cmd).status.success());
    fs::write(
        dir.path().join("f.toml"),
        r#"
[run]
draws = 120
burn_in = 60

[data]
kind = "macro"
path = "m/macro.csv"
price = "PRICE"
lags = 1
exog = ["SLACK"]

[eval]
horizons = [1]
holdout_start = 150
holdout_end = 152
benchmark = "rw"
models = [{ name = "tvp", kind = "svd" }, { name = "rw", kind = "random_walk" }]
"#,
    )
    .unwrap();
    cmd = vec!["forecast", "-c", "f.toml", "--out", "fc", "--sweep", "kappa=0.01,0.05"];
    let o = tvpsvd(dir.path(), &cmd);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in ["kappa_0.01", "kappa_0.05"] {
        let d = dir.path().join("fc").join(k);
        assert!(d.join("scores.csv").exists(), "{k}");
        assert!(d.join("bayes_factors.csv").exists(), "{k}");
        let resolved = fs::read_to_string(d.join("config.toml")).unwrap();
        assert!(resolved.contains(&format!("kappa = {}", &k[6..])), "{resolved}");
    }
    let scores = fs::read_to_string(dir.path().join("fc/kappa_0.01/scores.csv")).unwrap();
    assert!(scores.lines().any(|l| l.starts_with("tvp,1,")), "{scores}");

    let o = tvpsvd(dir.path(), &["forecast", "-c", "f.toml", "--sweep", "rho=1"]);
    assert_eq!(o.status.code(), Some(2));
}
