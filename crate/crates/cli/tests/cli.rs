mod support;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fbmlab(args: &[&str]) -> Output {
    fbmlab_env(args, None)
}

fn fbmlab_env(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fbmlab"));
    cmd.args(args).env_remove("FBMLAB_SEED");
    if let Some(s) = seed {
        cmd.env("FBMLAB_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

/// Runs `args` with `--format json`, checks the result against the command's schema and
/// that it re-parses to the same value.
fn validated(name: &str, args: &[&str]) -> Value {
    let mut full = vec![name];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--format", "json"]);
    let v = json(&fbmlab(&full));
    let errs = support::validate(&support::load_schema(name), &v);
    assert!(errs.is_empty(), "{name}: {errs:#?}");
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
    v
}

const SMALL_MC: &[&str] = &["--d", "2", "--hurst", "0.4", "--eps", "0.1", "--n", "32", "--paths", "100", "--batches", "10"];

#[test]
fn mean_example() {
    let v = validated("mean", &["--d", "2", "--hurst", "0.5", "--T", "1", "--eps", "0.1"]);
    let want = (1.1 * 11f64.ln() - 1.0) / (2.0 * std::f64::consts::PI);
    assert!((v["value"].as_f64().unwrap() - want).abs() < 1e-6);
    assert_eq!(v["asymptotic"]["regime"], "log");
}

#[test]
fn rate_outside_regime_is_a_validation_error() {
    let o = fbmlab(&["rate", "--d", "2", "--hurst", "0.75", "--T", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("(d+1)H < 3/2"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        vec!["accept", "slow"],
        vec!["mean", "--d", "2", "--eps", "0.1"],
        vec!["mean", "--d", "2", "--hurst", "1.2", "--eps", "0.1"],
        vec!["mean", "--d", "2", "--hurst", "0.5", "--eps", "0.1", "--format", "bin"],
        vec!["edwards", "--d", "2", "--hurst", "0.4", "--eps", "0.1", "--g", "-1"],
        vec!["verify-bounds", "--d", "2", "--hurst", "0.4", "--check", "nope"],
        vec!["simulate", "--d", "2", "--hurst", "0.4", "--method", "exact"],
        vec!["frobnicate"],
    ] {
        let o = fbmlab(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn numerical_failure_exits_1_without_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.json");
    let o = fbmlab(&["e-value", "--d", "3", "--hurst", "0.6", "--eps", "0", "--gamma", "0", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("divergent"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn edwards_curve_starts_at_one() {
    let mut args = SMALL_MC.to_vec();
    args.extend_from_slice(&["--g", "0,1,5"]);
    let v = validated("edwards", &args);
    let stats = v["statistics"].as_array().unwrap();
    let g0 = stats.iter().find(|s| s["name"] == "edwards" && s["g"] == 0.0).unwrap();
    assert_eq!(g0["mean"], 1.0);

    let mut csv_args = vec!["edwards"];
    csv_args.extend_from_slice(&args);
    csv_args.extend_from_slice(&["--format", "csv"]);
    let o = fbmlab(&csv_args);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("g,mean,std_error,n_paths,n_batches"));
    assert!(lines.next().unwrap().starts_with("0,1,"));
}

fn strip_elapsed(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove("elapsed_ms");
    }
    v
}

#[test]
fn identical_across_runs_and_workers() {
    let mut args = vec!["edwards"];
    args.extend_from_slice(SMALL_MC);
    args.extend_from_slice(&["--g", "0,1", "--format", "json", "--seed", "11"]);
    let run = |threads: &str| {
        let mut a = args.clone();
        a.extend_from_slice(&["--threads", threads]);
        strip_elapsed(json(&fbmlab(&a)))
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("4"));

    let csv = |threads: &str| fbmlab(&["localtime", "--d", "2", "--hurst", "0.4", "--eps", "0.1", "--n", "32", "--paths", "20", "--g", "1", "--threads", threads]).stdout;
    assert_eq!(csv("1"), csv("3"));
}

#[test]
fn environment_seed_wins() {
    let base = ["simulate", "--d", "1", "--hurst", "0.3", "--n", "8"];
    let with_flag = |s: &str, env: Option<&str>| {
        let mut a = base.to_vec();
        a.extend_from_slice(&["--seed", s]);
        fbmlab_env(&a, env).stdout
    };
    assert_ne!(with_flag("1", None), with_flag("2", None));
    assert_eq!(with_flag("1", Some("2")), with_flag("2", None));
    let bad = fbmlab_env(&base, Some("abc"));
    assert_eq!(code(&bad), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# mean run\nd = 2\nhurst = 0.5\neps = 0.1\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = json(&fbmlab(&["mean", "--config", c, "--format", "json"]));
    assert!((from_file["value"].as_f64().unwrap() - 0.2606456).abs() < 1e-6);
    let overridden = json(&fbmlab(&["mean", "--config", c, "--eps", "0.2", "--format", "json"]));
    assert_eq!(overridden["eps"], 0.2);

    std::fs::write(&cfg, "d = 2\nwidth = 3\n").unwrap();
    let o = fbmlab(&["mean", "--config", c, "--hurst", "0.5", "--eps", "0.1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("width"));
}

#[test]
fn output_file_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.bin");
    let o = fbmlab(&["simulate", "--d", "2", "--hurst", "0.4", "--n", "16", "--format", "bin", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let path = fbmlab_core::path_io::read_binary(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!((path.d(), path.grid.n), (2, 16));
    assert_eq!(path.seed, fbmlab_core::rng::DEFAULT_SEED);
}

#[test]
fn simulate_matches_library() {
    let v = validated("simulate", &["--d", "2", "--hurst", "0.4", "--n", "8", "--seed", "7", "--path-index", "3"]);
    let params = fbmlab_core::ModelParams::new(2, 0.4, 1.0).unwrap();
    let grid = fbmlab_core::TimeGrid::new(8, 1.0).unwrap();
    let path = fbmlab_core::generate_path(params, grid, 7, 3, fbmlab_core::Method::Fast).unwrap();
    let values = v["values"].as_array().unwrap();
    for (k, row) in values.iter().enumerate() {
        let row: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(row, path.position(k));
    }
}

#[test]
fn localtime_csv_columns() {
    let o = fbmlab(&["localtime", "--d", "2", "--hurst", "0.4", "--eps", "0.1", "--n", "16", "--paths", "3", "--g", "0,2"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path_index,epsilon,L_eps,L_eps_centered,edwards_weight_g0,edwards_weight_g2");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[2] >= 0.0);
        assert_eq!(cells[4], 1.0);
        assert!((cells[5] - (-2.0 * cells[2]).exp()).abs() < 1e-15);
    }
}

#[test]
fn reports_match_schemas() {
    validated("localtime", &["--d", "2", "--hurst", "0.4", "--eps", "0.1", "--n", "16", "--paths", "4", "--g", "0.5", "--center"]);
    validated("var", &["--d", "2", "--hurst", "0.4", "--eps", "0.1", "--rel-tol", "1e-4"]);
    let e = validated("e-value", &["--d", "2", "--hurst", "0.4", "--eps", "0.1", "--gamma", "0.05", "--rel-tol", "1e-4"]);
    let parts: f64 = e["region_breakdown"].as_object().unwrap().values().map(|x| x.as_f64().unwrap()).sum();
    assert!((parts - e["value"].as_f64().unwrap()).abs() < 1e-12);
    validated("rate", &["--d", "2", "--hurst", "0.4", "--ladder", "0.25,0.125,0.0625", "--rel-tol", "1e-4"]);
    validated("mean-divergence", &["--d", "2", "--hurst", "0.5", "--ladder", "1e-6,1e-5,1e-4"]);
    let p = validated("divergence-probe", &["--d", "2", "--hurst", "0.5"]);
    assert_eq!(p["report"]["growth"], "stabilizing");
    let mut tails = SMALL_MC.to_vec();
    tails.extend_from_slice(&["--levels", "0.05,0.1"]);
    validated("tails", &tails);
    let b = validated("verify-bounds", &["--d", "2", "--hurst", "0.45", "--samples", "200"]);
    assert_eq!(b["reports"].as_array().unwrap().len(), 13);
}

#[test]
fn curves_as_csv() {
    let o = fbmlab(&["mean-divergence", "--d", "2", "--hurst", "0.5", "--ladder", "1e-6,1e-4", "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,value");
    assert_eq!(lines.len(), 3);
}

#[test]
fn fast_acceptance_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("accept.json");
    let o = fbmlab(&["accept", "fast", "-o", out.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let errs = support::validate(&support::load_schema("accept"), &report);
    assert!(errs.is_empty(), "{errs:#?}");
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 7);
    let table = stderr(&o);
    assert_eq!(table.lines().filter(|l| l.starts_with("criterion")).count(), 7);
    let passed = report["passed"].as_bool().unwrap();
    assert_eq!(passed, results.iter().all(|r| r["passed"] == true));
    assert_eq!(code(&o), if passed { 0 } else { 1 });
}

#[test]
fn help_exits_zero() {
    let o = fbmlab(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("divergence-probe"));
    assert!(Path::new(env!("CARGO_BIN_EXE_fbmlab")).exists());
}
