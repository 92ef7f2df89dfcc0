use std::process::Command;

use biphase::cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("biphase").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn counts_print_decimals() {
    assert_eq!(call(&["count", "trees", "--i", "2", "--j", "2"]), (EXIT_OK, "4\n".into(), String::new()));
    assert_eq!(call(&["count", "oracle", "--i", "3", "--j", "3", "--m", "6"]).1, "78\n");
    assert_eq!(call(&["count", "unicyclic", "--i", "3", "--j", "3"]).1, "78\n");
    assert_eq!(call(&["count", "forest", "--i", "2", "--j", "2", "--s", "1", "--t", "1"]).1, "3\n");
}

#[test]
fn json_counts_are_strings() {
    let (code, out, _) = call(&["--format", "json", "count", "trees", "--i", "9", "--j", "9"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count"], "1853020188851841");
}

#[test]
fn domain_and_usage_errors_exit_2() {
    let (code, out, err) = call(&["scalar", "delta", "--eps", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("domain error"));
    assert_eq!(call(&["count", "trees", "--i", "2"]).0, EXIT_USAGE);
    assert_eq!(call(&["count", "trees", "--i", "2", "--j", "2", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(call(&["experiment", "nonsense"]).0, EXIT_USAGE);
    assert_eq!(call(&["count", "oracle", "--i", "5", "--j", "5", "--m", "10", "--max-slots", "20"]).0, EXIT_USAGE);
}

#[test]
fn scalars() {
    let (_, out, _) = call(&["scalar", "delta", "--eps", "0.05"]);
    assert!((out.trim().parse::<f64>().unwrap() - 0.001209835830567997).abs() < 1e-15);
    let (_, out, _) = call(&["--format", "json", "scalar", "lambda", "--r1", "0", "--r2", "inf"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
    let (code, out, _) = call(&["scalar", "threshold", "--n", "1000000", "--eps", "-0.05", "--alpha", "0"]);
    assert_eq!(code, EXIT_OK);
    assert!((out.trim().parse::<f64>().unwrap() - 689.766).abs() < 0.01);
}

#[test]
fn expect_prints_log_and_decimal() {
    let (code, out, _) = call(&["expect", "--n", "1000", "--eps", "0.1", "--i", "3", "--j", "3", "--ell", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("ln = "));
    assert!(out.contains("value = "));
    let (_, out, _) = call(&["--format", "json", "expect", "--n", "1000", "--eps", "0.1", "--i", "2", "--j", "2", "--ell", "-1"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["count_source"], "exact");
    assert_eq!(v["expected"]["sign"], 1);
}

#[test]
fn sample_is_reproducible_and_dumps_edges() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.txt");
    let args = ["sample", "--n", "500", "--eps", "0.1", "--seed", "7", "--dump-edges", path.to_str().unwrap()];
    let (code, a, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    let (_, b, _) = call(&args);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    let edges = v["edges"].as_u64().unwrap();
    let dumped = std::fs::read_to_string(&path).unwrap();
    assert_eq!(dumped.lines().count() as u64, edges);
    for key in ["trees", "unicyclic", "complex", "L1", "L2", "histograms", "shape_map"] {
        assert!(v["census"].get(key).is_some(), "missing {key}");
    }
    let (_, csv, _) = call(&["--format", "csv", "sample", "--n", "50", "--eps", "0.1", "--seed", "1"]);
    assert!(csv.starts_with("i,j,ell,count\n"));
}

#[test]
fn experiment_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("giant.conf");
    std::fs::write(&path, "n = 3000\neps = 0.2\ntrials = 4\nseed = 11\n").unwrap();
    let p = path.to_str().unwrap();
    let (code, a, _) = call(&["--threads", "1", "experiment", "giant", "--config", p]);
    // eps^3 n = 24 < 100, so the run is report-only
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["status"], "report_only");
    assert_eq!(v["config"]["n"], 3000);
    assert_eq!(v["seeds"].as_array().unwrap().len(), 4);
    let (_, b, _) = call(&["--threads", "3", "experiment", "giant", "--config", p]);
    assert_eq!(a, b);
    let (_, c, _) = call(&["--threads", "1", "experiment", "giant", "--config", p, "--trials", "2"]);
    let v: serde_json::Value = serde_json::from_str(&c).unwrap();
    assert_eq!(v["config"]["trials"], 2);
    let (_, csv, _) = call(&["--format", "csv", "experiment", "giant", "--config", p]);
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn failing_experiment_exits_1() {
    // a zero tolerance on the giant order cannot be met
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.conf");
    std::fs::write(&path, "n = 100000\neps = 0.2\ntrials = 2\ngiant_order_rel = 0\n").unwrap();
    let (code, out, _) = call(&["experiment", "giant", "--config", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAILED);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "fail");
    assert_eq!(v["pass"], false);
}

#[test]
fn selftest_passes() {
    let (code, out, _) = call(&["selftest"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn binary_exit_codes_and_seed_variable() {
    let bin = env!("CARGO_BIN_EXE_biphase");
    let status = Command::new(bin).args(["scalar", "delta", "--eps", "0"]).output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    let out = Command::new(bin).args(["count", "trees", "--i", "2", "--j", "2"]).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), "4\n");

    let with_env = Command::new(bin)
        .env("BIPHASE_SEED", "42")
        .args(["sample", "--n", "200", "--eps", "0.1"])
        .output()
        .unwrap();
    let with_flag = Command::new(bin)
        .env_remove("BIPHASE_SEED")
        .args(["sample", "--n", "200", "--eps", "0.1", "--seed", "42"])
        .output()
        .unwrap();
    assert_eq!(with_env.stdout, with_flag.stdout);
    let bad = Command::new(bin)
        .env("BIPHASE_SEED", "x")
        .args(["sample", "--n", "200", "--eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
