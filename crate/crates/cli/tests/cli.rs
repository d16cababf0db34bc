use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbias")).args(args).output().expect("gbias runs")
}

fn json_out(args: &[&str]) -> Value {
    let out = gbias(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("json on stderr")
}

fn read_values(path: &Path) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), vec!["value"]);
    rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect()
}

#[test]
fn eval_examples() {
    let v = json_out(&["eval", "--g0n", "--a", "0", "--x", "1"]);
    assert_eq!(v["values"][0].as_f64().unwrap(), 0.367_879_441_171_442_33);
    let v = json_out(&["eval", "--gnn", "--r", "1,2", "--x", "0.5"]);
    assert!((v["values"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let v = json_out(&["eval", "--g0n", "--a", "0,0", "--x", "1"]);
    assert!((v["values"][0].as_f64().unwrap() - 0.227_787_745_499_066_87).abs() < 1e-9);
    let v = json_out(&["eval", "--pn", "--n", "2", "--x", "1"]);
    assert!((v["values"][0].as_f64().unwrap() - 0.134_016_241_016_994_27).abs() < 1e-9);
}

#[test]
fn eval_csv() {
    let out = gbias(&["eval", "--g0n", "--a", "0", "--x", "1", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x,value,abs_error\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_and_domain_errors_exit_two() {
    let cases: [(&[&str], &str); 4] = [
        (&["eval", "--g0n", "--a", "-2", "--x", "1"], "domain"),
        (&["bogus"], "usage"),
        (&["verify", "--suite", "nope"], "usage"),
        (&["sample", "--pg", "--r", "0,1"], "domain"),
    ];
    for (args, kind) in cases {
        let out = gbias(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["error"], kind, "{args:?}");
        assert_eq!(err["exit_code"], 2);
    }
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_gbias"))
        .args(["eval", "--g0n", "--a", "0", "--x", "1"])
        .env("GBIAS_THREADS", "zz")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
    let ok = Command::new(env!("CARGO_BIN_EXE_gbias"))
        .args(["eval", "--g0n", "--a", "0", "--x", "1"])
        .env("GBIAS_THREADS", "1")
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn sample_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pg.csv");
    let out = gbias(&["sample", "--pg", "--r", "2,3", "--N", "20000", "--seed", "7", "-o", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let values = read_values(&path);
    assert_eq!(values.len(), 20_000);
    // mean 6, variance 96
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!((mean - 6.0).abs() < 4.0 * (96.0f64 / 20_000.0).sqrt(), "mean {mean}");

    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("pg.json")).unwrap()).unwrap();
    assert_eq!(sidecar["kind"], "product_gamma");
    assert_eq!(sidecar["params"]["shapes"], serde_json::json!([2.0, 3.0]));
    assert_eq!(sidecar["seed"], 7);
    assert_eq!(sidecar["N"], 20_000);
}

#[test]
fn sample_defaults_and_reproducibility() {
    let first = gbias(&["sample", "--vn", "--r", "1,1", "--N", "500"]);
    let second = gbias(&["sample", "--vn", "--r", "1,1", "--N", "500", "--seed", "42"]);
    let sequential = gbias(&["--sequential", "sample", "--vn", "--r", "1,1", "--N", "500"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.stdout, sequential.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value"));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 500);
    assert!(values.iter().all(|v| *v > 0.0 && *v < 1.0));
    let other = gbias(&["sample", "--vn", "--r", "1,1", "--N", "500", "--seed", "43"]);
    assert_ne!(text.as_bytes(), other.stdout.as_slice());
}

#[test]
fn gamma_bias_of_product_gamma_is_itself() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gb.csv");
    let n = 20_000;
    let out = gbias(&[
        "sample", "--gbias", "--w", "pg", "--r", "2,3", "--N", &n.to_string(), "-o", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut values = read_values(&path);
    values.sort_by(f64::total_cmp);
    let grid = [1.0, 2.5, 4.0, 6.0, 9.0, 15.0];
    let arg = grid.map(|x| x.to_string()).join(",");
    let cdf = json_out(&["density", "--pg", "--r", "2,3", "--cdf", "--grid", &arg]);
    let critical = 1.6276 / (n as f64).sqrt();
    for (i, x) in grid.iter().enumerate() {
        let empirical = values.partition_point(|v| v <= x) as f64 / n as f64;
        let exact = cdf["values"][i].as_f64().unwrap();
        assert!((empirical - exact).abs() < critical, "x={x}: {empirical} vs {exact}");
    }
}

#[test]
fn density_of_gamma_bias_matches_base() {
    let gb = json_out(&["density", "--gbias", "--w", "pg", "--r", "2,3", "--x", "5"]);
    let pg = json_out(&["density", "--pg", "--r", "2,3", "--x", "5"]);
    let (a, b) = (gb["values"][0].as_f64().unwrap(), pg["values"][0].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
    assert_eq!(gb["quantity"], "density");
}

#[test]
fn verify_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.json");
    let out = gbias(&["verify", "--suite", "theorem-equal", "--a", "0", "--n", "1", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let summary = gbias(&["report", path.to_str().unwrap()]);
    assert_eq!(summary.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&summary.stdout).starts_with("theorem-equal"));

    let csv = gbias(&["report", path.to_str().unwrap(), "--format", "csv"]);
    assert!(String::from_utf8_lossy(&csv.stdout).starts_with("claim_id,label"));

    let missing = gbias(&["report", dir.path().join("none.json").to_str().unwrap()]);
    assert_ne!(missing.status.code(), Some(0));
    assert!(stderr_json(&missing)["error"].is_string());
}

#[test]
fn fixed_point_suite_passes() {
    let out = gbias(&["verify", "--suite", "fixed-point", "--r", "1", "--N", "100000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = if reports.is_array() { reports[0].clone() } else { reports };
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["claim_id"], "fixed-point");
}

#[test]
fn failed_check_exits_one() {
    let out = gbias(&["verify", "--suite", "theorem-general", "--a", "0,1", "--x", "0.5,2", "--tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let report = if report.is_array() { report[0].clone() } else { report };
    assert_eq!(report["verdict"], "fail");
}
