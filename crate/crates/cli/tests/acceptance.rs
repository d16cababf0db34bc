//! Acceptance run: executes the full verification suite through the binary
//! twice, re-judges every criterion from the emitted reports with its own
//! pinned tolerances, and prints one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gbias_core::verifier::{VerificationReport, DEFAULT_GRID};
use serde_json::{json, Value};

const ALPHA: f64 = 0.01;
const KS_C: f64 = 1.6276;
// 2 K_0(2) from mpmath, 20 digits
const G_1_00: f64 = 0.227_787_745_499_066_87;

struct Run {
    code: Option<i32>,
    bytes: Vec<u8>,
    elapsed: Duration,
}

fn gbias(args: &[&str], out: &Path) -> Run {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_gbias"))
        .args(args)
        .arg("-o")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("gbias binary runs");
    let elapsed = start.elapsed();
    Run { code: status.code(), bytes: std::fs::read(out).unwrap_or_default(), elapsed }
}

/// Relative error as the reports define it: absolute when `|lhs| < 1e-12`.
fn rel(lhs: f64, rhs: f64) -> f64 {
    let d = (lhs - rhs).abs();
    if lhs.abs() < 1e-12 {
        d
    } else {
        d / lhs.abs()
    }
}

struct Row<'a> {
    report: &'a VerificationReport,
    label: &'a str,
    point: f64,
    lhs: f64,
    rhs: f64,
    abs: f64,
}

fn rows<'a>(reports: &'a [VerificationReport], claim: &'a str) -> impl Iterator<Item = Row<'a>> + 'a {
    reports.iter().filter(move |r| r.claim_id == claim).flat_map(|r| {
        (0..r.labels.len()).map(move |i| Row {
            report: r,
            label: &r.labels[i],
            point: r.points[i],
            lhs: r.lhs[i],
            rhs: r.rhs[i],
            abs: (r.lhs[i] - r.rhs[i]).abs(),
        })
    })
}

fn of_claim<'a>(reports: &'a [VerificationReport], claim: &str) -> Vec<&'a VerificationReport> {
    reports.iter().filter(|r| r.claim_id == claim).collect()
}

fn vectors(reports: &[&VerificationReport], key: &str) -> BTreeSet<String> {
    reports.iter().map(|r| r.config[key].to_string()).collect()
}

fn expect_set(found: BTreeSet<String>, expected: &[Value]) -> Result<(), String> {
    let want: BTreeSet<String> = expected.iter().map(Value::to_string).collect();
    if found == want {
        Ok(())
    } else {
        Err(format!("parameter sets differ: found {found:?}, expected {want:?}"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn no_errors(reports: &[&VerificationReport]) -> Result<(), String> {
    for r in reports {
        ensure(r.errors.is_empty(), || format!("{}: evaluation errors {:?}", r.claim_id, r.errors))?;
    }
    Ok(())
}

fn grid_ok(reports: &[&VerificationReport]) -> Result<(), String> {
    let want = json!(DEFAULT_GRID);
    for r in reports {
        ensure(r.config["grid"] == want, || format!("{}: grid {}", r.claim_id, r.config["grid"]))?;
    }
    Ok(())
}

fn order(r: &VerificationReport) -> usize {
    r.config["n"].as_u64().map(|n| n as usize).or_else(|| r.config["a"].as_array().map(Vec::len)).unwrap_or(0)
}

fn c1(all: &[VerificationReport], general_time: Duration) -> Result<String, String> {
    let reports = of_claim(all, "theorem-general");
    expect_set(
        vectors(&reports, "a"),
        &[json!([0.0]), json!([0.0, 0.0]), json!([0.0, 1.0]), json!([0.5, 1.3, 2.0]), json!([-0.9, 0.0, 1.0])],
    )?;
    grid_ok(&reports)?;
    no_errors(&reports)?;
    let (mut worst_1, mut worst_n) = (0.0f64, 0.0f64);
    for row in rows(all, "theorem-general") {
        let e = rel(row.lhs, row.rhs);
        let bound = if order(row.report) == 1 { 1e-12 } else { 1e-6 };
        ensure(e <= bound, || format!("{}: rel err {e:e} > {bound:e}", row.label))?;
        if order(row.report) == 1 {
            worst_1 = worst_1.max(e);
        } else {
            worst_n = worst_n.max(e);
        }
    }
    ensure(general_time < Duration::from_secs(60), || format!("took {general_time:?}"))?;
    Ok(format!("max rel err n=1 {worst_1:.1e}, n>1 {worst_n:.1e}; {:.1} s", general_time.as_secs_f64()))
}

fn c2(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "theorem-distinct");
    expect_set(
        vectors(&reports, "a"),
        &[json!([0.0]), json!([0.0, 1.0]), json!([-0.5, 0.5]), json!([0.5, 1.3, 2.0]), json!([-0.9, 0.0, 1.0])],
    )?;
    grid_ok(&reports)?;
    no_errors(&reports)?;
    let mut worst = 0.0f64;
    for r in &reports {
        ensure(r.notes.iter().any(|n| n.contains("j != k") && n.contains("typo")), || {
            format!("a={}: no note on the coefficient", r.config["a"])
        })?;
        for x in DEFAULT_GRID {
            let lhs_vs_sum: Vec<_> = rows(all, "theorem-distinct")
                .filter(|row| std::ptr::eq(row.report, *r) && row.point == x)
                .collect();
            ensure(lhs_vs_sum.len() == 2, || format!("a={} x={x}: expected two rows", r.config["a"]))?;
            for row in &lhs_vs_sum {
                let e = rel(row.lhs, row.rhs);
                ensure(e <= 1e-6, || format!("{}: rel err {e:e}", row.label))?;
                worst = worst.max(e);
            }
            // the third side: left-hand side against the general right-hand side
            let lhs = lhs_vs_sum.iter().find(|row| row.label.starts_with("lhs")).map(|row| row.lhs);
            let general = lhs_vs_sum.iter().find(|row| row.label.starts_with("general")).map(|row| row.lhs);
            if let (Some(l), Some(g)) = (lhs, general) {
                let e = rel(l, g);
                ensure(e <= 1e-6, || format!("a={} x={x}: lhs vs general rhs {e:e}", r.config["a"]))?;
                worst = worst.max(e);
            }
        }
    }
    Ok(format!("three-way max rel err {worst:.1e}; coefficient typo flagged"))
}

fn c3(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "theorem-equal");
    let cases: BTreeSet<String> =
        reports.iter().map(|r| format!("a={} n={}", r.config["a"], r.config["n"])).collect();
    let want: BTreeSet<String> = [0.0, 0.5]
        .iter()
        .flat_map(|a| (1..=3).map(move |n| format!("a={} n={n}", json!(a))))
        .collect();
    ensure(cases == want, || format!("cases {cases:?}"))?;
    grid_ok(&reports)?;
    no_errors(&reports)?;
    let (mut worst, mut worst_pn, mut pn_rows) = (0.0f64, 0.0f64, 0);
    for row in rows(all, "theorem-equal") {
        let e = rel(row.lhs, row.rhs);
        let bound = if order(row.report) == 1 { 1e-12 } else { 1e-6 };
        ensure(e <= bound, || format!("{}: rel err {e:e} > {bound:e}", row.label))?;
        if row.label.starts_with("product-normal") {
            pn_rows += 1;
            worst_pn = worst_pn.max(e);
        } else {
            worst = worst.max(e);
        }
    }
    ensure(pn_rows == 3 * DEFAULT_GRID.len(), || format!("{pn_rows} product-normal rows"))?;
    Ok(format!("max rel err {worst:.1e}; product-normal form {worst_pn:.1e} over {pn_rows} rows"))
}

fn c4(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "kernel-oracles");
    ensure(reports.len() == 1, || format!("{} kernel reports", reports.len()))?;
    no_errors(&reports)?;
    let suite = reports[0].config["suite"].as_array().map(Vec::len).unwrap_or(0);
    let oracle = rows(all, "kernel-oracles")
        .find(|r| r.label.starts_with("G(1|0,0) vs int"))
        .ok_or("no oracle row")?;
    let e_oracle = rel(oracle.lhs, oracle.rhs).max(rel(oracle.lhs, G_1_00));
    ensure(e_oracle <= 1e-8, || format!("G(1|0,0) rel err {e_oracle:e}"))?;
    let (mut mass, mut worst_mass) = (0, 0.0f64);
    let (mut contour, mut worst_contour) = (0, 0.0f64);
    for row in rows(all, "kernel-oracles") {
        let e = rel(row.lhs, row.rhs);
        if row.label.starts_with("int G(t|a) dt") {
            mass += 1;
            worst_mass = worst_mass.max(e);
            ensure(e <= 1e-7, || format!("{}: {e:e}", row.label))?;
        } else if row.label.starts_with("contour abscissa invariance") {
            contour += 1;
            worst_contour = worst_contour.max(e);
            ensure(e <= 1e-10, || format!("{}: {e:e}", row.label))?;
        }
    }
    ensure(mass == suite && suite == 5, || format!("{mass} normalization rows for {suite} parameter sets"))?;
    ensure(contour > 0, || "no contour rows".into())?;
    Ok(format!(
        "oracle {e_oracle:.1e}; normalization {worst_mass:.1e} ({mass} sets); contour {worst_contour:.1e} ({contour} rows)"
    ))
}

fn c5(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "operator-lemmas");
    ensure(reports.len() == 1, || format!("{} operator reports", reports.len()))?;
    no_errors(&reports)?;
    let cases = reports[0].config["cases"].as_array().ok_or("no cases")?;
    ensure(cases.len() == 20, || format!("{} random functions", cases.len()))?;
    for c in cases {
        let n = c["r"].as_array().map(Vec::len).unwrap_or(0);
        ensure((1..=4).contains(&n), || format!("shape vector of length {n}"))?;
    }
    let mut worst = 0.0f64;
    let mut parts = BTreeSet::new();
    for row in rows(all, "operator-lemmas") {
        for part in ["(i)", "(ii)", "(iii)", "(iv)"] {
            if row.label.starts_with(&format!("{part} ")) {
                parts.insert(part);
                worst = worst.max(row.abs);
                ensure(row.abs <= 1e-8, || format!("{}: error {:e}", row.label, row.abs))?;
            }
        }
    }
    ensure(parts.len() == 4, || format!("parts present: {parts:?}"))?;
    Ok(format!("worst error {worst:.1e} over 20 functions, parts (i)-(iv)"))
}

fn c6(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "stein-moments");
    expect_set(vectors(&reports, "r"), &[json!([1.0]), json!([2.0, 3.0]), json!([0.5, 0.5])])?;
    no_errors(&reports)?;
    let (mut worst_float, mut worst_se) = (0.0f64, 0.0f64);
    for r in &reports {
        ensure(r.config["samples"] == json!(1_000_000), || format!("samples {}", r.config["samples"]))?;
        ensure(r.config["max_m"] == json!(6), || format!("max m {}", r.config["max_m"]))?;
    }
    for m in 1..=6 {
        let tag = format!("m={m} ");
        let of_m: Vec<_> = rows(all, "stein-moments").filter(|r| r.label.starts_with(&tag)).collect();
        let exact: Vec<_> = of_m.iter().filter(|r| r.label.ends_with("exact residual")).collect();
        let float: Vec<_> = of_m.iter().filter(|r| r.label.contains("E Y^(m+1)")).collect();
        let mc: Vec<_> = of_m.iter().filter(|r| r.label.contains("tilted")).collect();
        ensure(exact.len() == 3 && float.len() == 3 && mc.len() == 3, || format!("m={m}: missing rows"))?;
        for row in exact {
            ensure(row.lhs == 0.0, || format!("{}: exact residual {}", row.label, row.lhs))?;
        }
        for row in float {
            let e = rel(row.lhs, row.rhs);
            worst_float = worst_float.max(e);
            ensure(e <= 1e-10, || format!("{}: {e:e}", row.label))?;
        }
        for row in mc {
            let i = row.report.labels.iter().position(|l| l == row.label).expect("row index");
            // the stored tolerance is four standard errors
            let se = row.report.tolerances[i] / 4.0;
            worst_se = worst_se.max(row.abs / se);
            ensure(row.abs <= 4.0 * se, || format!("{}: {:.2} SE", row.label, row.abs / se))?;
        }
    }
    Ok(format!("exact residuals 0; float {worst_float:.1e}; Monte Carlo within {worst_se:.2} SE at N = 1e6"))
}

fn c7(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "fixed-point");
    expect_set(vectors(&reports, "r"), &[json!([1.0]), json!([2.0, 3.0]), json!([0.5, 0.5])])?;
    no_errors(&reports)?;
    let critical = KS_C * (2.0f64 / 1e5).sqrt();
    let (mut worst, mut controls) = (0.0f64, 0);
    for r in &reports {
        ensure(r.config["samples"] == json!(100_000) && r.config["alpha"] == json!(ALPHA), || {
            format!("config {}", r.config)
        })?;
    }
    for row in rows(all, "fixed-point") {
        if row.label.starts_with("two-sample KS") {
            ensure((row.rhs - critical).abs() <= 1e-4 * critical, || format!("critical value {}", row.rhs))?;
            ensure(row.lhs <= critical, || format!("r={}: D = {} > {critical}", row.report.config["r"], row.lhs))?;
            worst = worst.max(row.lhs / critical);
        } else if row.label.starts_with("negative control") {
            controls += 1;
            ensure(row.lhs > row.rhs, || format!("control not rejected: D = {}", row.lhs))?;
        }
    }
    ensure(controls > 0, || "no negative control".into())?;
    Ok(format!("max D / critical {worst:.2}; {controls} controls rejected"))
}

fn c8(all: &[VerificationReport]) -> Result<String, String> {
    let vn = of_claim(all, "vn-formulas");
    let wgn = of_claim(all, "wgn-formulas");
    ensure(!vn.is_empty() && !wgn.is_empty(), || "missing reports".into())?;
    no_errors(&vn)?;
    no_errors(&wgn)?;
    let (mut worst_vn, mut worst_paths, mut paths, mut ks) = (0.0f64, 0.0f64, 0, 0);
    for row in rows(all, "vn-formulas") {
        if row.label.starts_with("density vs convolution") || row.label.starts_with("cdf vs quadrature") {
            let e = rel(row.lhs, row.rhs);
            worst_vn = worst_vn.max(e);
            ensure(e <= 1e-8, || format!("{}: {e:e}", row.label))?;
        }
    }
    for row in rows(all, "vn-formulas").chain(rows(all, "wgn-formulas")) {
        if row.label.starts_with("KS") {
            ks += 1;
            ensure(row.lhs <= row.rhs, || format!("{} ({}): D = {} > {}", row.label, row.report.config, row.lhs, row.rhs))?;
        }
    }
    for row in rows(all, "wgn-formulas") {
        if row.label.starts_with("cdf: incomplete-gamma path vs F_Vn path") {
            paths += 1;
            worst_paths = worst_paths.max(row.abs);
            ensure(row.abs <= 1e-9, || format!("{}: {:e}", row.label, row.abs))?;
        }
    }
    ensure(paths > 0, || "no incomplete-gamma rows".into())?;
    Ok(format!("V_n oracles {worst_vn:.1e}; {ks} KS checks pass; cdf paths {worst_paths:.1e} over {paths} rows"))
}

fn c9(all: &[VerificationReport]) -> Result<String, String> {
    let reports = of_claim(all, "product-normal");
    expect_set(vectors(&reports, "n"), &[json!(1), json!(2), json!(3)])?;
    no_errors(&reports)?;
    let mut worst = 0.0f64;
    for r in &reports {
        ensure(r.config["samples"] == json!(100_000), || format!("samples {}", r.config["samples"]))?;
    }
    let ks: Vec<_> = rows(all, "product-normal").filter(|r| r.label.starts_with("two-sample KS")).collect();
    ensure(ks.len() == 3, || format!("{} KS rows", ks.len()))?;
    for row in ks {
        let critical = KS_C * (2.0f64 / 1e5).sqrt();
        ensure(row.lhs <= critical, || format!("{}: D = {}", row.label, row.lhs))?;
        worst = worst.max(row.lhs / critical);
    }
    Ok(format!("n = 1, 2, 3 at N = 1e5; max D / critical {worst:.2}"))
}

fn c10(first: &Run, second: &Run) -> Result<String, String> {
    ensure(first.code == Some(0) && second.code == Some(0), || {
        format!("exit codes {:?} and {:?}", first.code, second.code)
    })?;
    ensure(!first.bytes.is_empty(), || "empty report".into())?;
    ensure(first.bytes == second.bytes, || "reports differ".into())?;
    let limit = Duration::from_secs(600);
    ensure(first.elapsed < limit && second.elapsed < limit, || "over ten minutes".into())?;
    Ok(format!(
        "{} bytes identical; {:.1} s and {:.1} s",
        first.bytes.len(),
        first.elapsed.as_secs_f64(),
        second.elapsed.as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let args = ["verify", "--suite", "all", "--seed", "42"];
    let first = gbias(&args, &dir.path().join("first.json"));
    let second = gbias(&args, &dir.path().join("second.json"));
    let general = gbias(&["verify", "--suite", "theorem-general"], &dir.path().join("general.json"));

    let text = String::from_utf8_lossy(&first.bytes);
    let reports = match VerificationReport::parse_many(&text) {
        Ok(r) => r,
        Err(e) => {
            println!("could not parse the report: {e}");
            return ExitCode::FAILURE;
        }
    };

    let results: Vec<(&str, Result<String, String>)> = vec![
        ("integral identity, general parameters", c1(&reports, general.elapsed)),
        ("integral identity, distinct parameters", c2(&reports)),
        ("integral identity, equal parameters", c3(&reports)),
        ("kernel oracles", c4(&reports)),
        ("operator lemmas", c5(&reports)),
        ("Stein moment identities", c6(&reports)),
        ("fixed point of the gamma bias", c7(&reports)),
        ("V_n and gamma-bias formulas", c8(&reports)),
        ("product-normal relation", c9(&reports)),
        ("reproducibility", c10(&first, &second)),
    ];

    println!();
    let mut failed = 0;
    for (i, (title, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
