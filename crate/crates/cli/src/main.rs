mod args;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use gbias_core::distributions::{gamma_bias_cdf, gamma_bias_density, sample, CdfPath, DistributionDescriptor};
use gbias_core::meijer::{eval_g_0n, eval_g_nn_beta, pn_density, ContourConfig, GammaKernelArgs};
use gbias_core::par::Execution;
use gbias_core::shape::ShapeVector;
use gbias_core::verifier::{run_suite, Suite, SuiteParams, Verdict, VerificationReport, VerifyOptions};
use serde_json::json;

use args::{Cli, Command, DensityArgs, EvalArgs, Format, OutputArgs, ReportArgs, ReportFormat, SampleArgs, VerifyArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gbias_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "domain",
            CliError::Io { .. } => "io",
        }
    }
}

fn fail(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let body = json!({ "error": err.kind(), "message": err.to_string(), "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    let exec = match configure_threads(cli.sequential) {
        Ok(exec) => exec,
        Err(e) => return fail(&e),
    };
    let outcome = match &cli.command {
        Command::Eval(a) => cmd_eval(a).map(|_| 0),
        Command::Density(a) => cmd_density(a, exec).map(|_| 0),
        Command::Sample(a) => cmd_sample(a, exec).map(|_| 0),
        Command::Verify(a) => cmd_verify(a, exec),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(&e),
    }
}

/// Apply `GBIAS_THREADS` and pick the execution mode.
fn configure_threads(sequential: bool) -> Result<Execution, CliError> {
    let threads = match std::env::var("GBIAS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => return Err(CliError::Usage(format!("GBIAS_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    if sequential || threads == Some(1) || !Execution::parallel_available() {
        Ok(Execution::Sequential)
    } else {
        Ok(Execution::Parallel)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

/// Points, values and error estimates as JSON or CSV.
fn emit_table(
    out: &OutputArgs,
    meta: serde_json::Value,
    points: &[f64],
    values: &[f64],
    errors: &[Option<f64>],
) -> Result<(), CliError> {
    match out.format {
        Format::Json => {
            let mut body = meta;
            body["points"] = json!(points);
            body["values"] = json!(values);
            body["abs_errors"] = json!(errors);
            emit(out.output.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&body).expect("json")))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["x", "value", "abs_error"]).expect("in-memory csv");
            for i in 0..points.len() {
                let err = errors[i].map(|e| e.to_string()).unwrap_or_default();
                w.write_record([points[i].to_string(), values[i].to_string(), err]).expect("in-memory csv");
            }
            let bytes = w.into_inner().expect("in-memory csv");
            emit(out.output.as_deref(), &String::from_utf8(bytes).expect("utf-8"))
        }
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let points = a.points.points()?;
    let mut cfg = ContourConfig::default();
    if let Some(t) = a.tol {
        cfg = cfg.with_tolerance(t);
    }
    let mut values = Vec::with_capacity(points.len());
    let mut errors = Vec::with_capacity(points.len());
    let meta = if a.g0n {
        let params = a.a.clone().ok_or_else(|| CliError::Usage("--g0n needs --a".into()))?.0;
        for &x in &points {
            let e = eval_g_0n(&GammaKernelArgs::new(x, params.clone())?, &cfg)?;
            values.push(e.value);
            errors.push(Some(e.abs_error));
        }
        json!({ "function": "g0n", "a": params })
    } else if a.gnn {
        let r = ShapeVector::new(a.r.clone().ok_or_else(|| CliError::Usage("--gnn needs --r".into()))?.0)?;
        for &x in &points {
            // closed form, no quadrature error
            values.push(eval_g_nn_beta(x, &r)?);
            errors.push(Some(0.0));
        }
        json!({ "function": "gnn", "r": r })
    } else {
        let n = a.n.ok_or_else(|| CliError::Usage("--pn needs --n".into()))?;
        for &x in &points {
            let e = pn_density(x, n, &cfg)?;
            values.push(e.value);
            errors.push(Some(e.abs_error));
        }
        json!({ "function": "pn", "n": n })
    };
    emit_table(&a.out, meta, &points, &values, &errors)
}

fn cmd_density(a: &DensityArgs, exec: Execution) -> Result<(), CliError> {
    let d = a.law.descriptor()?;
    let points = a.points.points()?;
    let eval = |x: f64| -> gbias_core::Result<(f64, Option<f64>)> {
        match (&d, a.cdf) {
            (DistributionDescriptor::ProductNormal { n }, false) => {
                let e = pn_density(x, *n, &ContourConfig::default())?;
                Ok((e.value, Some(e.abs_error)))
            }
            (DistributionDescriptor::GammaBias { base, shapes }, false) => Ok((gamma_bias_density(x, base, shapes)?, None)),
            (DistributionDescriptor::GammaBias { base, shapes }, true) => {
                Ok((gamma_bias_cdf(x, base, shapes, CdfPath::VnCdf)?, None))
            }
            (_, false) => Ok((d.density(x)?, None)),
            (_, true) => Ok((d.cdf(x)?, None)),
        }
    };
    let results = gbias_core::par::map_slice(&points, exec, |x| eval(*x));
    let (mut values, mut errors) = (Vec::new(), Vec::new());
    for r in results {
        let (v, e) = r?;
        values.push(v);
        errors.push(e);
    }
    let meta = json!({ "quantity": if a.cdf { "cdf" } else { "density" }, "law": d });
    emit_table(&a.out, meta, &points, &values, &errors)
}

fn cmd_sample(a: &SampleArgs, exec: Execution) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--N must be positive".into()));
    }
    let d = a.law.descriptor()?;
    let batch = sample(&d, a.count, a.seed, exec)?;
    emit(a.output.as_deref(), &batch.to_csv())?;
    let sidecar = a.sidecar.clone().or_else(|| a.output.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = sidecar {
        emit(Some(&path), &format!("{}\n", batch.sidecar_json()))?;
    }
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, exec: Execution) -> Result<u8, CliError> {
    let suite = Suite::from_name(&a.suite).ok_or_else(|| {
        CliError::Usage(format!("unknown suite `{}`; expected one of {}", a.suite, Suite::NAMES.join(", ")))
    })?;
    let grid = match (&a.points.x, &a.points.grid) {
        (Some(x), _) => Some(x.0.clone()),
        (None, Some(g)) => Some(g.0.clone()),
        (None, None) => None,
    };
    let params = SuiteParams {
        a: a.a.clone().map(|l| l.0),
        r: a.r.clone().map(|l| l.0),
        n: a.n,
        grid,
        tolerance: a.tol,
        samples: a.count,
        alpha: a.alpha,
        base: a.base()?,
        functions: a.functions,
        max_m: a.max_m,
    };
    let mut opts = VerifyOptions { seed: a.seed, exec, timing: a.timing, ..Default::default() };
    if let Some(q) = a.quad_rel {
        opts.quad_rel = q;
    }
    let reports = run_suite(suite, &params, &opts)?;
    let text = match a.out.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&reports).expect("reports serialize")),
        Format::Csv => VerificationReport::many_to_csv(&reports),
    };
    emit(a.out.output.as_deref(), &text)?;
    if a.out.output.is_some() {
        print!("{}", summary(&reports));
    }
    Ok(verdict_code(&reports))
}

fn verdict_code(reports: &[VerificationReport]) -> u8 {
    if reports.iter().any(|r| r.numerical_failure) {
        3
    } else if reports.iter().all(|r| r.verdict == Verdict::Pass) {
        0
    } else {
        1
    }
}

fn summary(reports: &[VerificationReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let failed = r.point_verdicts.iter().filter(|v| **v == Verdict::Fail).count();
        s.push_str(&format!(
            "{:<18} {:<5} rows={:<4} failed={:<3} max_rel_err={:.3e}\n",
            r.claim_id,
            if r.passed() { "PASS" } else { "FAIL" },
            r.labels.len(),
            failed,
            r.max_rel_err(),
        ));
    }
    s
}

fn cmd_report(a: &ReportArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&a.input).map_err(|source| CliError::Io { path: a.input.display().to_string(), source })?;
    let reports = VerificationReport::parse_many(&text)
        .map_err(|e| CliError::Usage(format!("{}: not a verification report: {e}", a.input.display())))?;
    let rendered = match a.format {
        ReportFormat::Summary => summary(&reports),
        ReportFormat::Json => format!("{}\n", serde_json::to_string_pretty(&reports).expect("reports serialize")),
        ReportFormat::Csv => VerificationReport::many_to_csv(&reports),
    };
    emit(a.output.as_deref(), &rendered)?;
    Ok(verdict_code(&reports))
}
