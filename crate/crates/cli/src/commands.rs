use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bessel_flow::cbes::cbes_process;
use bessel_flow::io;
use bessel_flow::verify::{self, config_hash, CheckReport, VerifyConfig, HITTING_HORIZON, LIBRARY_CRITERIA};
use bessel_flow::{sle, FlowParams, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{Format, HittingArgs, SimulateArgs, TraceArgs, VerifyArgs};
use crate::determinism;
use crate::error::CliError;

/// Writes `bytes` to `out` through a temporary file in the same directory, or to stdout.
pub fn emit(out: Option<&Path>, bytes: &[u8], inputs: &[&Path]) -> Result<(), CliError> {
    let Some(out) = out else {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        stdout.flush()?;
        return Ok(());
    };
    for input in inputs {
        if same_file(out, input) {
            return Err(CliError::Usage(format!("refusing to overwrite input file {}", input.display())));
        }
    }
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(out).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn check_format(format: Format, allowed: &[Format]) -> Result<Format, CliError> {
    if allowed.contains(&format) {
        return Ok(format);
    }
    let names: Vec<_> = allowed.iter().map(|f| f.name()).collect();
    Err(CliError::Usage(format!("--format {} is not available here; use one of {}", format.name(), names.join(", "))))
}

fn positive(name: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive and finite, got {value}")))
    }
}

fn kappa_in_range(kappa: f64) -> Result<f64, CliError> {
    if kappa > 0.0 && kappa < 4.0 {
        Ok(kappa)
    } else {
        Err(CliError::Usage(format!("--kappa must lie in (0, 4), got {kappa}")))
    }
}

/// `δ` from exactly one of `--delta` and `--kappa`.
fn dimension(delta: Option<f64>, kappa: Option<f64>) -> Result<f64, CliError> {
    match (delta, kappa) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either --delta or --kappa, not both".into())),
        (None, None) => Err(CliError::Usage("one of --delta or --kappa is required".into())),
        (Some(d), None) if d < 0.0 => Ok(d),
        (Some(d), None) => Err(CliError::Usage(format!("--delta must be negative, got {d}"))),
        (None, Some(k)) => Ok(1.0 - 4.0 / kappa_in_range(k)?),
    }
}

fn seeds_from(first: u64, n: usize) -> Result<Vec<u64>, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let last = first.checked_add(n as u64 - 1).ok_or_else(|| CliError::Usage("seed range overflows u64".into()))?;
    Ok((first..=last).collect())
}

#[derive(Serialize)]
struct SimulatedPath<'a> {
    seed: u64,
    path: &'a bessel_flow::ComplexProcessPath,
}

pub fn simulate(a: &SimulateArgs, inputs: &[&Path]) -> Result<(), CliError> {
    let delta = dimension(a.delta, a.kappa)?;
    let t_end = positive("t-end", a.t_end.unwrap_or(1.0))?;
    let tol = positive("tol", a.tol.unwrap_or(1e-4))?;
    let seeds = seeds_from(a.seed.unwrap_or(0), a.n.unwrap_or(1))?;
    let format = check_format(a.format.unwrap_or(Format::Csv), &[Format::Csv, Format::Json])?;
    let params = FlowParams::new(delta)?;

    let paths: Vec<_> = seeds
        .par_iter()
        .map(|&seed| cbes_process(seed, params, t_end, tol).map(|p| (seed, p)))
        .collect::<Result<_, _>>()?;

    let mut buf = Vec::new();
    match format {
        Format::Csv if paths.len() == 1 => io::write_process_csv(&mut buf, &paths[0].1)?,
        Format::Csv => io::write_process_batch_csv(&mut buf, &paths)?,
        _ => {
            let body: Vec<_> = paths.iter().map(|(seed, path)| SimulatedPath { seed: *seed, path }).collect();
            io::write_json(&mut buf, &json!({ "delta": delta, "t_end": t_end, "tol": tol, "paths": body }))?;
        }
    }
    emit(a.out.as_deref(), &buf, inputs)
}

pub fn trace(a: &TraceArgs, inputs: &[&Path]) -> Result<(), CliError> {
    let kappa = kappa_in_range(a.kappa.ok_or_else(|| CliError::Usage("--kappa is required for trace".into()))?)?;
    let n = a.n.unwrap_or(1024);
    if n < 2 {
        return Err(CliError::Usage(format!("--n must be at least 2 trace points, got {n}")));
    }
    let tol = positive("tol", a.tol.unwrap_or(1e-4))?;
    let format = a.format.unwrap_or(Format::Csv);
    let trace = sle::sle_trace(a.seed.unwrap_or(0), kappa, n, tol)?;

    let mut buf = Vec::new();
    match format {
        Format::Csv => io::write_trace_csv(&mut buf, &trace)?,
        Format::Json => io::write_json(&mut buf, &trace)?,
        Format::Svg => io::write_trace_svg(&mut buf, &trace)?,
    }
    emit(a.out.as_deref(), &buf, inputs)
}

pub fn hitting(a: &HittingArgs, inputs: &[&Path]) -> Result<(), CliError> {
    let delta = dimension(a.delta, a.kappa)?;
    let x = a.x.unwrap_or(1.0);
    if x == 0.0 || !x.is_finite() {
        return Err(CliError::Usage(format!("--x must be finite and nonzero, got {x}")));
    }
    let seeds = seeds_from(a.seed.unwrap_or(0), a.n.unwrap_or(1000))?;
    let format = check_format(a.format.unwrap_or(Format::Csv), &[Format::Csv, Format::Json])?;
    let times = verify::hitting_samples(&seeds, delta, x, SolverConfig::default())?;
    let samples: Vec<(u64, f64)> = seeds.into_iter().zip(times).collect();

    let mut buf = Vec::new();
    match format {
        Format::Csv => io::write_hitting_samples_csv(&mut buf, &samples)?,
        _ => {
            let rows: Vec<_> = samples.iter().map(|(seed, t)| json!({ "seed": seed, "T": t })).collect();
            io::write_json(&mut buf, &json!({ "delta": delta, "x": x, "horizon": HITTING_HORIZON, "samples": rows }))?;
        }
    }
    emit(a.out.as_deref(), &buf, inputs)
}

/// Criteria named by `--suite`, in ascending order.
pub fn parse_suite(suite: &str) -> Result<Vec<u32>, CliError> {
    let all: Vec<u32> = LIBRARY_CRITERIA.chain([determinism::CRITERION]).collect();
    if suite.trim() == "all" {
        return Ok(all);
    }
    let mut picked = Vec::new();
    for part in suite.split(',') {
        let n: u32 = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--suite expects `all` or numbers 1 to 12, got `{part}`")))?;
        if !all.contains(&n) {
            return Err(CliError::Usage(format!("no criterion {n}; criteria run from 1 to 12")));
        }
        picked.push(n);
    }
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

fn error_report(criterion: u32, err: &bessel_flow::Error) -> CheckReport {
    CheckReport {
        criterion,
        check: "runs_without_error".into(),
        statistic: f64::NAN,
        relation: "==".into(),
        threshold: 0.0,
        pass: false,
        seeds: 0,
        config_hash: String::new(),
        detail: err.to_string(),
    }
}

/// One stderr line per check.
pub fn report_line(r: &CheckReport) -> String {
    format!(
        "{:>2} {:<34} {} stat {:.4e} {} {:.4e}  [{}]",
        r.criterion,
        r.check,
        if r.pass { "PASS" } else { "FAIL" },
        r.statistic,
        r.relation,
        r.threshold,
        r.detail
    )
}

pub fn verify(a: &VerifyArgs, inputs: &[&Path]) -> Result<(), CliError> {
    let criteria = parse_suite(a.suite.as_deref().unwrap_or("all"))?;
    let scale = positive("scale", a.scale.unwrap_or(1.0))?;
    if a.seeds == Some(0) {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let config = VerifyConfig { scale, seeds: a.seeds };

    let mut checks = Vec::new();
    let mut solver_error = None;
    for &n in &criteria {
        let started = Instant::now();
        let result = if n == determinism::CRITERION {
            let exe = std::env::current_exe()?;
            Ok(determinism::check(&exe)?)
        } else {
            verify::run_criterion(n, &config)
        };
        let reports = match result {
            Ok(reports) => reports,
            Err(e) => {
                let report = error_report(n, &e);
                solver_error.get_or_insert(e);
                vec![report]
            }
        };
        for r in &reports {
            eprintln!("{} ({:.1}s)", report_line(r), started.elapsed().as_secs_f64());
        }
        checks.extend(reports);
    }

    let failed = checks.iter().filter(|r| !r.pass).count();
    let settings = json!({ "suite": criteria, "scale": scale, "seeds": a.seeds });
    let report = json!({
        "config_hash": config_hash(&settings),
        "settings": settings,
        "pass": failed == 0,
        "checks": checks,
    });
    let mut buf = Vec::new();
    io::write_json(&mut buf, &report)?;
    emit(a.out.as_deref(), &buf, inputs)?;

    if let Some(e) = solver_error {
        return Err(e.into());
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total: checks.len() });
    }
    Ok(())
}
