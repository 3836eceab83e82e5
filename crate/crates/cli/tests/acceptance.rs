//! Acceptance criteria 1 to 12, one pass/fail line each.
//!
//! `ACCEPTANCE_SCALE` multiplies the Monte Carlo sample counts (default 1, the full suite).

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use bessel_flow::verify::{run_criterion, CheckReport, VerifyConfig, LIBRARY_CRITERIA};
use bessel_flow_cli::determinism;

fn summary(checks: &[CheckReport]) -> String {
    checks
        .iter()
        .map(|c| format!("{} {:.4e} {} {:.4e}", c.check, c.statistic, c.relation, c.threshold))
        .collect::<Vec<_>>()
        .join("; ")
}

fn main() -> ExitCode {
    let scale = match std::env::var("ACCEPTANCE_SCALE") {
        Ok(v) => v.parse().expect("ACCEPTANCE_SCALE must be a number"),
        Err(_) => 1.0,
    };
    let config = VerifyConfig { scale, seeds: None };
    let exe = Path::new(env!("CARGO_BIN_EXE_bflow"));
    println!("acceptance suite at scale {scale}");

    let mut failed = Vec::new();
    for n in LIBRARY_CRITERIA.chain([determinism::CRITERION]) {
        let started = Instant::now();
        let result = if n == determinism::CRITERION {
            determinism::check(exe).map_err(|e| e.to_string())
        } else {
            run_criterion(n, &config).map_err(|e| e.to_string())
        };
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(checks) => {
                let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
                println!("criterion {n:>2} {} ({secs:.1}s): {}", if pass { "PASS" } else { "FAIL" }, summary(&checks));
                if !pass {
                    failed.push(n);
                }
            }
            Err(e) => {
                println!("criterion {n:>2} FAIL ({secs:.1}s): error: {e}");
                failed.push(n);
            }
        }
    }
    if failed.is_empty() {
        println!("all 12 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
