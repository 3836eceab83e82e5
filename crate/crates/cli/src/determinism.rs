//! Byte-for-byte reproducibility of every command, checked by running the binary twice.

use std::path::Path;
use std::process::Command;

use bessel_flow::verify::{config_hash, CheckReport};
use serde_json::json;

use crate::error::CliError;

pub const CRITERION: u32 = 12;

/// Small runs of each command and output format.
pub const RUNS: &[(&str, &[&str])] = &[
    ("simulate_csv", &["simulate", "--delta", "-1", "--seed", "7", "--t-end", "1", "--n", "2"]),
    ("simulate_json", &["simulate", "--kappa", "2", "--seed", "7", "--t-end", "0.5", "--format", "json"]),
    ("trace_csv", &["trace", "--kappa", "2", "--seed", "42", "--n", "64"]),
    ("trace_json", &["trace", "--kappa", "2", "--seed", "42", "--n", "64", "--format", "json"]),
    ("trace_svg", &["trace", "--kappa", "2", "--seed", "42", "--n", "64", "--format", "svg"]),
    ("hitting_csv", &["hitting", "--delta", "-1", "--seed", "0", "--n", "32"]),
    ("hitting_json", &["hitting", "--kappa", "2", "--seed", "0", "--n", "32", "--x", "-0.5", "--format", "json"]),
    ("verify_json", &["verify", "--suite", "5"]),
];

fn run_once(exe: &Path, args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(exe)
        .args(args)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| format!("could not start {}: {e}", exe.display()))?;
    if !status.success() {
        return Err(format!("exited with {status}"));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

/// Runs each of [`RUNS`] twice with `exe` and compares the output files.
pub fn check(exe: &Path) -> Result<Vec<CheckReport>, CliError> {
    let dir = tempfile::tempdir()?;
    let mut reports = Vec::new();
    for (label, args) in RUNS {
        let first = run_once(exe, args, &dir.path().join(format!("{label}.a")));
        let second = run_once(exe, args, &dir.path().join(format!("{label}.b")));
        let (identical, detail) = match (first, second) {
            (Ok(a), Ok(b)) if a == b => (true, format!("{} bytes identical: bflow {}", a.len(), args.join(" "))),
            (Ok(a), Ok(b)) => {
                (false, format!("outputs differ ({} vs {} bytes): bflow {}", a.len(), b.len(), args.join(" ")))
            }
            (Err(e), _) | (_, Err(e)) => (false, format!("run failed, {e}: bflow {}", args.join(" "))),
        };
        reports.push(CheckReport {
            criterion: CRITERION,
            check: format!("deterministic_{label}"),
            statistic: if identical { 0.0 } else { 1.0 },
            relation: "==".into(),
            threshold: 0.0,
            pass: identical,
            seeds: 1,
            config_hash: config_hash(&json!({ "criterion": CRITERION, "args": args })),
            detail,
        });
    }
    Ok(reports)
}
