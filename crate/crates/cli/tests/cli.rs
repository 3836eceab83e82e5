use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bflow")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_commands_and_flags() {
    let o = bflow(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for word in ["simulate", "trace", "hitting", "verify", "--config", "--jobs"] {
        assert!(text.contains(word), "missing {word}");
    }
    let text = stdout(&bflow(&["simulate", "--help"]));
    for flag in ["--delta", "--kappa", "--seed", "--t-end", "--tol", "--n", "--out", "--format"] {
        assert!(text.contains(flag), "missing {flag}");
    }
    assert!(bflow(&["--version"]).status.success());
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["simulate", "--bogus"][..],
        &["frobnicate"],
        &["simulate", "--delta", "-1", "--kappa", "2"],
        &["simulate"],
        &["simulate", "--delta", "0.5"],
        &["trace", "--kappa", "4"],
        &["hitting", "--delta", "-1", "--x", "0"],
        &["verify", "--suite", "13"],
        &["simulate", "--delta", "-1", "--format", "svg"],
        &["--jobs", "0", "simulate", "--delta", "-1"],
    ] {
        let o = bflow(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn simulate_starts_at_the_origin() {
    let o = bflow(&["simulate", "--delta", "-1", "--seed", "1", "--t-end", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,re_y,im_y,re_h,im_h"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(first, [0.0; 5]);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((last[0] - 0.1).abs() < 1e-12 && last[4] > 0.0);
}

#[test]
fn kappa_and_delta_agree() {
    let by_delta = bflow(&["simulate", "--delta", "-1", "--seed", "2", "--t-end", "0.05"]);
    let by_kappa = bflow(&["simulate", "--kappa", "2", "--seed", "2", "--t-end", "0.05"]);
    assert_eq!(by_delta.stdout, by_kappa.stdout);
}

#[test]
fn simulate_batches_and_json() {
    let o = bflow(&["simulate", "--delta", "-1", "--seed", "3", "--n", "2", "--t-end", "0.05"]);
    let text = stdout(&o);
    assert!(text.starts_with("seed,t,"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("3,") || l.starts_with("4,")));
    let o = bflow(&["simulate", "--delta", "-1", "--seed", "3", "--t-end", "0.05", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["delta"], -1.0);
    assert_eq!(v["paths"][0]["seed"], 3);
}

#[test]
fn hitting_writes_one_time_per_seed() {
    let o = bflow(&["hitting", "--kappa", "2", "--n", "4", "--seed", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<(u64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (s, t) = l.split_once(',').unwrap();
            (s.parse().unwrap(), t.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [10, 11, 12, 13]);
    assert!(rows.iter().all(|r| r.1 > 0.0));
}

#[test]
fn trace_files_are_byte_identical() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    for out in [&a, &b] {
        let o = bflow(&["trace", "--kappa", "2", "--seed", "7", "--n", "33", "--format", "svg", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let bytes = fs::read(&a).unwrap();
    assert!(bytes.starts_with(b"<svg"));
    assert_eq!(bytes, fs::read(&b).unwrap());
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# shared settings\nkappa = 2\nt_end = 0.05\nseed = 2\n").unwrap();
    let from_file = bflow(&["--config", p(&cfg), "simulate"]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(from_file.stdout, bflow(&["simulate", "--kappa", "2", "--t-end", "0.05", "--seed", "2"]).stdout);

    let flag_wins = bflow(&["simulate", "--config", p(&cfg), "--seed", "5"]);
    assert_eq!(flag_wins.stdout, bflow(&["simulate", "--kappa", "2", "--t-end", "0.05", "--seed", "5"]).stdout);

    // a dimension flag replaces the file's other parameterization
    let o = bflow(&["--config", p(&cfg), "simulate", "--delta", "-0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(o.stdout, bflow(&["simulate", "--delta", "-0.5", "--t-end", "0.05", "--seed", "2"]).stdout);
}

#[test]
fn bad_config_files_are_usage_errors() {
    let dir = tempdir().unwrap();
    let cases = [("unknown.conf", "colour = red\n"), ("dup.conf", "seed = 1\nseed = 2\n"), ("syntax.conf", "seed 1\n")];
    for (name, body) in cases {
        let cfg = dir.path().join(name);
        fs::write(&cfg, body).unwrap();
        let o = bflow(&["--config", p(&cfg), "simulate", "--delta", "-1"]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
    }
    let o = bflow(&["--config", p(&dir.path().join("missing.conf")), "simulate", "--delta", "-1"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn refuses_to_overwrite_the_config() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    let body = "delta = -1\nt_end = 0.05\n";
    fs::write(&cfg, body).unwrap();
    let o = bflow(&["--config", p(&cfg), "simulate", "--out", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&cfg).unwrap(), body);
}

#[test]
fn verify_report_for_one_criterion() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = bflow(&["verify", "--suite", "5", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("PASS"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["config_hash"].as_str().unwrap().len() == 64);
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty() && checks.iter().all(|c| c["criterion"] == 5 && c["pass"] == true));
}
