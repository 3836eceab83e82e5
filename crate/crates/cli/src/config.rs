//! `key = value` defaults files. Keys are flag names without the dashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;

use crate::args::{Command, Format, HittingArgs, SimulateArgs, TraceArgs, VerifyArgs};
use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Defaults {
    path: PathBuf,
    entries: BTreeMap<String, String>,
}

impl Defaults {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected `key = value`, got `{raw}`", path.display(), i + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("{}:{}: `{key}` set twice", path.display(), i + 1)));
            }
        }
        Ok(Defaults { path: path.to_path_buf(), entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.entries.keys() {
            if key != "jobs" && !allowed.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}: unknown key `{key}` for this command (expected one of: jobs, {})",
                    self.path.display(),
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn fill<T: FromStr>(&self, slot: &mut Option<T>, key: &str) -> Result<(), CliError>
    where
        T::Err: std::fmt::Display,
    {
        if slot.is_none() {
            if let Some(raw) = self.entries.get(key) {
                let value = raw.parse().map_err(|e| {
                    CliError::Usage(format!("{}: bad value `{raw}` for `{key}`: {e}", self.path.display()))
                })?;
                *slot = Some(value);
            }
        }
        Ok(())
    }

    fn fill_format(&self, slot: &mut Option<Format>) -> Result<(), CliError> {
        if slot.is_none() {
            if let Some(raw) = self.entries.get("format") {
                let value = Format::from_str(raw, true)
                    .map_err(|_| CliError::Usage(format!("{}: unknown format `{raw}`", self.path.display())))?;
                *slot = Some(value);
            }
        }
        Ok(())
    }

    fn fill_path(&self, slot: &mut Option<PathBuf>) {
        if slot.is_none() {
            *slot = self.entries.get("out").map(PathBuf::from);
        }
    }

    pub fn apply(&self, jobs: &mut Option<usize>, command: &mut Command) -> Result<(), CliError> {
        self.fill(jobs, "jobs")?;
        match command {
            Command::Simulate(a) => self.simulate(a),
            Command::Trace(a) => self.trace(a),
            Command::Hitting(a) => self.hitting(a),
            Command::Verify(a) => self.verify(a),
        }
    }

    fn simulate(&self, a: &mut SimulateArgs) -> Result<(), CliError> {
        self.check_keys(&["delta", "kappa", "seed", "t-end", "tol", "n", "out", "format"])?;
        // a flag for one parameterization overrides the file's other one
        if a.kappa.is_none() {
            self.fill(&mut a.delta, "delta")?;
        }
        if a.delta.is_none() {
            self.fill(&mut a.kappa, "kappa")?;
        }
        self.fill(&mut a.seed, "seed")?;
        self.fill(&mut a.t_end, "t-end")?;
        self.fill(&mut a.tol, "tol")?;
        self.fill(&mut a.n, "n")?;
        self.fill_path(&mut a.out);
        self.fill_format(&mut a.format)
    }

    fn trace(&self, a: &mut TraceArgs) -> Result<(), CliError> {
        self.check_keys(&["kappa", "seed", "n", "tol", "out", "format"])?;
        self.fill(&mut a.kappa, "kappa")?;
        self.fill(&mut a.seed, "seed")?;
        self.fill(&mut a.n, "n")?;
        self.fill(&mut a.tol, "tol")?;
        self.fill_path(&mut a.out);
        self.fill_format(&mut a.format)
    }

    fn hitting(&self, a: &mut HittingArgs) -> Result<(), CliError> {
        self.check_keys(&["delta", "kappa", "seed", "x", "n", "out", "format"])?;
        if a.kappa.is_none() {
            self.fill(&mut a.delta, "delta")?;
        }
        if a.delta.is_none() {
            self.fill(&mut a.kappa, "kappa")?;
        }
        self.fill(&mut a.seed, "seed")?;
        self.fill(&mut a.x, "x")?;
        self.fill(&mut a.n, "n")?;
        self.fill_path(&mut a.out);
        self.fill_format(&mut a.format)
    }

    fn verify(&self, a: &mut VerifyArgs) -> Result<(), CliError> {
        self.check_keys(&["suite", "seeds", "scale", "out"])?;
        self.fill(&mut a.suite, "suite")?;
        self.fill(&mut a.seeds, "seeds")?;
        self.fill(&mut a.scale, "scale")?;
        self.fill_path(&mut a.out);
        Ok(())
    }
}
