//! The `bflow` command line: argument handling, outputs and the determinism check.

pub mod args;
pub mod commands;
pub mod config;
pub mod determinism;
pub mod error;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::Defaults;
pub use crate::error::CliError;

/// Parses `argv`, merges the defaults file and runs the command.
pub fn run(argv: impl IntoIterator<Item = std::ffi::OsString>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Usage(e.render().to_string())),
        Err(e) => {
            // --help and --version
            print!("{}", e.render());
            return Ok(());
        }
    };
    let Cli { config, mut jobs, mut command } = cli;
    let defaults = config.as_deref().map(Defaults::read).transpose()?;
    if let Some(d) = &defaults {
        d.apply(&mut jobs, &mut command)?;
    }
    let inputs: Vec<&std::path::Path> = defaults.iter().map(|d| d.path()).collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    match jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start {jobs:?} worker threads: {e}")))?;
    pool.install(|| match &command {
        Command::Simulate(a) => commands::simulate(a, &inputs),
        Command::Trace(a) => commands::trace(a, &inputs),
        Command::Hitting(a) => commands::hitting(a, &inputs),
        Command::Verify(a) => commands::verify(a, &inputs),
    })
}
