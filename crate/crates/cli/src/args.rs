use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bflow", version, about = "Complex Bessel flows, hitting times and SLE traces")]
pub struct Cli {
    /// File of `key = value` lines giving defaults for the flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for the Monte Carlo fan-out [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// CBES and CBESQ paths from 0: columns t, re_y, im_y, re_h, im_h.
    Simulate(SimulateArgs),
    /// Chordal SLE trace sampled at uniform capacity times on [0, 1].
    Trace(TraceArgs),
    /// Hitting times of 0 by the real flow started at x, one per seed.
    Hitting(HittingArgs),
    /// Run the acceptance checks and write a JSON report; exits 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Dimension δ < 0.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// SLE parameter κ ∈ (0, 4), i.e. δ = 1 − 4/κ.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// First seed; seeds seed, seed+1, … are used [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// End of the time window [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Tolerance of the boundary limit at 0 [default: 1e-4].
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Number of seeds [default: 1].
    #[arg(long)]
    pub n: Option<usize>,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json [default: csv].
    #[arg(long, value_enum, hide_possible_values = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TraceArgs {
    /// SLE parameter κ ∈ (0, 4).
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// Seed of the driving Brownian motion [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trace points [default: 1024].
    #[arg(long)]
    pub n: Option<usize>,
    /// Tolerance of each trace point [default: 1e-4].
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv, json or svg [default: csv].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct HittingArgs {
    /// Dimension δ < 0.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// SLE parameter κ ∈ (0, 4), i.e. δ = 1 − 4/κ.
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    /// First seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Real starting point x ≠ 0 [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// Number of seeds [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json [default: csv].
    #[arg(long, value_enum, hide_possible_values = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    /// `all` or a comma-separated list of criteria 1 to 12 [default: all].
    #[arg(long)]
    pub suite: Option<String>,
    /// Sample count for the checks sized at 2000 seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Multiplier on every Monte Carlo sample count [default: 1].
    #[arg(long)]
    pub scale: Option<f64>,
    /// Report file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
