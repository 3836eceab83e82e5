//! The acceptance checks, each producing one or more [`CheckReport`]s.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cbes::{self, ComplexProcessPath};
use crate::error::{Error, Result};
use crate::field::{flow_property_residual, hitting_surface};
use crate::noise::BrownianPath;
use crate::sle::{self, LeftPassageConfig, Passage};
use crate::solver::{exponents, sup_gap, BoundaryLimit, ExponentTriple, Flow, FlowParams, FlowSolution, SolverConfig};
use crate::stats;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub criterion: u32,
    pub check: String,
    pub statistic: f64,
    /// How `statistic` is compared with `threshold`, e.g. `"<"`.
    pub relation: String,
    pub threshold: f64,
    pub pass: bool,
    pub seeds: usize,
    pub config_hash: String,
    pub detail: String,
}

/// Sample sizes for a run of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Multiplies every Monte Carlo count; counts never drop below a small floor.
    pub scale: f64,
    /// Replaces the counts of the checks sized at 2000 seeds.
    pub seeds: Option<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { scale: 1.0, seeds: None }
    }
}

impl VerifyConfig {
    fn count(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(8)
    }

    fn count_2000(&self) -> usize {
        self.seeds.unwrap_or_else(|| self.count(2000))
    }
}

/// Criteria implemented in this crate; determinism of the command line is checked by the binary.
pub const LIBRARY_CRITERIA: std::ops::RangeInclusive<u32> = 1..=11;

pub fn config_hash(config: &Value) -> String {
    let digest = Sha256::digest(config.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Reporter {
    criterion: u32,
    hash: String,
    seeds: usize,
    out: Vec<CheckReport>,
}

impl Reporter {
    fn new(criterion: u32, seeds: usize, config: Value) -> Self {
        let config = json!({ "criterion": criterion, "seeds": seeds, "config": config });
        Reporter { criterion, hash: config_hash(&config), seeds, out: Vec::new() }
    }

    fn push(&mut self, check: &str, statistic: f64, relation: &str, threshold: f64, detail: String) {
        let pass = match relation {
            "<" => statistic < threshold,
            "<=" => statistic <= threshold,
            ">" => statistic > threshold,
            ">=" => statistic >= threshold,
            "==" => statistic == threshold,
            "in (0, 1]" => statistic > 0.0 && statistic <= threshold,
            _ => unreachable!("unknown relation {relation}"),
        };
        self.out.push(CheckReport {
            criterion: self.criterion,
            check: check.to_string(),
            statistic,
            relation: relation.to_string(),
            threshold,
            pass,
            seeds: self.seeds,
            config_hash: self.hash.clone(),
            detail,
        });
    }

    fn finish(self) -> Vec<CheckReport> {
        self.out
    }
}

fn seed_range(offset: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| offset + i).collect()
}

fn params(delta: f64) -> FlowParams<f64> {
    FlowParams::new(delta).expect("negative dimension")
}

fn solver_json(config: &SolverConfig<f64>) -> Value {
    serde_json::to_value(config).expect("plain data")
}

/// Runs criterion `n`.
pub fn run_criterion(n: u32, config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    match n {
        1 => hitting_law(config),
        2 => hitting_scaling(config),
        3 => tail_bound(config),
        4 => martingale_domination(config),
        5 => ito_identity(),
        6 => cut_avoidance(config),
        7 => martingale_and_qv(config),
        8 => tangential_limits(config),
        9 => flow_property(config),
        10 => hitting_continuity(config),
        11 => sle_embedding(config),
        _ => Err(Error::invalid(format!("no library criterion {n}"))),
    }
}

// ---------------------------------------------------------------------------
// hitting times

/// Horizon of the paths behind [`hitting_samples`].
pub const HITTING_HORIZON: f64 = 64.0;

fn hitting_config() -> SolverConfig<f64> {
    SolverConfig { noise_step: 2f64.powi(-10), ..SolverConfig::default() }
}

/// `T^{0,x}` per seed; survivors are censored at the horizon.
pub fn hitting_samples(seeds: &[u64], delta: f64, x: f64, solver: SolverConfig<f64>) -> Result<Vec<f64>> {
    let p = FlowParams::new(delta)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let path = BrownianPath::sample(seed, HITTING_HORIZON, 10)?;
            Ok(Flow::with_config(&path, p, solver)?.hitting_time(0.0, x)?.hit_time)
        })
        .collect()
}

fn hitting_law(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(10_000);
    let solver = hitting_config();
    let mut rep = Reporter::new(
        1,
        n,
        json!({ "delta": -1.0, "x": 1.0, "horizon": HITTING_HORIZON, "solver": solver_json(&solver) }),
    );
    let samples = hitting_samples(&seed_range(0, n), -1.0, 1.0, solver)?;
    let spec = stats::DensitySpec::cached(-1.0)?;
    let (d, p) = stats::ks_test(&samples, |t| spec.cdf(t))?;
    let censored = samples.iter().filter(|&&t| t >= HITTING_HORIZON).count();
    rep.push(
        "hitting_law_ks",
        d,
        "<",
        0.025,
        format!("KS p-value {p:.3}, {censored} censored at horizon {HITTING_HORIZON}"),
    );
    Ok(rep.finish())
}

fn hitting_scaling(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(10_000);
    let solver = hitting_config();
    let mut rep = Reporter::new(
        2,
        n,
        json!({ "delta": -1.0, "x": [1.0, 0.5], "horizon": HITTING_HORIZON, "solver": solver_json(&solver) }),
    );
    let unit = hitting_samples(&seed_range(0, n), -1.0, 1.0, solver)?;
    let half: Vec<f64> =
        hitting_samples(&seed_range(1_000_000, n), -1.0, 0.5, solver)?.into_iter().map(|t| 4.0 * t).collect();
    let (d, p) = stats::ks_two_sample(&half, &unit)?;
    rep.push("hitting_scaling_ks", d, "<", 0.025, format!("two-sample KS p-value {p:.3}"));
    Ok(rep.finish())
}

// ---------------------------------------------------------------------------
// derivative estimates

fn exponent_triple() -> ExponentTriple<f64> {
    exponents(&params(-1.0), 3.0).expect("θ = 3 admissible at δ = −1")
}

fn imaginary_start(seed: u64, y: f64, solver: SolverConfig<f64>) -> Result<FlowSolution<f64>> {
    let path = BrownianPath::sample(seed, 1.0, 10)?;
    Flow::with_config(&path, params(-1.0), solver)?.solve(0.0, 1.0, Complex::new(0.0, y))
}

fn tail_bound(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(10_000);
    let triple = exponent_triple();
    let solver = SolverConfig::default();
    let y = 0.1;
    let mut rep = Reporter::new(
        3,
        n,
        json!({ "delta": -1.0, "theta": 3.0, "y": y, "t_end": 1.0, "solver": solver_json(&solver) }),
    );
    let sups: Vec<f64> = seed_range(2_000_000, n)
        .par_iter()
        .map(|&seed| {
            let sol = imaginary_start(seed, y, solver)?;
            Ok(sol.log_deriv.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp())
        })
        .collect::<Result<_>>()?;
    for k in [2.0, 4.0, 8.0] {
        let (p, se) = stats::empirical_tail(&sups, k)?;
        let bound = k.powf(-triple.lambda);
        rep.push(
            &format!("tail_bound_K{k}"),
            p,
            "<=",
            bound + 3.0 * se,
            format!("P[sup|H'| >= {k}] = {p:.4} ± {se:.4}, bound K^-λ = {bound:.4}"),
        );
    }
    Ok(rep.finish())
}

fn martingale_domination(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(100);
    let triple = exponent_triple();
    let solver = SolverConfig::default();
    let (y, tolerance) = (0.1, 1e-3);
    let mut rep = Reporter::new(
        4,
        n,
        json!({ "delta": -1.0, "theta": 3.0, "y": y, "tolerance": tolerance, "solver": solver_json(&solver) }),
    );
    let reports: Vec<_> = seed_range(3_000_000, n)
        .par_iter()
        .map(|&seed| cbes::exp_martingale_bound_check(&imaginary_start(seed, y, solver)?, &triple, tolerance))
        .collect::<Result<_>>()?;
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let worst = reports.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max);
    rep.push(
        "exp_martingale_violations",
        violations as f64,
        "==",
        0.0,
        format!("max of λ log|H'| − M + [M]/2 is {worst:.3e}"),
    );
    Ok(rep.finish())
}

fn ito_identity() -> Result<Vec<CheckReport>> {
    let triple = exponent_triple();
    let (seed, y) = (42, 0.5);
    let mut rep =
        Reporter::new(5, 1, json!({ "delta": -1.0, "theta": 3.0, "y": y, "seed": seed, "noise_steps": [-12, -14] }));
    let residual = |level: i32| -> Result<f64> {
        let solver = SolverConfig { noise_step: 2f64.powi(level), ..SolverConfig::default() };
        let r = cbes::ito_identity_residual(&imaginary_start(seed, y, solver)?, &triple)?;
        Ok(r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    };
    let (coarse, fine) = (residual(-12)?, residual(-14)?);
    rep.push("ito_residual", coarse, "<", 0.05, format!("max |residual| at grid 2^-12, {fine:.3e} at 2^-14"));
    rep.push("ito_refinement_ratio", coarse / fine, ">=", 1.5, format!("{coarse:.3e} / {fine:.3e}"));
    Ok(rep.finish())
}

// ---------------------------------------------------------------------------
// complex squared Bessel process

const CBES_TOL: f64 = 1e-4;

fn cbes_config() -> SolverConfig<f64> {
    SolverConfig { noise_step: 2f64.powi(-10), ..SolverConfig::default() }
}

fn cbes_paths(seeds: &[u64], solver: SolverConfig<f64>) -> Result<Vec<ComplexProcessPath<f64>>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let path = BrownianPath::sample(seed, 1.0, 10)?;
            cbes::cbes_on(&Flow::with_config(&path, params(-1.0), solver)?, 1.0, CBES_TOL)
        })
        .collect()
}

fn cut_avoidance(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count_2000();
    let solver = cbes_config();
    let mut rep = Reporter::new(6, n, json!({ "delta": -1.0, "tol": CBES_TOL, "solver": solver_json(&solver) }));
    let paths = cbes_paths(&seed_range(4_000_000, n), solver)?;
    let approaches: usize = paths.iter().map(|p| p.cut_approaches(1e-4)).sum();
    let flags: usize =
        paths.iter().map(|p| p.times.iter().zip(&p.branch_flags).filter(|(&t, &f)| t > 1e-3 && f).count()).sum();
    let samples: usize = paths.iter().map(|p| p.times.len()).sum();
    rep.push("cut_approaches_on_positive_axis", approaches as f64, "==", 0.0, format!("{samples} samples"));
    rep.push("branch_flags_after_1e-3", flags as f64, "==", 0.0, format!("{samples} samples"));
    Ok(rep.finish())
}

/// Relative error of the realized quadratic variation of `Im Y` against `4∫(Im H)²`.
pub fn qv_relative_error(path: &ComplexProcessPath<f64>) -> f64 {
    let im_y: Vec<f64> = path.y.iter().map(|y| y.im).collect();
    let realized = *stats::realized_qv(&im_y).last().unwrap();
    let v2: Vec<f64> = path.h.iter().map(|h| 4.0 * h.im * h.im).collect();
    let predicted = *stats::cumulative_trapezoid(&path.times, &v2).last().unwrap();
    (realized - predicted).abs() / predicted
}

fn martingale_and_qv(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count_2000();
    let solver = cbes_config();
    let mut rep =
        Reporter::new(7, n, json!({ "delta": -1.0, "tol": CBES_TOL, "solver": solver_json(&solver), "qv_seed": 42 }));
    let paths = cbes_paths(&seed_range(4_000_000, n), solver)?;
    let re: Vec<f64> = paths.iter().map(|p| p.y.last().unwrap().re + 1.0).collect();
    let im: Vec<f64> = paths.iter().map(|p| p.y.last().unwrap().im).collect();
    let (z_re, z_im) = (stats::martingale_drift_test(&re)?, stats::martingale_drift_test(&im)?);
    rep.push("martingale_re", z_re.abs(), "<", 3.0, "|z| of mean Re(Y_1) − δ".into());
    rep.push("martingale_im", z_im.abs(), "<", 3.0, "|z| of mean Im(Y_1)".into());

    let qv_error = |level: i32| -> Result<f64> {
        let fine = SolverConfig { noise_step: 2f64.powi(level), ..SolverConfig::default() };
        Ok(qv_relative_error(&cbes_paths(&[42], fine)?[0]))
    };
    let (coarse, fine) = (qv_error(-12)?, qv_error(-14)?);
    rep.push("quadratic_variation", fine, "<", 0.05, format!("relative error at grid 2^-14, {coarse:.3e} at 2^-12"));
    Ok(rep.finish())
}

// ---------------------------------------------------------------------------
// boundary limits and the flow

fn tangential_limits(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(20);
    let tol = 1e-4;
    let solver = SolverConfig::default();
    let angles = [std::f64::consts::FRAC_PI_6, std::f64::consts::FRAC_PI_2, 5.0 * std::f64::consts::FRAC_PI_6];
    let mut rep =
        Reporter::new(8, n, json!({ "delta": -1.0, "tol": tol, "angles": angles, "solver": solver_json(&solver) }));
    let per_seed: Vec<(f64, f64, f64)> = seed_range(5_000_000, n)
        .par_iter()
        .map(|&seed| {
            let path = BrownianPath::sample(seed, 1.0, 10)?;
            let flow = Flow::with_config(&path, params(-1.0), solver)?;
            let limits =
                angles.iter().map(|&phi| flow.boundary_start(0.0, 1.0, phi, tol)).collect::<Result<Vec<_>>>()?;
            let mut gap = 0.0f64;
            for i in 0..limits.len() {
                for j in i + 1..limits.len() {
                    gap = gap.max(sup_gap(&limits[i].solution, &limits[j].solution, tol * tol));
                }
            }
            let rates = cauchy_rates(&limits[1])?;
            Ok((gap, rates.0, rates.1))
        })
        .collect::<Result<_>>()?;
    let worst_gap = per_seed.iter().map(|p| p.0).fold(0.0, f64::max);
    let range = |pick: fn(&(f64, f64, f64)) -> f64| {
        per_seed.iter().map(pick).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (lo, hi) = range(|p| p.1);
    let (wlo, whi) = range(|p| p.2);
    let detail =
        format!("full-window exponents in [{lo:.4}, {hi:.4}]; window [tol², 1] exponents in [{wlo:.3}, {whi:.3}]");
    rep.push("angle_agreement", worst_gap, "<", 2.0 * tol, "max pairwise sup gap over t in [tol², 1]".into());
    rep.push("cauchy_rate_min", lo, "in (0, 1]", 1.0, detail.clone());
    rep.push("cauchy_rate_max", hi, "in (0, 1]", 1.0, detail);
    Ok(rep.finish())
}

/// Slopes of `log(gap)` against `log y` along a ladder, over the full window
/// and over `[s + tol², t_end]`.
pub fn cauchy_rates(limit: &BoundaryLimit<f64>) -> Result<(f64, f64)> {
    let rungs: Vec<_> = limit.ladder.iter().filter(|r| r.gap.is_finite() && r.gap > 0.0).collect();
    let xs: Vec<f64> = rungs.iter().map(|r| r.y.ln()).collect();
    let full: Vec<f64> = rungs.iter().map(|r| r.full_gap.ln()).collect();
    let window: Vec<f64> = rungs.iter().map(|r| r.gap.ln()).collect();
    Ok((stats::linear_fit(&xs, &full)?.1, stats::linear_fit(&xs, &window)?.1))
}

fn flow_property(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(20);
    let (tol, triples) = (1e-6, 50);
    let solver = SolverConfig::default();
    let mut rep =
        Reporter::new(9, n, json!({ "delta": -1.0, "tol": tol, "triples": triples, "solver": solver_json(&solver) }));
    let worst: Vec<f64> = seed_range(6_000_000, n)
        .par_iter()
        .map(|&seed| {
            let path = BrownianPath::sample(seed, 1.0, 10)?;
            let flow = Flow::with_config(&path, params(-1.0), solver)?;
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let mut worst = 0.0f64;
            for _ in 0..triples {
                let mut v: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                v.sort_by(f64::total_cmp);
                let x = rng.random_range(-1.0..1.0);
                worst = worst.max(flow_property_residual(&flow, v[0], v[1], v[2], x, tol)?);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let max = worst.iter().copied().fold(0.0, f64::max);
    rep.push("flow_property_residual", max, "<", 1e-4, format!("{} triples", n * triples));
    Ok(rep.finish())
}

fn hitting_continuity(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let n = config.count(20);
    let solver = SolverConfig::default();
    let s_grid: Vec<f64> = (0..32).map(|i| i as f64 / 32.0).collect();
    let x_grid: Vec<f64> = (4..=10).rev().map(|k| 2f64.powi(-k)).collect();
    let mut rep = Reporter::new(
        10,
        n,
        json!({ "delta": -1.0, "horizon": 2.0, "s_grid": 32, "x_levels": [4, 10], "solver": solver_json(&solver) }),
    );
    let per_seed: Vec<(f64, f64, usize)> = seed_range(7_000_000, n)
        .par_iter()
        .map(|&seed| {
            let path = BrownianPath::sample(seed, 2.0, 10)?;
            let flow = Flow::with_config(&path, params(-1.0), solver)?;
            let surface = hitting_surface(&flow, &s_grid, &x_grid)?;
            let small = surface.max_excess(0);
            let large = surface.max_excess(x_grid.len() - 1);
            Ok((small, large, surface.monotone_violations))
        })
        .collect::<Result<_>>()?;
    let failures = per_seed.iter().filter(|p| !(p.0 < p.1)).count();
    let worst_ratio = per_seed.iter().map(|p| p.0 / p.1).fold(0.0, f64::max);
    let violations: usize = per_seed.iter().map(|p| p.2).sum();
    rep.push(
        "hitting_excess_shrinks",
        failures as f64,
        "==",
        0.0,
        format!("largest ratio max_s excess 2^-10 / 2^-4 is {worst_ratio:.3e}"),
    );
    rep.push(
        "hitting_monotone_in_x",
        violations as f64,
        "==",
        0.0,
        "comparison violations on the positive x grid".into(),
    );
    Ok(rep.finish())
}

// ---------------------------------------------------------------------------
// SLE

const SLE_KAPPA: f64 = 2.0;
const SLE_TOL: f64 = 1e-4;

fn trace_config() -> SolverConfig<f64> {
    SolverConfig { noise_step: 2f64.powi(-10), ..SolverConfig::default() }
}

fn sle_embedding(config: &VerifyConfig) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();

    let n_traces = config.count(50);
    let solver = trace_config();
    let mut rep = Reporter::new(
        11,
        n_traces,
        json!({ "kappa": SLE_KAPPA, "tol": SLE_TOL, "n_points": 1024, "gap": 0.1, "solver": solver_json(&solver) }),
    );
    let traces: Vec<(f64, f64)> = seed_range(9_000_000, n_traces)
        .iter()
        .map(|&seed| {
            let trace = sle::sle_trace_with(seed, SLE_KAPPA, 1024, SLE_TOL, solver)?;
            Ok((trace.gamma[0].norm(), sle::self_distance(&trace, 0.1)?))
        })
        .collect::<Result<_>>()?;
    let origin = traces.iter().map(|t| t.0).fold(0.0, f64::max);
    rep.push("trace_starts_at_zero", origin, "==", 0.0, "max |γ_0| over traces".into());
    let closest = traces.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let simple = traces.iter().filter(|t| t.1 > 0.0).count();
    rep.push(
        "self_distance_positive",
        closest,
        ">",
        0.0,
        format!("{simple}/{n_traces} traces with positive self-distance at gap 0.1"),
    );
    reports.extend(rep.finish());

    let default_solver = SolverConfig::default();
    let mut rep = Reporter::new(
        11,
        1,
        json!({ "kappa": SLE_KAPPA, "tol": SLE_TOL, "seed": 42, "times": [0.25, 0.5, 1.0], "solver": solver_json(&default_solver) }),
    );
    for t in [0.25, 0.5, 1.0] {
        let r = sle::trace_crosscheck_with(42, SLE_KAPPA, t, SLE_TOL, default_solver)?;
        rep.push(
            &format!("trace_crosscheck_t{t}"),
            r,
            "<",
            1e-3,
            "field route against one direct reverse solve".into(),
        );
    }
    reports.extend(rep.finish());

    let n = config.count_2000();
    let lp = LeftPassageConfig::<f64>::default();
    let points = [Complex::new(0.0, 1.0), Complex::new(0.3, 0.3)];
    let mut rep = Reporter::new(
        11,
        n,
        json!({ "kappa": SLE_KAPPA, "points": [[0.0, 1.0], [0.3, 0.3]], "left_passage": serde_json::to_value(lp).expect("plain data") }),
    );
    let sides: Vec<Vec<Passage>> = seed_range(8_000_000, n)
        .par_iter()
        .map(|&seed| {
            let w = BrownianPath::sample(seed, lp.horizon, 12)?;
            sle::classify_passages(&w, SLE_KAPPA, &points, &lp)
        })
        .collect::<Result<_>>()?;
    for (k, point) in points.iter().enumerate() {
        let column: Vec<Passage> = sides.iter().map(|s| s[k]).collect();
        let est = sle::passage_summary::<f64>(&column);
        let target = stats::schramm_left_passage(SLE_KAPPA, point.re, point.im)?;
        let z = (est.p_hat - target).abs() / est.stderr;
        let name = if k == 0 { "left_passage_symmetric" } else { "left_passage_schramm" };
        rep.push(
            name,
            z,
            "<=",
            3.0,
            format!(
                "p̂ = {:.4} ± {:.4} against {target:.4} at {point}; {} left, {} right, {} undecided",
                est.p_hat, est.stderr, est.left, est.right, est.undecided
            ),
        );
    }
    reports.extend(rep.finish());
    Ok(reports)
}
