//! Chordal SLE_κ traces, `κ ∈ (0, 4)`, read off the boundary limit of the flow
//! driven by the time-reversed Brownian motion.
//!
//! With `B_r = W_c − W_{c−r}` and `δ = 1 − 4/κ`, the trace point at capacity
//! time `t ≤ c` is `γ_t = √κ · H(c − t, c, 0+)` for the flow driven by `B`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{reversed, BrownianPath, DrivingNoise};
use crate::scalar::Real;
use crate::solver::{Flow, FlowParams, SolverConfig};

/// Stored dyadic level of the driving paths sampled here.
const TRACE_BASE_LEVEL: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace<T> {
    pub kappa: T,
    pub seed: u64,
    pub times: Vec<T>,
    pub gamma: Vec<Complex<T>>,
}

impl<T: Real> Trace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest distance between consecutive samples.
    pub fn max_jump(&self) -> T {
        self.gamma.windows(2).map(|w| (w[1] - w[0]).norm()).fold(T::zero(), T::max)
    }
}

fn kappa_params<T: Real>(kappa: T) -> Result<FlowParams<T>> {
    FlowParams::from_kappa(kappa)
}

/// Trace points `γ_t` for the forward driving function `w` over the capacity horizon `w.horizon()`.
pub struct TraceSampler<'w, T, N> {
    kappa: T,
    reversed: crate::noise::Reversed<'w, T, N>,
    config: SolverConfig<T>,
    tol: T,
}

impl<'w, T: Real, N: DrivingNoise<T>> TraceSampler<'w, T, N> {
    pub fn new(w: &'w N, kappa: T, tol: T, config: SolverConfig<T>) -> Result<Self> {
        kappa_params(kappa)?;
        if !(tol > T::zero()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        Ok(TraceSampler { kappa, reversed: reversed(w, w.horizon())?, config, tol })
    }

    pub fn horizon(&self) -> T {
        self.reversed.horizon()
    }

    /// `γ_t` for `t ∈ [0, horizon]`.
    pub fn point(&self, t: T) -> Result<Complex<T>> {
        let c = self.horizon();
        if !(t >= T::zero() && t <= c) {
            return Err(Error::invalid(format!("trace time {t} outside [0, {c}]")));
        }
        let flow = Flow::with_config(&self.reversed, kappa_params(self.kappa)?, self.config)?;
        let h = crate::field::evaluate_field(&flow, c - t, c, T::zero(), self.tol)
            .map_err(|e| Error::TracePoint { t: t.as_f64(), source: Box::new(e) })?;
        Ok(h * self.kappa.sqrt())
    }

    pub fn points(&self, times: &[T]) -> Result<Vec<Complex<T>>> {
        times.par_iter().map(|&t| self.point(t)).collect()
    }
}

fn uniform_times<T: Real>(horizon: T, n_points: usize) -> Vec<T> {
    let last = T::from_usize(n_points - 1).unwrap();
    (0..n_points).map(|j| horizon * T::from_usize(j).unwrap() / last).collect()
}

/// Trace of the driving function `w` on a uniform capacity-time grid over `[0, w.horizon()]`.
pub fn sle_trace_on<T: Real, N: DrivingNoise<T>>(
    w: &N,
    seed: u64,
    kappa: T,
    n_points: usize,
    tol: T,
    config: SolverConfig<T>,
) -> Result<Trace<T>> {
    if n_points < 2 {
        return Err(Error::invalid(format!("need at least 2 trace points, got {n_points}")));
    }
    let sampler = TraceSampler::new(w, kappa, tol, config)?;
    let times = uniform_times(sampler.horizon(), n_points);
    let gamma = sampler.points(&times)?;
    Ok(Trace { kappa, seed, times, gamma })
}

pub fn sle_trace_with<T: Real>(
    seed: u64,
    kappa: T,
    n_points: usize,
    tol: T,
    config: SolverConfig<T>,
) -> Result<Trace<T>> {
    let w = BrownianPath::sample(seed, T::one(), TRACE_BASE_LEVEL)?;
    sle_trace_on(&w, seed, kappa, n_points, tol, config)
}

/// SLE_κ trace on `t ∈ [0, 1]` at `n_points` uniform capacity times.
pub fn sle_trace<T: Real>(seed: u64, kappa: T, n_points: usize, tol: T) -> Result<Trace<T>> {
    sle_trace_with(seed, kappa, n_points, tol, SolverConfig::default())
}

/// `|γ_t(field) − γ_t(direct)|`, where the direct value is one solve from `i·tol`
/// driven by `W_t − W_{t−r}` on `[0, t]`, without the field machinery.
pub fn trace_crosscheck_with<T: Real>(seed: u64, kappa: T, t: T, tol: T, config: SolverConfig<T>) -> Result<T> {
    if !(t > T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!("crosscheck time {t} outside (0, 1]")));
    }
    let w = BrownianPath::sample(seed, T::one(), TRACE_BASE_LEVEL)?;
    let via_field = TraceSampler::new(&w, kappa, tol, config)?.point(t)?;
    let increments = reversed(&w, t)?;
    let flow = Flow::with_config(&increments, kappa_params(kappa)?, config)?;
    let direct = flow.solve(T::zero(), t, Complex::new(T::zero(), tol))?.last() * kappa.sqrt();
    Ok((via_field - direct).norm())
}

pub fn trace_crosscheck<T: Real>(seed: u64, kappa: T, t: T, tol: T) -> Result<T> {
    trace_crosscheck_with(seed, kappa, t, tol, SolverConfig::default())
}

/// `min |γ_{t_i} − γ_{t_j}|` over sample pairs with `|t_i − t_j| ≥ gap`.
pub fn self_distance<T: Real>(trace: &Trace<T>, gap: T) -> Result<T> {
    if !(gap > T::zero()) {
        return Err(Error::invalid(format!("gap must be positive, got {gap}")));
    }
    let n = trace.len();
    let mut pairs = 0usize;
    let mut best = T::infinity();
    for i in 0..n {
        // times increase, so admissible partners form a suffix
        let start = trace.times.partition_point(|&t| t < trace.times[i] + gap);
        for j in start.max(i + 1)..n {
            pairs += 1;
            best = best.min((trace.gamma[i] - trace.gamma[j]).norm());
        }
    }
    if pairs < 2 {
        return Err(Error::invalid(format!("only {pairs} sample pairs are {gap} apart")));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// left passage

/// Side of a point relative to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Passage {
    /// The curve passes to the left of the point.
    Left,
    Right,
    /// The point is within `eps` of the polyline or straight above the tip.
    Undecided,
}

fn segment_distance<T: Real>(z: Complex<T>, a: Complex<T>, b: Complex<T>) -> T {
    let d = b - a;
    let len2 = d.norm_sqr();
    let w = if len2 > T::zero() { ((z - a).re * d.re + (z - a).im * d.im) / len2 } else { T::zero() };
    (z - (a + d * w.max(T::zero()).min(T::one()))).norm()
}

/// Classifies `point` by the winding of the closed polygon
/// `0 → γ → tip → tip + i∞ → +∞ → 0`: the polygon encloses exactly the points
/// to the right of the extended curve.
///
/// The winding is the continuous argument of `γ − point` along the polyline,
/// which ends near `−3π/2` after passing left and near `π/2` after passing right.
pub fn passage_side<T: Real>(gamma: &[Complex<T>], point: Complex<T>, eps: T) -> Passage {
    if gamma.len() < 2 || gamma.windows(2).any(|w| segment_distance(point, w[0], w[1]) < eps) {
        return Passage::Undecided;
    }
    let tip = *gamma.last().unwrap();
    if (point.re - tip.re).abs() < eps && point.im >= tip.im {
        return Passage::Undecided;
    }
    let mut arg = (gamma[0] - point).arg();
    for w in gamma.windows(2) {
        arg = arg + ((w[1] - point) / (w[0] - point)).arg();
    }
    // the upward ray from the tip turns the argument to π/2 modulo 2π;
    // the polygon winds around the point iff that limit is −3π/2
    let turns = ((arg - T::FRAC_PI_2()) / T::TAU()).round();
    if turns < T::zero() {
        Passage::Left
    } else {
        Passage::Right
    }
}

/// Settings for adaptive left-passage classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeftPassageConfig<T> {
    /// Capacity horizon of the trace.
    pub horizon: T,
    /// Uniform samples before refinement.
    pub initial_points: usize,
    /// Segments are not split below this capacity-time length.
    pub min_dt: T,
    /// Points this close to the polyline are undecided.
    pub eps: T,
    pub tol: T,
    pub solver: SolverConfig<T>,
}

impl<T: Real> Default for LeftPassageConfig<T> {
    fn default() -> Self {
        LeftPassageConfig {
            horizon: T::one(),
            initial_points: 33,
            min_dt: T::lit(2f64.powi(-14)),
            eps: T::lit(1e-4),
            tol: T::lit(1e-4),
            solver: SolverConfig { noise_step: T::lit(2f64.powi(-10)), ..SolverConfig::default() },
        }
    }
}

/// Classifies each point against the trace of `w`. The uniform samples are
/// shared; extra trace points are sampled per point on segments whose chord
/// passes close to it.
pub fn classify_passages<T: Real, N: DrivingNoise<T>>(
    w: &N,
    kappa: T,
    points: &[Complex<T>],
    config: &LeftPassageConfig<T>,
) -> Result<Vec<Passage>> {
    let sampler = TraceSampler::new(w, kappa, config.tol, config.solver)?;
    let times = uniform_times(sampler.horizon(), config.initial_points.max(2));
    let gamma = sampler.points(&times)?;
    points.iter().map(|&p| refine_and_classify(&sampler, times.clone(), gamma.clone(), p, config)).collect()
}

fn refine_and_classify<T: Real, N: DrivingNoise<T>>(
    sampler: &TraceSampler<'_, T, N>,
    mut times: Vec<T>,
    mut gamma: Vec<Complex<T>>,
    point: Complex<T>,
    config: &LeftPassageConfig<T>,
) -> Result<Passage> {
    loop {
        let split: Vec<usize> = (0..times.len() - 1)
            .filter(|&i| {
                let (a, b) = (gamma[i], gamma[i + 1]);
                times[i + 1] - times[i] > config.min_dt && segment_distance(point, a, b) < T::lit(2.0) * (b - a).norm()
            })
            .collect();
        if split.is_empty() {
            return Ok(passage_side(&gamma, point, config.eps));
        }
        let mids: Vec<T> = split.iter().map(|&i| (times[i] + times[i + 1]) * T::lit(0.5)).collect();
        let new_points = sampler.points(&mids)?;
        let mut t_next = Vec::with_capacity(times.len() + mids.len());
        let mut g_next = Vec::with_capacity(times.len() + mids.len());
        let mut pending = split.iter().zip(mids.iter().zip(new_points)).peekable();
        for i in 0..times.len() {
            t_next.push(times[i]);
            g_next.push(gamma[i]);
            if let Some((_, (&t, g))) = pending.next_if(|(&j, _)| j == i) {
                t_next.push(t);
                g_next.push(g);
            }
        }
        times = t_next;
        gamma = g_next;
    }
}

/// Monte Carlo left-passage probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeftPassageEstimate<T> {
    pub p_hat: T,
    pub stderr: T,
    pub left: usize,
    pub right: usize,
    pub undecided: usize,
}

/// Fraction of traces, one per seed, passing to the left of `point`; undecided
/// traces are excluded from the fraction and counted separately.
pub fn left_passage_estimate<T: Real>(
    seeds: &[u64],
    kappa: T,
    point: Complex<T>,
    config: &LeftPassageConfig<T>,
) -> Result<LeftPassageEstimate<T>> {
    if !(point.im > T::zero()) {
        return Err(Error::invalid(format!("query point {point} is not in the upper half plane")));
    }
    let sides: Vec<Passage> = seeds
        .par_iter()
        .map(|&seed| {
            let w = BrownianPath::sample(seed, config.horizon, TRACE_BASE_LEVEL)?;
            Ok(classify_passages(&w, kappa, &[point], config)?[0])
        })
        .collect::<Result<_>>()?;
    Ok(passage_summary(&sides))
}

/// Counts and binomial estimate from classified traces.
pub fn passage_summary<T: Real>(sides: &[Passage]) -> LeftPassageEstimate<T> {
    let left = sides.iter().filter(|&&s| s == Passage::Left).count();
    let right = sides.iter().filter(|&&s| s == Passage::Right).count();
    let decided = left + right;
    let (p_hat, stderr) = if decided == 0 {
        (T::nan(), T::nan())
    } else {
        let n = T::from_usize(decided).unwrap();
        let p = T::from_usize(left).unwrap() / n;
        (p, (p * (T::one() - p) / n).sqrt())
    };
    LeftPassageEstimate { p_hat, stderr, left, right, undecided: sides.len() - decided }
}
