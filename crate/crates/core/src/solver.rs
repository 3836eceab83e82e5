//! Pathwise solutions of `dH = dB − a/H dt`, `a = (1−δ)/2`.
//!
//! The walker descends the driving function's dyadic tree and hands the
//! integrator segments on which `B` is linear. A segment is accepted once it is
//! at least as fine as the configured noise resolution and shorter than
//! `step_factor · |H|² / a`; real starts additionally require the noise
//! increment to stay below `real_noise_ratio · |H|`, so the segment cannot
//! carry `H` across 0. Inside a segment `G = H − B` solves a smooth ODE,
//! integrated with an embedded Dormand–Prince pair.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{floor_index, DrivingNoise};
use crate::scalar::{pow2_neg, Field, Real};

/// Dimension `δ < 0` and drift coefficient `a = (1−δ)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams<T> {
    delta: T,
    a: T,
}

impl<T: Field> FlowParams<T> {
    pub fn new(delta: T) -> Result<Self> {
        if !(delta < T::zero()) {
            return Err(Error::invalid(format!("dimension must be negative, got {delta:?}")));
        }
        Ok(FlowParams { delta, a: (T::one() - delta) / T::two() })
    }

    /// Parameters of the SLE embedding, `δ = 1 − 4/κ` for `κ ∈ (0, 4)`.
    pub fn from_kappa(kappa: T) -> Result<Self> {
        let four = T::two() + T::two();
        if !(kappa > T::zero() && kappa < four) {
            return Err(Error::invalid(format!("kappa must lie in (0, 4), got {kappa:?}")));
        }
        Self::new(T::one() - four / kappa)
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn a(&self) -> T {
        self.a
    }
}

/// `(θ, λ, ζ)` with `λ = θ(1 + 1/(2a)) − θ²/(4a)` and `ζ = θ − θ²/(4a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentTriple<T> {
    pub theta: T,
    pub lambda: T,
    pub zeta: T,
}

impl<T: Field> ExponentTriple<T> {
    /// The formulas at any `θ`, without the admissibility check.
    pub fn from_theta(params: &FlowParams<T>, theta: T) -> Self {
        let a = params.a();
        let two_a = T::two() * a;
        let four_a = two_a + two_a;
        let quad = theta * theta / four_a;
        ExponentTriple { theta, lambda: theta * (T::one() + T::one() / two_a) - quad, zeta: theta - quad }
    }
}

/// The triple for an admissible `θ ∈ (2, 4a)`.
pub fn exponents<T: Field>(params: &FlowParams<T>, theta: T) -> Result<ExponentTriple<T>> {
    let hi = (T::two() + T::two()) * params.a();
    if !(theta > T::two() && theta < hi) {
        return Err(Error::invalid(format!("theta = {theta:?} outside the admissible interval (2, {hi:?})")));
    }
    let triple = ExponentTriple::from_theta(params, theta);
    assert!(triple.lambda > T::two() && triple.zeta > T::zero(), "exponent algebra broken: {triple:?}");
    Ok(triple)
}

/// Numerical knobs shared by every solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig<T> {
    /// Coarsest segment length: the noise is resolved at least this finely everywhere.
    pub noise_step: T,
    /// Segments near the singularity are shorter than `step_factor · |H|² / a`.
    pub step_factor: T,
    /// Relative local error target of the Runge–Kutta pair.
    pub rk_tol: T,
    /// Real starts: segments with `|ΔB| > real_noise_ratio · |H|` are split.
    pub real_noise_ratio: T,
    /// Real flows stop once `|H| ≤ eps_hit`.
    pub eps_hit: T,
    /// First rung `k` of the boundary ladder `2^-k e^{iφ}`; `None` picks one from `tol`.
    pub ladder_start: Option<u32>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            noise_step: T::lit(2f64.powi(-12)),
            step_factor: T::lit(0.02),
            rk_tol: T::lit(1e-8),
            real_noise_ratio: T::lit(0.5),
            eps_hit: T::lit(1e-6),
            ladder_start: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    /// Every discretization knob scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        SolverConfig {
            noise_step: self.noise_step * factor,
            step_factor: self.step_factor * factor,
            rk_tol: self.rk_tol * factor,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [self.noise_step, self.step_factor, self.rk_tol, self.real_noise_ratio, self.eps_hit];
        if positive.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::invalid(format!("solver settings must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    fn ladder_first_rung(&self, tol: T) -> u32 {
        self.ladder_start.unwrap_or_else(|| ((T::one() / tol).log2().ceil().to_i64().unwrap_or(1) - 3).max(1) as u32)
    }
}

/// Discretized path `t ↦ H(s, t, z0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution<T> {
    pub s: T,
    pub z0: Complex<T>,
    pub times: Vec<T>,
    pub h: Vec<Complex<T>>,
    /// Running `∫ a(U² − V²)/(U² + V²)² dr`, i.e. `log |H'|`.
    pub log_deriv: Vec<T>,
    /// Running `B_t − B_s` of the noise the solver used.
    pub noise: Vec<T>,
    /// `∫ 1/|H_r| dr` over the whole solve; recorded, never asserted on.
    pub inv_modulus_integral: T,
}

impl<T: Real> FlowSolution<T> {
    fn start(s: T, z0: Complex<T>) -> Self {
        FlowSolution {
            s,
            z0,
            times: vec![s],
            h: vec![z0],
            log_deriv: vec![T::zero()],
            noise: vec![T::zero()],
            inv_modulus_integral: T::zero(),
        }
    }

    fn push(&mut self, t: T, h: Complex<T>, log_deriv: T, noise: T) {
        self.times.push(t);
        self.h.push(h);
        self.log_deriv.push(log_deriv);
        self.noise.push(noise);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn last(&self) -> Complex<T> {
        *self.h.last().unwrap()
    }

    fn bracket(&self, t: T) -> Result<(usize, T)> {
        if t < self.s || t > self.t_end() || t.is_nan() {
            return Err(Error::invalid(format!("t = {t} outside solution range [{}, {}]", self.s, self.t_end())));
        }
        let j = self.times.partition_point(|&r| r <= t);
        if j == 0 || self.times[j - 1] == t {
            return Ok((j.saturating_sub(1), T::zero()));
        }
        let i = j - 1;
        Ok((i, (t - self.times[i]) / (self.times[j] - self.times[i])))
    }

    /// `log |H'(s, t, z0)|`, interpolated linearly between samples.
    pub fn log_deriv_at(&self, t: T) -> Result<T> {
        let (i, w) = self.bracket(t)?;
        Ok(if w == T::zero() {
            self.log_deriv[i]
        } else {
            self.log_deriv[i] + (self.log_deriv[i + 1] - self.log_deriv[i]) * w
        })
    }

    /// `H(s, t, z0)`, interpolated linearly between samples.
    pub fn value_at(&self, t: T) -> Result<Complex<T>> {
        let (i, w) = self.bracket(t)?;
        Ok(if w == T::zero() { self.h[i] } else { self.h[i] + (self.h[i + 1] - self.h[i]) * w })
    }

    /// Largest excess over the transport estimates `|U_t| ≤ 2 sup|B_r − B_s|`
    /// (imaginary-axis starts only) and `V_t ≤ √(V_s² + 2a(t−s))`.
    pub fn transport_excess(&self, a: T) -> T {
        let two = T::lit(2.0);
        let on_axis = self.z0.re == T::zero();
        let v0 = self.z0.im;
        let mut sup = T::zero();
        let mut worst = T::neg_infinity();
        for i in 0..self.len() {
            sup = sup.max(self.noise[i].abs());
            let t = self.times[i] - self.s;
            if on_axis {
                worst = worst.max(self.h[i].re.abs() - two * sup);
            }
            worst = worst.max(self.h[i].im - (v0 * v0 + two * a * t).sqrt());
        }
        worst
    }
}

/// Hitting time `T^{s,x}` of 0 by the real flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingRecord<T> {
    pub s: T,
    pub x: T,
    pub hit_time: T,
    pub eps_hit: T,
    /// Noiseless time `H_stop² / (2a)` still needed from the stopping point.
    pub correction: T,
    /// `|H|` where integration stopped.
    pub stop_modulus: T,
    /// False when the path survived to the horizon; `hit_time` is then the horizon.
    pub hit: bool,
    /// True when the refinement cap stopped integration above `eps_hit`.
    pub depth_limited: bool,
}

impl<T: Real> HittingRecord<T> {
    fn immediate(s: T, x: T, eps_hit: T) -> Self {
        HittingRecord {
            s,
            x,
            hit_time: s,
            eps_hit,
            correction: T::zero(),
            stop_modulus: x.abs(),
            hit: true,
            depth_limited: false,
        }
    }

    pub fn to_f64(&self) -> HittingRecord<f64> {
        HittingRecord {
            s: self.s.as_f64(),
            x: self.x.as_f64(),
            hit_time: self.hit_time.as_f64(),
            eps_hit: self.eps_hit.as_f64(),
            correction: self.correction.as_f64(),
            stop_modulus: self.stop_modulus.as_f64(),
            hit: self.hit,
            depth_limited: self.depth_limited,
        }
    }
}

/// One rung of the boundary ladder and its sup-distance to the previous rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRung<T> {
    pub y: T,
    /// Over common samples in `[s + tol², t_end]`; drives the stopping rule.
    pub gap: T,
    /// Over all common samples in `[s, t_end]`.
    pub full_gap: T,
}

/// The boundary limit `H(s, ·, 0+)` and the ladder that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryLimit<T> {
    pub solution: FlowSolution<T>,
    pub ladder: Vec<LadderRung<T>>,
}

// ---------------------------------------------------------------------------
// dyadic walker

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    level: u32,
    index: u64,
    t0: T,
    t1: T,
    b0: T,
    b1: T,
}

impl<T: Real> Segment<T> {
    #[inline]
    fn noise_at(&self, t: T) -> T {
        if t == self.t1 {
            self.b1
        } else if t == self.t0 {
            self.b0
        } else {
            self.b0 + (self.b1 - self.b0) * ((t - self.t0) / (self.t1 - self.t0))
        }
    }
}

enum Refine<T> {
    Ready(Segment<T>),
    Exhausted,
    TooDeep(T),
}

/// Level of the noise grid, the coarsest level any accepted segment may have.
fn grid_level<T: Real, N: DrivingNoise<T>>(noise: &N, cfg: &SolverConfig<T>) -> u32 {
    let ratio = (noise.horizon() / cfg.noise_step).log2().ceil();
    ratio.to_u32().unwrap_or(0).min(noise.max_level())
}

struct Walker<'n, T, N> {
    noise: &'n N,
    stack: Vec<Segment<T>>,
    min_level: u32,
    max_level: u32,
    /// `step_factor / a`
    step_cap: T,
    real_ratio: T,
    real: bool,
}

impl<'n, T: Real, N: DrivingNoise<T>> Walker<'n, T, N> {
    fn new(noise: &'n N, params: &FlowParams<T>, cfg: &SolverConfig<T>, real: bool) -> Self {
        let horizon = noise.horizon();
        let max_level = noise.max_level();
        let min_level = grid_level(noise, cfg);
        let root =
            Segment { level: 0, index: 0, t0: T::zero(), t1: horizon, b0: noise.node(0, 0), b1: noise.node(0, 1) };
        let mut stack = Vec::with_capacity(max_level as usize + 2);
        stack.push(root);
        Walker {
            noise,
            stack,
            min_level,
            max_level,
            step_cap: cfg.step_factor / params.a(),
            real_ratio: cfg.real_noise_ratio,
            real,
        }
    }

    #[inline]
    fn accepts(&self, seg: &Segment<T>, modulus: T) -> bool {
        seg.level >= self.min_level
            && seg.t1 - seg.t0 <= self.step_cap * modulus * modulus
            && (!self.real || (seg.b1 - seg.b0).abs() <= self.real_ratio * modulus)
    }

    #[inline]
    fn split(&self, seg: &Segment<T>) -> (Segment<T>, Segment<T>) {
        let mid = self.noise.midpoint(seg.level, seg.index, seg.b0, seg.b1);
        let level = seg.level + 1;
        let tm = self.noise.node_time(level, 2 * seg.index + 1);
        (
            Segment { level, index: 2 * seg.index, t0: seg.t0, t1: tm, b0: seg.b0, b1: mid },
            Segment { level, index: 2 * seg.index + 1, t0: tm, t1: seg.t1, b0: mid, b1: seg.b1 },
        )
    }

    /// Accepted segment containing `s`, remembering everything to its right.
    fn seek(&mut self, s: T, modulus: T) -> Refine<T> {
        let mut cur = match self.stack.pop() {
            Some(root) => root,
            None => return Refine::Exhausted,
        };
        loop {
            if self.accepts(&cur, modulus) {
                return Refine::Ready(cur);
            }
            if cur.level >= self.max_level {
                return Refine::TooDeep(cur.t0);
            }
            let (left, right) = self.split(&cur);
            if s < left.t1 {
                self.stack.push(right);
                cur = left;
            } else {
                cur = right;
            }
        }
    }

    /// Next accepted segment after the current one.
    fn advance(&mut self, modulus: T) -> Refine<T> {
        let mut cur = match self.stack.pop() {
            Some(seg) => seg,
            None => return Refine::Exhausted,
        };
        loop {
            if self.accepts(&cur, modulus) {
                return Refine::Ready(cur);
            }
            if cur.level >= self.max_level {
                return Refine::TooDeep(cur.t0);
            }
            let (left, right) = self.split(&cur);
            self.stack.push(right);
            cur = left;
        }
    }
}

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4)

/// `[Re G, Im G, log|H'|, ∫1/|H|]`
type State<T> = [T; 4];

struct Tableau<T> {
    c: [T; 5],
    a: [[T; 6]; 6],
    e: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let f = |n: f64, d: f64| T::lit(n / d);
        let z = T::zero();
        Tableau {
            c: [f(1., 5.), f(3., 10.), f(4., 5.), f(8., 9.), T::one()],
            a: [
                [f(1., 5.), z, z, z, z, z],
                [f(3., 40.), f(9., 40.), z, z, z, z],
                [f(44., 45.), f(-56., 15.), f(32., 9.), z, z, z],
                [f(19372., 6561.), f(-25360., 2187.), f(64448., 6561.), f(-212., 729.), z, z],
                [f(9017., 3168.), f(-355., 33.), f(46732., 5247.), f(49., 176.), f(-5103., 18656.), z],
                [f(35., 384.), z, f(500., 1113.), f(125., 192.), f(-2187., 6784.), f(11., 84.)],
            ],
            e: [f(71., 57600.), z, f(-71., 16695.), f(71., 1920.), f(-17253., 339200.), f(22., 525.), f(-1., 40.)],
        }
    }
}

#[inline]
fn rhs<T: Real>(a: T, y: &State<T>, b: T) -> State<T> {
    let u = y[0] + b;
    let v = y[1];
    let d = u * u + v * v;
    let inv = T::one() / d;
    [-a * u * inv, a * v * inv, a * (u * u - v * v) * inv * inv, inv.sqrt()]
}

struct Integrator<T> {
    a: T,
    tol: T,
    tab: Tableau<T>,
}

struct Step<T> {
    y: State<T>,
    k_last: State<T>,
    err: T,
}

impl<T: Real> Integrator<T> {
    /// One step of length `h` from `y` with `B(t) = b + slope·(τ − t)` and `B(t+h) = b_end`.
    fn step(&self, y: &State<T>, k1: &State<T>, h: T, b: T, slope: T, b_end: T) -> Step<T> {
        let tab = &self.tab;
        let mut k = [*k1; 7];
        for i in 0..6 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i + 1) {
                let w = tab.a[i][j];
                if w != T::zero() {
                    for c in 0..4 {
                        yi[c] = yi[c] + h * w * kj[c];
                    }
                }
            }
            let bi = if i >= 4 { b_end } else { b + slope * tab.c[i] * h };
            k[i + 1] = rhs(self.a, &yi, bi);
            if i == 5 {
                let mut err = [T::zero(); 4];
                for (j, kj) in k.iter().enumerate() {
                    for c in 0..4 {
                        err[c] = err[c] + h * tab.e[j] * kj[c];
                    }
                }
                let modulus = ((y[0] + b).powi(2) + y[1].powi(2)).sqrt();
                let eg = (err[0] * err[0] + err[1] * err[1]).sqrt() / (self.tol * modulus);
                let el = err[2].abs() / self.tol;
                return Step { y: yi, k_last: k[6], err: eg.max(el) };
            }
        }
        unreachable!()
    }
}

// ---------------------------------------------------------------------------
// driver

struct Stop<T> {
    t: T,
    h: Complex<T>,
    /// Real flows only: integration ended because `|H|` fell below `eps_hit`
    /// (or refinement ran out, flagged by `depth_limited`).
    hit: bool,
    depth_limited: bool,
}

/// Solver for one driving function and parameter set.
#[derive(Debug, Clone)]
pub struct Flow<'n, T, N> {
    noise: &'n N,
    params: FlowParams<T>,
    config: SolverConfig<T>,
}

impl<'n, T: Real, N: DrivingNoise<T>> Flow<'n, T, N> {
    pub fn new(noise: &'n N, params: FlowParams<T>) -> Self {
        Flow { noise, params, config: SolverConfig::default() }
    }

    pub fn with_config(noise: &'n N, params: FlowParams<T>, config: SolverConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Flow { noise, params, config })
    }

    pub fn noise(&self) -> &'n N {
        self.noise
    }

    pub fn params(&self) -> &FlowParams<T> {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    fn check_times(&self, s: T, t_end: T) -> Result<()> {
        let horizon = self.noise.horizon();
        if !(s >= T::zero() && s <= t_end && t_end <= horizon) {
            return Err(Error::invalid(format!("need 0 <= s = {s} <= t_end = {t_end} <= horizon = {horizon}")));
        }
        Ok(())
    }

    /// Integrates from `(s, z0)` up to `t_end`, recording segment ends and `observe` times.
    ///
    /// A start strictly inside a noise cell is first pulled back to the cell's left node, so that
    /// the discrete flow composes exactly: restarting from an intermediate value reproduces the
    /// segments the continuing solve used.
    fn run(&self, s: T, t_end: T, z0: Complex<T>, observe: &[T], rec: Option<&mut FlowSolution<T>>) -> Result<Stop<T>> {
        match self.pull_back(s, z0)? {
            Some((node, w)) => self.integrate(node, s, t_end, w, observe, rec),
            None => self.integrate(s, s, t_end, z0, observe, rec),
        }
    }

    /// `(node, w)` with `node` the noise-grid node below `s` and `H(node, s, w) = z0`, when the
    /// secant iteration finds such a `w`.
    fn pull_back(&self, s: T, z0: Complex<T>) -> Result<Option<(T, Complex<T>)>> {
        let real = z0.im == T::zero();
        let horizon = self.noise.horizon();
        let level = grid_level(self.noise, &self.config);
        let node = self.noise.node_time(level, floor_index(s, horizon * pow2_neg::<T>(level), 1u64 << level));
        if !(node < s) || s >= horizon {
            return Ok(None);
        }
        let a = self.params.a();
        let dt = s - node;
        if !real && z0.im * z0.im <= T::lit(4.0) * a * dt {
            return Ok(None);
        }
        let image = |w: Complex<T>| -> Result<Option<Complex<T>>> {
            if (real && (w.re == T::zero() || w.re.signum() != z0.re.signum())) || (!real && !(w.im > T::zero())) {
                return Ok(None);
            }
            match self.integrate(node, s, s, w, &[], None) {
                Ok(stop) if !stop.hit => Ok(Some(stop.h)),
                Ok(_) | Err(Error::RefinementDepth { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let scale = T::one() + z0.norm();
        let target = T::lit(1e-3) * self.config.rk_tol * scale;
        let accept = self.config.rk_tol * scale;

        let mut w_prev = z0 + Complex::new(a * dt, T::zero()) / z0;
        if real {
            w_prev.im = T::zero();
        }
        let mut f_prev = match image(w_prev)? {
            Some(f) => f,
            None => return Ok(None),
        };
        let mut w = w_prev + (z0 - f_prev);
        let mut best = (w_prev, (f_prev - z0).norm());
        for _ in 0..16 {
            let f = match image(w)? {
                Some(f) => f,
                None => break,
            };
            let err = (f - z0).norm();
            if err < best.1 {
                best = (w, err);
            }
            if err <= target || f == f_prev {
                break;
            }
            let next = w - (f - z0) * (w - w_prev) / (f - f_prev);
            if !(next.re.is_finite() && next.im.is_finite()) {
                break;
            }
            w_prev = w;
            f_prev = f;
            w = next;
        }
        Ok((best.1 <= accept).then_some((node, best.0)))
    }

    /// Integrates from `(t0, w)`, reporting the solution from `s ≥ t0` on.
    fn integrate(
        &self,
        t0: T,
        s: T,
        t_end: T,
        w: Complex<T>,
        observe: &[T],
        mut rec: Option<&mut FlowSolution<T>>,
    ) -> Result<Stop<T>> {
        let real = w.im == T::zero();
        let a = self.params.a();
        let rk = Integrator { a, tol: self.config.rk_tol, tab: Tableau::new() };
        let mut walker = Walker::new(self.noise, &self.params, &self.config, real);
        let eps_hit = self.config.eps_hit;

        let too_deep = |t: T, modulus: T| Error::RefinementDepth {
            max_level: self.noise.max_level(),
            time: t.as_f64(),
            modulus: modulus.as_f64(),
        };

        let mut seg = match walker.seek(t0, w.norm()) {
            Refine::Ready(seg) => seg,
            Refine::TooDeep(_) if real => return Ok(Stop { t: t0, h: w, hit: true, depth_limited: true }),
            Refine::TooDeep(t) => return Err(too_deep(t, w.norm())),
            Refine::Exhausted => unreachable!("root always present"),
        };
        let b_0 = seg.noise_at(t0);
        let mut y: State<T> = [w.re - b_0, w.im, T::zero(), T::zero()];
        let mut t = t0;
        let mut k = rhs(a, &y, b_0);
        let mut h_try = seg.t1 - seg.t0;
        let mut obs = observe.iter().copied().filter(|&o| o > s && o < t_end).peekable();
        // state at `s`, subtracted from everything recorded
        let mut anchor = (t0 == s).then_some((b_0, T::zero(), T::zero()));

        loop {
            let seg_end = seg.t1.min(t_end);
            let slope = (seg.b1 - seg.b0) / (seg.t1 - seg.t0);
            // substeps up to the segment end, pausing at `s` and at observation times
            while t < seg_end {
                let target = match obs.peek() {
                    _ if anchor.is_none() && s < seg_end => s,
                    Some(&o) if o < seg_end => o,
                    _ => seg_end,
                };
                let mut rejections = 0u32;
                while t < target {
                    let remaining = target - t;
                    let h = if h_try >= remaining * T::lit(0.999) { remaining } else { h_try };
                    let t_next = if h == remaining { target } else { t + h };
                    let b_t = seg.noise_at(t);
                    let b_next = seg.noise_at(t_next);
                    let step = rk.step(&y, &k, t_next - t, b_t, slope, b_next);
                    let u_old = y[0] + b_t;
                    let u_new = step.y[0] + b_next;
                    let crossed = real && (u_new * u_old <= T::zero() || u_new.abs() < T::lit(0.2) * u_old.abs());
                    if step.err <= T::one() && !(crossed && u_new.abs() > eps_hit) {
                        y = step.y;
                        k = step.k_last;
                        t = t_next;
                        let grow =
                            if step.err > T::zero() { T::lit(0.9) * step.err.powf(T::lit(-0.2)) } else { T::lit(5.0) };
                        h_try = h * grow.min(T::lit(5.0)).max(T::lit(0.2));
                        if real && u_new.abs() <= eps_hit {
                            let h_now = Complex::new(u_new, T::zero());
                            if let (Some(r), Some((b_s, log0, inv0))) = (rec.as_deref_mut(), anchor) {
                                r.push(t, h_now, y[2] - log0, b_next - b_s);
                                r.inv_modulus_integral = y[3] - inv0;
                            }
                            return Ok(Stop { t, h: h_now, hit: true, depth_limited: false });
                        }
                    } else {
                        rejections += 1;
                        if rejections > 60 {
                            return Err(too_deep(t, (y[0] + b_t).hypot(y[1])));
                        }
                        let shrink = if crossed { T::lit(0.25) } else { T::lit(0.9) * step.err.powf(T::lit(-0.2)) };
                        h_try = h * shrink.max(T::lit(0.1)).min(T::lit(0.5));
                    }
                }
                if anchor.is_none() {
                    if t == s {
                        anchor = Some((seg.noise_at(s), y[2], y[3]));
                    }
                    continue;
                }
                if obs.peek() == Some(&target) {
                    obs.next();
                    if let (Some(r), Some((b_s, log0, _))) = (rec.as_deref_mut(), anchor) {
                        let b = seg.noise_at(t);
                        r.push(t, Complex::new(y[0] + b, y[1]), y[2] - log0, b - b_s);
                    }
                }
            }
            let b = seg.noise_at(t);
            let h_now = Complex::new(y[0] + b, y[1]);
            if let (Some(r), Some((b_s, log0, inv0))) = (rec.as_deref_mut(), anchor) {
                if *r.times.last().unwrap() < t {
                    r.push(t, h_now, y[2] - log0, b - b_s);
                }
                r.inv_modulus_integral = y[3] - inv0;
            }
            if t >= t_end {
                return Ok(Stop { t, h: h_now, hit: false, depth_limited: false });
            }
            seg = match walker.advance(h_now.norm()) {
                Refine::Ready(next) => next,
                Refine::TooDeep(_) if real => return Ok(Stop { t, h: h_now, hit: true, depth_limited: true }),
                Refine::TooDeep(at) => return Err(too_deep(at, h_now.norm())),
                Refine::Exhausted => return Ok(Stop { t, h: h_now, hit: false, depth_limited: false }),
            };
        }
    }

    fn hitting_record(&self, s: T, x: T, stop: &Stop<T>) -> HittingRecord<T> {
        let modulus = stop.h.re.abs();
        let correction = if stop.hit { modulus * modulus / (T::lit(2.0) * self.params.a()) } else { T::zero() };
        HittingRecord {
            s,
            x,
            hit_time: if stop.hit { stop.t + correction } else { self.noise.horizon() },
            eps_hit: self.config.eps_hit,
            correction,
            stop_modulus: modulus,
            hit: stop.hit,
            depth_limited: stop.depth_limited,
        }
    }

    /// `H(s, ·, z0)` on `[s, t_end]`.
    pub fn solve(&self, s: T, t_end: T, z0: Complex<T>) -> Result<FlowSolution<T>> {
        self.solve_observed(s, t_end, z0, &[])
    }

    /// As [`Flow::solve`], additionally sampling at every time of the sorted slice `observe`.
    pub fn solve_observed(&self, s: T, t_end: T, z0: Complex<T>, observe: &[T]) -> Result<FlowSolution<T>> {
        self.check_times(s, t_end)?;
        if z0.im < T::zero() || !(z0.re.is_finite() && z0.im.is_finite()) {
            return Err(Error::invalid(format!("start {z0} is not in the closed upper half plane")));
        }
        if z0 == Complex::new(T::zero(), T::zero()) {
            return Err(Error::invalid("start at 0: use boundary_start"));
        }
        let mut sol = FlowSolution::start(s, z0);
        if t_end == s {
            return Ok(sol);
        }
        let stop = self.run(s, t_end, z0, observe, Some(&mut sol))?;
        if stop.hit {
            let record = self.hitting_record(s, z0.re, &stop);
            return Err(Error::HitBeforeEnd { x: z0.re.as_f64(), t_end: t_end.as_f64(), record: record.to_f64() });
        }
        Ok(sol)
    }

    /// `H(s, t, x)` for real `x` and `t` before the hitting time, or the hitting record.
    pub(crate) fn real_value(&self, s: T, t: T, x: T) -> Result<std::result::Result<T, HittingRecord<T>>> {
        self.check_times(s, t)?;
        if x.abs() <= self.config.eps_hit {
            return Ok(Err(HittingRecord::immediate(s, x, self.config.eps_hit)));
        }
        if t == s {
            return Ok(Ok(x));
        }
        let stop = self.run(s, t, Complex::new(x, T::zero()), &[], None)?;
        if !stop.hit {
            return Ok(Ok(stop.h.re));
        }
        let record = self.hitting_record(s, x, &stop);
        if record.hit_time > t {
            // stopped inside the noiseless tail, which is still running at t
            let rest = stop.h.re * stop.h.re - T::lit(2.0) * self.params.a() * (t - stop.t);
            return Ok(Ok(stop.h.re.signum() * rest.max(T::zero()).sqrt()));
        }
        Ok(Err(record))
    }

    /// `T^{s,x}`, the first time the real flow from `x` reaches 0.
    pub fn hitting_time(&self, s: T, x: T) -> Result<HittingRecord<T>> {
        let horizon = self.noise.horizon();
        self.check_times(s, horizon)?;
        if x.abs() <= self.config.eps_hit {
            return Ok(HittingRecord::immediate(s, x, self.config.eps_hit));
        }
        if s == horizon {
            return Ok(HittingRecord {
                hit_time: horizon,
                hit: false,
                ..HittingRecord::immediate(s, x, self.config.eps_hit)
            });
        }
        let stop = self.run(s, horizon, Complex::new(x, T::zero()), &[], None)?;
        Ok(self.hitting_record(s, x, &stop))
    }

    /// `H(s, ·, 0+)`: the limit of solutions started at `2^-k e^{i·angle}`.
    pub fn boundary_start(&self, s: T, t_end: T, angle: T, tol: T) -> Result<BoundaryLimit<T>> {
        self.boundary_start_observed(s, t_end, angle, tol, &[])
    }

    pub fn boundary_start_observed(&self, s: T, t_end: T, angle: T, tol: T, observe: &[T]) -> Result<BoundaryLimit<T>> {
        self.check_times(s, t_end)?;
        if !(angle > T::zero() && angle < T::PI()) {
            return Err(Error::invalid(format!("approach angle {angle} outside (0, π)")));
        }
        if !(tol > T::zero()) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        let zero = Complex::new(T::zero(), T::zero());
        if t_end == s {
            return Ok(BoundaryLimit { solution: FlowSolution::start(s, zero), ladder: Vec::new() });
        }
        let dir = Complex::new(angle.cos(), angle.sin());
        let window = s + tol * tol;
        let first = self.config.ladder_first_rung(tol);
        let not_converged = |y: T, gap: T, reason: String| Error::BoundaryNotConverged {
            tol: tol.as_f64(),
            last_y: y.as_f64(),
            last_gap: gap.as_f64(),
            reason,
        };

        let mut y = pow2_neg::<T>(first);
        let mut prev = self
            .solve_observed(s, t_end, dir * y, observe)
            .map_err(|e| not_converged(y, T::infinity(), e.to_string()))?;
        let mut ladder = vec![LadderRung { y, gap: T::infinity(), full_gap: T::infinity() }];
        for k in (first + 1)..=(T::MAX_DYADIC_LEVEL + 8) {
            y = pow2_neg::<T>(k);
            let cur = match self.solve_observed(s, t_end, dir * y, observe) {
                Ok(sol) => sol,
                Err(e) => return Err(not_converged(y, ladder.last().unwrap().gap, e.to_string())),
            };
            let gap = sup_gap(&prev, &cur, window);
            let full_gap = sup_gap(&prev, &cur, s);
            ladder.push(LadderRung { y, gap, full_gap });
            if gap < tol {
                let mut solution = cur;
                solution.z0 = zero;
                solution.h[0] = zero;
                return Ok(BoundaryLimit { solution, ladder });
            }
            prev = cur;
        }
        Err(not_converged(y, ladder.last().unwrap().gap, "ladder exhausted".into()))
    }
}

/// Sup distance over common sample times `≥ from`, always including the final time.
pub(crate) fn sup_gap<T: Real>(p: &FlowSolution<T>, q: &FlowSolution<T>, from: T) -> T {
    let mut gap = (p.last() - q.last()).norm();
    let (mut i, mut j) = (0, 0);
    while i < p.len() && j < q.len() {
        let (tp, tq) = (p.times[i], q.times[j]);
        if tp < tq {
            i += 1;
        } else if tq < tp {
            j += 1;
        } else {
            if tp >= from {
                gap = gap.max((p.h[i] - q.h[j]).norm());
            }
            i += 1;
            j += 1;
        }
    }
    gap
}

/// `solve_flow` with default settings.
pub fn solve_flow<T: Real, N: DrivingNoise<T>>(
    noise: &N,
    params: FlowParams<T>,
    s: T,
    t_end: T,
    z0: Complex<T>,
) -> Result<FlowSolution<T>> {
    Flow::new(noise, params).solve(s, t_end, z0)
}

/// `hitting_time` with default settings.
pub fn hitting_time<T: Real, N: DrivingNoise<T>>(
    noise: &N,
    params: FlowParams<T>,
    s: T,
    x: T,
) -> Result<HittingRecord<T>> {
    Flow::new(noise, params).hitting_time(s, x)
}

/// `boundary_start` with default settings.
pub fn boundary_start<T: Real, N: DrivingNoise<T>>(
    noise: &N,
    params: FlowParams<T>,
    s: T,
    t_end: T,
    angle: T,
    tol: T,
) -> Result<FlowSolution<T>> {
    Ok(Flow::new(noise, params).boundary_start(s, t_end, angle, tol)?.solution)
}

/// `log |H'(s, t, z0)|` from a solution.
pub fn log_deriv_at<T: Real>(sol: &FlowSolution<T>, t: T) -> Result<T> {
    sol.log_deriv_at(t)
}
