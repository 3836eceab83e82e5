//! Complex squared Bessel process from 0 and the pathwise identities around it.

use num_complex::Complex;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{BrownianPath, DrivingNoise};
use crate::scalar::Real;
use crate::solver::{ExponentTriple, Flow, FlowParams, FlowSolution};

/// Square root with values in the closed upper half plane.
///
/// `√z = sgn(Im z)·√((|z|+Re z)/2) + i√((|z|−Re z)/2)`, evaluated without
/// cancellation. The second component is `true` on `[0, ∞)`, where the formula
/// is ambiguous and `+√x` is returned.
pub fn branch_sqrt_flagged<T: Real>(z: Complex<T>) -> (Complex<T>, bool) {
    let half = T::lit(0.5);
    let modulus = z.re.hypot(z.im);
    if z.im == T::zero() {
        return if z.re >= T::zero() {
            (Complex::new(z.re.sqrt(), T::zero()), true)
        } else {
            (Complex::new(T::zero(), (-z.re).sqrt()), false)
        };
    }
    let (p, q) = if z.re >= T::zero() {
        let p = ((modulus + z.re) * half).sqrt();
        (p, z.im.abs() / (p + p))
    } else {
        let q = ((modulus - z.re) * half).sqrt();
        (z.im.abs() / (q + q), q)
    };
    (Complex::new(z.im.signum() * p, q), false)
}

pub fn branch_sqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    branch_sqrt_flagged(z).0
}

/// `H = √Y` and `Y = H²` on the solver grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexProcessPath<T> {
    pub times: Vec<T>,
    pub y: Vec<Complex<T>>,
    pub h: Vec<Complex<T>>,
    /// Sample is numerically on the cut: the branch root of `Y` is ambiguous or
    /// disagrees with `H`.
    pub branch_flags: Vec<bool>,
}

impl<T: Real> ComplexProcessPath<T> {
    fn from_solution(sol: &FlowSolution<T>) -> Self {
        let y: Vec<_> = sol.h.iter().map(|h| h * h).collect();
        let branch_flags = y
            .iter()
            .zip(&sol.h)
            .map(|(y, h)| {
                let (root, ambiguous) = branch_sqrt_flagged(*y);
                ambiguous || (root - h).norm() > T::lit(1e-8) * h.norm()
            })
            .collect();
        ComplexProcessPath { times: sol.times.clone(), y, h: sol.h.clone(), branch_flags }
    }

    /// Samples with `|Im Y| < rel · max_{r ≤ t}|Y_r|` but `Re Y ≥ 0`, i.e. near `[0, ∞)`.
    pub fn cut_approaches(&self, rel: T) -> usize {
        let mut scale = T::zero();
        let mut count = 0;
        for (i, y) in self.y.iter().enumerate() {
            scale = scale.max(y.norm());
            if i > 0 && y.im.abs() < rel * scale && y.re >= T::zero() {
                count += 1;
            }
        }
        count
    }
}

/// CBES and CBESQ from 0 on a given flow: `H = H(0, ·, 0+)`, `Y = H²`.
pub fn cbes_on<T: Real, N: DrivingNoise<T>>(flow: &Flow<'_, T, N>, t_end: T, tol: T) -> Result<ComplexProcessPath<T>> {
    let limit = flow.boundary_start(T::zero(), t_end, T::FRAC_PI_2(), tol)?;
    Ok(ComplexProcessPath::from_solution(&limit.solution))
}

/// CBES and CBESQ from 0 driven by the Brownian path of `seed` on `[0, t_end]`.
pub fn cbes_process<T: Real>(seed: u64, params: FlowParams<T>, t_end: T, tol: T) -> Result<ComplexProcessPath<T>> {
    let path = BrownianPath::sample(seed, t_end, 0)?;
    cbes_on(&Flow::new(&path, params), t_end, tol)
}

/// Pieces of the Itô identity along a solution started at `iy`.
struct ItoTerms<T> {
    lhs: Vec<T>,
    m: Vec<T>,
    qv: Vec<T>,
    log_terms: Vec<T>,
}

fn ito_terms<T: Real>(sol: &FlowSolution<T>, triple: &ExponentTriple<T>) -> Result<ItoTerms<T>> {
    let y = sol.z0.im;
    if sol.z0.re != T::zero() || !(y > T::zero()) {
        return Err(Error::invalid(format!(
            "Itô identity needs a start on the positive imaginary axis, got {}",
            sol.z0
        )));
    }
    let theta = triple.theta;
    let half = T::lit(0.5);
    let n = sol.len();
    let mut lhs = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut qv = Vec::with_capacity(n);
    let mut log_terms = Vec::with_capacity(n);
    let (mut m_acc, mut qv_acc) = (T::zero(), T::zero());
    let density = |h: Complex<T>| h.re / h.norm_sqr();
    // ∂/∂U of U/|H|²
    let density_u = |h: Complex<T>| (h.im * h.im - h.re * h.re) / (h.norm_sqr() * h.norm_sqr());
    for i in 0..n {
        if i > 0 {
            let prev = sol.h[i - 1];
            let f_prev = density(prev);
            let f_cur = density(sol.h[i]);
            let db = sol.noise[i] - sol.noise[i - 1];
            let dt = sol.times[i] - sol.times[i - 1];
            m_acc = m_acc + theta * (f_prev * db + half * density_u(prev) * (db * db - dt));
            qv_acc = qv_acc + theta * theta * (f_prev * f_prev + f_cur * f_cur) * half * dt;
        }
        let h = sol.h[i];
        let ratio = h.re / h.im;
        lhs.push(triple.lambda * sol.log_deriv[i]);
        m.push(m_acc);
        qv.push(qv_acc);
        log_terms.push(triple.zeta * (y / h.im).ln() - theta * half * (ratio * ratio).ln_1p());
    }
    Ok(ItoTerms { lhs, m, qv, log_terms })
}

/// `λ log|H'| − (M − [M]/2 + ζ log(y/V) − (θ/2) log(1 + U²/V²))` at every sample.
///
/// `M = θ∫ U/|H|² dB` is the left-point Itô sum with the second-order
/// Itô–Taylor term `½ ∂_U(U/|H|²)((ΔB)² − Δt)`; `[M]` uses the trapezoid rule.
pub fn ito_identity_residual<T: Real>(sol: &FlowSolution<T>, triple: &ExponentTriple<T>) -> Result<Vec<T>> {
    let terms = ito_terms(sol, triple)?;
    let half = T::lit(0.5);
    Ok((0..sol.len()).map(|i| terms.lhs[i] - (terms.m[i] - half * terms.qv[i] + terms.log_terms[i])).collect())
}

/// Outcome of checking `λ log|H'| ≤ M − [M]/2` along a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationReport<T> {
    /// `max_t (λ log|H'_t| − M_t + [M]_t/2)`
    pub max_violation: T,
    /// Samples exceeding the tolerance.
    pub violations: usize,
    pub samples: usize,
    pub tolerance: T,
}

impl<T: Real> DominationReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn exp_martingale_bound_check<T: Real>(
    sol: &FlowSolution<T>,
    triple: &ExponentTriple<T>,
    tolerance: T,
) -> Result<DominationReport<T>> {
    let terms = ito_terms(sol, triple)?;
    let half = T::lit(0.5);
    let excess: Vec<T> = (0..sol.len()).map(|i| terms.lhs[i] - (terms.m[i] - half * terms.qv[i])).collect();
    Ok(DominationReport {
        max_violation: excess.iter().copied().fold(T::neg_infinity(), T::max),
        violations: excess.iter().filter(|&&e| e > tolerance).count(),
        samples: excess.len(),
        tolerance,
    })
}

/// Euler–Maruyama for `dZ = 2√|Z| dB + δ dt` with the given Brownian increments.
pub fn squared_bessel_euler<T: Real>(delta: T, x0: T, dt: T, increments: impl IntoIterator<Item = T>) -> Vec<T> {
    let two = T::lit(2.0);
    let mut z = x0;
    let mut out = vec![z];
    for db in increments {
        z = z + two * z.abs().sqrt() * db + delta * dt;
        out.push(z);
    }
    out
}

/// Euler–Maruyama path of `dZ = 2√|Z| dB + δ dt` on `[0, t_end]`, seeded.
pub fn real_squared_bessel<T: Real>(seed: u64, delta: T, x0: T, t_end: T, dt: T) -> Result<Vec<T>> {
    if !(dt > T::zero()) || !(t_end >= T::zero()) {
        return Err(Error::invalid(format!("need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}")));
    }
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(0);
    let sd = dt.sqrt();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let increments = (0..steps).map(move |_| {
        let n: f64 = StandardNormal.sample(&mut rng);
        sd * T::lit(n)
    });
    Ok(squared_bessel_euler(delta, x0, dt, increments))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_sqrt_examples() {
        assert_eq!(branch_sqrt(Complex::new(-4.0, 0.0)), Complex::new(0.0, 2.0));
        let r = branch_sqrt(Complex::new(0.0, 2.0));
        assert!((r - Complex::new(1.0, 1.0)).norm() < 1e-15);
        let r = branch_sqrt(Complex::new(4.0, -1e-12));
        assert!((r - Complex::new(-2.0, 0.0)).norm() < 1e-12);
        let (r, flag) = branch_sqrt_flagged(Complex::new(9.0, 0.0));
        assert!(flag);
        assert_eq!(r, Complex::new(3.0, 0.0));
    }

    #[test]
    fn zero_noise_euler_is_linear() {
        let z = squared_bessel_euler(-1.0, 1.0, 0.01, std::iter::repeat(0.0).take(50));
        for (i, v) in z.iter().enumerate() {
            assert!((v - (1.0 - 0.01 * i as f64)).abs() < 1e-12);
        }
    }
}
