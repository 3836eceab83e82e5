//! Statistics used by the verification suite.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// quadrature

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const GAUSS_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> (T, T) {
    let half = (hi - lo) * T::lit(0.5);
    let center = (hi + lo) * T::lit(0.5);
    let f0 = f(center);
    let mut kronrod = f0 * T::lit(KRONROD_WEIGHTS[7]);
    let mut gauss = f0 * T::lit(GAUSS_WEIGHTS[3]);
    for i in 0..7 {
        let dx = half * T::lit(KRONROD_NODES[i]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * T::lit(KRONROD_WEIGHTS[i]);
        if i % 2 == 1 {
            gauss = gauss + pair * T::lit(GAUSS_WEIGHTS[i / 2]);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[lo, hi]`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T, tol: T) -> T {
    fn recurse<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T, tol: T, whole: T, err: T, depth: u32) -> T {
        if err <= tol || depth == 0 {
            return whole;
        }
        let mid = (lo + hi) * T::lit(0.5);
        let (left, el) = gauss_kronrod(f, lo, mid);
        let (right, er) = gauss_kronrod(f, mid, hi);
        let half_tol = tol * T::lit(0.5);
        recurse(f, lo, mid, half_tol, left, el, depth - 1) + recurse(f, mid, hi, half_tol, right, er, depth - 1)
    }
    let (whole, err) = gauss_kronrod(&f, lo, hi);
    recurse(&f, lo, hi, tol, whole, err, 48)
}

/// `∫_0^∞ f` as `∫_0^1 f(t) dt + ∫_0^1 f(1/u)/u² du`.
fn integrate_half_line<T: Real, F: Fn(T) -> T>(f: F, tol: T) -> T {
    let folded = |u: T| if u > T::zero() { f(T::one() / u) / (u * u) } else { T::zero() };
    integrate(&f, T::zero(), T::one(), tol) + integrate(folded, T::zero(), T::one(), tol)
}

// ---------------------------------------------------------------------------
// hitting-time law

/// Density `C_δ t^{δ/2−2} e^{−1/(2t)}` of the hitting time of 0 from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensitySpec<T> {
    pub delta: T,
    pub normalizer: T,
}

const QUAD_TOL: f64 = 1e-13;

fn unnormalized<T: Real>(delta: T, t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    ((delta * T::lit(0.5) - T::lit(2.0)) * t.ln() - T::lit(0.5) / t).exp()
}

impl<T: Real> DensitySpec<T> {
    /// Normalizes the density by quadrature.
    pub fn new(delta: T) -> Result<Self> {
        if !(delta < T::zero()) {
            return Err(Error::invalid(format!("dimension must be negative, got {delta}")));
        }
        let mass = integrate_half_line(|t| unnormalized(delta, t), T::lit(QUAD_TOL));
        Ok(DensitySpec { delta, normalizer: T::one() / mass })
    }

    /// Cached per `δ`.
    pub fn cached(delta: T) -> Result<Self> {
        static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
        let key = delta.as_f64().to_bits();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(&c) = cache.lock().unwrap().get(&key) {
            return Ok(DensitySpec { delta, normalizer: T::lit(c) });
        }
        let spec = Self::new(delta)?;
        cache.lock().unwrap().insert(key, spec.normalizer.as_f64());
        Ok(spec)
    }

    pub fn pdf(&self, t: T) -> T {
        self.normalizer * unnormalized(self.delta, t)
    }

    pub fn cdf(&self, t: T) -> T {
        if !(t > T::zero()) {
            return T::zero();
        }
        let tol = T::lit(QUAD_TOL);
        let p = |r: T| self.pdf(r);
        let mass = if t <= T::one() {
            integrate(p, T::zero(), t, tol)
        } else {
            let folded = |u: T| if u > T::zero() { self.pdf(T::one() / u) / (u * u) } else { T::zero() };
            integrate(p, T::zero(), T::one(), tol) + integrate(folded, T::one() / t, T::one(), tol)
        };
        mass.min(T::one()).max(T::zero())
    }

    /// `∫ t^p · pdf(t) dt`, finite for `p < 1 − δ/2` and infinite otherwise.
    pub fn moment(&self, p: T) -> T {
        let tol = T::lit(QUAD_TOL);
        // the integrand decays like t^{p−k−1}
        let excess = T::one() - self.delta * T::lit(0.5) - p;
        if !(excess > T::zero()) {
            return T::infinity();
        }
        let g = |t: T| t.powf(p) * self.pdf(t);
        // t = u^{−1/excess} turns the tail into a bounded integrand on (0, 1]
        let m = T::one() / excess;
        let far = |u: T| if u > T::zero() { g(u.powf(-m)) * m * u.powf(-m - T::one()) } else { T::zero() };
        integrate(g, T::zero(), T::one(), tol) + integrate(far, T::zero(), T::one(), tol)
    }

    /// Solves `cdf(t) = q` by bisection.
    pub fn quantile(&self, q: T) -> T {
        let (mut lo, mut hi) = (T::zero(), T::one());
        while self.cdf(hi) < q {
            hi = hi * T::lit(2.0);
        }
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    }

    /// `1/(4 − δ)`, where the log-density is stationary.
    pub fn mode(&self) -> T {
        T::one() / (T::lit(4.0) - self.delta)
    }
}

pub fn hitting_pdf<T: Real>(delta: T, t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::invalid(format!("density needs t > 0, got {t}")));
    }
    Ok(DensitySpec::cached(delta)?.pdf(t))
}

pub fn hitting_cdf<T: Real>(delta: T, t: T) -> Result<T> {
    Ok(DensitySpec::cached(delta)?.cdf(t))
}

// ---------------------------------------------------------------------------
// Kolmogorov–Smirnov

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // theta-function form converges fast for small λ
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted_finite<T: Real>(samples: &[T]) -> Result<Vec<T>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("sample contains NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// One-sample KS statistic `D` and its asymptotic p-value.
pub fn ks_test<T: Real>(samples: &[T], cdf: impl Fn(T) -> T) -> Result<(T, T)> {
    let v = sorted_finite(samples)?;
    let n = T::from_usize(v.len()).unwrap();
    let mut d = T::zero();
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        let hi = T::from_usize(i + 1).unwrap() / n;
        let lo = T::from_usize(i).unwrap() / n;
        d = d.max((hi - f).abs()).max((lo - f).abs());
    }
    let p = kolmogorov_survival(n.sqrt().as_f64() * d.as_f64());
    Ok((d, T::lit(p)))
}

/// Two-sample KS statistic and its asymptotic p-value.
pub fn ks_two_sample<T: Real>(a: &[T], b: &[T]) -> Result<(T, T)> {
    let (a, b) = (sorted_finite(a)?, sorted_finite(b)?);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok((T::lit(d), T::lit(kolmogorov_survival(ne.sqrt() * d))))
}

// ---------------------------------------------------------------------------
// simple estimators

/// Fraction of samples `≥ k` and its binomial standard error.
pub fn empirical_tail<T: Real>(samples: &[T], k: T) -> Result<(T, T)> {
    if !(k >= T::one()) {
        return Err(Error::invalid(format!("tail level must be >= 1, got {k}")));
    }
    if samples.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let n = T::from_usize(samples.len()).unwrap();
    let p = T::from_usize(samples.iter().filter(|&&x| x >= k).count()).unwrap() / n;
    Ok((p, (p * (T::one() - p) / n).sqrt()))
}

/// z-score of the sample mean.
pub fn martingale_drift_test<T: Real>(samples: &[T]) -> Result<T> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let n = T::from_usize(samples.len()).unwrap();
    let mean = samples.iter().copied().sum::<T>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    let se = (var / n).sqrt();
    Ok(if se > T::zero() {
        mean / se
    } else if mean == T::zero() {
        T::zero()
    } else {
        mean.signum() * T::infinity()
    })
}

/// Running sum of squared increments, starting at 0.
pub fn realized_qv<T: Real>(series: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(series.len());
    if series.is_empty() {
        return out;
    }
    out.push(acc);
    for w in series.windows(2) {
        acc = acc + (w[1] - w[0]) * (w[1] - w[0]);
        out.push(acc);
    }
    out
}

/// Cumulative trapezoid integral of `values` over `times`.
pub fn cumulative_trapezoid<T: Real>(times: &[T], values: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            acc = acc + (values[i] + values[i - 1]) * (times[i] - times[i - 1]) * T::lit(0.5);
        }
        out.push(acc);
    }
    out
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<(T, T)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs two or more paired points"));
    }
    let n = T::from_usize(x.len()).unwrap();
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx = x.iter().map(|&v| (v - mx) * (v - mx)).sum::<T>();
    let sxy = x.iter().zip(y).map(|(&u, &v)| (u - mx) * (v - my)).sum::<T>();
    if sxx == T::zero() {
        return Err(Error::invalid("degenerate abscissae"));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

// ---------------------------------------------------------------------------
// left passage of chordal SLE

/// Probability that chordal SLE_κ in ℍ from 0 to ∞ passes to the left of `x + iy`:
/// `1/2 + Γ(4/κ)/(√π Γ((8−κ)/(2κ))) · (x/y) · ₂F₁(1/2, 4/κ; 3/2; −(x/y)²)`.
pub fn schramm_left_passage(kappa: f64, x: f64, y: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 8.0) || !(y > 0.0) {
        return Err(Error::invalid(format!("need 0 < kappa < 8 and y > 0, got kappa = {kappa}, y = {y}")));
    }
    use statrs::function::gamma::gamma;
    let u = x / y;
    let b = 4.0 / kappa;
    // ₂F₁(1/2, b; 3/2; −u²) = ∫_0^1 (1 + u²s²)^{−b} ds
    let hyp = integrate(|s: f64| (1.0 + u * u * s * s).powf(-b), 0.0, 1.0, 1e-14);
    let c = gamma(b) / (std::f64::consts::PI.sqrt() * gamma((8.0 - kappa) / (2.0 * kappa)));
    Ok(0.5 + c * u * hyp)
}
