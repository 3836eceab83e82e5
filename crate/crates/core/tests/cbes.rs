use bessel_flow::cbes::{
    branch_sqrt, branch_sqrt_flagged, cbes_on, cbes_process, exp_martingale_bound_check, ito_identity_residual,
    real_squared_bessel, squared_bessel_euler,
};
use bessel_flow::{exponents, BrownianPath, Complex, ExponentTriple, Flow, FlowParams, ZeroNoise};
use proptest::prelude::*;

#[test]
fn branch_examples() {
    assert_eq!(branch_sqrt(Complex::new(-4.0, 0.0)), Complex::new(0.0, 2.0));
    assert!((branch_sqrt(Complex::new(0.0, 2.0)) - Complex::new(1.0, 1.0)).norm() < 1e-15);
    // just below the cut the root sits near −2
    assert!((branch_sqrt(Complex::new(4.0, -1e-12)) - Complex::new(-2.0, 0.0)).norm() < 1e-12);
    assert!((branch_sqrt(Complex::new(4.0, 1e-12)) - Complex::new(2.0, 0.0)).norm() < 1e-12);
    assert_eq!(branch_sqrt_flagged(Complex::new(9.0, 0.0)), (Complex::new(3.0, 0.0), true));
    assert_eq!(branch_sqrt_flagged(Complex::new(0.0, 0.0)), (Complex::new(0.0, 0.0), true));
    assert!(!branch_sqrt_flagged(Complex::new(-9.0, 0.0)).1);
}

#[test]
fn branch_has_no_cancellation() {
    let z = Complex::new(-1e20, 1.0);
    let r = branch_sqrt(z);
    assert!((r.re - 0.5e-10).abs() < 1e-24 && (r.im - 1e10).abs() < 1e-5, "{r}");
}

proptest! {
    #[test]
    fn branch_squares_back(re in -1e6f64..1e6, im in -1e6f64..1e6) {
        let z = Complex::new(re, im);
        let r = branch_sqrt(z);
        prop_assert!(r.im >= 0.0);
        prop_assert!((r * r - z).norm() <= 1e-12 * z.norm().max(1e-300));
    }
}

#[test]
fn noiseless_process_is_on_the_imaginary_axis() {
    let noise = ZeroNoise::new(1.0);
    let flow = Flow::new(&noise, FlowParams::new(-1.0).unwrap());
    let path = cbes_on(&flow, 1.0, 1e-6).unwrap();
    assert_eq!(path.times[0], 0.0);
    assert_eq!(path.y[0], Complex::new(0.0, 0.0));
    for (t, y) in path.times.iter().zip(&path.y) {
        assert!((y - Complex::new(-2.0 * t, 0.0)).norm() < 1e-5, "t {t}: {y}");
    }
    let last = path.h.last().unwrap();
    assert!((last - Complex::new(0.0, 2f64.sqrt())).norm() < 1e-5);
}

#[test]
fn process_stays_in_the_upper_half_plane() {
    let params = FlowParams::new(-1.0).unwrap();
    for seed in 0..5 {
        let path = cbes_process(seed, params, 1.0, 1e-4).unwrap();
        assert_eq!(path.times.len(), path.y.len());
        assert!(path.h.iter().skip(1).all(|h| h.im > 0.0));
        for (y, h) in path.y.iter().zip(&path.h) {
            assert!((y - h * h).norm() <= 1e-12 * y.norm().max(1e-300));
        }
        assert_eq!(path, cbes_process(seed, params, 1.0, 1e-4).unwrap());
    }
}

#[test]
fn euler_without_noise_is_linear_drift() {
    let z = squared_bessel_euler(-1.0, 1.0, 0.01, std::iter::repeat(0.0).take(100));
    assert_eq!(z.len(), 101);
    for (i, v) in z.iter().enumerate() {
        assert!((v - (1.0 - 0.01 * i as f64)).abs() < 1e-12);
    }
    assert!(real_squared_bessel(1, -1.0, 1.0, 1.0, 0.0).is_err());
    let z = real_squared_bessel(1, -1.0, 1.0, 1.0, 0.01).unwrap();
    assert_eq!(z.len(), 101);
    assert_eq!(z, real_squared_bessel(1, -1.0, 1.0, 1.0, 0.01).unwrap());
}

#[test]
fn euler_mean_follows_the_drift() {
    // E[Z_t] = x0 + δt while Z stays away from 0
    let n = 4000;
    let mean =
        (0..n).map(|seed| *real_squared_bessel(seed, -0.5, 4.0, 0.5, 0.005).unwrap().last().unwrap()).sum::<f64>()
            / n as f64;
    // Var Z_t ≈ 4·x0·t = 8
    assert!((mean - 3.75).abs() < 3.0 * (8.0 / n as f64).sqrt(), "mean {mean}");
}

#[test]
fn ito_identity_without_noise() {
    let noise = ZeroNoise::new(1.0);
    let params = FlowParams::new(-1.0).unwrap();
    let flow = Flow::new(&noise, params);
    let y = 0.5;
    let sol = flow.solve(0.0, 1.0, Complex::new(0.0, y)).unwrap();

    let zero = ExponentTriple::from_theta(&params, 0.0);
    assert!(ito_identity_residual(&sol, &zero).unwrap().iter().all(|r| *r == 0.0));

    // H = i√(y² + 2at), so λ log|H'| − ζ log(y/V) = −(θ/4a) log(1 + 2at/y²). The
    // second-order term of M assumes (ΔB)² ≈ Δt; on a zero driver it is
    // −(θ/2)∫dt/V², the same amount, and the residual is only quadrature error.
    let theta = 3.0;
    let triple = exponents(&params, theta).unwrap();
    let residual = ito_identity_residual(&sol, &triple).unwrap();
    let last = sol.len() - 1;
    let gap = -theta / (4.0 * params.a()) * (2.0 * params.a() / (y * y)).ln_1p();
    assert!((triple.lambda * sol.log_deriv[last] - triple.zeta * (y / sol.h[last].im).ln() - gap).abs() < 1e-9);
    for (t, r) in sol.times.iter().zip(&residual) {
        assert!(r.abs() < 1e-3 * (1.0 + 2.0 * t / (y * y)).ln().max(1e-3), "t {t}: {r}");
    }
}

#[test]
fn ito_identity_needs_an_imaginary_start() {
    let noise = ZeroNoise::new(1.0);
    let params = FlowParams::new(-1.0).unwrap();
    let sol = Flow::new(&noise, params).solve(0.0, 0.5, Complex::new(0.3, 0.5)).unwrap();
    let triple = exponents(&params, 3.0).unwrap();
    assert!(ito_identity_residual(&sol, &triple).is_err());
    assert!(exp_martingale_bound_check(&sol, &triple, 1e-6).is_err());
}

#[test]
fn exponential_martingale_dominates() {
    let params = FlowParams::new(-1.0).unwrap();
    let triple = exponents(&params, 3.0).unwrap();
    for seed in 0..8 {
        let path = BrownianPath::sample(seed, 1.0, 10).unwrap();
        let sol = Flow::new(&path, params).solve(0.0, 1.0, Complex::new(0.0, 0.1)).unwrap();
        let report = exp_martingale_bound_check(&sol, &triple, 1e-3).unwrap();
        assert!(report.passed(), "seed {seed}: {report:?}");
        assert_eq!(report.samples, sol.len());
    }
}
