use bessel_flow::field::{derivative_bound_fit, evaluate_field, field_grid, flow_property_residual, hitting_surface};
use bessel_flow::{BrownianPath, Complex, Flow, FlowParams, ZeroNoise};

fn unit() -> FlowParams {
    FlowParams::new(-1.0).unwrap()
}

#[test]
fn noiseless_field_before_and_after_hitting() {
    let noise = ZeroNoise::new(2.0);
    let flow = Flow::new(&noise, unit());
    // x = 1 hits at 1/2, then leaves the boundary as i√(2(t − 1/2))
    for t in [0.1, 0.25, 0.4] {
        let v = evaluate_field(&flow, 0.0, t, 1.0, 1e-6).unwrap();
        assert!((v - Complex::new((1.0 - 2.0 * t).sqrt(), 0.0)).norm() < 1e-7, "t {t}: {v}");
    }
    for t in [0.75, 1.5] {
        let v = evaluate_field(&flow, 0.0, t, 1.0, 1e-6).unwrap();
        assert!((v - Complex::new(0.0, (2.0 * t - 1.0).sqrt())).norm() < 1e-4, "t {t}: {v}");
    }
    let v = evaluate_field(&flow, 0.0, 0.4, -1.0, 1e-6).unwrap();
    assert!((v.re + 0.2f64.sqrt()).abs() < 1e-7);
}

#[test]
fn zero_start_is_the_boundary_limit() {
    let path = BrownianPath::sample(3, 1.0, 10).unwrap();
    let flow = Flow::new(&path, unit());
    let direct = flow.boundary_start(0.25, 0.8, std::f64::consts::FRAC_PI_2, 1e-5).unwrap().solution.last();
    assert_eq!(evaluate_field(&flow, 0.25, 0.8, 0.0, 1e-5).unwrap(), direct);
}

#[test]
fn flow_residual_vanishes_at_the_ends() {
    let path = BrownianPath::sample(42, 1.0, 10).unwrap();
    let flow = Flow::new(&path, unit());
    for x in [0.2, -0.5, 0.0] {
        assert_eq!(flow_property_residual(&flow, 0.0, 0.0, 1.0, x, 1e-5).unwrap(), 0.0);
        assert_eq!(flow_property_residual(&flow, 0.0, 1.0, 1.0, x, 1e-5).unwrap(), 0.0);
    }
    assert!(flow_property_residual(&flow, 0.5, 0.3, 1.0, 0.2, 1e-5).is_err());
}

#[test]
fn flow_property_on_a_fixed_path() {
    let path = BrownianPath::sample(42, 1.0, 10).unwrap();
    let flow = Flow::new(&path, unit());
    let r = flow_property_residual(&flow, 0.0, 0.3, 1.0, 0.2, 1e-5).unwrap();
    assert!(r < 1e-4, "residual {r}");
}

#[test]
fn grid_is_in_the_half_plane_after_hitting() {
    let path = BrownianPath::sample(7, 1.0, 10).unwrap();
    let flow = Flow::new(&path, unit());
    let s = [0.0, 0.25, 0.5];
    let t: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let x = [-0.4, -0.1, 0.0, 0.1, 0.4];
    let grid = field_grid(&flow, &s, &t, &x, 1e-5).unwrap();
    assert_eq!(grid.half_plane_violations(), 0);
    assert!(grid.get(1, 0, 0).is_none());
    assert_eq!(grid.get(1, 2, 3), Some(Complex::new(0.1, 0.0)));
    for (is, &si) in s.iter().enumerate() {
        assert_eq!(grid.hitting_time(is, 2), si);
        for (ix, &xi) in x.iter().enumerate() {
            let hit = grid.hitting_time(is, ix);
            assert!(hit >= si);
            for (it, &ti) in t.iter().enumerate() {
                match grid.get(is, it, ix) {
                    None => assert!(ti < si),
                    Some(v) if ti > si && ti < hit => assert!(v.im == 0.0 && v.re * xi > 0.0),
                    Some(_) => {}
                }
            }
        }
    }
    // entries agree with pointwise evaluation
    for (si, ti, xi, v) in grid.entries().step_by(7) {
        let w = evaluate_field(&flow, si, ti, xi, 1e-5).unwrap();
        assert!((v - w).norm() < 1e-6, "({si}, {ti}, {xi}): {v} vs {w}");
    }
    assert!(field_grid(&flow, &[0.5, 0.25], &t, &x, 1e-5).is_err());
    assert!(field_grid(&flow, &s, &t, &[], 1e-5).is_err());
}

#[test]
fn hitting_surface_audits() {
    let path = BrownianPath::sample(11, 4.0, 10).unwrap();
    let flow = Flow::new(&path, unit());
    let s = [0.0, 0.1, 0.2];
    let x = [-0.3, -0.1, 0.0, 0.1, 0.3];
    let surface = hitting_surface(&flow, &s, &x).unwrap();
    assert_eq!(surface.max_excess(2), 0.0);
    assert!(surface.max_excess(4) > 0.0);
    assert_eq!(surface.monotone_violations, 0);
    assert!(surface.max_neighbor_gap.is_finite() && surface.max_neighbor_gap > 0.0);
    assert!(hitting_surface(&flow, &[], &x).is_err());
    assert!(hitting_surface(&flow, &s, &[0.1, 0.1]).is_err());
}

#[test]
fn derivative_fit_without_noise_is_flat() {
    // |H'(s, t, iy)| = y/√(y² + 2a(t − s)) ≤ 1 with equality at t = s
    let noise = ZeroNoise::new(1.0);
    let flow = Flow::new(&noise, unit());
    let fit = derivative_bound_fit(&flow, 1.0, 5).unwrap();
    assert_eq!(fit.sup.len(), 5);
    assert!(fit.sup.iter().all(|&(_, v)| (v - 1.0).abs() < 1e-12), "{:?}", fit.sup);
    assert!(fit.beta.abs() < 1e-9 && (fit.c - 1.0).abs() < 1e-9);
    assert!(fit.beta_below_one());
    assert_eq!(fit.monotone_violations, 0);
    assert!(derivative_bound_fit(&flow, 1.0, 3).is_err());
    assert!(derivative_bound_fit(&flow, 0.0, 5).is_err());
}
