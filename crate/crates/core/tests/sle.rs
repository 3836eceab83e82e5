use bessel_flow::sle::{
    left_passage_estimate, passage_side, passage_summary, self_distance, sle_trace, sle_trace_on, trace_crosscheck,
    LeftPassageConfig, Passage,
};
use bessel_flow::{Complex, SolverConfig, Trace, ZeroNoise};
use proptest::prelude::*;

#[test]
fn zero_driving_gives_the_vertical_slit() {
    let w = ZeroNoise::new(1.0);
    for kappa in [1.0, 2.0, 8.0 / 3.0] {
        let trace = sle_trace_on(&w, 0, kappa, 17, 1e-6, SolverConfig::default()).unwrap();
        assert_eq!(trace.len(), 17);
        assert_eq!(trace.gamma[0], Complex::new(0.0, 0.0));
        for (t, g) in trace.times.iter().zip(&trace.gamma) {
            assert!((g - Complex::new(0.0, 2.0 * t.sqrt())).norm() < 1e-4, "κ {kappa}, t {t}: {g}");
        }
    }
}

#[test]
fn traces_start_at_zero_and_are_reproducible() {
    let a = sle_trace(5, 2.0, 33, 1e-4).unwrap();
    assert_eq!(a.times[0], 0.0);
    assert_eq!(*a.times.last().unwrap(), 1.0);
    assert_eq!(a.gamma[0], Complex::new(0.0, 0.0));
    assert!(a.gamma[1..].iter().all(|g| g.im > 0.0));
    assert_eq!(a, sle_trace(5, 2.0, 33, 1e-4).unwrap());
    assert!(a.max_jump() > 0.0 && a.max_jump() < 1.0);
}

#[test]
fn invalid_trace_requests() {
    assert!(sle_trace(1, 4.0, 8, 1e-4).is_err());
    assert!(sle_trace(1, 0.0, 8, 1e-4).is_err());
    assert!(sle_trace(1, 2.0, 1, 1e-4).is_err());
    assert!(sle_trace(1, 2.0, 8, 0.0).is_err());
    assert!(trace_crosscheck(1, 2.0, 0.0, 1e-4).is_err());
    assert!(trace_crosscheck(1, 2.0, 1.5, 1e-4).is_err());
}

#[test]
fn field_and_direct_solve_agree() {
    let d = trace_crosscheck(3, 2.0, 0.5, 1e-4).unwrap();
    assert!(d < 1e-3, "distance {d}");
}

fn line(n: usize) -> Trace {
    let times: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let gamma = times.iter().map(|&t| Complex::new(0.0, t)).collect();
    Trace { kappa: 2.0, seed: 0, times, gamma }
}

#[test]
fn self_distance_of_a_segment() {
    let trace = line(11);
    assert!((self_distance(&trace, 0.5).unwrap() - 0.5).abs() < 1e-12);
    assert!(self_distance(&trace, 0.0).is_err());
    assert!(self_distance(&trace, 0.95).is_err());
}

#[test]
fn passage_of_a_vertical_segment() {
    let g = line(11).gamma;
    assert_eq!(passage_side(&g, Complex::new(0.5, 0.5), 1e-6), Passage::Left);
    assert_eq!(passage_side(&g, Complex::new(-0.5, 0.5), 1e-6), Passage::Right);
    assert_eq!(passage_side(&g, Complex::new(0.5, 2.0), 1e-6), Passage::Left);
    assert_eq!(passage_side(&g, Complex::new(0.0, 0.5), 1e-6), Passage::Undecided);
    assert_eq!(passage_side(&g, Complex::new(0.0, 3.0), 1e-6), Passage::Undecided);
    assert_eq!(passage_side(&g[..1], Complex::new(1.0, 1.0), 1e-6), Passage::Undecided);
}

#[test]
fn summary_counts() {
    let e = passage_summary::<f64>(&[Passage::Left, Passage::Left, Passage::Right, Passage::Undecided]);
    assert_eq!((e.left, e.right, e.undecided), (2, 1, 1));
    assert!((e.p_hat - 2.0 / 3.0).abs() < 1e-15);
    assert!((e.stderr - (2.0f64 / 27.0).sqrt()).abs() < 1e-15);
    assert!(passage_summary::<f64>(&[Passage::Undecided]).p_hat.is_nan());
}

#[test]
fn passage_needs_an_interior_point() {
    let config = LeftPassageConfig::default();
    assert!(left_passage_estimate(&[0], 2.0, Complex::new(0.3, 0.0), &config).is_err());
}

#[test]
fn passage_far_to_the_side_is_certain() {
    let config = LeftPassageConfig { initial_points: 17, ..LeftPassageConfig::default() };
    let seeds: Vec<u64> = (0..8).collect();
    let right = left_passage_estimate(&seeds, 2.0, Complex::new(-20.0, 0.5), &config).unwrap();
    assert_eq!((right.left, right.right), (0, 8));
    let left = left_passage_estimate(&seeds, 2.0, Complex::new(20.0, 0.5), &config).unwrap();
    assert_eq!((left.left, left.right), (8, 0));
}

fn mirror(z: Complex) -> Complex {
    Complex::new(-z.re, z.im)
}

fn flip(p: Passage) -> Passage {
    match p {
        Passage::Left => Passage::Right,
        Passage::Right => Passage::Left,
        Passage::Undecided => Passage::Undecided,
    }
}

proptest! {
    #[test]
    fn mirroring_swaps_sides(
        steps in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0), 2..30),
        px in -3.0f64..3.0,
        py in 0.01f64..3.0,
    ) {
        let mut gamma = vec![Complex::new(0.0, 0.0)];
        for (dx, dy) in steps {
            let last = *gamma.last().unwrap();
            gamma.push(last + Complex::new(dx, dy));
        }
        let point = Complex::new(px, py);
        let mirrored: Vec<_> = gamma.iter().copied().map(mirror).collect();
        prop_assert_eq!(
            passage_side(&mirrored, mirror(point), 1e-9),
            flip(passage_side(&gamma, point, 1e-9))
        );
    }
}
