use bessel_flow::noise::{read_dump, BrownianPath as Path};
use bessel_flow::stats::ks_test;
use bessel_flow::{reversed, BrownianPath, DrivingNoise, Negated, ZeroNoise};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn level_zero_path_has_one_gaussian_endpoint() {
    let p = BrownianPath::sample(42, 1.0, 0).unwrap();
    assert_eq!(p.values().len(), 2);
    assert_eq!(p.values()[0], 0.0);
    assert!(p.values()[1] != 0.0 && p.values()[1].is_finite());
}

#[test]
fn sampling_is_bitwise_reproducible() {
    let a = BrownianPath::sample(7, 2.5, 10).unwrap();
    let b = BrownianPath::sample(7, 2.5, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values(), BrownianPath::sample(8, 2.5, 10).unwrap().values());
}

#[test]
fn invalid_horizons_are_rejected() {
    assert!(BrownianPath::sample(1, 0.0, 3).is_err());
    assert!(BrownianPath::sample(1, -1.0, 3).is_err());
    assert!(BrownianPath::sample(1, f64::INFINITY, 3).is_err());
    assert!(Path::<f32>::with_max_level(1, 1.0, 3, 30).is_err());
}

#[test]
fn value_at_zero_is_zero_at_every_level() {
    let p = BrownianPath::sample(3, 1.0, 4).unwrap();
    for level in [0, 4, 9, 30] {
        assert_eq!(p.value_at(0.0, level).unwrap(), 0.0);
    }
    assert!(p.value_at(1.5, 3).is_err());
    assert!(p.value_at(-0.1, 3).is_err());
}

#[test]
fn refinement_keeps_coarse_values() {
    let p = BrownianPath::sample(11, 1.0, 5).unwrap();
    let fine = p.refined(8).unwrap();
    for i in 0..=32u64 {
        let t = i as f64 / 32.0;
        assert_eq!(p.value_at(t, 5).unwrap(), fine.value_at(t, 5).unwrap());
        assert_eq!(p.values()[i as usize], fine.values()[(i * 8) as usize]);
    }
}

#[test]
fn node_values_do_not_depend_on_query_order() {
    let a = BrownianPath::sample(5, 1.0, 2).unwrap();
    let b = BrownianPath::sample(5, 1.0, 2).unwrap();
    let forward: Vec<f64> = (0..=64u64).map(|i| a.node(20, i * 1000)).collect();
    let backward: Vec<f64> = (0..=64u64).rev().map(|i| b.node(20, i * 1000)).collect();
    let backward: Vec<f64> = backward.into_iter().rev().collect();
    assert_eq!(forward, backward);
}

#[test]
fn sup_increment_over_a_point_is_zero() {
    let p = BrownianPath::sample(2, 1.0, 6).unwrap();
    assert_eq!(p.sup_abs_increment(0.5, 0.5, 6).unwrap(), 0.0);
    assert!(p.sup_abs_increment(0.6, 0.5, 6).is_err());
    let sup = p.sup_abs_increment(0.0, 1.0, 6).unwrap();
    let direct = p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert_eq!(sup, direct);
}

#[test]
fn endpoint_variance_is_one() {
    let n = 10_000;
    let ends: Vec<f64> = (0..n).map(|s| BrownianPath::sample(s, 1.0, 0).unwrap().values()[1]).collect();
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn scaled_increments_are_standard_normal() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (s, t) = (0.25, 0.625);
    let z: Vec<f64> = (0..10_000u64)
        .map(|seed| {
            let p = BrownianPath::sample(seed, 1.0, 3).unwrap();
            (p.value_at(t, 3).unwrap() - p.value_at(s, 3).unwrap()) / (t - s).sqrt()
        })
        .collect();
    let (d, _) = ks_test(&z, |x| normal.cdf(x)).unwrap();
    assert!(d < 0.02, "KS distance {d}");
}

#[test]
fn deep_bridge_increments_are_standard_normal() {
    // increments across a level far below the stored one
    let normal = Normal::new(0.0, 1.0).unwrap();
    let level = 30;
    let dt = 2f64.powi(-level);
    let z: Vec<f64> = (0..10_000u64)
        .map(|seed| {
            let p = BrownianPath::sample(seed, 1.0, 0).unwrap();
            let i = 12_345 + seed;
            (p.node(level as u32, i + 1) - p.node(level as u32, i)) / dt.sqrt()
        })
        .collect();
    let (d, _) = ks_test(&z, |x| normal.cdf(x)).unwrap();
    assert!(d < 0.02, "KS distance {d}");
}

#[test]
fn reversal_endpoints() {
    let p = BrownianPath::sample(9, 1.0, 8).unwrap();
    let r = reversed(&p, 0.75).unwrap();
    assert_eq!(r.horizon(), 0.75);
    assert_eq!(r.interpolate(0.0), 0.0);
    let b_t = p.value_at(0.75, 8).unwrap();
    assert!((r.interpolate(0.75) - b_t).abs() < 1e-12);
    assert!(reversed(&p, 1.5).is_err());
}

#[test]
fn reversal_is_an_involution() {
    let p = BrownianPath::sample(4, 1.0, 6).unwrap();
    let r = reversed(&p, 1.0).unwrap();
    let rr = reversed(&r, 1.0).unwrap();
    for i in 0..=64u64 {
        let t = i as f64 / 64.0;
        assert!((rr.interpolate(t) - p.interpolate(t)).abs() < 1e-12);
    }
}

#[test]
fn reversal_preserves_increment_variance() {
    let n = 10_000;
    let (fwd, rev): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|seed| {
            let p = BrownianPath::sample(seed as u64, 1.0, 3).unwrap();
            let r = reversed(&p, 1.0).unwrap();
            (p.interpolate(0.25), r.interpolate(0.25))
        })
        .unzip();
    let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    // sample variance of N(0, 1/4) has standard error (1/4)·√(2/n)
    let se = 0.25 * (2.0 / n as f64).sqrt();
    assert!((var(&fwd) - 0.25).abs() < 3.0 * se);
    assert!((var(&rev) - 0.25).abs() < 3.0 * se);
    assert!((var(&fwd) - var(&rev)).abs() < 3.0 * se * 2f64.sqrt());
}

#[test]
fn negation_and_zero_noise() {
    let p = BrownianPath::sample(6, 1.0, 5).unwrap();
    let m = Negated(&p);
    for i in 0..=32u64 {
        assert_eq!(m.node(5, i), -p.node(5, i));
        assert_eq!(m.node(12, 7 * i), -p.node(12, 7 * i));
    }
    let z = ZeroNoise::new(3.0);
    assert_eq!(DrivingNoise::<f64>::horizon(&z), 3.0);
    assert_eq!(z.node(17, 99), 0.0);
    assert_eq!(z.interpolate(1.3), 0.0);
}

#[test]
fn dumps_round_trip() {
    let p = BrownianPath::sample(13, 2.0, 4).unwrap();
    let mut buf = Vec::new();
    p.write_dump(&mut buf, 6).unwrap();
    let dump = read_dump(buf.as_slice()).unwrap();
    assert_eq!((dump.seed, dump.horizon, dump.level), (13, 2.0, 6));
    assert_eq!(dump.values.len(), 65);
    assert_eq!(dump.values[0], 0.0);
    assert_eq!(dump.values[1], p.node(0, 1));
    assert_eq!(dump.values[2], p.node(1, 1));
}

#[test]
fn single_precision_paths() {
    let p = Path::<f32>::sample(1, 1.0, 6).unwrap();
    let q = Path::<f64>::sample(1, 1.0, 6).unwrap();
    for i in 0..=64usize {
        assert!((p.values()[i] as f64 - q.values()[i]).abs() < 1e-5);
    }
}
