use std::f64::consts::PI;

use lqg_core::field::{
    add_bump, circle_log_average, mollify, sample_gff, BumpFunction, FieldGrid, GridSpec, Normalization, Provenance,
};
use lqg_core::lattice::Point;
use lqg_core::stats::{covariance, mean};
use proptest::prelude::*;

/// Periodized Gaussian of variance `eps^2 / 2` per coordinate, times the cell area.
fn heat_kernel_sum(spec: &GridSpec, from: Point, to: Point, eps: f64) -> f64 {
    let l = spec.period();
    let mut total = 0.0;
    for i in -2..=2 {
        for j in -2..=2 {
            let dx = to.x - from.x + i as f64 * l;
            let dy = to.y - from.y + j as f64 * l;
            total += (-(dx * dx + dy * dy) / (eps * eps)).exp() / (PI * eps * eps);
        }
    }
    total * spec.mesh * spec.mesh
}

#[test]
fn mollified_spike_matches_direct_gaussian_sum() {
    let spec = GridSpec::centered(128, 1.0 / 16.0).unwrap();
    let eps = 8.0 * spec.mesh;
    let center = spec.nearest_vertex(Point::new(0.25, -0.5)).unwrap();
    let mut values = vec![0.0; spec.vertex_count()];
    values[center] = 1.0;
    let spike = FieldGrid::from_values(spec, values, Provenance::RawGff).unwrap();
    let smooth = mollify(&spike, eps).unwrap();
    let c = spec.point(center);
    let mut checked = 0;
    for v in 0..spec.vertex_count() {
        let p = spec.point(v);
        if p.dist(c) > 4.0 * eps {
            continue;
        }
        let expected = heat_kernel_sum(&spec, c, p, eps);
        let rel = (smooth.values[v] - expected).abs() / expected;
        assert!(rel < 1e-6, "vertex {v}: got {}, expected {expected}", smooth.values[v]);
        checked += 1;
    }
    assert!(checked > 500);
}

#[test]
fn mollification_semigroup() {
    let spec = GridSpec::centered(64, 1.0 / 8.0).unwrap();
    let h = sample_gff(spec, 17).unwrap();
    let (a, b) = (0.2, 0.35);
    let twice = mollify(&mollify(&h, a).unwrap(), b).unwrap();
    let once = mollify(&h, a.hypot(b)).unwrap();
    for (x, y) in twice.values.iter().zip(&once.values) {
        assert!((x - y).abs() < 1e-9);
    }
    assert_eq!(twice.provenance.mollification(), Some(a.hypot(b)));
}

#[test]
fn sampled_means_vanish() {
    let spec = GridSpec::centered(64, 1.0 / 8.0).unwrap();
    let probes: Vec<usize> = [(0.0, 0.0), (1.5, 0.5), (-2.0, -2.0), (0.5, 3.0)]
        .iter()
        .map(|&(x, y)| spec.nearest_vertex(Point::new(x, y)).unwrap())
        .collect();
    let samples: Vec<FieldGrid> = (0..500).map(|s| mollify(&sample_gff(spec, s).unwrap(), 0.25).unwrap()).collect();
    for &v in &probes {
        let xs: Vec<f64> = samples.iter().map(|f| f.values[v]).collect();
        let m = mean(&xs);
        let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 499.0).sqrt();
        assert!(m.abs() < 4.0 * sd / (500f64).sqrt(), "vertex {v}: mean {m}, sd {sd}");
    }
}

#[test]
fn circle_log_average_outside_disk() {
    for &(x, y) in &[(2.0, 0.0), (0.0, -2.0), (2f64.sqrt(), 2f64.sqrt())] {
        let c = circle_log_average(Point::new(x, y));
        assert!((c + 2f64.ln()).abs() < 1e-8, "c = {c}");
    }
    // inside the unit disk the average vanishes
    assert!(circle_log_average(Point::new(0.3, 0.1)).abs() < 1e-8);
}

#[test]
fn covariance_tracks_log_kernel_coarse() {
    // small version of the full covariance criterion: one geometry, few seeds
    let spec = GridSpec::centered(128, 1.0 / 16.0).unwrap();
    let z = spec.vertex_at(Point::new(0.0, 0.0)).unwrap();
    let w = spec.vertex_at(Point::new(0.5, 0.0)).unwrap();
    let mut hz = Vec::new();
    let mut hw = Vec::new();
    for s in 0..400 {
        let f = mollify(&sample_gff(spec, s).unwrap(), 2.0 * spec.mesh).unwrap();
        hz.push(f.values[z]);
        hw.push(f.values[w]);
    }
    let target = (1.0f64 * 1.0 / 0.5).ln();
    assert!((covariance(&hz, &hw) - target).abs() < 0.3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampler_normalizes_and_is_deterministic(seed in any::<u64>()) {
        let spec = GridSpec::centered(32, 0.25).unwrap();
        let a = sample_gff(spec, seed).unwrap();
        let b = sample_gff(spec, seed).unwrap();
        prop_assert_eq!(&a.values, &b.values);
        prop_assert_eq!(a.normalization, Normalization::ZeroCircleAverage);
        prop_assert!(a.circle_average().unwrap().abs() < 1e-12);
    }

    #[test]
    fn mollify_preserves_constants(c in -5.0f64..5.0, eps in 0.25f64..2.0) {
        let spec = GridSpec::centered(32, 0.25).unwrap();
        let f = FieldGrid::constant(spec, c, Provenance::RawGff).unwrap();
        let g = mollify(&f, eps).unwrap();
        for v in &g.values {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_support_is_exact(cx in -2.0f64..2.0, cy in -2.0f64..2.0, r in 0.2f64..1.0, height in -3.0f64..3.0) {
        let spec = GridSpec::centered(32, 0.25).unwrap();
        let bump = BumpFunction::new(Point::new(cx, cy), r, 2.0 * r, height).unwrap();
        let zero = FieldGrid::constant(spec, 0.0, Provenance::Mollified { epsilon: 0.5 }).unwrap();
        let bumped = add_bump(&zero, &bump);
        prop_assert_eq!(bumped.provenance.mollification(), Some(0.5));
        for v in 0..spec.vertex_count() {
            let p = spec.point(v);
            if !bump.in_outer_disk(p) {
                prop_assert_eq!(bumped.values[v], 0.0);
            }
            if bump.in_inner_disk(p) {
                prop_assert_eq!(bumped.values[v], height);
            }
        }
    }

    #[test]
    fn fgrid_round_trip(seed in 0u64..1000) {
        let spec = GridSpec::centered(16, 0.5).unwrap();
        let f = mollify(&sample_gff(spec, seed).unwrap(), 0.5).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let g = FieldGrid::read_from(&buf[..]).unwrap();
        prop_assert_eq!(f, g);
    }
}
