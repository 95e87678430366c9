use lqg_core::field::{BumpFunction, GridSpec};
use lqg_core::geodesics::{
    classify_network, corridor, detect_sn, extract_geodesic, leftmost_geodesic, multiplicity, perturbation_experiment,
    perturbation_for_paths, CorridorScales, LatticePath, PathRole,
};
use lqg_core::lattice::{vertex, Point};
use lqg_core::metric::{sssp, MetricParams, WeightGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HEAVY: f64 = 1000.0;

/// Heavy background with unit-weight cells at the listed (col, row) positions.
fn channels(cols: usize, rows: usize, cells: &[(usize, usize)]) -> WeightGrid {
    assert_eq!(cols, rows);
    let mut w = vec![HEAVY; cols * rows];
    for &(c, r) in cells {
        w[vertex(cols, c, r)] = 1.0;
    }
    WeightGrid::from_weights(GridSpec::new(cols, 1.0, (0.0, 0.0)).unwrap(), w).unwrap()
}

/// Diagonal up-right, straight, diagonal down-right lens half between
/// `(c0, mid)` and `(c1, mid)`, mirrored by `sign`.
fn lens_half(c0: usize, c1: usize, mid: usize, rise: usize, sign: i64) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    let at = |c: usize, dy: usize| (c, (mid as i64 + sign * dy as i64) as usize);
    for k in 0..=rise {
        cells.push(at(c0 + k, k));
        cells.push(at(c1 - k, k));
    }
    for c in c0 + rise..=c1 - rise {
        cells.push(at(c, rise));
    }
    cells
}

fn ring_instance() -> (WeightGrid, usize, usize) {
    let mut cells = lens_half(2, 30, 16, 4, 1);
    cells.extend(lens_half(2, 30, 16, 4, -1));
    let w = channels(33, 33, &cells);
    (w, vertex(33, 2, 16), vertex(33, 30, 16))
}

#[test]
fn two_disjoint_channels_count_twice() {
    let (w, z, t) = ring_instance();
    let m = multiplicity(&w, z, t, 0.1, 2.0).unwrap();
    assert_eq!(m.k, 2);
    let ev = detect_sn(&m.representatives, 1e-9).unwrap().expect("disjoint paths carry private marks");
    assert_eq!(ev.n(), 1);
    for (i, &u) in ev.marks.iter().enumerate() {
        assert!(ev.paths[i + 1].contains(u));
        assert!(!ev.paths[0].contains(u));
    }
}

#[test]
fn one_channel_counts_once() {
    let cells = lens_half(2, 30, 16, 4, 1);
    let w = channels(33, 33, &cells);
    let m = multiplicity(&w, vertex(33, 2, 16), vertex(33, 30, 16), 0.1, 2.0).unwrap();
    assert_eq!(m.k, 1);
}

#[test]
fn multiplicity_precondition() {
    let (w, z, t) = ring_instance();
    assert!(multiplicity(&w, z, t, 0.1, 100.0).is_err());
}

#[test]
fn two_lenses_in_series_form_a_normal_network() {
    let mid = 16;
    let mut cells = Vec::new();
    for (c0, c1) in [(1, 16), (16, 31)] {
        cells.extend(lens_half(c0, c1, mid, 4, 1));
        cells.extend(lens_half(c0, c1, mid, 4, -1));
    }
    let w = channels(33, 33, &cells);
    let (z, u, t) = (vertex(33, 1, mid), vertex(33, 16, mid), vertex(33, 31, mid));
    let class = classify_network(&w, z, t, 0.1, 5.0).unwrap();
    assert_eq!((class.n, class.m), (2, 2));
    assert_eq!(class.splitter, Some(u));
    assert!(class.normal);
    let mut z_halves = std::collections::BTreeSet::new();
    let mut w_halves = std::collections::BTreeSet::new();
    for p in &class.witnesses {
        assert!(p.contains(u));
        assert_eq!(p.source(), z);
        assert_eq!(p.target(), t);
        let cut = p.vertices().iter().position(|&v| v == u).unwrap();
        z_halves.insert(p.vertices()[..cut].to_vec());
        w_halves.insert(p.vertices()[cut..].to_vec());
    }
    assert_eq!((z_halves.len(), w_halves.len()), (2, 2));
}

#[test]
fn single_channel_is_one_one() {
    let cells = lens_half(2, 30, 16, 4, 1);
    let w = channels(33, 33, &cells);
    let class = classify_network(&w, vertex(33, 2, 16), vertex(33, 30, 16), 0.1, 4.0).unwrap();
    assert_eq!((class.n, class.m), (1, 1));
    assert!(class.normal);
}

fn uniform(side: usize) -> WeightGrid {
    WeightGrid::uniform(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), 1.0).unwrap()
}

#[test]
fn bump_on_straight_geodesic() {
    let w = uniform(31);
    let params = MetricParams::new(1.0, Some(3.0), 1.0).unwrap();
    let (z, t) = (vertex(31, 3, 15), vertex(31, 27, 15));
    let straight = extract_geodesic(&sssp(&w, z).unwrap(), t).unwrap();
    let mut detour = vec![z];
    for k in 1..=10 {
        detour.push(vertex(31, 3 + k, 15 + k));
    }
    for c in 14..=17 {
        detour.push(vertex(31, c, 25));
    }
    for k in (0..10).rev() {
        detour.push(vertex(31, 27 - k, 15 + k));
    }
    let detour = LatticePath::from_vertices(&w, detour).unwrap();
    let bump = BumpFunction::new(Point::new(15.0, 15.0), 2.0, 4.0, 1.0).unwrap();
    let report = perturbation_for_paths(&w, &[straight, detour], &bump, &params);
    assert_eq!(report.violations, 0);
    let hit = &report.outcomes[0];
    assert_eq!(hit.role, PathRole::Hitter);
    // four unit edges between columns 13 and 17
    assert!((hit.inner_traversal - 4.0).abs() < 1e-12);
    assert!((hit.required_increase - 4.0 * (1.0 - (-params.xi).exp())).abs() < 1e-12);
    let avoid = &report.outcomes[1];
    assert_eq!(avoid.role, PathRole::Avoider);
    assert_eq!(avoid.length_after.to_bits(), avoid.length_before.to_bits());
}

#[test]
fn bump_near_endpoint_is_rejected() {
    let w = uniform(31);
    let params = MetricParams::new(1.0, Some(3.0), 1.0).unwrap();
    let bump = BumpFunction::new(Point::new(4.0, 15.0), 1.0, 2.0, 1.0).unwrap();
    let scales = CorridorScales::defaults(&w);
    assert!(perturbation_experiment(&w, vertex(31, 3, 15), vertex(31, 27, 15), &bump, &params, scales).is_err());
}

fn random_weights(side: usize, seed: u64) -> WeightGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..side * side).map(|_| rng.random_range(0.1..3.0)).collect();
    WeightGrid::from_weights(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn extracted_geodesics_are_consistent(seed in any::<u64>(), z in 0usize..400, t in 0usize..400) {
        let w = random_weights(20, seed);
        let mf = sssp(&w, z).unwrap();
        let p = extract_geodesic(&mf, t).unwrap();
        prop_assert_eq!(p.length(), mf.distance(t));
        let again = LatticePath::from_vertices(&w, p.vertices().to_vec()).unwrap();
        prop_assert!((again.length() - p.length()).abs() <= 1e-12 * p.length().max(1.0));
        let left = leftmost_geodesic(&w, &mf, t).unwrap();
        prop_assert!((left.length() - p.length()).abs() <= 1e-9 * p.length().max(1.0));
        prop_assert_eq!(left.source(), z);
    }

    #[test]
    fn corridors_nest(seed in any::<u64>(), z in 0usize..400, t in 0usize..400, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
        let w = random_weights(20, seed);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = corridor(&w, z, t, lo).unwrap();
        let b = corridor(&w, z, t, hi).unwrap();
        prop_assert!(a.members.is_subset(&b.members));
        prop_assert!(a.members.contains(z) && a.members.contains(t));
        let g = extract_geodesic(&sssp(&w, z).unwrap(), t).unwrap();
        for &v in g.vertices() {
            prop_assert!(a.members.contains(v));
        }
    }

    #[test]
    fn multiplicity_is_positive(seed in any::<u64>()) {
        let w = random_weights(24, seed);
        let delta = CorridorScales::defaults(&w).delta;
        let m = multiplicity(&w, vertex(24, 2, 12), vertex(24, 21, 12), delta, 1.0).unwrap();
        prop_assert!(m.k >= 1);
        prop_assert_eq!(m.k, m.representatives.len());
        for p in &m.representatives {
            prop_assert_eq!(p.source(), vertex(24, 2, 12));
            prop_assert_eq!(p.target(), vertex(24, 21, 12));
        }
    }
}
