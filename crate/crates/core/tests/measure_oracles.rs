use lqg_core::field::{FieldGrid, GridSpec, Provenance};
use lqg_core::geodesics::extract_geodesic;
use lqg_core::lattice::{vertex, VertexSet};
use lqg_core::measure::{area_measure, ball_volume_curve, covering_dimension, geometric_radii, greedy_cover};
use lqg_core::metric::{sssp, MetricParams, WeightGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest number of radius-`eps` balls centered at marked points that
/// cover the marked set, by exhaustive search over center subsets.
fn optimal_cover(dist: &[Vec<f64>], eps: f64) -> usize {
    let n = dist.len();
    let reach: Vec<u32> = (0..n)
        .map(|c| (0..n).filter(|&j| dist[c][j] <= eps).fold(0u32, |m, j| m | (1 << j)))
        .collect();
    let full = (1u32 << n) - 1;
    (1u32..=full)
        .filter(|centers| {
            (0..n).filter(|&c| centers & (1 << c) != 0).fold(0u32, |m, c| m | reach[c]) == full
        })
        .map(|c| c.count_ones() as usize)
        .min()
        .unwrap()
}

#[test]
fn greedy_cover_is_sandwiched_by_optimal_covers() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let side = 16;
        let w: Vec<f64> = (0..side * side).map(|_| rng.random_range(0.5..2.0)).collect();
        let w = WeightGrid::from_weights(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), w).unwrap();
        let count = rng.random_range(3..=12);
        let mut ids: Vec<usize> = (0..count).map(|_| rng.random_range(0..side * side)).collect();
        ids.sort();
        ids.dedup();
        let marked = VertexSet::from_ids(side * side, ids.iter().copied());
        let fields: Vec<_> = ids.iter().map(|&v| sssp(&w, v).unwrap()).collect();
        let dist: Vec<Vec<f64>> = fields.iter().map(|f| ids.iter().map(|&v| f.distance(v)).collect()).collect();
        for eps in [1.0, 2.5, 5.0, 9.0] {
            let greedy = greedy_cover(&w, &marked, eps).unwrap().len();
            assert!(optimal_cover(&dist, eps) <= greedy);
            assert!(greedy <= optimal_cover(&dist, eps / 2.0));
        }
    }
}

#[test]
fn flat_ball_volumes_grow_quadratically() {
    let spec = GridSpec::new(257, 1.0 / 32.0, (-4.0, -4.0)).unwrap();
    let field = FieldGrid::constant(spec, 0.0, Provenance::Mollified { epsilon: 0.125 }).unwrap();
    let params = MetricParams::new(0.05, Some(2.0025), 1.0).unwrap();
    let measure = area_measure(&field, &params, 0.125).unwrap();
    let w = WeightGrid::uniform(spec, spec.mesh).unwrap();
    let radii = geometric_radii(0.25, 3.0, 9);
    let est = ball_volume_curve(&w, &measure, vertex(257, 128, 128), &radii).unwrap();
    assert!((est.slope - 2.0).abs() < 0.1, "slope {}", est.slope);
    assert!(est.values.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn geodesic_cover_is_one_dimensional() {
    let side = 257;
    let w = WeightGrid::uniform(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), 1.0).unwrap();
    let mf = sssp(&w, vertex(side, 10, 20)).unwrap();
    let path = extract_geodesic(&mf, vertex(side, 246, 200)).unwrap();
    let marked = path.vertex_set(side * side);
    let est = covering_dimension(&marked, &w, &geometric_radii(2.0, 64.0, 9)).unwrap();
    assert!((est.slope - 1.0).abs() < 0.3, "slope {}", est.slope);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn covering_counts_never_increase(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = 20;
        let w: Vec<f64> = (0..side * side).map(|_| rng.random_range(0.2..3.0)).collect();
        let w = WeightGrid::from_weights(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), w).unwrap();
        let marked = VertexSet::from_predicate(side * side, |_| rng.random_bool(0.2));
        prop_assume!(!marked.is_empty());
        let est = covering_dimension(&marked, &w, &geometric_radii(0.5, 12.0, 8)).unwrap();
        prop_assert!(est.values.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn masses_follow_the_cell_formula(h in -3.0f64..3.0, gamma in 0.1f64..1.9) {
        let spec = GridSpec::centered(16, 0.25).unwrap();
        let field = FieldGrid::constant(spec, h, Provenance::Mollified { epsilon: 0.5 }).unwrap();
        let params = MetricParams::new(gamma, Some(3.0), 1.0).unwrap();
        let m = area_measure(&field, &params, 0.5).unwrap();
        let expected = 0.0625 * 0.5f64.powf(gamma * gamma / 2.0) * (gamma * h).exp();
        for x in &m.cell_mass {
            prop_assert!((x - expected).abs() <= 1e-14 * expected);
        }
    }
}
