use std::collections::VecDeque;

use lqg_core::balls::{
    confluence_census, filled_ball, metric_ball, near_point_confluence, signed_area2, BallTarget,
};
use lqg_core::field::GridSpec;
use lqg_core::lattice::{adjacent, coords, vertex, VertexSet};
use lqg_core::metric::{sssp, WeightGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 41;

fn grid(weights: Vec<f64>) -> WeightGrid {
    WeightGrid::from_weights(GridSpec::new(SIDE, 1.0, (0.0, 0.0)).unwrap(), weights).unwrap()
}

/// Unit weights except a heavy ring of Euclidean radii [2, 3.2] around (28, 20).
fn pocket_instance() -> WeightGrid {
    let w = (0..SIDE * SIDE)
        .map(|v| {
            let (c, r) = coords(SIDE, v);
            let d = ((c as f64 - 28.0).powi(2) + (r as f64 - 20.0).powi(2)).sqrt();
            if (2.0..=3.2).contains(&d) { 500.0 } else { 1.0 }
        })
        .collect();
    grid(w)
}

/// Independent flood: complement of `ball`, 4-connected, from `seeds`.
fn flood(ball: &VertexSet, seeds: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; SIDE * SIDE];
    let mut q: VecDeque<usize> = seeds.iter().copied().filter(|&s| !ball.contains(s)).collect();
    for &s in &q {
        seen[s] = true;
    }
    while let Some(v) = q.pop_front() {
        let (c, r) = coords(SIDE, v);
        let mut next = Vec::new();
        if c > 0 {
            next.push(v - 1);
        }
        if c + 1 < SIDE {
            next.push(v + 1);
        }
        if r > 0 {
            next.push(v - SIDE);
        }
        if r + 1 < SIDE {
            next.push(v + SIDE);
        }
        for u in next {
            if !seen[u] && !ball.contains(u) {
                seen[u] = true;
                q.push_back(u);
            }
        }
    }
    seen
}

fn frame() -> Vec<usize> {
    (0..SIDE * SIDE)
        .filter(|&v| {
            let (c, r) = coords(SIDE, v);
            c == 0 || r == 0 || c == SIDE - 1 || r == SIDE - 1
        })
        .collect()
}

fn check_cycle(cycle: &[usize], members: &VertexSet) {
    assert!(!cycle.is_empty());
    for i in 0..cycle.len() {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        assert!(members.contains(a));
        assert!(a == b || adjacent(SIDE, a, b), "{a} -> {b} is not a lattice step");
    }
}

#[test]
fn pocket_is_filled() {
    let w = pocket_instance();
    let center = vertex(SIDE, 20, 20);
    let mf = sssp(&w, center).unwrap();
    let s = 18.0;
    let ball = metric_ball(&mf, s);
    let pocket = vertex(SIDE, 28, 20);
    assert!(!ball.contains(pocket));
    let fb = filled_ball(&mf, s, BallTarget::Infinity).unwrap();
    let outside = flood(&ball, &frame());
    for v in 0..SIDE * SIDE {
        assert_eq!(fb.members.contains(v), !outside[v], "vertex {v}");
    }
    assert!(fb.members.contains(pocket));
    assert!(fb.members.len() > ball.len());
    check_cycle(&fb.boundary_cycle, &fb.members);
    assert!(signed_area2(SIDE, &fb.boundary_cycle) > 0);
}

#[test]
fn target_in_pocket_excludes_it() {
    let w = pocket_instance();
    let mf = sssp(&w, vertex(SIDE, 20, 20)).unwrap();
    let s = 18.0;
    let pocket = vertex(SIDE, 28, 20);
    let fb = filled_ball(&mf, s, BallTarget::Vertex(pocket)).unwrap();
    let inside = flood(&metric_ball(&mf, s), &[pocket]);
    for v in 0..SIDE * SIDE {
        assert_eq!(fb.members.contains(v), !inside[v]);
    }
    assert!(!fb.members.contains(pocket));
    // everything past the ball is now a member
    assert!(fb.members.contains(0));
    check_cycle(&fb.boundary_cycle, &fb.members);
}

/// Heavy disk of radius 7 around the center pierced by four axis channels.
fn four_channel_instance() -> WeightGrid {
    let w = (0..SIDE * SIDE)
        .map(|v| {
            let (c, r) = coords(SIDE, v);
            let (dx, dy) = (c as i64 - 20, r as i64 - 20);
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if d <= 7.0 && dx != 0 && dy != 0 { 1000.0 } else { 1.0 }
        })
        .collect();
    grid(w)
}

#[test]
fn four_channels_give_four_ordered_arcs() {
    let w = four_channel_instance();
    let center = vertex(SIDE, 20, 20);
    let report = confluence_census(&w, center, vertex(SIDE, 1, 1), 1.5, 14.0).unwrap();
    let mut xs = report.x_points.clone();
    xs.sort();
    let mut expected = vec![vertex(SIDE, 21, 20), vertex(SIDE, 20, 21), vertex(SIDE, 19, 20), vertex(SIDE, 20, 19)];
    expected.sort();
    assert_eq!(xs, expected);
    assert_eq!(report.arcs.len(), 4);
    assert_eq!(report.violations.total(), 0);
    assert_eq!(report.violations.off_cycle, 0);
}

#[test]
fn census_preconditions() {
    let w = four_channel_instance();
    let center = vertex(SIDE, 20, 20);
    assert!(confluence_census(&w, center, vertex(SIDE, 1, 1), 5.0, 3.0).is_err());
    assert!(confluence_census(&w, center, vertex(SIDE, 22, 20), 1.0, 3.0).is_err());
}

#[test]
fn single_source_confluence_is_certain() {
    let w = grid(vec![1.0; SIDE * SIDE]);
    let z = vertex(SIDE, 20, 20);
    let stats = near_point_confluence(&w, z, 0.0, 3.0, &[vertex(SIDE, 0, 0), vertex(SIDE, 40, 33)]).unwrap();
    assert_eq!(stats.source_count, 1);
    assert_eq!(stats.fraction, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn filled_balls_grow_and_contain_metric_balls(seed in any::<u64>(), s1 in 0.5f64..10.0, s2 in 0.5f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = grid((0..SIDE * SIDE).map(|_| rng.random_range(0.2..5.0)).collect());
        let mf = sssp(&w, vertex(SIDE, 20, 20)).unwrap();
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = filled_ball(&mf, lo, BallTarget::Infinity).unwrap();
        let b = filled_ball(&mf, hi, BallTarget::Infinity).unwrap();
        prop_assert!(metric_ball(&mf, lo).is_subset(&a.members));
        prop_assert!(a.members.is_subset(&b.members));
        for fb in [&a, &b] {
            prop_assert!(signed_area2(SIDE, &fb.boundary_cycle) >= 0);
            for i in 0..fb.boundary_cycle.len() {
                let (x, y) = (fb.boundary_cycle[i], fb.boundary_cycle[(i + 1) % fb.boundary_cycle.len()]);
                prop_assert!(fb.members.contains(x));
                prop_assert!(x == y || adjacent(SIDE, x, y));
            }
        }
    }
}
