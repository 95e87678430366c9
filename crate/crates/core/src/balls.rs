//! Metric balls, filled balls with their boundary contours, and the
//! confluence census between two filled balls.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::leftmost_predecessor;
use crate::lattice::{coords, vertex, VertexId, VertexSet, AXIS_DIRECTIONS, DIRECTIONS};
use crate::metric::{sssp, MetricField, WeightGrid};

/// `{v : d(center, v) <= s}`.
pub fn metric_ball(mf: &MetricField, s: f64) -> VertexSet {
    VertexSet::from_predicate(mf.distances.len(), |v| mf.distance(v) <= s)
}

/// Which complementary component stays outside a filled ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallTarget {
    Vertex(VertexId),
    /// The component touching the grid frame.
    Infinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledBallRegion {
    pub center: VertexId,
    pub radius: f64,
    pub target: BallTarget,
    pub members: VertexSet,
    /// Counterclockwise Moore contour of the members facing the target
    /// component. Vertices may repeat where the region is one vertex thick;
    /// the closing vertex is not repeated.
    pub boundary_cycle: Vec<VertexId>,
    /// Set when the target lies inside the metric ball; the region is then
    /// the whole grid and the cycle is empty.
    pub degenerate: bool,
}

/// Metric ball plus every complementary pocket not containing the target.
///
/// The ball is 8-connected, so the complement is split into 4-connected
/// components; the one holding the target (or, for [`BallTarget::Infinity`],
/// every component touching the frame) stays outside.
pub fn filled_ball(mf: &MetricField, s: f64, target: BallTarget) -> Result<FilledBallRegion> {
    let side = mf.spec.side_count;
    let n = mf.distances.len();
    let ball = metric_ball(mf, s);
    let seeds: Vec<VertexId> = match target {
        BallTarget::Vertex(t) => {
            if t >= n {
                return Err(Error::VertexOutOfRange(t));
            }
            if ball.contains(t) {
                return Ok(FilledBallRegion {
                    center: mf.source,
                    radius: s,
                    target,
                    members: VertexSet::full(n),
                    boundary_cycle: Vec::new(),
                    degenerate: true,
                });
            }
            vec![t]
        }
        BallTarget::Infinity => (0..n)
            .filter(|&v| {
                let (c, r) = coords(side, v);
                (c == 0 || r == 0 || c == side - 1 || r == side - 1) && !ball.contains(v)
            })
            .collect(),
    };
    let outside = flood4(side, &ball, &seeds);
    let members = VertexSet::from_predicate(n, |v| !outside.contains(v));
    let boundary_cycle = if target == BallTarget::Infinity && members.len() == n {
        Vec::new()
    } else {
        trace_contour(side, &members, &outside, target == BallTarget::Infinity)
    };
    Ok(FilledBallRegion {
        center: mf.source,
        radius: s,
        target,
        members,
        boundary_cycle,
        degenerate: false,
    })
}

/// 4-connected flood of the complement of `blocked` from `seeds`.
fn flood4(side: usize, blocked: &VertexSet, seeds: &[VertexId]) -> VertexSet {
    let mut seen = VertexSet::empty(side * side);
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !blocked.contains(s) && seen.insert(s) {
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &(dc, dr) in &AXIS_DIRECTIONS {
            if let Some(u) = crate::lattice::offset(side, v, dc, dr) {
                if !blocked.contains(u) && seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
    }
    seen
}

/// Moore-neighbor contour of `members` along the `outside` component.
///
/// Starts at the lowest-index member with a 4-neighbor outside (off-grid
/// counts as outside when `frame_outside`), backtracking from that neighbor,
/// and sweeps counterclockwise around the current vertex. Stops on
/// re-entering the start towards the second vertex.
fn trace_contour(side: usize, members: &VertexSet, outside: &VertexSet, frame_outside: bool) -> Vec<VertexId> {
    let s = side as i64;
    let on_grid = |c: i64, r: i64| c >= 0 && r >= 0 && c < s && r < s;
    let is_member = |c: i64, r: i64| on_grid(c, r) && members.contains(vertex(side, c as usize, r as usize));
    let is_outside = |c: i64, r: i64| {
        if on_grid(c, r) {
            outside.contains(vertex(side, c as usize, r as usize))
        } else {
            frame_outside
        }
    };

    let mut start = None;
    for v in members.iter() {
        let (c, r) = coords(side, v);
        let (c, r) = (c as i64, r as i64);
        if let Some(&(dc, dr)) = AXIS_DIRECTIONS.iter().find(|&&(dc, dr)| is_outside(c + dc, r + dr)) {
            start = Some(((c, r), (c + dc, r + dr)));
            break;
        }
    }
    let Some((start, start_back)) = start else {
        return Vec::new();
    };
    let dir_index = |from: (i64, i64), to: (i64, i64)| {
        let d = (to.0 - from.0, to.1 - from.1);
        DIRECTIONS.iter().position(|&x| x == d).expect("Moore neighbor")
    };
    // one sweep step from `back` around `cur`
    let step = |cur: (i64, i64), back: (i64, i64)| -> Option<((i64, i64), (i64, i64))> {
        let k = dir_index(cur, back);
        let mut prev = back;
        for i in 1..=8 {
            let (dc, dr) = DIRECTIONS[(k + i) % 8];
            let cand = (cur.0 + dc, cur.1 + dr);
            if is_member(cand.0, cand.1) {
                return Some((cand, prev));
            }
            prev = cand;
        }
        None
    };
    let id = |p: (i64, i64)| vertex(side, p.0 as usize, p.1 as usize);

    let Some((second, back)) = step(start, start_back) else {
        return vec![id(start)];
    };
    let mut cycle = vec![id(start)];
    let (mut cur, mut back) = (second, back);
    let limit = 4 * members.len() + 8;
    while cycle.len() <= limit {
        if cur == start {
            if let Some((next, _)) = step(cur, back) {
                if next == second {
                    break;
                }
            }
        }
        cycle.push(id(cur));
        match step(cur, back) {
            Some((next, b)) => {
                back = b;
                cur = next;
            }
            None => break,
        }
    }
    cycle
}

/// Twice the signed area enclosed by a vertex cycle (positive when
/// counterclockwise).
pub fn signed_area2(side: usize, cycle: &[VertexId]) -> i64 {
    let pts: Vec<(i64, i64)> = cycle
        .iter()
        .map(|&v| {
            let (c, r) = coords(side, v);
            (c as i64, r as i64)
        })
        .collect();
    (0..pts.len())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfluenceViolations {
    /// Extra runs beyond one per confluence point.
    pub non_contiguous: usize,
    /// Cyclic descents beyond one when arcs are read in the order of their
    /// points along the inner contour.
    pub cyclic_order: usize,
    /// Crossings that are not on the inner contour (excluded from the order
    /// check).
    pub off_cycle: usize,
}

impl ConfluenceViolations {
    pub fn total(&self) -> usize {
        self.non_contiguous + self.cyclic_order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfluenceArc {
    pub x: VertexId,
    /// Inclusive indices into the outer contour; `start > end` wraps.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfluenceReport {
    pub t: f64,
    pub s: f64,
    #[serde(rename = "X")]
    pub x_points: Vec<VertexId>,
    pub arcs: Vec<ConfluenceArc>,
    pub violations: ConfluenceViolations,
    pub outer_boundary_len: usize,
}

impl ConfluenceReport {
    /// Violations per arc.
    pub fn violation_rate(&self) -> f64 {
        if self.arcs.is_empty() {
            0.0
        } else {
            self.violations.total() as f64 / self.arcs.len() as f64
        }
    }
}

/// Where leftmost geodesics from the center to the outer contour leave the
/// inner filled ball.
///
/// Both balls are filled relative to `w_target`. For each outer contour
/// vertex `y`, `x(y)` is the last vertex with `d <= t` on its leftmost
/// geodesic; distance increases strictly along the geodesic so the crossing
/// is unique.
pub fn confluence_census(
    weights: &WeightGrid,
    center: VertexId,
    w_target: VertexId,
    t: f64,
    s: f64,
) -> Result<ConfluenceReport> {
    let mf = sssp(weights, center)?;
    confluence_census_with(weights, &mf, w_target, t, s)
}

pub fn confluence_census_with(
    weights: &WeightGrid,
    mf: &MetricField,
    w_target: VertexId,
    t: f64,
    s: f64,
) -> Result<ConfluenceReport> {
    if w_target >= mf.distances.len() {
        return Err(Error::VertexOutOfRange(w_target));
    }
    let dw = mf.distance(w_target);
    if !(0.0 <= t && t < s && s < dw) {
        return Err(Error::Precondition(format!("need 0 <= t < s < d(center, target); t = {t}, s = {s}, d = {dw}")));
    }
    let inner = filled_ball(mf, t, BallTarget::Vertex(w_target))?;
    let outer = filled_ball(mf, s, BallTarget::Vertex(w_target))?;
    let outer_cycle = &outer.boundary_cycle;

    let crossings: Vec<VertexId> = outer_cycle
        .par_iter()
        .map(|&y| {
            let mut v = y;
            while mf.distance(v) > t {
                v = leftmost_predecessor(weights, mf, v).expect("reached vertex above t has a predecessor");
            }
            v
        })
        .collect();

    // first position of each vertex on the inner contour
    let mut inner_pos: HashMap<VertexId, usize> = HashMap::new();
    for (i, &v) in inner.boundary_cycle.iter().enumerate() {
        inner_pos.entry(v).or_insert(i);
    }
    if inner.boundary_cycle.is_empty() {
        // single-vertex or empty contour: the center itself
        inner_pos.insert(mf.source, 0);
    }

    let arcs = cyclic_runs(&crossings);
    let mut runs_per_x: HashMap<VertexId, usize> = HashMap::new();
    for a in &arcs {
        *runs_per_x.entry(a.x).or_default() += 1;
    }
    let mut x_points: Vec<VertexId> = Vec::new();
    for a in &arcs {
        if !x_points.contains(&a.x) {
            x_points.push(a.x);
        }
    }
    let non_contiguous = runs_per_x.values().map(|&k| k - 1).sum();
    let off_cycle = x_points.iter().filter(|x| !inner_pos.contains_key(x)).count();
    let positions: Vec<usize> = arcs.iter().filter_map(|a| inner_pos.get(&a.x).copied()).collect();
    let cyclic_order = cyclic_descents(&positions).saturating_sub(1);

    Ok(ConfluenceReport {
        t,
        s,
        x_points,
        arcs,
        violations: ConfluenceViolations { non_contiguous, cyclic_order, off_cycle },
        outer_boundary_len: outer_cycle.len(),
    })
}

/// Maximal runs of equal labels on a cyclic sequence. A run wrapping past
/// the end is reported once with `start > end`.
pub fn cyclic_runs(labels: &[VertexId]) -> Vec<ConfluenceArc> {
    let n = labels.len();
    if n == 0 {
        return Vec::new();
    }
    let Some(first_break) = (0..n).find(|&i| labels[i] != labels[(i + n - 1) % n]) else {
        return vec![ConfluenceArc { x: labels[0], start: 0, end: n - 1 }];
    };
    let mut arcs = Vec::new();
    let mut start = first_break;
    for k in 1..=n {
        let i = (first_break + k) % n;
        if k == n || labels[i] != labels[start] {
            arcs.push(ConfluenceArc { x: labels[start], start, end: (i + n - 1) % n });
            start = i;
        }
    }
    arcs.sort_by_key(|a| a.start);
    arcs
}

/// Number of cyclic positions where the sequence decreases.
fn cyclic_descents(seq: &[usize]) -> usize {
    let n = seq.len();
    if n < 2 {
        return if n == 0 { 0 } else { 1 };
    }
    (0..n).filter(|&i| seq[(i + 1) % n] < seq[i]).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearPointConfluence {
    /// Fraction of targets whose geodesics from all sources merge at a
    /// vertex with `r_in < d(z, v) <= r_out`.
    pub fraction: f64,
    pub merged: Vec<bool>,
    pub source_count: usize,
}

/// Do the geodesics from every vertex of `B_{r_in}(z)` to a far target
/// coalesce before leaving `B_{r_out}(z)`?
///
/// Geodesics to each target are read from the target's shortest-path tree,
/// so they merge for good once they meet. A target counts when the common
/// trunk has a vertex in the annulus `r_in < d(z, v) <= r_out`.
pub fn near_point_confluence(
    weights: &WeightGrid,
    z: VertexId,
    r_in: f64,
    r_out: f64,
    targets: &[VertexId],
) -> Result<NearPointConfluence> {
    if !(0.0 <= r_in && r_in < r_out) {
        return Err(Error::Precondition(format!("need 0 <= r_in < r_out; got {r_in}, {r_out}")));
    }
    let from_z = sssp(weights, z)?;
    let sources: Vec<VertexId> = (0..weights.vertex_count()).filter(|&v| from_z.distance(v) <= r_in).collect();
    for &t in targets {
        if from_z.distance(t) <= r_out {
            return Err(Error::Precondition(format!("target {t} lies within r_out of z")));
        }
    }
    let merged = targets
        .par_iter()
        .map(|&t| {
            let tree = sssp(weights, t)?;
            let mut through = vec![0usize; weights.vertex_count()];
            for &s in &sources {
                through[s] += 1;
            }
            // push counts towards the root, farthest vertices first
            let mut order: Vec<VertexId> = (0..weights.vertex_count()).filter(|&v| tree.reached(v)).collect();
            order.sort_by(|&a, &b| tree.distance(b).total_cmp(&tree.distance(a)).then(b.cmp(&a)));
            for v in order {
                if let Some(p) = tree.predecessor(v) {
                    through[p] += through[v];
                }
            }
            let total = sources.len();
            Ok((0..weights.vertex_count()).any(|v| {
                through[v] == total && from_z.distance(v) > r_in && from_z.distance(v) <= r_out
            }))
        })
        .collect::<Result<Vec<bool>>>()?;
    let fraction = if merged.is_empty() {
        0.0
    } else {
        merged.iter().filter(|&&m| m).count() as f64 / merged.len() as f64
    };
    Ok(NearPointConfluence { fraction, merged, source_count: sources.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn uniform(side: usize) -> WeightGrid {
        WeightGrid::uniform(GridSpec::new(side, 1.0, (0.0, 0.0)).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn ball_extremes() {
        let w = uniform(7);
        let mf = sssp(&w, 24).unwrap();
        assert_eq!(metric_ball(&mf, 0.0).iter().collect::<Vec<_>>(), vec![24]);
        assert_eq!(metric_ball(&mf, mf.max_distance()).len(), 49);
    }

    #[test]
    fn filled_equals_metric_without_pockets() {
        let w = uniform(9);
        let mf = sssp(&w, 40).unwrap();
        let fb = filled_ball(&mf, 2.5, BallTarget::Infinity).unwrap();
        assert_eq!(fb.members, metric_ball(&mf, 2.5));
        assert!(!fb.degenerate);
        assert!(signed_area2(9, &fb.boundary_cycle) > 0);
        for &v in &fb.boundary_cycle {
            assert!(fb.members.contains(v));
        }
    }

    #[test]
    fn degenerate_target() {
        let w = uniform(5);
        let mf = sssp(&w, 12).unwrap();
        let fb = filled_ball(&mf, 1.0, BallTarget::Vertex(13)).unwrap();
        assert!(fb.degenerate);
        assert_eq!(fb.members.len(), 25);
    }

    #[test]
    fn single_vertex_contour() {
        let w = uniform(5);
        let mf = sssp(&w, 12).unwrap();
        let fb = filled_ball(&mf, 0.0, BallTarget::Infinity).unwrap();
        assert_eq!(fb.boundary_cycle, vec![12]);
    }

    #[test]
    fn runs_wrap() {
        let arcs = cyclic_runs(&[1, 2, 2, 3, 1]);
        assert_eq!(arcs.len(), 3);
        assert_eq!(arcs.iter().find(|a| a.x == 1).map(|a| (a.start, a.end)), Some((4, 0)));
        assert_eq!(cyclic_runs(&[5, 5]).len(), 1);
        assert_eq!(cyclic_descents(&[0, 2, 5]), 1);
        assert_eq!(cyclic_descents(&[2, 0, 5]), 2);
    }

    #[test]
    fn census_from_single_vertex() {
        let w = uniform(15);
        let c = 7 * 15 + 7;
        let report = confluence_census(&w, c, 7 * 15 + 14, 0.0, 3.0).unwrap();
        assert_eq!(report.x_points, vec![c]);
        assert_eq!(report.arcs.len(), 1);
        assert_eq!(report.violations.total(), 0);
    }
}
