//! Geodesic extraction, near-geodesic corridors, multiplicity and network
//! classification.
//!
//! Exact lattice geodesics are almost surely unique, so "distinct geodesics"
//! are read off at a tolerance scale: the corridor of vertices within slack
//! `delta` of optimal, with metric balls of radius `rho` around the endpoints
//! excised. See [`CorridorScales`] for the defaults.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::BumpFunction;
use crate::lattice::{adjacent, components, connected_within, offset, VertexId, VertexSet, DIRECTIONS};
use crate::metric::{apply_weyl, internal_shortest_path, sssp, MetricField, MetricParams, WeightGrid};

/// Relative tolerance applied to corridor membership, absorbing the rounding
/// difference between distances summed from the two endpoints.
pub const CORRIDOR_TOLERANCE: f64 = 1e-10;

/// An ordered simple 8-path with its edge-cost length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePath {
    vertices: Vec<VertexId>,
    length: f64,
}

impl LatticePath {
    /// Validate adjacency and simplicity, and sum edge costs from the first vertex.
    pub fn from_vertices(weights: &WeightGrid, vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidPath("empty path".into()));
        }
        let n = weights.vertex_count();
        let mut seen = VertexSet::empty(n);
        for &v in &vertices {
            if v >= n {
                return Err(Error::VertexOutOfRange(v));
            }
            if !seen.insert(v) {
                return Err(Error::InvalidPath(format!("vertex {v} repeats")));
            }
        }
        let mut length = 0.0;
        for pair in vertices.windows(2) {
            if !adjacent(weights.side(), pair[0], pair[1]) {
                return Err(Error::InvalidPath(format!("{} and {} are not adjacent", pair[0], pair[1])));
            }
            length += weights.edge_cost(pair[0], pair[1]);
        }
        Ok(LatticePath { vertices, length })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn source(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn target(&self) -> VertexId {
        *self.vertices.last().expect("non-empty path")
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    /// Edge-cost sum under (possibly different) weights.
    pub fn length_under(&self, weights: &WeightGrid) -> f64 {
        self.vertices.windows(2).map(|p| weights.edge_cost(p[0], p[1])).sum()
    }

    pub fn vertex_set(&self, vertex_count: usize) -> VertexSet {
        VertexSet::from_ids(vertex_count, self.vertices.iter().copied())
    }
}

/// Walk the predecessor tree from `target` back to the source.
pub fn extract_geodesic(mf: &MetricField, target: VertexId) -> Result<LatticePath> {
    if target >= mf.distances.len() {
        return Err(Error::VertexOutOfRange(target));
    }
    if !mf.reached(target) {
        return Err(Error::Unreached(target));
    }
    let mut vertices = tree_chain(mf, target);
    vertices.reverse();
    Ok(LatticePath { vertices, length: mf.distance(target) })
}

/// `v, pred(v), pred(pred(v)), ...` down to the source.
fn tree_chain(mf: &MetricField, v: VertexId) -> Vec<VertexId> {
    let mut chain = vec![v];
    let mut cur = v;
    while let Some(p) = mf.predecessor(cur) {
        chain.push(p);
        cur = p;
    }
    chain
}

/// Geodesic to `target` that, among optimal predecessors, always steps to
/// the one most counterclockwise about the source.
pub fn leftmost_geodesic(
    weights: &WeightGrid,
    mf: &MetricField,
    target: VertexId,
) -> Result<LatticePath> {
    if target >= mf.distances.len() {
        return Err(Error::VertexOutOfRange(target));
    }
    if !mf.reached(target) {
        return Err(Error::Unreached(target));
    }
    let mut chain = vec![target];
    let mut v = target;
    while let Some(p) = leftmost_predecessor(weights, mf, v) {
        chain.push(p);
        v = p;
    }
    chain.reverse();
    LatticePath::from_vertices(weights, chain)
}

/// The leftmost-rule predecessor of `v`: among neighbors `p` with
/// `d(p) + cost(p, v) = d(v)` (relative tolerance 1e-12), the one of largest
/// signed angle from `v` as seen from the source; ties go to the smaller id.
/// `None` at the source and at unreached vertices.
pub fn leftmost_predecessor(weights: &WeightGrid, mf: &MetricField, v: VertexId) -> Option<VertexId> {
    if v == mf.source || !mf.reached(v) {
        return None;
    }
    let spec = weights.spec;
    let src = spec.point(mf.source);
    let dv = mf.distance(v);
    let tol = 1e-12 * dv.max(1.0);
    let pv = spec.point(v);
    let (ax, ay) = (pv.x - src.x, pv.y - src.y);
    let mut best: Option<(f64, VertexId)> = None;
    for (p, cost) in weights.neighbors(v) {
        if mf.distance(p) >= dv || (mf.distance(p) + cost - dv).abs() > tol {
            continue;
        }
        let pp = spec.point(p);
        let (bx, by) = (pp.x - src.x, pp.y - src.y);
        let angle = (ax * by - ay * bx).atan2(ax * bx + ay * by);
        let better = match best {
            None => true,
            Some((a, id)) => angle > a || (angle == a && p < id),
        };
        if better {
            best = Some((angle, p));
        }
    }
    // the tree predecessor is always optimal, so a candidate exists
    best.map(|(_, p)| p).or_else(|| mf.predecessor(v))
}

/// Distance fields from both endpoints of a pair.
#[derive(Debug, Clone)]
pub struct PairFields {
    pub from_z: MetricField,
    pub from_w: MetricField,
}

impl PairFields {
    pub fn new(weights: &WeightGrid, z: VertexId, w: VertexId) -> Result<Self> {
        let (a, b) = rayon::join(|| sssp(weights, z), || sssp(weights, w));
        Ok(PairFields { from_z: a?, from_w: b? })
    }

    pub fn z(&self) -> VertexId {
        self.from_z.source
    }

    pub fn w(&self) -> VertexId {
        self.from_w.source
    }

    pub fn pair_distance(&self) -> f64 {
        self.from_z.distance(self.w())
    }

    /// `d(z, v) + d(v, w)`.
    pub fn through(&self, v: VertexId) -> f64 {
        self.from_z.distance(v) + self.from_w.distance(v)
    }

    /// Near-geodesic `z -> v -> w` glued from the two trees, loops removed.
    pub fn path_through(&self, weights: &WeightGrid, v: VertexId) -> Result<LatticePath> {
        let mut vertices = tree_chain(&self.from_z, v);
        vertices.reverse();
        vertices.extend(tree_chain(&self.from_w, v).into_iter().skip(1));
        LatticePath::from_vertices(weights, remove_loops(vertices))
    }
}

/// Drop every cycle from a walk, keeping the first visit of each vertex.
pub fn remove_loops(walk: Vec<VertexId>) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = Vec::with_capacity(walk.len());
    let mut position: HashMap<VertexId, usize> = HashMap::new();
    for v in walk {
        if let Some(&i) = position.get(&v) {
            for dropped in out.drain(i + 1..) {
                position.remove(&dropped);
            }
        } else {
            position.insert(v, out.len());
            out.push(v);
        }
    }
    out
}

/// Vertices within slack `delta` of the `z`-`w` distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub z: VertexId,
    pub w: VertexId,
    pub delta: f64,
    pub pair_distance: f64,
    pub members: VertexSet,
}

pub fn corridor(weights: &WeightGrid, z: VertexId, w: VertexId, delta: f64) -> Result<Corridor> {
    corridor_from_fields(&PairFields::new(weights, z, w)?, delta)
}

pub fn corridor_from_fields(fields: &PairFields, delta: f64) -> Result<Corridor> {
    if !(delta >= 0.0) {
        return Err(Error::Precondition(format!("slack {delta} must be nonnegative")));
    }
    let d = fields.pair_distance();
    let cutoff = d + delta + CORRIDOR_TOLERANCE * d;
    let n = fields.from_z.distances.len();
    let members = VertexSet::from_predicate(n, |v| fields.through(v) <= cutoff);
    Ok(Corridor { z: fields.z(), w: fields.w(), delta, pair_distance: d, members })
}

/// Tolerance scales for multiplicity and network classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorScales {
    pub delta: f64,
    pub rho: f64,
}

impl CorridorScales {
    /// `delta` = twice the median edge cost; `rho` = five median vertex
    /// weights (vertex weights already carry the mesh factor).
    pub fn defaults(weights: &WeightGrid) -> Self {
        CorridorScales {
            delta: 2.0 * weights.median_edge_cost(),
            rho: 5.0 * weights.median_vertex_weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multiplicity {
    pub k: usize,
    pub representatives: Vec<LatticePath>,
}

pub fn multiplicity(
    weights: &WeightGrid,
    z: VertexId,
    w: VertexId,
    delta: f64,
    rho: f64,
) -> Result<Multiplicity> {
    multiplicity_with(weights, &PairFields::new(weights, z, w)?, delta, rho)
}

/// Count the corridor strands that run between the excised endpoint balls.
///
/// The corridor minus the metric balls of radius `rho` about `z` and `w` is
/// split into 8-connected components; a component counts when it reaches
/// across the mid-level `d(z, v) = d(z, w) / 2`, i.e. holds vertices on both
/// sides of it. Each counted component contributes the near-geodesic through
/// its vertex of least `d(z, v) + d(v, w)`.
pub fn multiplicity_with(
    weights: &WeightGrid,
    fields: &PairFields,
    delta: f64,
    rho: f64,
) -> Result<Multiplicity> {
    let d = fields.pair_distance();
    if !(d > 4.0 * rho) {
        return Err(Error::Precondition(format!("d(z,w) = {d} must exceed 4 rho = {}", 4.0 * rho)));
    }
    let corr = corridor_from_fields(fields, delta)?;
    let trimmed = VertexSet::from_predicate(corr.members.universe(), |v| {
        corr.members.contains(v) && fields.from_z.distance(v) >= rho && fields.from_w.distance(v) >= rho
    });
    let half = 0.5 * d;
    let mut representatives = Vec::new();
    for comp in components(weights.side(), &trimmed) {
        let below = comp.iter().any(|&v| fields.from_z.distance(v) <= half);
        let above = comp.iter().any(|&v| fields.from_z.distance(v) >= half);
        if below && above {
            representatives.push(fields.path_through(weights, best_vertex(fields, &comp))?);
        }
    }
    if representatives.is_empty() {
        // the exact geodesic always crosses the mid-level; only reachable
        // through rounding at extreme slack ratios
        representatives.push(extract_geodesic(&fields.from_z, fields.w())?);
    }
    Ok(Multiplicity { k: representatives.len(), representatives })
}

/// Vertex of least `d(z,v) + d(v,w)`, ties to the smallest id.
fn best_vertex(fields: &PairFields, comp: &[VertexId]) -> VertexId {
    *comp
        .iter()
        .min_by(|&&a, &&b| fields.through(a).total_cmp(&fields.through(b)).then(a.cmp(&b)))
        .expect("non-empty component")
}

/// (n, m) classification of the near-geodesic network between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkClass {
    pub n: usize,
    pub m: usize,
    pub splitter: Option<VertexId>,
    pub normal: bool,
    pub witnesses: Vec<LatticePath>,
}

pub fn classify_network(
    weights: &WeightGrid,
    z: VertexId,
    w: VertexId,
    delta: f64,
    r: f64,
) -> Result<NetworkClass> {
    classify_network_with(weights, &PairFields::new(weights, z, w)?, delta, r)
}

/// Branch counts at radius `r` from each endpoint, a splitter vertex, and a
/// stability check of the counts at `0.75 r` and `1.25 r`.
///
/// A branch is an 8-connected component of the corridor restricted to the
/// shell `r <= d(endpoint, v) <= r + band`, where `band` is twice the longest
/// diagonal step among corridor vertices, so every strand leaves a vertex in
/// the shell. The splitter is a geodesic vertex whose removal together with
/// its 8-neighbors disconnects `z` from `w` inside the corridor; among several,
/// the one with `d(z, u)` closest to `d(z, w) / 2` is reported.
pub fn classify_network_with(
    weights: &WeightGrid,
    fields: &PairFields,
    delta: f64,
    r: f64,
) -> Result<NetworkClass> {
    let d = fields.pair_distance();
    if !(r > 0.0 && d > 4.0 * r) {
        return Err(Error::Precondition(format!("need 0 < 4 r < d(z,w); r = {r}, d = {d}")));
    }
    let corr = corridor_from_fields(fields, delta)?;
    let max_weight = corr
        .members
        .iter()
        .map(|v| weights.vertex_weights[v])
        .fold(0.0, f64::max);
    let band = 2.0 * std::f64::consts::SQRT_2 * max_weight;

    let side = weights.side();
    let shell_components = |field: &MetricField, radius: f64| {
        let shell = VertexSet::from_predicate(corr.members.universe(), |v| {
            let dv = field.distance(v);
            corr.members.contains(v) && dv >= radius && dv <= radius + band
        });
        components(side, &shell)
    };
    let z_branches = shell_components(&fields.from_z, r);
    let w_branches = shell_components(&fields.from_w, r);
    let (n, m) = (z_branches.len(), w_branches.len());

    let stable = [0.75 * r, 1.25 * r].iter().all(|&rr| {
        shell_components(&fields.from_z, rr).len() == n && shell_components(&fields.from_w, rr).len() == m
    });

    let splitter = find_splitter(weights, fields, &corr, r)?;
    let mut witnesses: Vec<LatticePath> = Vec::new();
    let mut push = |path: LatticePath| {
        if !witnesses.iter().any(|p| p.vertices == path.vertices) {
            witnesses.push(path);
        }
    };
    match splitter {
        Some(u) => {
            for comp in &z_branches {
                let b = best_vertex(fields, comp);
                push(routed_path(weights, fields, &corr.members, b, u, true)?);
            }
            for comp in &w_branches {
                let b = best_vertex(fields, comp);
                push(routed_path(weights, fields, &corr.members, b, u, false)?);
            }
        }
        None => {
            for comp in z_branches.iter().chain(&w_branches) {
                push(fields.path_through(weights, best_vertex(fields, comp))?);
            }
        }
    }

    Ok(NetworkClass { n, m, splitter, normal: splitter.is_some() && stable, witnesses })
}

fn find_splitter(
    weights: &WeightGrid,
    fields: &PairFields,
    corr: &Corridor,
    r: f64,
) -> Result<Option<VertexId>> {
    let (z, w) = (fields.z(), fields.w());
    let half = 0.5 * fields.pair_distance();
    let geodesic = extract_geodesic(&fields.from_z, w)?;
    let mut candidates: Vec<VertexId> = geodesic
        .vertices()
        .iter()
        .copied()
        .filter(|&u| fields.from_z.distance(u) >= r && fields.from_w.distance(u) >= r)
        .collect();
    candidates.sort_by(|&a, &b| {
        let ka = (fields.from_z.distance(a) - half).abs();
        let kb = (fields.from_z.distance(b) - half).abs();
        ka.total_cmp(&kb).then(a.cmp(&b))
    });
    let side = weights.side();
    for u in candidates {
        let mut remaining = corr.members.clone();
        remaining.remove(u);
        for &(dc, dr) in &DIRECTIONS {
            if let Some(x) = offset(side, u, dc, dr) {
                remaining.remove(x);
            }
        }
        if !remaining.contains(z) || !remaining.contains(w) {
            continue;
        }
        if !connected_within(side, &remaining, z, w) {
            return Ok(Some(u));
        }
    }
    Ok(None)
}

/// `z -> b -> u -> w` (z-side branch) or `z -> u -> b -> w` (w-side branch),
/// with the middle leg routed inside the corridor.
fn routed_path(
    weights: &WeightGrid,
    fields: &PairFields,
    corridor: &VertexSet,
    b: VertexId,
    u: VertexId,
    z_side: bool,
) -> Result<LatticePath> {
    let (first, second) = if z_side { (b, u) } else { (u, b) };
    let mut walk = tree_chain(&fields.from_z, first);
    walk.reverse();
    let middle = internal_shortest_path(weights, corridor, first, second)?
        .ok_or_else(|| Error::Precondition("branch vertex cut off from splitter".into()))?;
    walk.extend(middle.into_iter().skip(1));
    walk.extend(tree_chain(&fields.from_w, second).into_iter().skip(1));
    LatticePath::from_vertices(weights, remove_loops(walk))
}

/// Paths `P^0..P^n` with private marks `u_1..u_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnEvidence {
    /// `paths[0]` is the unmarked path.
    pub paths: Vec<LatticePath>,
    pub marks: Vec<VertexId>,
}

impl SnEvidence {
    pub fn n(&self) -> usize {
        self.marks.len()
    }

    /// More than `floor(2 d_gamma)` marked paths cannot occur in the
    /// continuum; on the lattice this is an anomaly to count, not an error.
    pub fn exceeds_dimension_bound(&self, d_gamma: f64) -> bool {
        self.n() > (2.0 * d_gamma).floor() as usize
    }
}

/// Look for private marks making the family a witness of non-overlap.
///
/// Every path but one must own a vertex hit by no other path in the family;
/// the path without one (if any) takes the unmarked role. Lengths must agree
/// within `slack`. Marks are the private vertices nearest the middle of their
/// path.
pub fn detect_sn(paths: &[LatticePath], slack: f64) -> Result<Option<SnEvidence>> {
    let Some(first) = paths.first() else {
        return Ok(None);
    };
    if paths.iter().any(|p| p.source() != first.source() || p.target() != first.target()) {
        return Err(Error::EndpointMismatch);
    }
    if paths.len() < 2 {
        return Ok(None);
    }
    let min = paths.iter().map(LatticePath::length).fold(f64::INFINITY, f64::min);
    let max = paths.iter().map(LatticePath::length).fold(0.0, f64::max);
    if max - min > slack {
        return Ok(None);
    }
    let mut hits: HashMap<VertexId, usize> = HashMap::new();
    for p in paths {
        for &v in p.vertices() {
            *hits.entry(v).or_default() += 1;
        }
    }
    let private: Vec<Option<VertexId>> = paths
        .iter()
        .map(|p| {
            let mid = p.vertices().len() as f64 / 2.0;
            p.vertices()
                .iter()
                .enumerate()
                .filter(|(_, v)| hits[v] == 1)
                .min_by(|a, b| (a.0 as f64 - mid).abs().total_cmp(&(b.0 as f64 - mid).abs()))
                .map(|(_, &v)| v)
        })
        .collect();
    let unmarked: Vec<usize> = (0..paths.len()).filter(|&i| private[i].is_none()).collect();
    let zero = match unmarked.as_slice() {
        [] => 0,
        [only] => *only,
        _ => return Ok(None),
    };
    let mut ordered = vec![paths[zero].clone()];
    let mut marks = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        if i != zero {
            ordered.push(p.clone());
            marks.push(private[i].expect("marked path"));
        }
    }
    Ok(Some(SnEvidence { paths: ordered, marks }))
}

/// Number of maximal runs of `p`'s vertices that are off `q`.
pub fn overlap_components(p: &LatticePath, q: &LatticePath) -> usize {
    let mut runs = 0;
    let mut inside = false;
    for v in p.vertices() {
        let off = !q.contains(*v);
        if off && !inside {
            runs += 1;
        }
        inside = off;
    }
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathRole {
    /// Hits the closed inner disk of the bump.
    Hitter,
    /// Stays off the open outer disk.
    Avoider,
    /// Enters the transition annulus only.
    Grazer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub role: PathRole,
    pub length_before: f64,
    pub length_after: f64,
    /// Original cost of edges with both endpoints in the inner disk.
    pub inner_traversal: f64,
    /// `(1 - exp(-xi * height)) * inner_traversal` for hitters.
    pub required_increase: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub distance_before: f64,
    pub distance_after: f64,
    pub outcomes: Vec<PathOutcome>,
    pub violations: usize,
}

/// Bump the metric near a pair and measure the effect on its near-geodesics.
///
/// Candidates are the exact geodesic plus the multiplicity representatives at
/// `scales`. Avoiders must keep their length bit for bit; hitters must gain
/// at least `(1 - exp(-xi * height)) * inner_traversal` (checked for
/// nonnegative heights).
pub fn perturbation_experiment(
    weights: &WeightGrid,
    z: VertexId,
    w: VertexId,
    bump: &BumpFunction,
    params: &MetricParams,
    scales: CorridorScales,
) -> Result<PerturbationReport> {
    let spec = weights.spec;
    for v in [z, w] {
        if spec.point(v).dist(bump.center) < bump.outer_radius + spec.mesh {
            return Err(Error::Precondition(format!(
                "bump support meets the mesh ball around vertex {v}"
            )));
        }
    }
    let fields = PairFields::new(weights, z, w)?;
    let mut paths = vec![extract_geodesic(&fields.from_z, w)?];
    if fields.pair_distance() > 4.0 * scales.rho {
        for p in multiplicity_with(weights, &fields, scales.delta, scales.rho)?.representatives {
            if !paths.iter().any(|q| q.vertices == p.vertices) {
                paths.push(p);
            }
        }
    }
    let mut report = perturbation_for_paths(weights, &paths, bump, params);
    report.distance_before = fields.pair_distance();
    let bumped = apply_weyl(weights, |p| bump.eval(p), params);
    report.distance_after = crate::metric::distance(&bumped, z, w)?;
    Ok(report)
}

/// Perturbation bookkeeping for an explicit path family.
pub fn perturbation_for_paths(
    weights: &WeightGrid,
    paths: &[LatticePath],
    bump: &BumpFunction,
    params: &MetricParams,
) -> PerturbationReport {
    let spec = weights.spec;
    let bumped = apply_weyl(weights, |p| bump.eval(p), params);
    let factor = 1.0 - (-params.xi * bump.height).exp();
    let outcomes: Vec<PathOutcome> = paths
        .iter()
        .map(|path| {
            let verts = path.vertices();
            let in_inner = |v: VertexId| bump.in_inner_disk(spec.point(v));
            let role = if verts.iter().any(|&v| in_inner(v)) {
                PathRole::Hitter
            } else if verts.iter().all(|&v| !bump.in_outer_disk(spec.point(v))) {
                PathRole::Avoider
            } else {
                PathRole::Grazer
            };
            let length_before = path.length_under(weights);
            let length_after = path.length_under(&bumped);
            let inner_traversal: f64 = verts
                .windows(2)
                .filter(|e| in_inner(e[0]) && in_inner(e[1]))
                .map(|e| weights.edge_cost(e[0], e[1]))
                .sum();
            let required_increase =
                if role == PathRole::Hitter { factor * inner_traversal } else { 0.0 };
            let ok = match role {
                PathRole::Avoider => length_after.to_bits() == length_before.to_bits(),
                PathRole::Hitter if bump.height >= 0.0 => {
                    length_after - length_before >= required_increase * (1.0 - 1e-12)
                }
                _ => true,
            };
            PathOutcome { role, length_before, length_after, inner_traversal, required_increase, ok }
        })
        .collect();
    let violations = outcomes.iter().filter(|o| !o.ok).count();
    PerturbationReport { distance_before: f64::NAN, distance_after: f64::NAN, outcomes, violations }
}
