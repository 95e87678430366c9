//! Lattice LFPP metric: vertex weights, exact shortest paths, and the
//! lattice forms of the metric axioms.
//!
//! A vertex carries `mesh * exp(xi * h_eps(v)) / norm_constant`; an edge of
//! the 8-neighbor stencil costs the mean of its endpoint weights, times
//! `sqrt(2)` on diagonals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{mollify, FieldGrid, GridSpec};
use crate::lattice::{coords, offset, Point, VertexId, VertexSet, DIRECTIONS};
use crate::stats::median;

/// `sqrt(8/3)`, the one coupling with a known dimension exponent.
pub const GAMMA_PURE_GRAVITY: f64 = 1.632_993_161_855_452;

/// Slack allowed by the edge-relaxation certificate.
pub const RELAXATION_TOLERANCE: f64 = 1e-12;

const NO_PREDECESSOR: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub gamma: f64,
    pub d_gamma: f64,
    pub xi: f64,
    pub q: f64,
    pub norm_constant: f64,
}

impl MetricParams {
    /// `d_gamma` may be omitted only at `gamma = sqrt(8/3)`, where it is 4.
    ///
    /// Elsewhere it must be supplied. Known rigorous bounds place it in
    /// `(2, 4.1]` throughout `gamma in (0, 2)`, and it tends to 2 as
    /// `gamma -> 0`.
    pub fn new(gamma: f64, d_gamma: Option<f64>, norm_constant: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParams(format!("gamma {gamma} not in (0, 2)")));
        }
        let d_gamma = match d_gamma {
            Some(d) => d,
            None if (gamma - GAMMA_PURE_GRAVITY).abs() < 1e-12 => 4.0,
            None => {
                return Err(Error::InvalidParams(format!(
                    "d_gamma must be supplied for gamma = {gamma}"
                )))
            }
        };
        if !(d_gamma > 2.0 && d_gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("d_gamma {d_gamma} must exceed 2")));
        }
        if !(norm_constant > 0.0 && norm_constant.is_finite()) {
            return Err(Error::InvalidParams(format!("norm constant {norm_constant} must be positive")));
        }
        Ok(MetricParams {
            gamma,
            d_gamma,
            xi: gamma / d_gamma,
            q: 2.0 / gamma + gamma / 2.0,
            norm_constant,
        })
    }

    pub fn with_norm_constant(self, norm_constant: f64) -> Result<Self> {
        Self::new(self.gamma, Some(self.d_gamma), norm_constant)
    }
}

/// LFPP vertex weights on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    pub spec: GridSpec,
    pub vertex_weights: Vec<f64>,
}

impl WeightGrid {
    /// Wrap hand-built weights; every weight must be positive and finite.
    pub fn from_weights(spec: GridSpec, vertex_weights: Vec<f64>) -> Result<Self> {
        if vertex_weights.len() != spec.vertex_count() {
            return Err(Error::InvalidGrid(format!(
                "expected {} weights, got {}",
                spec.vertex_count(),
                vertex_weights.len()
            )));
        }
        let bad: Vec<VertexId> = vertex_weights
            .iter()
            .enumerate()
            .filter(|(_, w)| !(w.is_finite() && **w > 0.0))
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::WeightOverflow { vertices: bad });
        }
        Ok(WeightGrid { spec, vertex_weights })
    }

    pub fn uniform(spec: GridSpec, weight: f64) -> Result<Self> {
        Self::from_weights(spec, vec![weight; spec.vertex_count()])
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.spec.side_count
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_weights.len()
    }

    /// Cost of the edge `u -> v`. Symmetric bit for bit.
    #[inline]
    pub fn edge_cost(&self, u: VertexId, v: VertexId) -> f64 {
        let base = 0.5 * (self.vertex_weights[u] + self.vertex_weights[v]);
        let (uc, ur) = coords(self.side(), u);
        let (vc, vr) = coords(self.side(), v);
        if uc != vc && ur != vr {
            base * std::f64::consts::SQRT_2
        } else {
            base
        }
    }

    /// 8-neighbors of `v` with their edge costs.
    #[inline]
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        let side = self.side();
        DIRECTIONS.iter().filter_map(move |&(dc, dr)| {
            offset(side, v, dc, dr).map(|u| {
                let base = 0.5 * (self.vertex_weights[v] + self.vertex_weights[u]);
                let cost = if dc != 0 && dr != 0 { base * std::f64::consts::SQRT_2 } else { base };
                (u, cost)
            })
        })
    }

    /// Median over all stencil edges of the edge cost.
    pub fn median_edge_cost(&self) -> f64 {
        let costs: Vec<f64> = (0..self.vertex_count())
            .flat_map(|v| self.neighbors(v).filter(move |&(u, _)| u > v).map(|(_, c)| c))
            .collect();
        median(&costs).unwrap_or(0.0)
    }

    pub fn median_vertex_weight(&self) -> f64 {
        median(&self.vertex_weights).unwrap_or(0.0)
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(v))
        }
    }
}

/// Single-source distances and the shortest-path tree.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub spec: GridSpec,
    pub source: VertexId,
    pub distances: Vec<f64>,
    predecessors: Vec<u32>,
}

impl MetricField {
    pub fn distance(&self, v: VertexId) -> f64 {
        self.distances[v]
    }

    pub fn predecessor(&self, v: VertexId) -> Option<VertexId> {
        match self.predecessors[v] {
            NO_PREDECESSOR => None,
            p => Some(p as VertexId),
        }
    }

    pub fn reached(&self, v: VertexId) -> bool {
        self.distances[v].is_finite()
    }

    /// Largest finite distance.
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }

    /// Every stencil edge satisfies `|d(u) - d(v)| <= cost(u, v) + tol`.
    /// Returns the worst excess over the cost (negative when slack remains).
    pub fn relaxation_excess(&self, weights: &WeightGrid) -> f64 {
        (0..weights.vertex_count())
            .into_par_iter()
            .map(|v| {
                let dv = self.distances[v];
                weights
                    .neighbors(v)
                    .map(|(u, c)| (dv - self.distances[u]).abs() - c)
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    pub fn certify(&self, weights: &WeightGrid) -> bool {
        self.distances[self.source] == 0.0
            && self.relaxation_excess(weights) <= RELAXATION_TOLERANCE
            && self.predecessor_chains_terminate()
    }

    fn predecessor_chains_terminate(&self) -> bool {
        // every predecessor strictly decreases distance, so chains end at the source
        (0..self.distances.len()).all(|v| match self.predecessor(v) {
            None => v == self.source || !self.reached(v),
            Some(p) => self.distances[p] < self.distances[v],
        })
    }

    pub fn write_dfield(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let header = DfieldHeader {
            side_count: self.spec.side_count,
            mesh: self.spec.mesh,
            origin_offset: self.spec.origin_offset,
            source: self.source,
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for d in &self.distances {
            out.write_all(&d.to_le_bytes())?;
        }
        for p in &self.predecessors {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(input: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: DfieldHeader = serde_json::from_str(line.trim_end())?;
        let spec = GridSpec::new(header.side_count, header.mesh, header.origin_offset)?;
        let n = spec.vertex_count();
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != n * 12 {
            return Err(Error::Format(format!("expected {} payload bytes, found {}", n * 12, bytes.len())));
        }
        let (dist_bytes, pred_bytes) = bytes.split_at(n * 8);
        let distances = dist_bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let predecessors = pred_bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if header.source >= n {
            return Err(Error::Format(format!("source {} out of range", header.source)));
        }
        Ok(MetricField { spec, source: header.source, distances, predecessors })
    }

    pub fn read_dfield(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DfieldHeader {
    side_count: usize,
    mesh: f64,
    origin_offset: (f64, f64),
    source: VertexId,
}

/// Turn a mollified (or surgered-mollified) field into LFPP weights.
pub fn build_weights(field: &FieldGrid, params: &MetricParams) -> Result<WeightGrid> {
    if field.provenance.mollification().is_none() {
        return Err(Error::WrongProvenance(format!("{:?}", field.provenance)));
    }
    let scale = field.spec.mesh / params.norm_constant;
    let weights = field.values.iter().map(|&h| scale * (params.xi * h).exp()).collect();
    WeightGrid::from_weights(field.spec, weights)
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: VertexId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, vertex)
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the vertices admitted by `allowed`, stopping once `stop` is
/// settled or the frontier passes `cap`.
fn dijkstra(
    weights: &WeightGrid,
    source: VertexId,
    allowed: Option<&VertexSet>,
    stop: Option<VertexId>,
    cap: f64,
) -> (Vec<f64>, Vec<u32>) {
    let n = weights.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PREDECESSOR; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { dist: 0.0, vertex: source });
    while let Some(HeapEntry { dist: d, vertex: v }) = heap.pop() {
        if settled[v] {
            continue;
        }
        if d > cap {
            break;
        }
        settled[v] = true;
        if stop == Some(v) {
            break;
        }
        for (u, cost) in weights.neighbors(v) {
            if settled[u] || allowed.is_some_and(|set| !set.contains(u)) {
                continue;
            }
            let nd = d + cost;
            if nd < dist[u] {
                dist[u] = nd;
                pred[u] = v as u32;
                heap.push(HeapEntry { dist: nd, vertex: u });
            } else if nd == dist[u] && (v as u32) < pred[u] {
                pred[u] = v as u32;
            }
        }
    }
    (dist, pred)
}

/// Exact single-source shortest paths. Ties go to the smallest vertex id,
/// both in settle order and in predecessor choice.
pub fn sssp(weights: &WeightGrid, source: VertexId) -> Result<MetricField> {
    weights.check_vertex(source)?;
    let (distances, predecessors) = dijkstra(weights, source, None, None, f64::INFINITY);
    Ok(MetricField { spec: weights.spec, source, distances, predecessors })
}

/// [`sssp`] from several sources in parallel.
pub fn sssp_many(weights: &WeightGrid, sources: &[VertexId]) -> Result<Vec<MetricField>> {
    sources.par_iter().map(|&s| sssp(weights, s)).collect()
}

/// Vertices within distance `radius` of `source`, with their distances, in
/// settle order.
pub fn truncated_sssp(weights: &WeightGrid, source: VertexId, radius: f64) -> Result<Vec<(VertexId, f64)>> {
    weights.check_vertex(source)?;
    let (dist, _) = dijkstra(weights, source, None, None, radius);
    let mut within: Vec<(VertexId, f64)> =
        dist.into_iter().enumerate().filter(|&(_, d)| d <= radius).collect();
    within.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(within)
}

/// Single-pair distance by early-exit search; equals `sssp(z).distances[w]`.
pub fn distance(weights: &WeightGrid, z: VertexId, w: VertexId) -> Result<f64> {
    weights.check_vertex(z)?;
    weights.check_vertex(w)?;
    let (dist, _) = dijkstra(weights, z, None, Some(w), f64::INFINITY);
    Ok(dist[w])
}

/// Shortest path constrained to `region`; infinite when `z` and `w` are
/// disconnected inside it.
pub fn internal_distance(
    weights: &WeightGrid,
    region: &VertexSet,
    z: VertexId,
    w: VertexId,
) -> Result<f64> {
    weights.check_vertex(z)?;
    weights.check_vertex(w)?;
    for v in [z, w] {
        if !region.contains(v) {
            return Err(Error::NotInRegion(v));
        }
    }
    let (dist, _) = dijkstra(weights, z, Some(region), Some(w), f64::INFINITY);
    Ok(dist[w])
}

/// Vertex sequence of a shortest `z -> w` path inside `region`, if connected.
pub fn internal_shortest_path(
    weights: &WeightGrid,
    region: &VertexSet,
    z: VertexId,
    w: VertexId,
) -> Result<Option<Vec<VertexId>>> {
    weights.check_vertex(z)?;
    weights.check_vertex(w)?;
    for v in [z, w] {
        if !region.contains(v) {
            return Err(Error::NotInRegion(v));
        }
    }
    let (dist, pred) = dijkstra(weights, z, Some(region), Some(w), f64::INFINITY);
    if !dist[w].is_finite() {
        return Ok(None);
    }
    let mut path = vec![w];
    let mut v = w;
    while v != z {
        v = pred[v] as VertexId;
        path.push(v);
    }
    path.reverse();
    Ok(Some(path))
}

/// Weyl rescaling: multiply each vertex weight by `exp(xi * f(v))`.
pub fn apply_weyl(
    weights: &WeightGrid,
    f: impl Fn(Point) -> f64 + Sync,
    params: &MetricParams,
) -> WeightGrid {
    let spec = weights.spec;
    let vertex_weights = weights
        .vertex_weights
        .par_iter()
        .enumerate()
        .map(|(v, &w)| w * (params.xi * f(spec.point(v))).exp())
        .collect();
    WeightGrid { spec, vertex_weights }
}

/// Median over calibration seeds of the unnormalized distance between the
/// left-middle and right-middle vertices of the central quarter.
pub fn calibrate_norm_constant(
    spec: GridSpec,
    gamma: f64,
    d_gamma: Option<f64>,
    epsilon: f64,
    seeds: &[u64],
) -> Result<f64> {
    let raw = MetricParams::new(gamma, d_gamma, 1.0)?;
    let (a, b) = calibration_pair(&spec);
    let distances = seeds
        .par_iter()
        .map(|&seed| {
            let h = mollify(&crate::field::sample_gff(spec, seed)?, epsilon)?;
            distance(&build_weights(&h, &raw)?, a, b)
        })
        .collect::<Result<Vec<f64>>>()?;
    median(&distances).ok_or_else(|| Error::InvalidParams("no calibration seeds".into()))
}

/// Left-middle and right-middle vertices of the central quarter.
pub fn calibration_pair(spec: &GridSpec) -> (VertexId, VertexId) {
    let n = spec.side_count;
    let row = n / 2;
    (row * n + n / 4, row * n + 3 * n / 4 - 1)
}

/// Outcome of a coordinate-change comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    /// `(D_rescaled(z, w) - D(az, aw)) / D(az, aw)` per retained pair.
    pub residuals: Vec<f64>,
    /// Pairs whose scaled image left the grid.
    pub skipped: usize,
    pub median_abs: Option<f64>,
    pub max_abs: Option<f64>,
}

/// Compare `D_h(az, aw)` with `D_{h(a.) + Q log a}(z, w)` on the same lattice.
///
/// `field` is the unmollified normalized field. The rescaled field takes the
/// lattice value of `h` at `a * p(v)` (wrapping on the torus), so it is the
/// same sampled field seen at `a` times coarser resolution; both sides are then
/// mollified at `epsilon` and measured with `params`. At `a = 1` the two sides
/// coincide exactly. For `a > 1` the residual measures how far the lattice is
/// from the conformal coordinate change law, which holds only in the limit.
pub fn coordinate_change_residual(
    field: &FieldGrid,
    params: &MetricParams,
    epsilon: f64,
    a: u32,
    pairs: &[(VertexId, VertexId)],
) -> Result<ResidualStats> {
    if a == 0 || !a.is_power_of_two() {
        return Err(Error::InvalidParams(format!("scale {a} is not dyadic")));
    }
    let spec = field.spec;
    let af = a as f64;
    let mut scaled_pairs = Vec::new();
    let mut kept = Vec::new();
    let mut skipped = 0;
    for &(z, w) in pairs {
        let image = |v: VertexId| {
            let p = spec.point(v);
            spec.vertex_at(Point::new(af * p.x, af * p.y))
        };
        match (image(z), image(w)) {
            (Some(az), Some(aw)) => {
                kept.push((z, w));
                scaled_pairs.push((az, aw));
            }
            _ => skipped += 1,
        }
    }
    if kept.is_empty() {
        return Ok(ResidualStats { residuals: Vec::new(), skipped, median_abs: None, max_abs: None });
    }

    let original = build_weights(&mollify(field, epsilon)?, params)?;
    let rescaled = if a == 1 {
        original.clone()
    } else {
        let n = spec.side_count;
        let shift = params.q * af.ln();
        let origin = spec.nearest_vertex(Point::ORIGIN).ok_or(Error::NoUnitCircle)?;
        let (oc, or) = coords(n, origin);
        let values = (0..spec.vertex_count())
            .map(|v| {
                let (c, r) = coords(n, v);
                let sc = (oc as i64 + a as i64 * (c as i64 - oc as i64)).rem_euclid(n as i64);
                let sr = (or as i64 + a as i64 * (r as i64 - or as i64)).rem_euclid(n as i64);
                field.values[sr as usize * n + sc as usize] + shift
            })
            .collect();
        let g = FieldGrid::from_values(spec, values, field.provenance)?;
        build_weights(&mollify(&g, epsilon)?, params)?
    };

    let residuals = kept
        .par_iter()
        .zip(scaled_pairs.par_iter())
        .map(|(&(z, w), &(az, aw))| {
            let lhs = distance(&original, az, aw)?;
            let rhs = distance(&rescaled, z, w)?;
            Ok((rhs - lhs) / lhs)
        })
        .collect::<Result<Vec<f64>>>()?;
    let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    Ok(ResidualStats {
        median_abs: median(&abs),
        max_abs: abs.iter().copied().reduce(f64::max),
        residuals,
        skipped,
    })
}
