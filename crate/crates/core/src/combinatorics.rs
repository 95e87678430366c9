//! Independent-set bounds, the overlap graph of a marked path family, and the
//! scan for the largest admissible path count.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::LatticePath;
use crate::lattice::VertexId;

/// Undirected simple graph on `0..vertex_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleGraph {
    vertex_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new(vertex_count: usize) -> Self {
        SimpleGraph { vertex_count, edges: BTreeSet::new() }
    }

    pub fn from_edges(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = SimpleGraph::new(vertex_count);
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if !g.add_edge(a, b) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = SimpleGraph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_edge(a, b);
            }
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = SimpleGraph::new(n);
        for a in 0..n {
            g.add_edge(a, (a + 1) % n);
        }
        g
    }

    pub fn petersen() -> Self {
        let mut g = SimpleGraph::new(10);
        for i in 0..5 {
            g.add_edge(i, (i + 1) % 5);
            g.add_edge(i, i + 5);
            g.add_edge(5 + i, 5 + (i + 2) % 5);
        }
        g
    }

    /// Returns false if the edge was already present (or is a loop).
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        self.edges.insert((a.min(b), a.max(b)))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertex_count).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..self.vertex_count {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    fn adjacency_masks(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.vertex_count];
        for &(a, b) in &self.edges {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        adj
    }
}

/// Largest graph [`independence_number`] accepts.
pub const MAX_ORACLE_VERTICES: usize = 64;

/// Exact maximum independent set size by branch and bound.
pub fn independence_number(g: &SimpleGraph) -> Result<usize> {
    let n = g.vertex_count();
    if n > MAX_ORACLE_VERTICES {
        return Err(Error::InvalidGraph(format!("{n} vertices exceed the oracle limit")));
    }
    let adj = g.adjacency_masks();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = 0;
    mis(&adj, all, 0, &mut best);
    Ok(best)
}

fn mis(adj: &[u64], candidates: u64, size: usize, best: &mut usize) {
    if candidates == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + candidates.count_ones() as usize <= *best {
        return;
    }
    // branch on a vertex of maximum degree within the candidates; vertices of
    // degree at most one can be taken greedily
    let mut pick = None;
    let mut pick_deg = 0;
    let mut rest = candidates;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let d = (adj[v] & candidates).count_ones();
        if d <= 1 {
            mis(adj, candidates & !(1 << v) & !adj[v], size + 1, best);
            return;
        }
        if pick.is_none() || d > pick_deg {
            pick = Some(v);
            pick_deg = d;
        }
    }
    let v = pick.expect("non-empty candidates");
    mis(adj, candidates & !(1 << v) & !adj[v], size + 1, best);
    mis(adj, candidates & !(1 << v), size, best);
}

fn isqrt(x: u128) -> u128 {
    if x < 2 {
        return x;
    }
    let mut r = (x as f64).sqrt() as u128;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// `floor((a - sqrt(r)) / q)` for integers `a >= sqrt(r)`, `r >= 0`, `q > 0`.
fn floor_of_difference(a: u128, r: u128, q: u128) -> u128 {
    let s = isqrt(r);
    if s * s == r {
        (a - s) / q
    } else {
        // sqrt(r) lies strictly between s and s + 1
        (a - s - 1) / q
    }
}

/// `floor(((2E + V + 1) - sqrt((2E + V + 1)^2 - 4 V^2)) / 2)`.
///
/// The guaranteed independent set size in a connected graph with `V`
/// vertices and `E` edges. Evaluated in floating point, falling back to exact
/// integer arithmetic whenever the value is within 1e-6 of an integer.
pub fn independent_set_lower_bound(v: u64, e: u64) -> Result<u64> {
    if v == 0 {
        return Err(Error::InvalidGraph("no vertices".into()));
    }
    let a = 2.0 * e as f64 + v as f64 + 1.0;
    let radicand = a * a - 4.0 * (v as f64) * (v as f64);
    if radicand < -1e-9 * a * a {
        return Err(Error::NegativeRadicand(radicand));
    }
    let x = 0.5 * (a - radicand.max(0.0).sqrt());
    if (x - x.round()).abs() > 1e-6 && a < 2f64.powi(26) {
        return Ok(x.floor() as u64);
    }
    let ai = 2 * e as u128 + v as u128 + 1;
    let ri = ai * ai - 4 * (v as u128) * (v as u128);
    Ok(floor_of_difference(ai, ri, 2) as u64)
}

/// Graph on the paths: `P ~ P'` when `P` passes through the mark of `P'` or
/// vice versa.
pub fn overlap_graph(paths: &[LatticePath], marks: &[VertexId]) -> Result<SimpleGraph> {
    if paths.len() != marks.len() {
        return Err(Error::Precondition(format!("{} paths but {} marks", paths.len(), marks.len())));
    }
    for (i, (p, &u)) in paths.iter().zip(marks).enumerate() {
        if !p.contains(u) {
            return Err(Error::Precondition(format!("mark {u} is not on path {i}")));
        }
    }
    let mut g = SimpleGraph::new(paths.len());
    for i in 0..paths.len() {
        for j in 0..paths.len() {
            if i != j && paths[i].contains(marks[j]) {
                g.add_edge(i, j);
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// Independent-set lower bound on the final graph.
    pub independent_count: u64,
    pub graph: SimpleGraph,
    pub initial_edges: usize,
    pub padding_edges: usize,
    pub connecting_edges: usize,
    /// `E(G0) <= 2V` held but `E(G) > 7V/3`.
    pub inflation_exceeded: bool,
}

/// Pad every degree to at least two, then chain the components together,
/// and evaluate the independent-set bound on the result.
///
/// Padding visits vertices in index order and joins a deficient vertex to the
/// lowest-index non-neighbor that is itself still deficient, or to the
/// lowest-index non-neighbor when none is. Components are then joined in
/// order through their lowest-index vertices. Graphs with fewer than three
/// vertices are evaluated directly.
pub fn reduce_and_bound(g0: &SimpleGraph) -> Result<ReductionReport> {
    let n = g0.vertex_count();
    if n == 0 {
        return Err(Error::InvalidGraph("no vertices".into()));
    }
    let initial_edges = g0.edge_count();
    if n < 3 {
        let alpha = independence_number(g0)? as u64;
        return Ok(ReductionReport {
            independent_count: alpha,
            graph: g0.clone(),
            initial_edges,
            padding_edges: 0,
            connecting_edges: 0,
            inflation_exceeded: false,
        });
    }
    let mut g = g0.clone();
    let mut deg = g.degrees();
    let mut padding_edges = 0;
    for v in 0..n {
        while deg[v] < 2 {
            let free = |u: usize| u != v && !g.has_edge(v, u);
            let u = (0..n)
                .find(|&u| free(u) && deg[u] < 2)
                .or_else(|| (0..n).find(|&u| free(u)))
                .expect("n >= 3 leaves a non-neighbor while degree < 2");
            g.add_edge(v, u);
            deg[v] += 1;
            deg[u] += 1;
            padding_edges += 1;
        }
    }
    let comps = g.components();
    let mut connecting_edges = 0;
    for pair in comps.windows(2) {
        g.add_edge(pair[0][0], pair[1][0]);
        connecting_edges += 1;
    }
    let e = g.edge_count();
    let independent_count = independent_set_lower_bound(n as u64, e as u64)?;
    let inflation_exceeded = 3 * initial_edges <= 6 * n && 3 * e > 7 * n;
    Ok(ReductionReport {
        independent_count,
        graph: g,
        initial_edges,
        padding_edges,
        connecting_edges,
        inflation_exceeded,
    })
}

/// `floor(((17m/3 + 1) - sqrt((17m/3 + 1)^2 - 4 m^2)) / 2)`, computed exactly
/// as `floor(((17m + 3) - sqrt((17m + 3)^2 - 36 m^2)) / 6)`.
pub fn path_count_bound_exact(m: u64) -> u64 {
    let a = 17 * m as u128 + 3;
    let r = a * a - 36 * (m as u128) * (m as u128);
    floor_of_difference(a, r, 6) as u64
}

/// The same quantity in plain double precision.
pub fn path_count_bound_f64(m: u64) -> u64 {
    let a = 17.0 * m as f64 / 3.0 + 1.0;
    let x = 0.5 * (a - (a * a - 4.0 * (m as f64) * (m as f64)).sqrt());
    x.floor() as u64
}

/// Upper end of the scan in [`max_m_bound`].
pub const MAX_M_SCAN: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxMScan {
    pub threshold: u64,
    /// Largest `m` in the scan range with bound `<= threshold`.
    pub largest: u64,
    /// Smallest `m` with bound `> threshold`, if any in range.
    pub first_failing: Option<u64>,
    /// Double precision gave the same bound at every scanned `m`.
    pub precision_stable: bool,
    /// Number of `m` where double precision disagreed.
    pub float_mismatches: u64,
}

/// Scan `m = 1..=MAX_M_SCAN` for the largest `m` whose bound does not exceed
/// `threshold`.
pub fn max_m_bound(threshold: u64) -> MaxMScan {
    let mut largest = 0;
    let mut first_failing = None;
    let mut float_mismatches = 0;
    for m in 1..=MAX_M_SCAN {
        let exact = path_count_bound_exact(m);
        if path_count_bound_f64(m) != exact {
            float_mismatches += 1;
        }
        if exact <= threshold {
            largest = m;
        } else if first_failing.is_none() {
            first_failing = Some(m);
        }
    }
    MaxMScan {
        threshold,
        largest,
        first_failing,
        precision_stable: float_mismatches == 0,
        float_mismatches,
    }
}
