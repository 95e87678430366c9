//! Square-lattice indexing shared by every module.
//!
//! Vertex ids are row-major: `id = row * side + col`. Column grows with the
//! plane x coordinate and row grows with y, so "counterclockwise" means the
//! usual orientation of the plane.

use serde::{Deserialize, Serialize};

pub type VertexId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `max(|p|, 1)`.
    pub fn norm_plus(self) -> f64 {
        self.norm().max(1.0)
    }
}

/// Neighbor offsets `(dcol, drow)` in counterclockwise order starting east.
pub const DIRECTIONS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// The four axis-aligned offsets.
pub const AXIS_DIRECTIONS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[inline]
pub fn coords(side: usize, v: VertexId) -> (usize, usize) {
    (v % side, v / side)
}

#[inline]
pub fn vertex(side: usize, col: usize, row: usize) -> VertexId {
    row * side + col
}

/// Neighbor of `v` at offset `(dc, dr)`, or `None` off the grid.
#[inline]
pub fn offset(side: usize, v: VertexId, dc: i64, dr: i64) -> Option<VertexId> {
    let (c, r) = coords(side, v);
    let nc = c as i64 + dc;
    let nr = r as i64 + dr;
    if nc < 0 || nr < 0 || nc >= side as i64 || nr >= side as i64 {
        None
    } else {
        Some(nr as usize * side + nc as usize)
    }
}

/// Whether `u` and `v` are distinct 8-neighbors.
pub fn adjacent(side: usize, u: VertexId, v: VertexId) -> bool {
    let (uc, ur) = coords(side, u);
    let (vc, vr) = coords(side, v);
    u != v && uc.abs_diff(vc) <= 1 && ur.abs_diff(vr) <= 1
}

/// Whether the 8-neighbor step `u -> v` is diagonal.
pub fn is_diagonal(side: usize, u: VertexId, v: VertexId) -> bool {
    let (uc, ur) = coords(side, u);
    let (vc, vr) = coords(side, v);
    uc != vc && ur != vr
}

/// Dense membership set over the vertices of one grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    bits: Vec<bool>,
    len: usize,
}

impl VertexSet {
    pub fn empty(vertex_count: usize) -> Self {
        VertexSet { bits: vec![false; vertex_count], len: 0 }
    }

    pub fn full(vertex_count: usize) -> Self {
        VertexSet { bits: vec![true; vertex_count], len: vertex_count }
    }

    pub fn from_ids(vertex_count: usize, ids: impl IntoIterator<Item = VertexId>) -> Self {
        let mut set = Self::empty(vertex_count);
        for v in ids {
            set.insert(v);
        }
        set
    }

    pub fn from_predicate(vertex_count: usize, mut keep: impl FnMut(VertexId) -> bool) -> Self {
        let bits: Vec<bool> = (0..vertex_count).map(&mut keep).collect();
        let len = bits.iter().filter(|&&b| b).count();
        VertexSet { bits, len }
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.bits.get(v).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, v: VertexId) -> bool {
        if self.bits[v] {
            false
        } else {
            self.bits[v] = true;
            self.len += 1;
            true
        }
    }

    pub fn remove(&mut self, v: VertexId) -> bool {
        if self.bits[v] {
            self.bits[v] = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the ambient vertex universe.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.iter().all(|v| other.contains(v))
    }

    pub fn intersect(&self, other: &VertexSet) -> VertexSet {
        VertexSet::from_predicate(self.universe(), |v| self.contains(v) && other.contains(v))
    }
}

/// 8-connected components of `set`, each sorted ascending, ordered by their
/// smallest vertex.
pub fn components(side: usize, set: &VertexSet) -> Vec<Vec<VertexId>> {
    let mut label = vec![usize::MAX; set.universe()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in set.iter() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = vec![start];
        label[start] = id;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(dc, dr) in &DIRECTIONS {
                if let Some(u) = offset(side, v, dc, dr) {
                    if set.contains(u) && label[u] == usize::MAX {
                        label[u] = id;
                        comp.push(u);
                        stack.push(u);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Whether `to` is reachable from `from` through 8-steps inside `set`.
pub fn connected_within(side: usize, set: &VertexSet, from: VertexId, to: VertexId) -> bool {
    if !set.contains(from) || !set.contains(to) {
        return false;
    }
    let mut seen = VertexSet::empty(set.universe());
    let mut stack = vec![from];
    seen.insert(from);
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        for &(dc, dr) in &DIRECTIONS {
            if let Some(u) = offset(side, v, dc, dr) {
                if set.contains(u) && seen.insert(u) {
                    stack.push(u);
                }
            }
        }
    }
    false
}
