//! Lattice laboratory for Liouville first-passage percolation.
//!
//! The crate samples discrete whole-plane GFF approximations on a square
//! lattice, turns their heat-kernel mollifications into LFPP vertex weights,
//! and runs exact shortest-path machinery on top: geodesic extraction,
//! near-geodesic corridors, multiplicity and network classification,
//! filled metric balls with confluence censuses, LQG area measure with
//! scaling-exponent estimators, and the independent-set bound machinery used
//! to cap the number of geodesics joining two points.

pub mod balls;
pub mod combinatorics;
pub mod error;
pub mod field;
pub mod geodesics;
pub mod lattice;
pub mod measure;
pub mod metric;
mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use field::{BumpFunction, FieldGrid, GridSpec, LogSingularity, Normalization, Provenance};
pub use lattice::{Point, VertexId, VertexSet};
pub use metric::{MetricField, MetricParams, WeightGrid};
