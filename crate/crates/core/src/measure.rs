//! Lattice area measure and log-log scaling estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldGrid, GridSpec};
use crate::lattice::{VertexId, VertexSet};
use crate::metric::{sssp, truncated_sssp, MetricParams, WeightGrid};
use crate::stats::linear_fit;

/// Per-vertex masses `mesh^2 * s^(gamma^2/2) * exp(gamma * h_s(v))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMeasure {
    pub spec: GridSpec,
    pub scale: f64,
    pub gamma: f64,
    pub cell_mass: Vec<f64>,
}

impl AreaMeasure {
    pub fn total(&self) -> f64 {
        self.cell_mass.iter().sum()
    }

    pub fn mass_of(&self, set: &VertexSet) -> f64 {
        set.iter().map(|v| self.cell_mass[v]).sum()
    }
}

/// `field` must be mollified at exactly `scale`.
pub fn area_measure(field: &FieldGrid, params: &MetricParams, scale: f64) -> Result<AreaMeasure> {
    let eps = field
        .provenance
        .mollification()
        .ok_or_else(|| Error::WrongProvenance("area measure needs a mollified field".into()))?;
    if (eps - scale).abs() > 1e-12 * scale {
        return Err(Error::WrongProvenance(format!("field mollified at {eps}, measure scale {scale}")));
    }
    let gamma = params.gamma;
    let prefactor = field.spec.mesh * field.spec.mesh * scale.powf(gamma * gamma / 2.0);
    let cell_mass: Vec<f64> = field.values.iter().map(|&h| prefactor * (gamma * h).exp()).collect();
    if let Some(bad) = cell_mass.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidParams(format!("cell mass at vertex {bad} is {}", cell_mass[bad])));
    }
    Ok(AreaMeasure { spec: field.spec, scale, gamma, cell_mass })
}

/// A log-log fit over a window of scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
    /// Half-open index range used for the fit.
    pub window: (usize, usize),
}

/// Drop two scales at each end when at least seven are given.
pub fn fit_window(count: usize) -> (usize, usize) {
    if count >= 7 {
        (2, count - 2)
    } else {
        (0, count)
    }
}

fn fit(scales: Vec<f64>, values: Vec<f64>, xs: Vec<f64>, ys: Vec<f64>) -> Result<DimensionEstimate> {
    let window = fit_window(xs.len());
    let f = linear_fit(&xs[window.0..window.1], &ys[window.0..window.1])
        .ok_or_else(|| Error::InvalidParams("log-log fit needs two distinct scales".into()))?;
    Ok(DimensionEstimate { scales, values, slope: f.slope, stderr: f.slope_stderr, window })
}

/// Masses of the metric balls `B_r(center)` and the slope of
/// `log mass` against `log r`.
pub fn ball_volume_curve(
    weights: &WeightGrid,
    measure: &AreaMeasure,
    center: VertexId,
    radii: &[f64],
) -> Result<DimensionEstimate> {
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParams("radii must be positive".into()));
    }
    let mf = sssp(weights, center)?;
    let mut by_distance: Vec<(f64, f64)> = mf
        .distances
        .iter()
        .zip(&measure.cell_mass)
        .map(|(&d, &m)| (d, m))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix = Vec::with_capacity(by_distance.len());
    let mut acc = 0.0;
    for &(_, m) in &by_distance {
        acc += m;
        prefix.push(acc);
    }
    let masses: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let k = by_distance.partition_point(|&(d, _)| d <= r);
            if k == 0 { 0.0 } else { prefix[k - 1] }
        })
        .collect();
    let xs = radii.iter().map(|r| r.ln()).collect();
    let ys = masses.iter().map(|m| m.ln()).collect();
    fit(radii.to_vec(), masses, xs, ys)
}

/// Greedy cover of `marked` by metric balls of radius `epsilon` centered at
/// marked vertices, taken in id order.
pub fn greedy_cover(weights: &WeightGrid, marked: &VertexSet, epsilon: f64) -> Result<Vec<VertexId>> {
    let mut covered = VertexSet::empty(marked.universe());
    let mut centers = Vec::new();
    for v in marked.iter() {
        if covered.contains(v) {
            continue;
        }
        centers.push(v);
        for (u, _) in truncated_sssp(weights, v, epsilon)? {
            covered.insert(u);
        }
    }
    Ok(centers)
}

/// Covering numbers `N(eps)` of `marked` and the slope of `log N` against
/// `log(1/eps)`.
///
/// A cover at a smaller radius also covers at a larger one, so each reported
/// count is the least greedy count over all radii not exceeding it; the
/// reported sequence is therefore nonincreasing in `eps`.
pub fn covering_dimension(marked: &VertexSet, weights: &WeightGrid, radii: &[f64]) -> Result<DimensionEstimate> {
    if marked.is_empty() {
        return Err(Error::InvalidParams("empty marked set".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParams("radii must be positive".into()));
    }
    let greedy: Vec<usize> = radii
        .par_iter()
        .map(|&r| greedy_cover(weights, marked, r).map(|c| c.len()))
        .collect::<Result<_>>()?;
    let counts: Vec<f64> = radii
        .iter()
        .map(|&r| {
            radii
                .iter()
                .zip(&greedy)
                .filter(|(&q, _)| q <= r)
                .map(|(_, &n)| n)
                .min()
                .expect("r itself qualifies") as f64
        })
        .collect();
    let xs = radii.iter().map(|r| -r.ln()).collect();
    let ys = counts.iter().map(|n| n.ln()).collect();
    fit(radii.to_vec(), counts, xs, ys)
}

/// Geometric sequence of `count` radii from `lo` to `hi`.
pub fn geometric_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mollify, sample_gff, Provenance};

    #[test]
    fn flat_field_masses() {
        let spec = GridSpec::centered(16, 0.5).unwrap();
        let f = FieldGrid::constant(spec, 0.0, Provenance::Mollified { epsilon: 1.0 }).unwrap();
        let p = MetricParams::new(0.5, Some(2.1), 1.0).unwrap();
        let m = area_measure(&f, &p, 1.0).unwrap();
        assert!(m.cell_mass.iter().all(|&x| x == 0.25));
        assert!(area_measure(&f, &p, 2.0).is_err());
    }

    #[test]
    fn weyl_constant_scales_masses() {
        let spec = GridSpec::centered(32, 0.25).unwrap();
        let h = mollify(&sample_gff(spec, 3).unwrap(), 0.5).unwrap();
        let p = MetricParams::new(1.0, Some(3.0), 1.0).unwrap();
        let a = area_measure(&h, &p, 0.5).unwrap();
        let b = area_measure(&h.shifted(0.7), &p, 0.5).unwrap();
        for (x, y) in a.cell_mass.iter().zip(&b.cell_mass) {
            assert!((y / x - (0.7f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_cover() {
        let w = WeightGrid::uniform(GridSpec::new(8, 1.0, (0.0, 0.0)).unwrap(), 1.0).unwrap();
        let marked = VertexSet::from_ids(64, [10]);
        let est = covering_dimension(&marked, &w, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(est.values.iter().all(|&n| n == 1.0));
        assert!(est.slope.abs() < 1e-12);
    }

    #[test]
    fn window_rule() {
        assert_eq!(fit_window(5), (0, 5));
        assert_eq!(fit_window(9), (2, 7));
    }

    #[test]
    fn radii_endpoints() {
        let r = geometric_radii(0.5, 8.0, 5);
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[4] - 8.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }
}
