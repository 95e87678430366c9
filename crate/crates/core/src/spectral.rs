use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Square 2D FFT on row-major buffers; the inverse is normalized.
pub(crate) struct Fft2 {
    n: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, false);
        let scale = 1.0 / (self.n * self.n) as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    fn apply(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let plan = if forward { &self.forward } else { &self.inverse };
        // rows are contiguous
        plan.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                column[r] = data[r * n + c];
            }
            plan.process(&mut column);
            for r in 0..n {
                data[r * n + c] = column[r];
            }
        }
    }
}

/// Angular frequency of FFT bin `j` on a period of `n * mesh`.
#[inline]
pub(crate) fn angular_frequency(j: usize, n: usize, mesh: f64) -> f64 {
    let signed = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
    2.0 * PI * signed / (n as f64 * mesh)
}

/// Eigenvalue of the 5-point negative Laplacian on the `n`-torus at bin `(jx, jy)`.
#[inline]
pub(crate) fn laplacian_eigenvalue(jx: usize, jy: usize, n: usize, mesh: f64) -> f64 {
    let tx = 2.0 * PI * jx as f64 / n as f64;
    let ty = 2.0 * PI * jy as f64 / n as f64;
    (4.0 - 2.0 * tx.cos() - 2.0 * ty.cos()) / (mesh * mesh)
}

/// Multiply the spectrum of `values` by `multiplier(jx, jy)` and return the real part.
pub(crate) fn filter_real(
    values: &[f64],
    n: usize,
    multiplier: impl Fn(usize, usize) -> f64,
) -> Vec<f64> {
    let fft = Fft2::new(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    for jy in 0..n {
        for jx in 0..n {
            buf[jy * n + jx] *= multiplier(jx, jy);
        }
    }
    fft.inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let n = 8;
        let values: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = filter_real(&values, n, |_, _| 1.0);
        for (a, b) in values.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frequencies_are_signed() {
        assert_eq!(angular_frequency(0, 8, 1.0), 0.0);
        assert!(angular_frequency(7, 8, 1.0) < 0.0);
        assert!((angular_frequency(1, 8, 0.5) - 2.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(laplacian_eigenvalue(0, 0, 8, 1.0), 0.0);
        assert!((laplacian_eigenvalue(4, 4, 8, 1.0) - 8.0).abs() < 1e-12);
    }
}
