//! Discrete whole-plane GFF proxies and field surgery.
//!
//! Fields live on a periodic square lattice for sampling and mollification
//! (spectral, no padding). The whole-plane normalization is imitated by
//! subtracting the discrete average over the vertices within one mesh of the
//! unit circle. Geometric experiments should stay in the central quarter of
//! the grid where the torus wrap is far away.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{coords, Point, VertexId};
use crate::spectral::{angular_frequency, filter_real, laplacian_eigenvalue, Fft2};

/// Number of trapezoid nodes used for circle averages of `log|u - z|`.
pub const CIRCLE_QUADRATURE_NODES: usize = 4096;

/// Minimum side count accepted by the samplers.
pub const MIN_SAMPLING_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub side_count: usize,
    pub mesh: f64,
    /// Plane coordinates of vertex `(col, row) = (0, 0)`.
    pub origin_offset: (f64, f64),
}

impl GridSpec {
    /// Lattices smaller than 2x2 or with a non-positive mesh are rejected.
    /// Samplers additionally require `side_count >= 16` and a power of two.
    pub fn new(side_count: usize, mesh: f64, origin_offset: (f64, f64)) -> Result<Self> {
        if side_count < 2 {
            return Err(Error::InvalidGrid(format!("side count {side_count} < 2")));
        }
        if !(mesh.is_finite() && mesh > 0.0) {
            return Err(Error::InvalidGrid(format!("mesh {mesh} must be positive")));
        }
        if !(origin_offset.0.is_finite() && origin_offset.1.is_finite()) {
            return Err(Error::InvalidGrid("origin offset must be finite".into()));
        }
        Ok(GridSpec { side_count, mesh, origin_offset })
    }

    /// Grid whose vertex `(side/2, side/2)` sits at the plane origin.
    pub fn centered(side_count: usize, mesh: f64) -> Result<Self> {
        let half = (side_count / 2) as f64 * mesh;
        Self::new(side_count, mesh, (-half, -half))
    }

    pub fn vertex_count(&self) -> usize {
        self.side_count * self.side_count
    }

    /// Side length of the periodic domain.
    pub fn period(&self) -> f64 {
        self.side_count as f64 * self.mesh
    }

    pub fn point(&self, v: VertexId) -> Point {
        let (c, r) = coords(self.side_count, v);
        Point::new(
            self.origin_offset.0 + c as f64 * self.mesh,
            self.origin_offset.1 + r as f64 * self.mesh,
        )
    }

    /// Vertex nearest to `p`, if `p` lies within half a mesh of the grid.
    pub fn nearest_vertex(&self, p: Point) -> Option<VertexId> {
        let c = ((p.x - self.origin_offset.0) / self.mesh).round();
        let r = ((p.y - self.origin_offset.1) / self.mesh).round();
        let n = self.side_count as f64;
        if c < 0.0 || r < 0.0 || c >= n || r >= n {
            None
        } else {
            Some(r as usize * self.side_count + c as usize)
        }
    }

    /// Vertex at exactly `p` (to 1e-9 mesh), if any.
    pub fn vertex_at(&self, p: Point) -> Option<VertexId> {
        let v = self.nearest_vertex(p)?;
        (self.point(v).dist(p) <= 1e-9 * self.mesh).then_some(v)
    }

    /// Whether the grid reaches the unit circle used for normalization.
    pub fn covers_unit_disk(&self) -> bool {
        self.period() >= 4.0
    }

    /// Vertices of the central quarter `[side/4, 3 side/4)^2`.
    pub fn in_central_quarter(&self, v: VertexId) -> bool {
        let (c, r) = coords(self.side_count, v);
        let lo = self.side_count / 4;
        let hi = 3 * self.side_count / 4;
        (lo..hi).contains(&c) && (lo..hi).contains(&r)
    }

    fn check_sampling(&self) -> Result<()> {
        if !self.side_count.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.side_count));
        }
        if self.side_count < MIN_SAMPLING_SIDE {
            return Err(Error::InvalidGrid(format!(
                "side count {} < {MIN_SAMPLING_SIDE}",
                self.side_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    ZeroCircleAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    RawGff,
    Mollified { epsilon: f64 },
    /// Pointwise surgery on a field; `epsilon` is the mollification scale of
    /// the underlying field, if it was mollified.
    Surgered { epsilon: Option<f64> },
}

impl Provenance {
    /// Mollification scale carried by this field, if any.
    pub fn mollification(&self) -> Option<f64> {
        match *self {
            Provenance::RawGff => None,
            Provenance::Mollified { epsilon } => Some(epsilon),
            Provenance::Surgered { epsilon } => epsilon,
        }
    }

    fn surgered(self) -> Provenance {
        Provenance::Surgered { epsilon: self.mollification() }
    }
}

/// A real scalar field on the vertices of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub seed: u64,
    pub provenance: Provenance,
}

impl FieldGrid {
    /// Wrap raw values. Fails on a length mismatch or non-finite entries.
    pub fn from_values(spec: GridSpec, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != spec.vertex_count() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                spec.vertex_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at vertex {i}")));
        }
        Ok(FieldGrid { spec, values, normalization: Normalization::None, seed: 0, provenance })
    }

    pub fn constant(spec: GridSpec, value: f64, provenance: Provenance) -> Result<Self> {
        Self::from_values(spec, vec![value; spec.vertex_count()], provenance)
    }

    pub fn value_at(&self, v: VertexId) -> f64 {
        self.values[v]
    }

    /// Discrete average over the vertices within one mesh of the unit circle.
    pub fn circle_average(&self) -> Result<f64> {
        let (sum, count) = unit_circle_vertices(&self.spec)
            .fold((0.0, 0usize), |(s, n), v| (s + self.values[v], n + 1));
        if count == 0 {
            return Err(Error::NoUnitCircle);
        }
        Ok(sum / count as f64)
    }

    /// Subtract the circle average so it becomes zero.
    pub fn renormalized(mut self) -> Result<Self> {
        let avg = self.circle_average()?;
        for v in self.values.iter_mut() {
            *v -= avg;
        }
        self.normalization = Normalization::ZeroCircleAverage;
        Ok(self)
    }

    /// Shift every value by `c`. Clears the normalization flag unless `c == 0`.
    pub fn shifted(&self, c: f64) -> FieldGrid {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v += c;
        }
        if c != 0.0 {
            out.normalization = Normalization::None;
            out.provenance = out.provenance.surgered();
        }
        out
    }

    pub fn write_fgrid(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let header = FgridHeader {
            side_count: self.spec.side_count,
            mesh: self.spec.mesh,
            origin_offset: self.spec.origin_offset,
            seed: self.seed,
            provenance: self.provenance,
            normalization: self.normalization,
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_fgrid(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn read_from(input: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let header: FgridHeader = serde_json::from_str(line.trim_end())?;
        let spec = GridSpec::new(header.side_count, header.mesh, header.origin_offset)?;
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != spec.vertex_count() * 8 {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                spec.vertex_count() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let mut field = FieldGrid::from_values(spec, values, header.provenance)?;
        field.seed = header.seed;
        field.normalization = header.normalization;
        Ok(field)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FgridHeader {
    side_count: usize,
    mesh: f64,
    origin_offset: (f64, f64),
    seed: u64,
    provenance: Provenance,
    normalization: Normalization,
}

fn unit_circle_vertices(spec: &GridSpec) -> impl Iterator<Item = VertexId> + '_ {
    (0..spec.vertex_count()).filter(move |&v| (spec.point(v).norm() - 1.0).abs() <= spec.mesh)
}

/// Radial bump: `height` on the closed inner disk, 0 outside the open outer
/// disk, and a smooth monotone transition in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub center: Point,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub height: f64,
}

impl BumpFunction {
    pub fn new(center: Point, inner_radius: f64, outer_radius: f64, height: f64) -> Result<Self> {
        if !(inner_radius > 0.0 && outer_radius > inner_radius && height.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bump needs 0 < inner ({inner_radius}) < outer ({outer_radius}) and finite height"
            )));
        }
        Ok(BumpFunction { center, inner_radius, outer_radius, height })
    }

    pub fn eval(&self, p: Point) -> f64 {
        let r = p.dist(self.center);
        if r <= self.inner_radius {
            self.height
        } else if r >= self.outer_radius {
            0.0
        } else {
            let t = (r - self.inner_radius) / (self.outer_radius - self.inner_radius);
            self.height * smooth_step_down(t)
        }
    }

    pub fn in_inner_disk(&self, p: Point) -> bool {
        p.dist(self.center) <= self.inner_radius
    }

    pub fn in_outer_disk(&self, p: Point) -> bool {
        p.dist(self.center) < self.outer_radius
    }
}

/// C-infinity transition from 1 at `t = 0` to 0 at `t = 1`.
fn smooth_step_down(t: f64) -> f64 {
    fn f(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }
    let a = f(1.0 - t);
    a / (a + f(t))
}

/// `-coefficient * log|. - location|`, capped at distance `mesh / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSingularity {
    pub location: Point,
    pub coefficient: f64,
}

impl LogSingularity {
    pub fn eval(&self, p: Point, mesh: f64) -> f64 {
        if self.coefficient == 0.0 {
            return 0.0;
        }
        let r = p.dist(self.location).max(0.5 * mesh);
        -self.coefficient * r.ln()
    }
}

/// Sample a discrete GFF on the torus, normalized to zero circle average.
///
/// The white noise is drawn row-major from a ChaCha8 stream seeded by `seed`,
/// transformed to the Fourier side, scaled by `sqrt(2 pi / lambda)` with
/// `lambda` the lattice Laplacian eigenvalue, and the zero mode dropped. The
/// resulting covariance approximates `-log|z - w|` at resolved scales.
pub fn sample_gff(spec: GridSpec, seed: u64) -> Result<FieldGrid> {
    spec.check_sampling()?;
    let n = spec.side_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let mesh = spec.mesh;
    let values = filter_real(&noise, n, |jx, jy| {
        if jx == 0 && jy == 0 {
            0.0
        } else {
            (2.0 * PI / laplacian_eigenvalue(jx, jy, n, mesh)).sqrt() / mesh
        }
    });
    let mut field = FieldGrid::from_values(spec, values, Provenance::RawGff)?;
    field.seed = seed;
    field.renormalized()
}

/// Heat-kernel mollification `h * p_{eps^2/2}` as a circular convolution.
///
/// The kernel is applied through its continuum symbol `exp(-eps^2 |k|^2 / 4)`,
/// so by Poisson summation the effective kernel is the periodized Gaussian of
/// variance `eps^2 / 2` per coordinate, up to the (negligible once
/// `eps >= mesh`) spectral tail beyond Nyquist.
pub fn mollify(field: &FieldGrid, epsilon: f64) -> Result<FieldGrid> {
    let mesh = field.spec.mesh;
    if !(epsilon >= mesh) {
        return Err(Error::UnderResolved { epsilon, mesh });
    }
    let n = field.spec.side_count;
    let quarter_eps2 = epsilon * epsilon / 4.0;
    let values = filter_real(&field.values, n, |jx, jy| {
        let kx = angular_frequency(jx, n, mesh);
        let ky = angular_frequency(jy, n, mesh);
        (-quarter_eps2 * (kx * kx + ky * ky)).exp()
    });
    let combined = match field.provenance.mollification() {
        Some(prior) => prior.hypot(epsilon),
        None => epsilon,
    };
    Ok(FieldGrid {
        spec: field.spec,
        values,
        normalization: Normalization::None,
        seed: field.seed,
        provenance: Provenance::Mollified { epsilon: combined },
    })
}

pub fn add_bump(field: &FieldGrid, bump: &BumpFunction) -> FieldGrid {
    let mut out = field.clone();
    for (v, value) in out.values.iter_mut().enumerate() {
        *value += bump.eval(field.spec.point(v));
    }
    out.provenance = field.provenance.surgered();
    let d = bump.center.norm();
    let band = field.spec.mesh;
    let meets_circle = d - bump.outer_radius < 1.0 + band && d + bump.outer_radius > 1.0 - band;
    if meets_circle && bump.height != 0.0 {
        out.normalization = Normalization::None;
    }
    out
}

pub fn add_log_singularity(field: &FieldGrid, sing: &LogSingularity) -> FieldGrid {
    let mut out = field.clone();
    let mesh = field.spec.mesh;
    for (v, value) in out.values.iter_mut().enumerate() {
        *value += sing.eval(field.spec.point(v), mesh);
    }
    out.provenance = field.provenance.surgered();
    if sing.coefficient != 0.0 {
        out.normalization = Normalization::None;
    }
    out
}

/// `c_z = (1/2pi) * integral over the unit circle of log|u - z|^{-1}`,
/// by the periodic trapezoid rule.
pub fn circle_log_average(z: Point) -> f64 {
    let n = CIRCLE_QUADRATURE_NODES;
    let sum: f64 = (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let u = Point::new(theta.cos(), theta.sin());
            -u.dist(z).ln()
        })
        .sum();
    sum / n as f64
}

/// Unnormalized density `|z-w|^{-gamma^2} (|z|_+ |w|_+)^{2 gamma^2}` of the
/// two-point rooted law.
pub fn two_point_density(z: Point, w: Point, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    z.dist(w).powf(-g2) * (z.norm_plus() * w.norm_plus()).powf(2.0 * g2)
}

/// Axis-aligned rectangle in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidParams(format!("degenerate rectangle [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn distance_to(&self, other: &Rect) -> f64 {
        let dx = (other.x0 - self.x1).max(self.x0 - other.x1).max(0.0);
        let dy = (other.y0 - self.y1).max(self.y0 - other.y1).max(0.0);
        dx.hypot(dy)
    }

    fn max_norm(&self) -> f64 {
        [(self.x0, self.y0), (self.x0, self.y1), (self.x1, self.y0), (self.x1, self.y1)]
            .iter()
            .map(|&(x, y)| x.hypot(y))
            .fold(0.0, f64::max)
    }

    fn at(&self, s: f64, t: f64) -> Point {
        Point::new(self.x0 + s * (self.x1 - self.x0), self.y0 + t * (self.y1 - self.y0))
    }
}

/// Field and marked points of the two-point rooted law.
#[derive(Debug, Clone)]
pub struct RootedSample {
    pub field: FieldGrid,
    pub z: Point,
    pub w: Point,
    /// Proposals drawn before acceptance.
    pub proposals: u64,
}

/// Sample `(h - gamma log|.-z| - gamma log|.-w| - gamma c_z - gamma c_w, z, w)`
/// with `(z, w)` drawn from Lebesgue measure on `z_rect x w_rect` weighted
/// by [`two_point_density`].
///
/// Rejection sampling uses a uniform proposal and the envelope
/// `dist(Z, W)^{-gamma^2} (max|z|_+ max|w|_+)^{2 gamma^2}`. The point stream is
/// independent of the field's noise stream. The returned field is
/// re-normalized to zero circle average on the lattice.
pub fn sample_two_point_rooted(
    spec: GridSpec,
    seed: u64,
    gamma: f64,
    z_rect: Rect,
    w_rect: Rect,
) -> Result<RootedSample> {
    let gap = z_rect.distance_to(&w_rect);
    if !(gap > 0.0) {
        return Err(Error::Precondition("rectangles must be at positive distance".into()));
    }
    let g2 = gamma * gamma;
    let envelope =
        gap.powf(-g2) * (z_rect.max_norm().max(1.0) * w_rect.max_norm().max(1.0)).powf(2.0 * g2);
    let rate = expected_acceptance(&z_rect, &w_rect, gamma, envelope);
    if rate < 1e-6 {
        return Err(Error::DegenerateRejection(rate));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut proposals = 0u64;
    let (z, w) = loop {
        proposals += 1;
        let z = z_rect.at(rng.random(), rng.random());
        let w = w_rect.at(rng.random(), rng.random());
        let u: f64 = rng.random();
        if u * envelope <= two_point_density(z, w, gamma) {
            break (z, w);
        }
    };

    let h = sample_gff(spec, seed)?;
    let shift = -gamma * circle_log_average(z) - gamma * circle_log_average(w);
    let rooted = add_log_singularity(&h, &LogSingularity { location: z, coefficient: gamma });
    let rooted = add_log_singularity(&rooted, &LogSingularity { location: w, coefficient: gamma });
    let field = rooted.shifted(shift).renormalized()?;
    Ok(RootedSample { field, z, w, proposals })
}

/// Mean of density / envelope on a midpoint lattice over `Z x W`.
fn expected_acceptance(z_rect: &Rect, w_rect: &Rect, gamma: f64, envelope: f64) -> f64 {
    const K: usize = 12;
    let nodes: Vec<f64> = (0..K).map(|i| (i as f64 + 0.5) / K as f64).collect();
    let mut total = 0.0;
    for &zs in &nodes {
        for &zt in &nodes {
            let z = z_rect.at(zs, zt);
            for &ws in &nodes {
                for &wt in &nodes {
                    total += two_point_density(z, w_rect.at(ws, wt), gamma);
                }
            }
        }
    }
    total / (K.pow(4) as f64) / envelope
}

/// Spectral helper exposed for tests and diagnostics: the torus Green's
/// function of the sampler evaluated at lattice offset `(dc, dr)`.
pub fn lattice_green(spec: &GridSpec, dc: usize, dr: usize) -> f64 {
    let n = spec.side_count;
    let fft = Fft2::new(n);
    let mut buf = vec![rustfft::num_complex::Complex64::new(0.0, 0.0); n * n];
    for jy in 0..n {
        for jx in 0..n {
            if jx != 0 || jy != 0 {
                let lam = laplacian_eigenvalue(jx, jy, n, spec.mesh);
                buf[jy * n + jx].re = 2.0 * PI / lam / (spec.mesh * spec.mesh);
            }
        }
    }
    fft.inverse(&mut buf);
    buf[dr * n + dc].re
}
