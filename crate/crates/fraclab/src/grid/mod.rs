//! Grid functions: cell-centered samples of compactly supported functions
//! over a cubic box, with interpolation, gradients, norms, and a compact
//! binary serialization.
//!
//! A grid covers the half-open box `[lower, lower + side)^n` with
//! `resolution^n` cells of width `h = side / resolution`; the sample for
//! cell `i` sits at its center `lower + (i + 1/2) h`. On symmetric boxes
//! with even resolution the origin is never a sample point, which keeps
//! kernels with a singularity at zero evaluable at every sample.

pub mod corpus;

use serde::{Deserialize, Serialize};
use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

use crate::numeric::pairwise_sum;

/// Number of boundary cells that must stay identically zero for corpus
/// functions, so that stencils and annular quadrature never read truncated
/// support.
pub const SUPPORT_MARGIN_CELLS: usize = 2;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("unsupported dimension {0}; expected 2 or 3")]
    DimensionUnsupported(usize),
    #[error("resolution {0} is not a power of two >= 16")]
    BadResolution(usize),
    #[error("box side must be positive and finite, got {0}")]
    BadBoxSide(f64),
    #[error("sample at flat index {index} is not finite: {value}")]
    NonFiniteSample { index: usize, value: f64 },
    #[error(
        "support margin violated: |f| = {value:.3e} at cell {index:?}, \
         within {margin} cells of the box boundary"
    )]
    SupportMarginViolated {
        index: [usize; 3],
        value: f64,
        margin: usize,
    },
    #[error("unknown corpus id `{0}`")]
    UnknownCorpusId(String),
    #[error("grids are incompatible: {0}")]
    Incompatible(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("header parse failure: {0}")]
    Header(#[from] serde_json::Error),
    #[error("file does not look like a grid dump: {0}")]
    Format(String),
}

/// The cubic domain `[lower, lower + side)^n`.
///
/// Unused trailing coordinates of `lower` are zero for `n = 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BoxSpec {
    pub n: usize,
    pub lower: [f64; 3],
    pub side: f64,
}

impl BoxSpec {
    pub fn new(n: usize, lower: [f64; 3], side: f64) -> Result<Self, GridError> {
        if n != 2 && n != 3 {
            return Err(GridError::DimensionUnsupported(n));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(GridError::BadBoxSide(side));
        }
        let mut lower = lower;
        if n == 2 {
            lower[2] = 0.0;
        }
        Ok(BoxSpec { n, lower, side })
    }

    /// Symmetric box `[-half, half)^n`.
    pub fn symmetric(n: usize, half: f64) -> Result<Self, GridError> {
        Self::new(n, [-half, -half, -half], half * 2.0)
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        (0..self.n).all(|a| x[a] >= self.lower[a] && x[a] < self.lower[a] + self.side)
    }
}

/// Axis-aligned cube, used both for dyadic cells and for sampling windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub n: usize,
    pub lower: [f64; 3],
    pub side: f64,
}

impl Cube {
    pub fn new(n: usize, lower: [f64; 3], side: f64) -> Self {
        let mut lower = lower;
        if n == 2 {
            lower[2] = 0.0;
        }
        Cube { n, lower, side }
    }

    pub fn contains_point(&self, x: &[f64; 3]) -> bool {
        (0..self.n).all(|a| x[a] >= self.lower[a] && x[a] < self.lower[a] + self.side)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.n as i32)
    }

    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in 0..self.n {
            c[a] = self.lower[a] + 0.5 * self.side;
        }
        c
    }

    /// Euclidean distance from the cube (as a closed set) to a point.
    pub fn distance_to(&self, x: &[f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for a in 0..self.n {
            let lo = self.lower[a];
            let hi = self.lower[a] + self.side;
            let d = if x[a] < lo {
                lo - x[a]
            } else if x[a] > hi {
                x[a] - hi
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2.sqrt()
    }
}

/// Analytic closures carried next to sampled values.
///
/// They are used to refine gradients and to re-sample at other resolutions;
/// they are never serialized.
pub struct AnalyticField {
    pub value: Box<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    pub gradient: Option<Box<dyn Fn(&[f64; 3]) -> [f64; 3] + Send + Sync>>,
}

/// A sampled function on a uniform cell-centered grid.
#[derive(Clone)]
pub struct GridFunction {
    spec: BoxSpec,
    resolution: usize,
    values: Vec<f64>,
    corpus_id: String,
    analytic: Option<Arc<AnalyticField>>,
}

fn valid_resolution(res: usize) -> bool {
    res >= 16 && res.is_power_of_two()
}

impl GridFunction {
    /// Samples `f` at every cell center.
    pub fn from_fn<F: Fn(&[f64; 3]) -> f64 + Sync>(
        spec: BoxSpec,
        resolution: usize,
        corpus_id: &str,
        f: F,
    ) -> Result<Self, GridError> {
        if !valid_resolution(resolution) {
            return Err(GridError::BadResolution(resolution));
        }
        let planes = if spec.n == 3 { resolution } else { 1 };
        let mut values = vec![0.0; planes * resolution * resolution];
        let h = spec.side / resolution as f64;
        for k in 0..planes {
            for j in 0..resolution {
                for i in 0..resolution {
                    let x = [
                        spec.lower[0] + (i as f64 + 0.5) * h,
                        spec.lower[1] + (j as f64 + 0.5) * h,
                        if spec.n == 3 {
                            spec.lower[2] + (k as f64 + 0.5) * h
                        } else {
                            0.0
                        },
                    ];
                    values[(k * resolution + j) * resolution + i] = f(&x);
                }
            }
        }
        Self::from_values(spec, resolution, corpus_id, values)
    }

    /// Wraps precomputed samples; validates shape and finiteness.
    pub fn from_values(
        spec: BoxSpec,
        resolution: usize,
        corpus_id: &str,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        if !valid_resolution(resolution) {
            return Err(GridError::BadResolution(resolution));
        }
        let planes = if spec.n == 3 { resolution } else { 1 };
        let expect = planes * resolution * resolution;
        if values.len() != expect {
            return Err(GridError::Incompatible(format!(
                "value count {} != {expect}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteSample {
                index: pos,
                value: values[pos],
            });
        }
        Ok(GridFunction {
            spec,
            resolution,
            values,
            corpus_id: corpus_id.to_string(),
            analytic: None,
        })
    }

    pub fn with_analytic(mut self, field: Arc<AnalyticField>) -> Self {
        self.analytic = Some(field);
        self
    }

    /// Errors when any sample within the margin band is nonzero.
    pub fn check_support_margin(&self) -> Result<(), GridError> {
        let r = self.resolution;
        let m = SUPPORT_MARGIN_CELLS;
        let planes = if self.spec.n == 3 { r } else { 1 };
        for k in 0..planes {
            for j in 0..r {
                for i in 0..r {
                    let near = i < m
                        || i >= r - m
                        || j < m
                        || j >= r - m
                        || (self.spec.n == 3 && (k < m || k >= r - m));
                    if !near {
                        continue;
                    }
                    let v = self.values[(k * r + j) * r + i];
                    if v != 0.0 {
                        return Err(GridError::SupportMarginViolated {
                            index: [i, j, k],
                            value: v,
                            margin: m,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> BoxSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.spec.side / self.resolution as f64
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.spec.n as i32)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn analytic(&self) -> Option<&Arc<AnalyticField>> {
        self.analytic.as_ref()
    }

    /// Flat index of cell `(i, j, k)`; `k` ignored for `n = 2`.
    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let r = self.resolution;
        if self.spec.n == 3 {
            (idx[2] * r + idx[1]) * r + idx[0]
        } else {
            idx[1] * r + idx[0]
        }
    }

    /// Cell coordinates of a flat index.
    pub fn cell_of(&self, flat: usize) -> [usize; 3] {
        let r = self.resolution;
        if self.spec.n == 3 {
            [flat % r, (flat / r) % r, flat / (r * r)]
        } else {
            [flat % r, flat / r, 0]
        }
    }

    /// Sample point (cell center) for a flat index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.cell_of(flat);
        let h = self.h();
        let mut x = [0.0; 3];
        for a in 0..self.spec.n {
            x[a] = self.spec.lower[a] + (idx[a] as f64 + 0.5) * h;
        }
        x
    }

    /// Multilinear interpolation with zero extension outside the box.
    pub fn interpolate(&self, x: &[f64; 3]) -> f64 {
        let r = self.resolution as isize;
        let h = self.h();
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.spec.n {
            let u = (x[a] - self.spec.lower[a]) / h - 0.5;
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }
        let fetch = |i: isize, j: isize, k: isize| -> f64 {
            if i < 0 || i >= r || j < 0 || j >= r {
                return 0.0;
            }
            if self.spec.n == 3 && (k < 0 || k >= r) {
                return 0.0;
            }
            let kk = if self.spec.n == 3 { k as usize } else { 0 };
            self.values[(kk * self.resolution + j as usize) * self.resolution + i as usize]
        };
        if self.spec.n == 2 {
            let (i, j) = (base[0], base[1]);
            let (fx, fy) = (frac[0], frac[1]);
            fetch(i, j, 0) * (1.0 - fx) * (1.0 - fy)
                + fetch(i + 1, j, 0) * fx * (1.0 - fy)
                + fetch(i, j + 1, 0) * (1.0 - fx) * fy
                + fetch(i + 1, j + 1, 0) * fx * fy
        } else {
            let (i, j, k) = (base[0], base[1], base[2]);
            let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
            let mut acc = 0.0;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let w = (if dx == 0 { 1.0 - fx } else { fx })
                            * (if dy == 0 { 1.0 - fy } else { fy })
                            * (if dz == 0 { 1.0 - fz } else { fz });
                        acc += w * fetch(i + dx as isize, j + dy as isize, k + dz as isize);
                    }
                }
            }
            acc
        }
    }

    /// Pointwise map keeping box and resolution.
    pub fn map<F: Fn(f64) -> f64>(&self, corpus_id: &str, f: F) -> GridFunction {
        GridFunction {
            spec: self.spec,
            resolution: self.resolution,
            values: self.values.iter().map(|&v| f(v)).collect(),
            corpus_id: corpus_id.to_string(),
            analytic: None,
        }
    }

    /// Magnitude of the gradient.
    ///
    /// Uses the analytic gradient when the corpus carries one; otherwise
    /// second-order central differences with zero extension beyond the box,
    /// which is exact for the corpus because supports keep a margin of
    /// zero cells.
    pub fn gradient_magnitude(&self) -> GridFunction {
        let id = format!("{}|grad", self.corpus_id);
        if let Some(field) = &self.analytic {
            if let Some(grad) = &field.gradient {
                let r = self.resolution;
                let planes = if self.spec.n == 3 { r } else { 1 };
                let mut values = vec![0.0; planes * r * r];
                for flat in 0..values.len() {
                    let x = self.point(flat);
                    let g = grad(&x);
                    values[flat] = match self.spec.n {
                        2 => (g[0] * g[0] + g[1] * g[1]).sqrt(),
                        _ => (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt(),
                    };
                }
                return GridFunction {
                    spec: self.spec,
                    resolution: r,
                    values,
                    corpus_id: id,
                    analytic: None,
                };
            }
        }
        let r = self.resolution as isize;
        let h = self.h();
        let inv2h = 1.0 / (2.0 * h);
        let res = self.resolution;
        let planes = if self.spec.n == 3 { res } else { 1 };
        let fetch = |i: isize, j: isize, k: isize| -> f64 {
            if i < 0 || i >= r || j < 0 || j >= r || k < 0 || k >= planes as isize {
                return 0.0;
            }
            self.values[(k as usize * res + j as usize) * res + i as usize]
        };
        let mut values = vec![0.0; planes * res * res];
        for k in 0..planes as isize {
            for j in 0..r {
                for i in 0..r {
                    let gx = (fetch(i + 1, j, k) - fetch(i - 1, j, k)) * inv2h;
                    let gy = (fetch(i, j + 1, k) - fetch(i, j - 1, k)) * inv2h;
                    let gz = if self.spec.n == 3 {
                        (fetch(i, j, k + 1) - fetch(i, j, k - 1)) * inv2h
                    } else {
                        0.0
                    };
                    values[(k as usize * res + j as usize) * res + i as usize] =
                        (gx * gx + gy * gy + gz * gz).sqrt();
                }
            }
        }
        GridFunction {
            spec: self.spec,
            resolution: res,
            values,
            corpus_id: id,
            analytic: None,
        }
    }

    /// `(integral of |f|^p)^(1/p)` over the box with cell quadrature.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p.is_finite());
        let powered: Vec<f64> = self.values.iter().map(|v| v.abs().powf(p)).collect();
        (self.cell_volume() * pairwise_sum(&powered)).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Total integral with cell quadrature.
    pub fn integral(&self) -> f64 {
        self.cell_volume() * pairwise_sum(&self.values)
    }

    /// Relative L2 distance `|a - b|_2 / |b|_2`.
    pub fn rel_l2_error(&self, reference: &GridFunction) -> f64 {
        assert_eq!(self.len(), reference.len());
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let num = pairwise_sum(&diff).sqrt();
        let den: Vec<f64> = reference.values().iter().map(|b| b * b).collect();
        let den = pairwise_sum(&den).sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Flat indices of samples whose centers lie in the cube.
    ///
    /// Membership uses the half-open convention of [`Cube::contains_point`].
    pub fn samples_in_cube(&self, cube: &Cube) -> Vec<usize> {
        let mut ranges = [(0usize, 0usize); 3];
        let h = self.h();
        for a in 0..self.spec.n {
            let lo = cube.lower[a];
            let hi = cube.lower[a] + cube.side;
            // Smallest i with lower + (i + 0.5) h >= lo, first i beyond hi.
            let start = ((lo - self.spec.lower[a]) / h - 0.5).ceil().max(0.0) as usize;
            let stop = (((hi - self.spec.lower[a]) / h - 0.5).ceil().max(0.0) as usize)
                .min(self.resolution);
            let mut start = start.min(self.resolution);
            let mut stop = stop;
            // Guard against ties half a cell off due to rounding.
            while start > 0 && {
                let x = self.spec.lower[a] + (start as f64 - 0.5) * h;
                x >= lo && x < hi
            } {
                start -= 1;
            }
            while start < stop && {
                let x = self.spec.lower[a] + (start as f64 + 0.5) * h;
                !(x >= lo && x < hi)
            } {
                start += 1;
            }
            while stop > start && {
                let x = self.spec.lower[a] + (stop as f64 - 0.5) * h;
                !(x >= lo && x < hi)
            } {
                stop -= 1;
            }
            ranges[a] = (start, stop);
        }
        let (zs, ze) = if self.spec.n == 3 { ranges[2] } else { (0, 1) };
        let mut out = Vec::new();
        for k in zs..ze {
            for j in ranges[1].0..ranges[1].1 {
                for i in ranges[0].0..ranges[0].1 {
                    out.push((k * self.resolution + j) * self.resolution + i);
                }
            }
        }
        out
    }

    /// Mean of `f` over the samples inside the cube (zero when empty).
    pub fn sample_mean_in_cube(&self, cube: &Cube) -> f64 {
        let idx = self.samples_in_cube(cube);
        if idx.is_empty() {
            return 0.0;
        }
        let vals: Vec<f64> = idx.iter().map(|&i| self.values[i]).collect();
        pairwise_sum(&vals) / vals.len() as f64
    }

    /// Writes a one-line JSON header followed by raw little-endian samples.
    pub fn save(&self, path: &Path) -> Result<(), GridError> {
        let header = GridHeader {
            format: FORMAT_TAG.to_string(),
            n: self.spec.n,
            resolution: self.resolution,
            lower: self.spec.lower,
            side: self.spec.side,
            corpus_id: self.corpus_id.clone(),
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut file, &header)?;
        file.write_all(b"\n")?;
        for v in &self.values {
            file.write_all(&v.to_le_bytes())?;
        }
        file.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header_bytes = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            let got = file.read(&mut byte)?;
            if got == 0 {
                return Err(GridError::Format("missing header newline".into()));
            }
            if byte[0] == b'\n' {
                break;
            }
            header_bytes.push(byte[0]);
            if header_bytes.len() > 64 * 1024 {
                return Err(GridError::Format("header exceeds 64 KiB".into()));
            }
        }
        let header: GridHeader = serde_json::from_slice(&header_bytes)?;
        if header.format != FORMAT_TAG {
            return Err(GridError::Format(format!(
                "unknown format tag `{}`",
                header.format
            )));
        }
        let spec = BoxSpec::new(header.n, header.lower, header.side)?;
        let planes = if header.n == 3 { header.resolution } else { 1 };
        let count = planes * header.resolution * header.resolution;
        let mut raw = vec![0u8; count * 8];
        file.read_exact(&mut raw)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(spec, header.resolution, &header.corpus_id, values)
    }
}

const FORMAT_TAG: &str = "fraclab-grid-v1";

#[derive(Serialize, Deserialize)]
struct GridHeader {
    format: String,
    n: usize,
    resolution: usize,
    lower: [f64; 3],
    side: f64,
    corpus_id: String,
}

/// Subset of sample points at which expensive operators are evaluated.
pub struct EvalSet {
    pub flat: Vec<usize>,
    pub points: Vec<[f64; 3]>,
}

impl EvalSet {
    /// Every `stride`-th cell per axis, offset to stay roughly centered.
    pub fn strided(grid: &GridFunction, stride: usize) -> EvalSet {
        let stride = stride.max(1);
        let r = grid.resolution();
        let off = stride / 2;
        let planes = if grid.n() == 3 { r } else { 1 };
        let kstep = if grid.n() == 3 { stride } else { 1 };
        let mut flat = Vec::new();
        let mut points = Vec::new();
        let mut k = if grid.n() == 3 { off } else { 0 };
        while k < planes {
            let mut j = off;
            while j < r {
                let mut i = off;
                while i < r {
                    let idx = (k * r + j) * r + i;
                    flat.push(idx);
                    points.push(grid.point(idx));
                    i += stride;
                }
                j += stride;
            }
            k += kstep;
            if grid.n() == 2 {
                break;
            }
        }
        EvalSet { flat, points }
    }

    /// All samples.
    pub fn full(grid: &GridFunction) -> EvalSet {
        let flat: Vec<usize> = (0..grid.len()).collect();
        let points = flat.iter().map(|&i| grid.point(i)).collect();
        EvalSet { flat, points }
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> BoxSpec {
        BoxSpec::symmetric(n, 2.0).unwrap()
    }

    #[test]
    fn origin_is_never_a_sample_point() {
        let g = GridFunction::from_fn(unit_box(2), 64, "t", |x| x[0] + x[1]).unwrap();
        for flat in 0..g.len() {
            let p = g.point(flat);
            assert!(
                p[0].abs() > 1e-12 || p[1].abs() > 1e-12,
                "origin sampled at {flat}"
            );
        }
    }

    #[test]
    fn interpolation_reproduces_samples() {
        let g = GridFunction::from_fn(unit_box(2), 32, "t", |x| {
            (x[0] * 1.7).sin() + x[1] * x[1]
        })
        .unwrap();
        for flat in [0, 5, 100, 1023] {
            let p = g.point(flat);
            let v = g.interpolate(&p);
            assert!(
                (v - g.values()[flat]).abs() < 1e-12,
                "flat={flat} v={v} want={}",
                g.values()[flat]
            );
        }
    }

    #[test]
    fn interpolation_is_exact_for_multilinear_functions() {
        let g = GridFunction::from_fn(unit_box(2), 32, "t", |x| {
            1.0 + 2.0 * x[0] - 0.5 * x[1] + 0.25 * x[0] * x[1]
        })
        .unwrap();
        // Stay a full cell away from the boundary where zero extension kicks in.
        for (x, y) in [(0.3, 0.4), (-1.2, 0.9), (0.01, -0.02), (1.5, -1.5)] {
            let x = [x, y, 0.0];
            let want = 1.0 + 2.0 * x[0] - 0.5 * x[1] + 0.25 * x[0] * x[1];
            let got = g.interpolate(&x);
            assert!((got - want).abs() < 1e-12, "at {x:?}: {got} vs {want}");
        }
    }

    #[test]
    fn central_difference_gradient_is_exact_for_linear_data() {
        // Linear function; interior cells see the exact slope.
        let g = GridFunction::from_fn(unit_box(2), 32, "t", |x| 3.0 * x[0] - 2.0 * x[1]).unwrap();
        let gm = g.gradient_magnitude();
        let want = (9.0f64 + 4.0).sqrt();
        let r = g.resolution();
        for j in 2..r - 2 {
            for i in 2..r - 2 {
                let v = gm.values()[j * r + i];
                assert!((v - want).abs() < 1e-10, "at ({i},{j}): {v} vs {want}");
            }
        }
    }

    #[test]
    fn integral_of_indicator_matches_cell_count() {
        let spec = BoxSpec::new(2, [0.0, 0.0, 0.0], 4.0).unwrap();
        // Half-open [0,1)^2 aligned with cell boundaries at resolution 64.
        let g = GridFunction::from_fn(spec, 64, "t", |x| {
            if x[0] < 1.0 && x[1] < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_in_cube_agrees_with_predicate() {
        let g = GridFunction::from_fn(unit_box(2), 32, "t", |x| x[0]).unwrap();
        let cube = Cube::new(2, [-0.7, 0.1, 0.0], 0.9);
        let via_ranges = g.samples_in_cube(&cube);
        let mut via_scan = Vec::new();
        for flat in 0..g.len() {
            if cube.contains_point(&g.point(flat)) {
                via_scan.push(flat);
            }
        }
        assert_eq!(via_ranges, via_scan);
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let g = GridFunction::from_fn(unit_box(2), 16, "roundtrip", |x| {
            (x[0] * 0.37).cos() * x[1]
        })
        .unwrap();
        let dir = std::env::temp_dir();
        let path = dir.join("fraclab_grid_roundtrip_test.bin");
        g.save(&path).unwrap();
        let back = GridFunction::load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back.resolution(), g.resolution());
        assert_eq!(back.spec(), g.spec());
        assert_eq!(back.corpus_id(), g.corpus_id());
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn margin_check_flags_boundary_mass() {
        let g = GridFunction::from_fn(unit_box(2), 16, "t", |_| 1.0).unwrap();
        assert!(matches!(
            g.check_support_margin(),
            Err(GridError::SupportMarginViolated { .. })
        ));
        let ok = GridFunction::from_fn(unit_box(2), 16, "t", |x| {
            if x[0].abs() < 1.0 && x[1].abs() < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        ok.check_support_margin().unwrap();
    }

    #[test]
    fn strided_eval_set_covers_interior() {
        let g = GridFunction::from_fn(unit_box(2), 64, "t", |_| 0.0).unwrap();
        let set = EvalSet::strided(&g, 4);
        assert_eq!(set.len(), 16 * 16);
        for (&flat, p) in set.flat.iter().zip(&set.points) {
            assert_eq!(g.point(flat), *p);
        }
    }
}
