//! Unit sphere meshes and homogeneous symbols.
//!
//! Dimension two uses uniformly spaced angles with equal weights, so the
//! weights sum to `2 pi` exactly up to rounding. Dimension three uses a
//! subdivided icosahedron: nodes are projected face centroids and weights
//! are exact spherical triangle areas, so the weights sum to `4 pi` up to
//! rounding without any area approximation.
//!
//! Symbols carry both node values and the defining closed form, so they can
//! be evaluated in arbitrary directions (needed when a grid sampling of
//! `Omega(y/|y|)` is compared against sphere-side quantities).

use std::sync::Arc;
use thiserror::Error;

use crate::norms::{lorentz_norm, luxemburg_average, LorentzExponents, OrliczClass};
use crate::numeric::{pairwise_sum, unit_sphere_area};

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("unsupported dimension {0}; expected 2 or 3")]
    DimensionUnsupported(usize),
    #[error("unknown symbol id `{0}`")]
    UnknownSymbol(String),
    #[error("mesh size {0} is too small; need at least {1}")]
    MeshTooSmall(usize, usize),
}

/// Quadrature mesh on the unit sphere `S^(n-1)`.
pub struct SphereMesh {
    pub n: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereMesh {
    /// Uniform circle mesh with `m` angles offset by half a step.
    pub fn circle(m: usize) -> Result<SphereMesh, SphereError> {
        if m < 16 {
            return Err(SphereError::MeshTooSmall(m, 16));
        }
        let w = 2.0 * std::f64::consts::PI / m as f64;
        let mut nodes = Vec::with_capacity(m);
        for j in 0..m {
            let theta = w * (j as f64 + 0.5);
            nodes.push([theta.cos(), theta.sin(), 0.0]);
        }
        Ok(SphereMesh {
            n: 2,
            nodes,
            weights: vec![w; m],
        })
    }

    /// Icosphere mesh: `20 * 4^subdivisions` faces, one node per face at
    /// the projected centroid, weighted by the exact spherical triangle
    /// area of the face.
    pub fn icosphere(subdivisions: usize) -> Result<SphereMesh, SphereError> {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let raw: [[f64; 3]; 12] = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let verts: Vec<[f64; 3]> = raw.iter().map(|v| normalize(*v)).collect();
        let faces: [[usize; 3]; 20] = [
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let mut tris: Vec<[[f64; 3]; 3]> = faces
            .iter()
            .map(|f| [verts[f[0]], verts[f[1]], verts[f[2]]])
            .collect();
        for _ in 0..subdivisions {
            let mut next = Vec::with_capacity(tris.len() * 4);
            for [a, b, c] in tris {
                let ab = normalize(midpoint(a, b));
                let bc = normalize(midpoint(b, c));
                let ca = normalize(midpoint(c, a));
                next.push([a, ab, ca]);
                next.push([ab, b, bc]);
                next.push([ca, bc, c]);
                next.push([ab, bc, ca]);
            }
            tris = next;
        }
        let mut nodes = Vec::with_capacity(tris.len());
        let mut weights = Vec::with_capacity(tris.len());
        for [a, b, c] in &tris {
            let centroid = normalize([
                (a[0] + b[0] + c[0]) / 3.0,
                (a[1] + b[1] + c[1]) / 3.0,
                (a[2] + b[2] + c[2]) / 3.0,
            ]);
            nodes.push(centroid);
            weights.push(spherical_triangle_area(*a, *b, *c));
        }
        Ok(SphereMesh {
            n: 3,
            nodes,
            weights,
        })
    }

    /// Default mesh per dimension: 4096 angles or a level-5 icosphere
    /// (20480 faces).
    pub fn standard(n: usize) -> Result<SphereMesh, SphereError> {
        match n {
            2 => Self::circle(4096),
            3 => Self::icosphere(5),
            other => Err(SphereError::DimensionUnsupported(other)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

fn midpoint(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Solid angle of the spherical triangle spanned by unit vectors, via the
/// tangent half-angle formula for the triple product.
fn spherical_triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let triple = dot(a, cross(b, c)).abs();
    let denom = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * triple.atan2(denom)
}

/// Catalog row for a homogeneous symbol.
#[derive(Debug, Clone, Copy)]
pub struct SymbolEntry {
    pub id: &'static str,
    pub description: &'static str,
    /// Whether the symbol is projected to have zero weighted mean.
    pub mean_zero: bool,
}

/// The symbol catalog in a fixed order.
pub fn catalog() -> &'static [SymbolEntry] {
    &[
        SymbolEntry {
            id: "one",
            description: "constant 1 (not mean-zero)",
            mean_zero: false,
        },
        SymbolEntry {
            id: "first_harmonic",
            description: "first spherical harmonic: cos(theta) in the plane, z in space",
            mean_zero: true,
        },
        SymbolEntry {
            id: "third_harmonic",
            description: "third harmonic: cos(3 theta) in the plane, (5z^3 - 3z)/2 in space",
            mean_zero: true,
        },
        SymbolEntry {
            id: "quadrant_sign",
            description: "sign of the coordinate product: alternating quadrants or octants",
            mean_zero: true,
        },
        SymbolEntry {
            id: "power_log_singular",
            description: "d^(-1/r) (1 + ln(pi/d))^(-c) with d the geodesic distance \
                          to the pole (params r, c); lies in the Lorentz space \
                          L^{r,q} whenever q c r > 1, after mean-zero projection",
            mean_zero: true,
        },
        SymbolEntry {
            id: "log_tamed_singular",
            description: "d^(-1) (1 + ln(pi/d))^(-3): integrable with a half-power \
                          of log L to spare, but in no L^r for r > 1",
            mean_zero: true,
        },
    ]
}

pub fn lookup(id: &str) -> Option<&'static SymbolEntry> {
    catalog().iter().find(|e| e.id == id)
}

/// Scalar parameters for symbol construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolParams {
    /// Power of the distance singularity (as `d^(-1/r)`).
    pub r: f64,
    /// Exponent of the logarithmic damping factor.
    pub c: f64,
}

impl Default for SymbolParams {
    fn default() -> Self {
        SymbolParams { r: 1.5, c: 1.5 }
    }
}

/// A symbol sampled on a mesh together with its closed form.
///
/// `values[i] = raw(nodes[i]) - offset` where `offset` is the mean-zero
/// projection constant (zero for symbols that are not projected).
pub struct SphereSymbol {
    pub id: String,
    pub mesh: Arc<SphereMesh>,
    pub values: Vec<f64>,
    raw: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
    offset: f64,
}

impl SphereSymbol {
    /// Evaluates the symbol in an arbitrary direction (not nearest-node
    /// lookup; the defining closed form is used).
    pub fn evaluate(&self, direction: &[f64; 3]) -> f64 {
        (self.raw)(direction) - self.offset
    }

    /// The constant subtracted by the mean-zero projection.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Weighted mean over the mesh, in units of the symbol.
    pub fn weighted_mean(&self) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.mesh.weights)
            .map(|(&v, &w)| v * w)
            .collect();
        pairwise_sum(&terms) / self.mesh.total_weight()
    }

    /// `int |Omega| dsigma`.
    pub fn norm_l1(&self) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.mesh.weights)
            .map(|(&v, &w)| v.abs() * w)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `(int |Omega|^r dsigma)^(1/r)`.
    pub fn norm_lr(&self, r: f64) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.mesh.weights)
            .map(|(&v, &w)| v.abs().powf(r) * w)
            .collect();
        pairwise_sum(&terms).powf(1.0 / r)
    }

    /// Lorentz norm over the sphere with its surface measure.
    pub fn norm_lorentz(&self, exps: LorentzExponents) -> f64 {
        lorentz_norm(&self.values, &self.mesh.weights, exps)
    }

    /// Luxemburg norm of the surface-measure average (total mass is the
    /// sphere area, so constants are mesh-independent).
    pub fn norm_orlicz(&self, class: OrliczClass) -> f64 {
        luxemburg_average(
            &self.values,
            &self.mesh.weights,
            unit_sphere_area(self.mesh.n),
            class,
        )
    }

    /// Surface measure of `{ |Omega| > t }`.
    pub fn measure_above(&self, t: f64) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&self.mesh.weights)
            .map(|(&v, &w)| if v.abs() > t { w } else { 0.0 })
            .collect();
        pairwise_sum(&terms)
    }
}

/// Geodesic distance to the pole: angle 0 on the circle, the north pole in
/// space.
fn pole_distance(n: usize, x: &[f64; 3]) -> f64 {
    if n == 2 {
        x[1].atan2(x[0]).abs()
    } else {
        x[2].clamp(-1.0, 1.0).acos()
    }
}

/// Builds a symbol on the mesh, projecting to zero mean when the catalog
/// marks it so. The projection subtracts the weighted mean computed on this
/// mesh, so the node values satisfy `|sum w v| <= 1e-12 sum w |v|`.
pub fn symbol(
    id: &str,
    params: SymbolParams,
    mesh: Arc<SphereMesh>,
) -> Result<SphereSymbol, SphereError> {
    let entry = lookup(id).ok_or_else(|| SphereError::UnknownSymbol(id.to_string()))?;
    let n = mesh.n;
    let raw: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync> = match entry.id {
        "one" => Arc::new(|_: &[f64; 3]| 1.0),
        "first_harmonic" => {
            if n == 2 {
                Arc::new(|x: &[f64; 3]| x[0])
            } else {
                Arc::new(|x: &[f64; 3]| x[2])
            }
        }
        "third_harmonic" => {
            if n == 2 {
                Arc::new(|x: &[f64; 3]| {
                    let t = x[1].atan2(x[0]);
                    (3.0 * t).cos()
                })
            } else {
                Arc::new(|x: &[f64; 3]| 0.5 * (5.0 * x[2] * x[2] * x[2] - 3.0 * x[2]))
            }
        }
        "quadrant_sign" => {
            if n == 2 {
                Arc::new(|x: &[f64; 3]| (x[0] * x[1]).signum() * ((x[0] * x[1]) != 0.0) as i32 as f64)
            } else {
                Arc::new(|x: &[f64; 3]| {
                    let p = x[0] * x[1] * x[2];
                    p.signum() * ((p != 0.0) as i32 as f64)
                })
            }
        }
        "power_log_singular" => {
            let inv_r = 1.0 / params.r;
            let c = params.c;
            Arc::new(move |x: &[f64; 3]| {
                let d = pole_distance(n, x).max(1e-14);
                d.powf(-inv_r) * (1.0 + (std::f64::consts::PI / d).ln()).powf(-c)
            })
        }
        "log_tamed_singular" => Arc::new(move |x: &[f64; 3]| {
            let d = pole_distance(n, x).max(1e-14);
            (1.0 + (std::f64::consts::PI / d).ln()).powi(-3) / d
        }),
        other => return Err(SphereError::UnknownSymbol(other.to_string())),
    };
    let mut values: Vec<f64> = mesh.nodes.iter().map(|node| raw(node)).collect();
    let mut offset = 0.0;
    if entry.mean_zero {
        let weighted: Vec<f64> = values
            .iter()
            .zip(&mesh.weights)
            .map(|(&v, &w)| v * w)
            .collect();
        offset = pairwise_sum(&weighted) / mesh.total_weight();
        for v in &mut values {
            *v -= offset;
        }
    }
    Ok(SphereSymbol {
        id: id.to_string(),
        mesh,
        values,
        raw,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_mesh_weights_sum_to_circumference() {
        let mesh = SphereMesh::circle(4096).unwrap();
        assert!((mesh.total_weight() - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        for node in &mesh.nodes {
            let r = (node[0] * node[0] + node[1] * node[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn icosphere_areas_sum_to_sphere_area() {
        for sub in [0, 2, 3] {
            let mesh = SphereMesh::icosphere(sub).unwrap();
            assert_eq!(mesh.len(), 20 * 4usize.pow(sub as u32));
            let total = mesh.total_weight();
            let want = 4.0 * std::f64::consts::PI;
            assert!(
                (total - want).abs() < 1e-9,
                "sub={sub}: {total} vs {want}"
            );
            for w in &mesh.weights {
                assert!(*w > 0.0);
            }
        }
    }

    #[test]
    fn standard_meshes_have_required_node_counts() {
        assert!(SphereMesh::standard(2).unwrap().len() >= 4096);
        assert!(SphereMesh::standard(3).unwrap().len() >= 10_000);
    }

    #[test]
    fn mean_zero_projection_is_tight() {
        for n in [2usize, 3] {
            let mesh = Arc::new(if n == 2 {
                SphereMesh::circle(1024).unwrap()
            } else {
                SphereMesh::icosphere(3).unwrap()
            });
            for entry in catalog() {
                if !entry.mean_zero {
                    continue;
                }
                let sym = symbol(entry.id, SymbolParams::default(), mesh.clone()).unwrap();
                let mean = sym.weighted_mean().abs();
                let scale = sym.norm_l1() / mesh.total_weight();
                assert!(
                    mean <= 1e-12 * scale.max(1e-300),
                    "{} in n={n}: residual mean {mean:.3e} vs scale {scale:.3e}",
                    entry.id
                );
            }
        }
    }

    #[test]
    fn harmonics_are_mean_zero_before_projection() {
        let mesh = Arc::new(SphereMesh::circle(4096).unwrap());
        let sym = symbol("first_harmonic", SymbolParams::default(), mesh).unwrap();
        // The projection offset measures the raw mean; for cos(theta) on a
        // symmetric mesh it vanishes to rounding.
        assert!(sym.offset().abs() < 1e-13, "offset {}", sym.offset());
    }

    #[test]
    fn quadrant_sign_levelsets_cover_the_sphere() {
        let mesh = Arc::new(SphereMesh::circle(4096).unwrap());
        let sym = symbol("quadrant_sign", SymbolParams::default(), mesh).unwrap();
        let above = sym.measure_above(0.5);
        assert!(
            (above - 2.0 * std::f64::consts::PI).abs() < 1e-9,
            "levelset measure {above}"
        );
        assert!((sym.norm_sup() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_log_singular_lorentz_norm_is_mesh_stable() {
        // r = 1.5, c = 1.5: lies in L^{1.5, 3} since q c r = 6.75 > 1.
        let coarse = symbol(
            "power_log_singular",
            SymbolParams::default(),
            Arc::new(SphereMesh::circle(2048).unwrap()),
        )
        .unwrap();
        let fine = symbol(
            "power_log_singular",
            SymbolParams::default(),
            Arc::new(SphereMesh::circle(8192).unwrap()),
        )
        .unwrap();
        let exps = LorentzExponents::new(1.5, 3.0);
        let a = coarse.norm_lorentz(exps);
        let b = fine.norm_lorentz(exps);
        assert!(a.is_finite() && b.is_finite());
        assert!(
            (a - b).abs() < 0.1 * b,
            "Lorentz norm unstable: {a} vs {b}"
        );
    }

    #[test]
    fn log_tamed_symbol_is_exponent_critical() {
        let coarse = symbol(
            "log_tamed_singular",
            SymbolParams::default(),
            Arc::new(SphereMesh::circle(1024).unwrap()),
        )
        .unwrap();
        let fine = symbol(
            "log_tamed_singular",
            SymbolParams::default(),
            Arc::new(SphereMesh::circle(4096).unwrap()),
        )
        .unwrap();
        // The Zygmund-class functional stays put under refinement while the
        // sup norm keeps growing: integrable, but in no L^r with r > 1.
        let za = coarse.norm_orlicz(OrliczClass::LogPower(0.5));
        let zb = fine.norm_orlicz(OrliczClass::LogPower(0.5));
        assert!(
            (za - zb).abs() < 0.1 * zb,
            "Zygmund functional unstable: {za} vs {zb}"
        );
        assert!(
            fine.norm_sup() > 1.3 * coarse.norm_sup(),
            "sup norms {} vs {}",
            coarse.norm_sup(),
            fine.norm_sup()
        );
    }

    #[test]
    fn evaluate_matches_node_values() {
        let mesh = Arc::new(SphereMesh::icosphere(2).unwrap());
        let sym = symbol("third_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        for (node, &v) in mesh.nodes.iter().zip(&sym.values) {
            let e = sym.evaluate(node);
            assert!((e - v).abs() < 1e-14, "node {node:?}: {e} vs {v}");
        }
    }
}
