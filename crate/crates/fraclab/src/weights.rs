//! Muckenhoupt-type weight constants over families of test cubes.
//!
//! A weight is either the power `|x|^lambda` or a positive sampled grid
//! function.  The two-exponent constant measured here is the supremum over
//! test cubes `Q` of
//!
//! ```text
//!     (avg_Q w^q)^(1/q) * (avg_Q w^(-p'))^(1/p'),
//! ```
//!
//! which for the power weight is finite exactly when
//! `-n/q < lambda < n/p'`.  Power-weight cube averages are computed
//! exactly.  A cube whose closure meets the origin is split into one
//! rectangle per orthant, each cornered at the origin, and on such a
//! rectangle homogeneity moves the integral of `|x|^mu` to the far faces:
//!
//! ```text
//!     (mu + n) * integral = sum over far faces of (offset * face integral)
//! ```
//!
//! The face integrands are smooth, so a fixed Gauss rule finishes the job,
//! and `mu <= -n` makes the integral diverge, which the cube reports as a
//! `+inf` entry directly.  Cubes away from the origin use a tensor Gauss
//! rule with dyadic subdivision until the distance to the origin dominates
//! the side, keeping the integrand's relative variation bounded.
//!
//! A finite sweep can only produce a lower bound for a supremum.
//! Divergence is therefore detected structurally (the exact `+inf` rule
//! above) or as a growth trend of the per-octave maxima as the cube scale
//! grows, never by comparing a magnitude against a threshold.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::{locate, shifts, DyadicCube};
use crate::grid::{BoxSpec, Cube, GridError, GridFunction};
use crate::numeric::{conjugate_exponent, pairwise_sum, GAUSS_16, GAUSS_32, GAUSS_8};

const ORIGIN: [f64; 3] = [0.0; 3];

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("{name} = {value} must satisfy {constraint}")]
    BadExponent {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("sampled weight has nonpositive value {value} at flat index {index}")]
    NotPositive { index: usize, value: f64 },
    #[error("weight and integrand live on different grids")]
    GridMismatch,
    #[error("dimension {0} is not supported (2 and 3 are)")]
    Dimension(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `|x|^lambda`, or a strictly positive sampled grid function.
#[derive(Clone)]
pub enum Weight {
    Power { n: usize, lambda: f64 },
    Sampled(GridFunction),
}

impl Weight {
    pub fn power(n: usize, lambda: f64) -> Result<Weight, WeightError> {
        if n != 2 && n != 3 {
            return Err(WeightError::Dimension(n));
        }
        Ok(Weight::Power { n, lambda })
    }

    /// Wraps sampled values, rejecting anything that is not strictly
    /// positive and finite.
    pub fn sampled(values: GridFunction) -> Result<Weight, WeightError> {
        for (index, &value) in values.values().iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(WeightError::NotPositive { index, value });
            }
        }
        Ok(Weight::Sampled(values))
    }

    pub fn n(&self) -> usize {
        match self {
            Weight::Power { n, .. } => *n,
            Weight::Sampled(g) => g.n(),
        }
    }

    /// The weight raised to a power.  Restating a two-exponent condition as
    /// a classical one-exponent condition always goes through this.
    pub fn pow(&self, e: f64) -> Weight {
        match self {
            Weight::Power { n, lambda } => Weight::Power {
                n: *n,
                lambda: lambda * e,
            },
            Weight::Sampled(g) => Weight::Sampled(g.map("weight-power", |v| v.powf(e))),
        }
    }

    /// Average of `w^mu` over the cube.
    ///
    /// Exact for power weights (`+inf` when the integral diverges on a cube
    /// at the origin); cell-sample mean for sampled weights, `None` when
    /// the cube contains no samples.
    pub fn mean_pow(&self, cube: &Cube, mu: f64) -> Option<f64> {
        match self {
            Weight::Power { lambda, n } => Some(power_cube_mean(*n, lambda * mu, cube)),
            Weight::Sampled(g) => {
                let idx = g.samples_in_cube(cube);
                if idx.is_empty() {
                    return None;
                }
                let terms: Vec<f64> = idx.iter().map(|&i| g.values()[i].powf(mu)).collect();
                Some(pairwise_sum(&terms) / terms.len() as f64)
            }
        }
    }

    /// Infimum of `w` over the closed cube, exact for power weights.
    pub fn inf(&self, cube: &Cube) -> Option<f64> {
        match self {
            Weight::Power { lambda, n } => {
                if *lambda == 0.0 {
                    Some(1.0)
                } else if *lambda > 0.0 {
                    Some(cube.distance_to(&ORIGIN).powf(*lambda))
                } else {
                    Some(far_corner_distance(*n, cube).powf(*lambda))
                }
            }
            Weight::Sampled(g) => {
                let idx = g.samples_in_cube(cube);
                if idx.is_empty() {
                    return None;
                }
                Some(idx.iter().fold(f64::INFINITY, |m, &i| m.min(g.values()[i])))
            }
        }
    }

    /// Values of the weight at the sample points of `f`.  Power weights use
    /// the exact cell mean on cells whose closure meets the origin; sampled
    /// weights must share the grid of `f`.
    fn realized_values(&self, f: &GridFunction) -> Result<Vec<f64>, WeightError> {
        match self {
            Weight::Power { n, lambda } => {
                if *n != f.n() {
                    return Err(WeightError::GridMismatch);
                }
                let h = f.h();
                let out = (0..f.len())
                    .map(|flat| {
                        let x = f.point(flat);
                        if (0..*n).all(|a| x[a].abs() <= 0.5 * h * (1.0 + 1e-9)) {
                            let mut lower = [0.0; 3];
                            for a in 0..*n {
                                lower[a] = x[a] - 0.5 * h;
                            }
                            power_cube_mean(*n, *lambda, &Cube::new(*n, lower, h))
                        } else {
                            norm(*n, &x).powf(*lambda)
                        }
                    })
                    .collect();
                Ok(out)
            }
            Weight::Sampled(g) => {
                if g.spec() != f.spec() || g.resolution() != f.resolution() {
                    return Err(WeightError::GridMismatch);
                }
                Ok(g.values().to_vec())
            }
        }
    }
}

fn norm(n: usize, x: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for v in x.iter().take(n) {
        s += v * v;
    }
    s.sqrt()
}

fn far_corner_distance(n: usize, cube: &Cube) -> f64 {
    let mut d2 = 0.0;
    for a in 0..n {
        let lo = cube.lower[a].abs();
        let hi = (cube.lower[a] + cube.side).abs();
        let m = lo.max(hi);
        d2 += m * m;
    }
    d2.sqrt()
}

/// Average of `|x|^mu` over a cube, exact at the origin.
///
/// Cubes whose closure meets the origin go through the per-orthant
/// boundary reduction and report `+inf` as soon as `mu <= -n`; other cubes
/// use subdivided tensor Gauss quadrature.
pub fn power_cube_mean(n: usize, mu: f64, cube: &Cube) -> f64 {
    if mu == 0.0 {
        return 1.0;
    }
    let touches = cube.distance_to(&ORIGIN) <= 1e-12 * cube.side;
    let integral = if touches {
        if mu <= -(n as f64) {
            return f64::INFINITY;
        }
        origin_cube_integral(n, mu, cube)
    } else {
        smooth_cube_integral(n, mu, cube, 0)
    };
    integral / cube.volume()
}

fn origin_cube_integral(n: usize, mu: f64, cube: &Cube) -> f64 {
    let mut total = 0.0;
    for signs in 0..(1u32 << n) {
        let mut ext = [0.0; 3];
        let mut empty = false;
        for (a, e) in ext.iter_mut().enumerate().take(n) {
            let lo = cube.lower[a];
            let hi = lo + cube.side;
            *e = if (signs >> a) & 1 == 0 {
                hi.max(0.0)
            } else {
                (-lo).max(0.0)
            };
            if *e <= 0.0 {
                empty = true;
                break;
            }
        }
        if !empty {
            total += corner_rect_integral(n, mu, ext);
        }
    }
    total
}

/// Integral of `|x|^mu` over the rectangle `[0, e1] x ... x [0, en]` with
/// `mu > -n`, reduced by homogeneity to the far faces.
fn corner_rect_integral(n: usize, mu: f64, ext: [f64; 3]) -> f64 {
    if n == 2 {
        let face = |c: f64, b: f64| GAUSS_32.integrate(0.0, b, |y| (c * c + y * y).powf(0.5 * mu));
        (ext[0] * face(ext[0], ext[1]) + ext[1] * face(ext[1], ext[0])) / (mu + 2.0)
    } else {
        let face = |c: f64, b1: f64, b2: f64| {
            let mut acc = 0.0;
            for (y, wy) in GAUSS_16.mapped(0.0, b1) {
                for (z, wz) in GAUSS_16.mapped(0.0, b2) {
                    acc += wy * wz * (c * c + y * y + z * z).powf(0.5 * mu);
                }
            }
            acc
        };
        (ext[0] * face(ext[0], ext[1], ext[2])
            + ext[1] * face(ext[1], ext[0], ext[2])
            + ext[2] * face(ext[2], ext[0], ext[1]))
            / (mu + 3.0)
    }
}

fn smooth_cube_integral(n: usize, mu: f64, cube: &Cube, depth: u32) -> f64 {
    let d = cube.distance_to(&ORIGIN);
    if depth >= 10 || d >= cube.side {
        let lo = cube.lower;
        let hi = cube.side;
        let mut acc = 0.0;
        if n == 2 {
            for (x, wx) in GAUSS_8.mapped(lo[0], lo[0] + hi) {
                for (y, wy) in GAUSS_8.mapped(lo[1], lo[1] + hi) {
                    acc += wx * wy * (x * x + y * y).powf(0.5 * mu);
                }
            }
        } else {
            for (x, wx) in GAUSS_8.mapped(lo[0], lo[0] + hi) {
                for (y, wy) in GAUSS_8.mapped(lo[1], lo[1] + hi) {
                    for (z, wz) in GAUSS_8.mapped(lo[2], lo[2] + hi) {
                        acc += wx * wy * wz * (x * x + y * y + z * z).powf(0.5 * mu);
                    }
                }
            }
        }
        return acc;
    }
    let half = 0.5 * cube.side;
    let mut acc = 0.0;
    for corner in 0..(1u32 << n) {
        let mut lower = cube.lower;
        for (a, l) in lower.iter_mut().enumerate().take(n) {
            if (corner >> a) & 1 == 1 {
                *l += half;
            }
        }
        acc += smooth_cube_integral(n, mu, &Cube::new(n, lower, half), depth + 1);
    }
    acc
}

/// Samples `|x|^nu` at cell centers, with cells whose closure meets the
/// origin replaced by their exact cell means.
///
/// This is the resolution-bound view of a power weight: sweep products
/// over it stay finite even where the exact integral diverges, and the
/// divergence shows up instead as per-octave growth.
pub fn power_realization(
    spec: BoxSpec,
    resolution: usize,
    nu: f64,
) -> Result<GridFunction, WeightError> {
    let n = spec.n;
    if nu <= -(n as f64) {
        return Err(WeightError::BadExponent {
            name: "nu",
            value: nu,
            constraint: "nu > -n so the origin cells stay integrable",
        });
    }
    let g = GridFunction::from_fn(spec, resolution, "power-weight", |x| norm(n, x).powf(nu))?;
    let h = g.h();
    let mut vals = g.values().to_vec();
    for (flat, v) in vals.iter_mut().enumerate() {
        let x = g.point(flat);
        if (0..n).all(|a| x[a].abs() <= 0.5 * h * (1.0 + 1e-9)) {
            let mut lower = [0.0; 3];
            for a in 0..n {
                lower[a] = x[a] - 0.5 * h;
            }
            *v = power_cube_mean(n, nu, &Cube::new(n, lower, h));
        }
    }
    Ok(GridFunction::from_values(spec, resolution, "power-weight", vals)?)
}

/// One test cube together with its scale octave `log2(side)`.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub cube: Cube,
    pub octave: i32,
}

/// The family of cubes a constant is measured over.
#[derive(Debug, Clone)]
pub struct CubeSweep {
    pub entries: Vec<SweepEntry>,
}

impl CubeSweep {
    /// Lattice cubes of every shift across the octave range, the cube
    /// containing the origin at each shift and scale, and origin-centered
    /// cubes (the extremizers for power weights).
    ///
    /// Random lattice positions come from a seeded generator, so the same
    /// arguments always produce the same sweep.
    pub fn standard(
        n: usize,
        finest: f64,
        coarsest: f64,
        per_level: usize,
        seed: u64,
    ) -> Result<CubeSweep, WeightError> {
        if n != 2 && n != 3 {
            return Err(WeightError::Dimension(n));
        }
        if !(finest > 0.0 && coarsest >= finest) {
            return Err(WeightError::BadExponent {
                name: "finest",
                value: finest,
                constraint: "0 < finest <= coarsest",
            });
        }
        let j0 = finest.log2().round() as i32;
        let j1 = coarsest.log2().round() as i32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for j in j0..=j1 {
            let side = (j as f64).exp2();
            let mut centered = [0.0; 3];
            for c in centered.iter_mut().take(n) {
                *c = -0.5 * side;
            }
            entries.push(SweepEntry {
                cube: Cube::new(n, centered, side),
                octave: j,
            });
            for shift in shifts(n) {
                entries.push(SweepEntry {
                    cube: locate(n, &ORIGIN, j, shift).to_cube(),
                    octave: j,
                });
                let range = ((coarsest / side).round() as i64).max(1);
                for _ in 0..per_level {
                    let mut index = [0i64; 3];
                    for i in index.iter_mut().take(n) {
                        *i = rng.random_range(-range..range);
                    }
                    let cube = DyadicCube {
                        n,
                        level: j,
                        index,
                        shift,
                    }
                    .to_cube();
                    entries.push(SweepEntry { cube, octave: j });
                }
            }
        }
        Ok(CubeSweep { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct octaves present, ascending.
    pub fn octaves(&self) -> Vec<i32> {
        let set: std::collections::BTreeSet<i32> =
            self.entries.iter().map(|e| e.octave).collect();
        set.into_iter().collect()
    }
}

/// Maximum of a cube product per octave.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct SweepPoint {
    pub octave: i32,
    pub value: f64,
}

/// Empirical supremum of a cube product over a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ApqReport {
    /// Largest product seen; `+inf` when some cube diverges exactly.
    pub constant: f64,
    pub divergent: bool,
    /// Per-octave maxima, ascending octave.
    pub octave_max: Vec<SweepPoint>,
    /// Cubes that actually contributed (sampled weights skip empty cubes).
    pub entries: usize,
}

impl ApqReport {
    fn from_values(sweep: &CubeSweep, vals: &[Option<f64>]) -> ApqReport {
        let mut per: BTreeMap<i32, f64> = BTreeMap::new();
        let mut constant = 0.0f64;
        let mut divergent = false;
        let mut entries = 0;
        for (entry, v) in sweep.entries.iter().zip(vals) {
            let v = match v {
                Some(v) => *v,
                None => continue,
            };
            entries += 1;
            if !v.is_finite() {
                divergent = true;
            }
            constant = constant.max(v);
            per.entry(entry.octave)
                .and_modify(|m| *m = m.max(v))
                .or_insert(v);
        }
        let octave_max = per
            .into_iter()
            .map(|(octave, value)| SweepPoint { octave, value })
            .collect();
        ApqReport {
            constant,
            divergent,
            octave_max,
            entries,
        }
    }

    /// Mean slope of `log2(max)` per octave over the last six octave gaps.
    ///
    /// Zero-ish for a finite constant, close to the analytic divergence
    /// rate for resolution-bound realizations of divergent weights, and
    /// `+inf` when some cube already reported an exact `+inf`.
    pub fn growth_rate(&self) -> f64 {
        if self.divergent {
            return f64::INFINITY;
        }
        let v = &self.octave_max;
        if v.len() < 2 {
            return 0.0;
        }
        let tail = &v[v.len().saturating_sub(7)..];
        let mut acc = 0.0;
        let mut count = 0;
        for pair in tail.windows(2) {
            let gap = (pair[1].octave - pair[0].octave) as f64;
            acc += (pair[1].value / pair[0].value).log2() / gap;
            count += 1;
        }
        acc / count as f64
    }
}

/// Product with two inner exponents and two outer roots; every constant in
/// this module is an instance.
fn product_report(w: &Weight, e1: f64, o1: f64, e2: f64, o2: f64, sweep: &CubeSweep) -> ApqReport {
    let vals: Vec<Option<f64>> = sweep
        .entries
        .par_iter()
        .map(|entry| {
            let m1 = w.mean_pow(&entry.cube, e1)?;
            let m2 = w.mean_pow(&entry.cube, e2)?;
            Some(m1.powf(o1) * m2.powf(o2))
        })
        .collect();
    ApqReport::from_values(sweep, &vals)
}

/// `sup_Q (avg_Q w^q)^(1/q) (avg_Q w^(-p'))^(1/p')` over the sweep.
pub fn apq_constant(
    w: &Weight,
    p: f64,
    q: f64,
    sweep: &CubeSweep,
) -> Result<ApqReport, WeightError> {
    check_exponent("p", p, 1.0)?;
    check_positive("q", q)?;
    let pp = conjugate_exponent(p);
    Ok(product_report(w, q, 1.0 / q, -pp, 1.0 / pp, sweep))
}

/// Classical one-exponent constant `sup_Q (avg_Q w)(avg_Q w^(-1/(P-1)))^(P-1)`.
pub fn muckenhoupt_constant(
    w: &Weight,
    big_p: f64,
    sweep: &CubeSweep,
) -> Result<ApqReport, WeightError> {
    check_exponent("P", big_p, 1.0)?;
    let e = 1.0 / (big_p - 1.0);
    Ok(product_report(w, 1.0, 1.0, -e, big_p - 1.0, sweep))
}

/// Endpoint average-to-infimum ratio `sup_Q (avg_Q w^q) / (inf_Q w)^q`.
///
/// The exponent `q` is the endpoint Sobolev exponent of the `s`-average
/// scale; `s` itself is carried for bookkeeping only.
pub fn a1_s_constant(
    w: &Weight,
    s: f64,
    q: f64,
    sweep: &CubeSweep,
) -> Result<ApqReport, WeightError> {
    check_exponent("s", s, 1.0 - 1e-12)?;
    if !(q > s) {
        return Err(WeightError::BadExponent {
            name: "q",
            value: q,
            constraint: "q > s at the endpoint",
        });
    }
    let vals: Vec<Option<f64>> = sweep
        .entries
        .par_iter()
        .map(|entry| {
            let m = w.mean_pow(&entry.cube, q)?;
            let i = w.inf(&entry.cube)?;
            Some(m / i.powf(q))
        })
        .collect();
    Ok(ApqReport::from_values(sweep, &vals))
}

/// `L^p(w)` norm of `f` with the weight as the measure density.
///
/// Strong form `(sum |f|^p w h^n)^(1/p)`; weak form
/// `sup_t t w({|f| > t})^(1/p)` with the supremum over sample thresholds,
/// which is exact for simple functions.  Norms with the weight multiplied
/// inside follow by passing `w^p` here, since power weights are closed
/// under powers.
pub fn weighted_norm(
    f: &GridFunction,
    w: &Weight,
    p: f64,
    weak: bool,
) -> Result<f64, WeightError> {
    check_exponent("p", p, 1.0 - 1e-12)?;
    let wv = w.realized_values(f)?;
    let hn = f.cell_volume();
    if !weak {
        let terms: Vec<f64> = f
            .values()
            .iter()
            .zip(&wv)
            .map(|(v, w)| v.abs().powf(p) * w * hn)
            .collect();
        return Ok(pairwise_sum(&terms).powf(1.0 / p));
    }
    let mut pairs: Vec<(f64, f64)> = f
        .values()
        .iter()
        .zip(&wv)
        .filter(|(v, _)| **v != 0.0)
        .map(|(v, w)| (v.abs(), w * hn))
        .collect();
    pairs.sort_unstable_by(|a, b| b.0.partial_cmp(&a.0).expect("finite samples"));
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let level = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == level {
            mass += pairs[i].1;
            i += 1;
        }
        best = best.max(level * mass.powf(1.0 / p));
    }
    Ok(best)
}

/// The open interval of `lambda` with `|x|^lambda` giving a finite
/// two-exponent constant: `(-n/q, n/p')`.
pub fn power_window(n: usize, p: f64, q: f64) -> (f64, f64) {
    (-(n as f64) / q, n as f64 / conjugate_exponent(p))
}

/// The window after rescaling by an inner average exponent `s`:
/// `(-n/q, n/s - n/p)`.  At `s = 1` this is `power_window`.
pub fn rescaled_power_window(n: usize, p: f64, q: f64, s: f64) -> (f64, f64) {
    (-(n as f64) / q, n as f64 / s - n as f64 / p)
}

pub fn in_window(lambda: f64, window: (f64, f64)) -> bool {
    window.0 < lambda && lambda < window.1
}

/// The two-exponent product with the dual exponent rescaled by `s`:
/// `(avg w^q)^(1/q) (avg w^(-ps/(p-s)))^((p-s)/(ps))`.  At `s = 1` this is
/// the plain product.
pub fn rescaled_apq_constant(
    w: &Weight,
    p: f64,
    q: f64,
    s: f64,
    sweep: &CubeSweep,
) -> Result<ApqReport, WeightError> {
    check_exponent("p", p, 1.0)?;
    check_positive("q", q)?;
    check_rescale(s, p)?;
    let e = p * s / (p - s);
    Ok(product_report(w, q, 1.0 / q, -e, 1.0 / e, sweep))
}

/// Side-by-side constants for the rescaling identities.
#[derive(Debug, Clone, Serialize)]
pub struct RescalingReport {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    /// The one-exponent class the `q`-th power of the weight lands in.
    pub classical_exponent: f64,
    pub apq: ApqReport,
    pub classical: ApqReport,
    pub rescaled: ApqReport,
    /// Largest relative gap between the classical product of `w^q` and the
    /// `q`-th power of the two-exponent product, cube by cube.  The two are
    /// algebraically identical, so this measures rounding only.
    pub rebase_defect: f64,
}

impl RescalingReport {
    /// Finite-iff-finite agreement plus the per-cube identity holding to
    /// rounding.
    pub fn consistent(&self) -> bool {
        self.apq.divergent == self.classical.divergent && self.rebase_defect <= 1e-11
    }
}

/// Measures the two-exponent product, the classical product of `w^q`, and
/// the `s`-rescaled product over one sweep, with the per-cube rebase
/// defect between the first two.
pub fn rescaling_check(
    w: &Weight,
    p: f64,
    q: f64,
    s: f64,
    sweep: &CubeSweep,
) -> Result<RescalingReport, WeightError> {
    check_exponent("p", p, 1.0)?;
    check_positive("q", q)?;
    check_rescale(s, p)?;
    let pp = conjugate_exponent(p);
    let es = p * s / (p - s);
    let triples: Vec<Option<(f64, f64, f64, f64)>> = sweep
        .entries
        .par_iter()
        .map(|entry| {
            let mq = w.mean_pow(&entry.cube, q)?;
            let mp = w.mean_pow(&entry.cube, -pp)?;
            let ms = w.mean_pow(&entry.cube, -es)?;
            let apq = mq.powf(1.0 / q) * mp.powf(1.0 / pp);
            let classical = mq * mp.powf(q / pp);
            let rescaled = mq.powf(1.0 / q) * ms.powf(1.0 / es);
            let defect = if classical.is_finite() {
                (classical - apq.powf(q)).abs() / classical.max(f64::MIN_POSITIVE)
            } else {
                0.0
            };
            Some((apq, classical, rescaled, defect))
        })
        .collect();
    let pick = |k: usize| -> Vec<Option<f64>> {
        triples
            .iter()
            .map(|t| t.map(|(a, c, r, d)| [a, c, r, d][k]))
            .collect()
    };
    let defect = triples
        .iter()
        .flatten()
        .fold(0.0f64, |m, &(_, _, _, d)| m.max(d));
    Ok(RescalingReport {
        p,
        q,
        s,
        classical_exponent: 1.0 + q / pp,
        apq: ApqReport::from_values(sweep, &pick(0)),
        classical: ApqReport::from_values(sweep, &pick(1)),
        rescaled: ApqReport::from_values(sweep, &pick(2)),
        rebase_defect: defect,
    })
}

/// One row of a power-weight sweep across `lambda`.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub constant: f64,
    pub growth: f64,
    pub octave_max: Vec<SweepPoint>,
}

/// Runs the `s`-rescaled product for `|x|^lambda` across a grid of
/// `lambda` values over one shared sweep.
pub fn power_lambda_sweep(
    n: usize,
    lambdas: &[f64],
    p: f64,
    q: f64,
    s: f64,
    sweep: &CubeSweep,
) -> Result<Vec<LambdaRow>, WeightError> {
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let w = Weight::power(n, lambda)?;
        let report = rescaled_apq_constant(&w, p, q, s, sweep)?;
        rows.push(LambdaRow {
            lambda,
            p,
            q,
            s,
            constant: report.constant,
            growth: report.growth_rate(),
            octave_max: report.octave_max,
        });
    }
    Ok(rows)
}

/// CSV with one line per `lambda` and one column per octave maximum.
pub fn sweep_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda,p,q,s,constant,growth");
    if let Some(first) = rows.first() {
        for point in &first.octave_max {
            out.push_str(&format!(",octave_{}", point.octave));
        }
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.9e},{:.9e}",
            row.lambda, row.p, row.q, row.s, row.constant, row.growth
        ));
        for point in &row.octave_max {
            out.push_str(&format!(",{:.9e}", point.value));
        }
        out.push('\n');
    }
    out
}

fn check_exponent(name: &'static str, value: f64, floor: f64) -> Result<(), WeightError> {
    if value.is_finite() && value > floor {
        Ok(())
    } else {
        Err(WeightError::BadExponent {
            name,
            value,
            constraint: "must be finite and large enough for a dual exponent",
        })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), WeightError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(WeightError::BadExponent {
            name,
            value,
            constraint: "must be finite and positive",
        })
    }
}

fn check_rescale(s: f64, p: f64) -> Result<(), WeightError> {
    if s >= 1.0 && s < p {
        Ok(())
    } else {
        Err(WeightError::BadExponent {
            name: "s",
            value: s,
            constraint: "1 <= s < p",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::corpus::{sample, CorpusParams};
    use crate::grid::BoxSpec;
    use crate::numeric::unit_sphere_area;

    fn sweep2() -> CubeSweep {
        CubeSweep::standard(2, 0.25, 16.0, 4, 7).unwrap()
    }

    #[test]
    fn constant_weight_gives_unit_constants() {
        let sweep = sweep2();
        let w = Weight::power(2, 0.0).unwrap();
        let apq = apq_constant(&w, 2.0, 2.0, &sweep).unwrap();
        assert!((apq.constant - 1.0).abs() <= 1e-12);
        assert!(!apq.divergent);
        assert!(apq.growth_rate().abs() <= 1e-12);
        let a1 = a1_s_constant(&w, 1.0, 2.0, &sweep).unwrap();
        assert!((a1.constant - 1.0).abs() <= 1e-12);
        let classical = muckenhoupt_constant(&w, 2.0, &sweep).unwrap();
        assert!((classical.constant - 1.0).abs() <= 1e-12);

        let spec = BoxSpec::symmetric(2, 4.0).unwrap();
        let flat = GridFunction::from_fn(spec, 16, "unit", |_| 1.0).unwrap();
        let ws = Weight::sampled(flat).unwrap();
        let apqs = apq_constant(&ws, 2.0, 2.0, &sweep).unwrap();
        assert!((apqs.constant - 1.0).abs() <= 1e-12);
    }

    fn midpoint_mean(n: usize, mu: f64, cube: &Cube, res: usize) -> f64 {
        let h = cube.side / res as f64;
        let mut acc = 0.0;
        let planes = if n == 3 { res } else { 1 };
        for k in 0..planes {
            for j in 0..res {
                for i in 0..res {
                    let x = [
                        cube.lower[0] + (i as f64 + 0.5) * h,
                        cube.lower[1] + (j as f64 + 0.5) * h,
                        if n == 3 {
                            cube.lower[2] + (k as f64 + 0.5) * h
                        } else {
                            0.0
                        },
                    ];
                    acc += norm(n, &x).powf(mu);
                }
            }
        }
        acc / (res.pow(n as u32) as f64)
    }

    #[test]
    fn origin_cube_means_match_refinement_and_ball_brackets() {
        let corner = Cube::new(2, [0.0, 0.0, 0.0], 1.0);
        let exact = power_cube_mean(2, -0.8, &corner);
        let mid = midpoint_mean(2, -0.8, &corner, 1024);
        assert!((exact - mid).abs() / exact <= 2e-3, "{exact} vs {mid}");

        let centered = Cube::new(2, [-1.0, -1.0, 0.0], 2.0);
        let exact = power_cube_mean(2, -1.3, &centered);
        let nu = -1.3;
        let ball = |r: f64| unit_sphere_area(2) * r.powf(nu + 2.0) / (nu + 2.0);
        let lo = ball(1.0) / centered.volume();
        let hi = ball(2.0f64.sqrt()) / centered.volume();
        assert!(exact >= lo && exact <= hi, "{lo} <= {exact} <= {hi}");

        let corner3 = Cube::new(3, [0.0; 3], 1.0);
        let exact3 = power_cube_mean(3, -1.5, &corner3);
        let mid3 = midpoint_mean(3, -1.5, &corner3, 128);
        assert!((exact3 - mid3).abs() / exact3 <= 5e-3, "{exact3} vs {mid3}");

        let centered3 = Cube::new(3, [-0.5; 3], 1.0);
        let exact3 = power_cube_mean(3, -2.2, &centered3);
        let nu = -2.2;
        let ball3 = |r: f64| unit_sphere_area(3) * r.powf(nu + 3.0) / (nu + 3.0);
        assert!(exact3 >= ball3(0.5) && exact3 <= ball3(0.75f64.sqrt()));

        assert!(power_cube_mean(2, -2.0, &corner).is_infinite());
        assert!(power_cube_mean(2, -2.5, &centered).is_infinite());
        assert!(power_cube_mean(3, -3.0, &corner3).is_infinite());

        let off = Cube::new(2, [0.5, 0.25, 0.0], 0.5);
        let exact = power_cube_mean(2, -1.7, &off);
        let mid = midpoint_mean(2, -1.7, &off, 512);
        assert!((exact - mid).abs() / exact <= 1e-4, "{exact} vs {mid}");
        assert!(power_cube_mean(2, -2.5, &off).is_finite());
    }

    #[test]
    fn divergence_matches_the_analytic_window_on_a_lambda_grid() {
        let sweep = sweep2();
        let (p, q) = (2.0, 4.0);
        let window = power_window(2, p, q);
        assert!((window.0 + 0.5).abs() <= 1e-12 && (window.1 - 1.0).abs() <= 1e-12);
        let mut lambda = -1.5;
        while lambda <= 2.0 {
            let w = Weight::power(2, lambda).unwrap();
            let report = apq_constant(&w, p, q, &sweep).unwrap();
            assert_eq!(
                report.divergent,
                !in_window(lambda, window),
                "lambda = {lambda}"
            );
            lambda += 0.125;
        }

        let s = 1.5;
        let rescaled = rescaled_power_window(2, p, q, s);
        assert!((rescaled.1 - (2.0 / 1.5 - 1.0)).abs() <= 1e-12);
        let mut lambda = -1.0;
        while lambda <= 1.0 {
            let w = Weight::power(2, lambda).unwrap();
            let report = rescaled_apq_constant(&w, p, q, s, &sweep).unwrap();
            assert_eq!(
                report.divergent,
                !in_window(lambda, rescaled),
                "lambda = {lambda}"
            );
            lambda += 0.125;
        }

        assert_eq!(rescaled_power_window(2, p, q, 1.0), power_window(2, p, q));
    }

    #[test]
    fn in_window_power_constant_is_scale_stable() {
        let sweep = sweep2();
        let w = Weight::power(2, 0.5).unwrap();
        let report = apq_constant(&w, 2.0, 2.0, &sweep).unwrap();
        assert!(!report.divergent);
        assert!(report.growth_rate().abs() <= 0.02, "{}", report.growth_rate());
        let centered = Cube::new(2, [-1.0, -1.0, 0.0], 2.0);
        let m1 = w.mean_pow(&centered, 2.0).unwrap();
        let m2 = w.mean_pow(&centered, -2.0).unwrap();
        let product = m1.sqrt() * m2.sqrt();
        assert!(report.constant >= product - 1e-12);
    }

    #[test]
    fn grid_realization_turns_divergence_into_octave_growth() {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let sweep = CubeSweep::standard(2, 0.5, 8.0, 6, 11).unwrap();

        let out = power_realization(spec, 128, 1.25).unwrap();
        let w_out = Weight::sampled(out).unwrap();
        let report = apq_constant(&w_out, 2.0, 2.0, &sweep).unwrap();
        assert!(!report.divergent);
        let rate = report.growth_rate();
        assert!((0.08..=0.5).contains(&rate), "rate {rate}");

        let inside = power_realization(spec, 128, 0.5).unwrap();
        let w_in = Weight::sampled(inside).unwrap();
        let rate = apq_constant(&w_in, 2.0, 2.0, &sweep).unwrap().growth_rate();
        assert!(rate.abs() <= 0.05, "rate {rate}");
    }

    #[test]
    fn rescaling_identity_holds_per_cube_and_duality_mirrors_the_product() {
        let sweep = sweep2();
        let w = Weight::power(2, 0.6).unwrap();
        let (p, q, s) = (2.5, 3.0, 1.25);
        let report = rescaling_check(&w, p, q, s, &sweep).unwrap();
        assert!(report.consistent(), "defect {}", report.rebase_defect);
        assert!(!report.apq.divergent);

        let direct = apq_constant(&w.pow(s), p / s, q / s, &sweep).unwrap();
        let rel = (direct.constant - report.rescaled.constant.powf(s)).abs() / direct.constant;
        assert!(rel <= 1e-10, "rel {rel}");

        let dual = Weight::power(2, -0.6).unwrap();
        let qd = conjugate_exponent(q);
        let pd = conjugate_exponent(p);
        let mirrored = apq_constant(&dual, qd, pd, &sweep).unwrap();
        let rel = (mirrored.constant - report.apq.constant).abs() / report.apq.constant;
        assert!(rel <= 1e-11, "rel {rel}");
        for (a, b) in report.apq.octave_max.iter().zip(&mirrored.octave_max) {
            assert_eq!(a.octave, b.octave);
            assert!((a.value - b.value).abs() <= 1e-11 * a.value.max(1.0));
        }

        let win = power_window(2, p, q);
        let win_dual = power_window(2, qd, pd);
        let mut lambda = -2.0;
        while lambda <= 2.0 {
            assert_eq!(in_window(lambda, win), in_window(-lambda, win_dual));
            lambda += 0.125;
        }
    }

    #[test]
    fn weighted_norms_reduce_and_match_the_radial_closed_form() {
        let spec = BoxSpec::symmetric(2, 2.0).unwrap();
        let ball = sample(
            "indicator_ball",
            &CorpusParams::new().set("radius", 1.0),
            spec,
            256,
        )
        .unwrap();
        let flat = Weight::power(2, 0.0).unwrap();
        let strong = weighted_norm(&ball, &flat, 2.0, false).unwrap();
        assert!((strong - ball.lp_norm(2.0)).abs() <= 1e-12);

        let w = Weight::power(2, 0.5).unwrap();
        let strong = weighted_norm(&ball, &w, 1.0, false).unwrap();
        let closed = unit_sphere_area(2) / 2.5;
        assert!(
            (strong - closed).abs() / closed <= 3e-2,
            "{strong} vs {closed}"
        );
        let weak = weighted_norm(&ball, &w, 1.0, true).unwrap();
        assert!((weak - strong).abs() <= 1e-12 * strong);

        let bump = sample("bump", &CorpusParams::new(), spec, 128).unwrap();
        let wneg = Weight::power(2, -0.5).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let strong = weighted_norm(&bump, &wneg, p, false).unwrap();
            let weak = weighted_norm(&bump, &wneg, p, true).unwrap();
            assert!(weak <= strong * (1.0 + 1e-12), "p = {p}");
        }
    }

    #[test]
    fn endpoint_ratio_tracks_the_sign_of_lambda() {
        let sweep = sweep2();
        let small = Weight::power(2, -0.3).unwrap();
        let report = a1_s_constant(&small, 1.0, 2.0, &sweep).unwrap();
        assert!(!report.divergent);
        assert!(report.constant >= 1.0 - 1e-12);
        assert!(report.growth_rate().abs() <= 0.02);

        let positive = Weight::power(2, 0.3).unwrap();
        let report = a1_s_constant(&positive, 1.0, 2.0, &sweep).unwrap();
        assert!(report.divergent);

        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let realized = Weight::sampled(power_realization(spec, 128, 0.3).unwrap()).unwrap();
        let narrow = CubeSweep::standard(2, 0.5, 8.0, 4, 13).unwrap();
        let rate = a1_s_constant(&realized, 1.0, 2.0, &narrow)
            .unwrap()
            .growth_rate();
        assert!(rate >= 0.3, "rate {rate}");

        let dirty = GridFunction::from_fn(spec, 16, "touch-zero", |x| x[0].max(0.0)).unwrap();
        assert!(matches!(
            Weight::sampled(dirty),
            Err(WeightError::NotPositive { .. })
        ));
    }

    #[test]
    fn lambda_sweep_csv_is_deterministic_and_shaped() {
        let sweep = sweep2();
        let rows = power_lambda_sweep(2, &[-0.5, 0.0, 0.5], 2.0, 2.0, 1.0, &sweep).unwrap();
        let csv = sweep_csv(&rows);
        let again = sweep_csv(
            &power_lambda_sweep(2, &[-0.5, 0.0, 0.5], 2.0, 2.0, 1.0, &sweep).unwrap(),
        );
        assert_eq!(csv, again);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("lambda,p,q,s,constant,growth,octave_"));
        let octaves = sweep.octaves().len();
        assert_eq!(header.split(',').count(), 6 + octaves);
        assert_eq!(lines.count(), rows.len());

        assert!(Weight::power(4, 0.5).is_err());
        assert!(apq_constant(&Weight::power(2, 0.5).unwrap(), 1.0, 2.0, &sweep).is_err());
        assert!(CubeSweep::standard(2, -1.0, 4.0, 2, 1).is_err());
    }
}
