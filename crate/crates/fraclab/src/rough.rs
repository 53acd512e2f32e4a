//! Rough fractional integral operators and their companion maximal operators.
//!
//! The singular integral with a rough angular part is evaluated through its
//! annular decomposition: around each evaluation point the domain is split
//! into dyadic shells `2^(k-1) < |y| <= 2^k`, a constant is removed from `f`
//! on each shell, and the shell integral is computed in polar form with a
//! sphere mesh crossed with a substituted radial Gauss rule.  The
//! substitution `u = r^(alpha-1)` (or `u = ln r` at `alpha = 1`) absorbs the
//! radial weight `r^(alpha-2)` exactly, so the rule integrates radial
//! constants without error.  Ball averages run through `v = r^n` for the
//! same reason, which makes averages of constants exact up to rounding.
//!
//! Radii below a dyadic cutoff in `[h, 2h)` are discarded; each operator
//! reports the analytic bound on the discarded part.  The maximal operators
//! take their supremum over the dyadic radii `2^k` only, an approximation
//! from below whose comparability factor is recorded on the scheme.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{EvalSet, GridFunction};
use crate::numeric::{pairwise_sum, unit_ball_volume, unit_sphere_area, GAUSS_16, GAUSS_4};
use crate::sphere::{SphereMesh, SphereSymbol};

#[derive(Debug, Error)]
pub enum RoughError {
    #[error("order {alpha} outside the admissible range {lo}..{hi}")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },
    #[error("symbol mean {0:e} exceeds the mean-zero tolerance")]
    NotMeanZero(f64),
    #[error("grid dimension {grid} does not match scheme dimension {scheme}")]
    DimensionMismatch { scheme: usize, grid: usize },
    #[error("symbol mesh ({got} nodes) is not the scheme mesh ({expected} nodes)")]
    MeshMismatch { expected: usize, got: usize },
}

/// Which constant is subtracted from `f` on each annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cancellation {
    /// The average of `f` over the ball `B(x, 2^k)`, the default.
    BallAverage,
    /// The value `f(x)`, matching the nodes of the nonlinear derivative
    /// term by term.
    CenterValue,
}

fn pow2i(k: i32) -> f64 {
    (k as f64).exp2()
}

/// Radial nodes and weights; the weight of the underlying measure is folded
/// into `weights`, so `sum_i w_i g(r_i)` approximates the weighted integral
/// of `g` over the panel.
#[derive(Debug, Clone)]
struct RadialRule {
    radii: Vec<f64>,
    weights: Vec<f64>,
}

/// Rule for `int_a^b r^(alpha-2) g(r) dr` via `u = r^(alpha-1)`,
/// or `u = ln r` when `alpha = 1`.  Exact on constant `g`.
fn singular_rule(a: f64, b: f64, alpha: f64) -> RadialRule {
    let mut radii = Vec::with_capacity(GAUSS_4.nodes.len());
    let mut weights = Vec::with_capacity(GAUSS_4.nodes.len());
    if (alpha - 1.0).abs() < 1e-12 {
        for (u, w) in GAUSS_4.mapped(a.ln(), b.ln()) {
            radii.push(u.exp());
            weights.push(w);
        }
    } else {
        let p = alpha - 1.0;
        let (lo, hi) = if p > 0.0 {
            (a.powf(p), b.powf(p))
        } else {
            (b.powf(p), a.powf(p))
        };
        for (u, w) in GAUSS_4.mapped(lo, hi) {
            radii.push(u.powf(1.0 / p));
            weights.push(w / p.abs());
        }
    }
    RadialRule { radii, weights }
}

/// Rule for `int_a^b r^(n-1) g(r) dr` via `v = r^n`.  Exact on constant `g`.
fn shell_rule(a: f64, b: f64, n: usize) -> RadialRule {
    let p = n as f64;
    let mut radii = Vec::with_capacity(GAUSS_4.nodes.len());
    let mut weights = Vec::with_capacity(GAUSS_4.nodes.len());
    for (v, w) in GAUSS_4.mapped(a.powi(n as i32), b.powi(n as i32)) {
        radii.push(v.powf(1.0 / p));
        weights.push(w / p);
    }
    RadialRule { radii, weights }
}

/// Dyadic annuli around an evaluation point with the radial rules and the
/// sphere mesh shared by every operator in this module.
pub struct AnnularScheme {
    n: usize,
    alpha: f64,
    k_min: i32,
    k_max: i32,
    mesh: Arc<SphereMesh>,
    cancellation: Cancellation,
    /// Per annulus `(2^(k-1), 2^k]`: rule against the weight `r^(alpha-2)`.
    singular: Vec<RadialRule>,
    /// Per annulus: rule against the weight `r^(n-1)`.
    shells: Vec<RadialRule>,
    /// Ball-weight rule on the core `[0, 2^(k_min-1)]`.
    core: RadialRule,
}

impl AnnularScheme {
    /// Builds the scheme for a grid.  The inner truncation radius is the
    /// dyadic value in `[h, 2h)`; the outer radius is the first dyadic value
    /// at or beyond the box diagonal, so shifted supports are always covered.
    pub fn new(
        grid: &GridFunction,
        alpha: f64,
        mesh: Arc<SphereMesh>,
        cancellation: Cancellation,
    ) -> Result<AnnularScheme, RoughError> {
        let n = grid.n();
        if mesh.n != n {
            return Err(RoughError::DimensionMismatch {
                scheme: mesh.n,
                grid: n,
            });
        }
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(RoughError::AlphaOutOfRange {
                alpha,
                lo: 0.0,
                hi: n as f64,
            });
        }
        let h = grid.h();
        let k_min = h.log2().ceil() as i32 + 1;
        let diag = grid.spec().side * (n as f64).sqrt();
        let k_max = diag.log2().ceil() as i32;
        let mut singular = Vec::new();
        let mut shells = Vec::new();
        for k in k_min..=k_max {
            let (a, b) = (pow2i(k - 1), pow2i(k));
            singular.push(singular_rule(a, b, alpha));
            shells.push(shell_rule(a, b, n));
        }
        let core = shell_rule(0.0, pow2i(k_min - 1), n);
        Ok(AnnularScheme {
            n,
            alpha,
            k_min,
            k_max,
            mesh,
            cancellation,
            singular,
            shells,
            core,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_range(&self) -> (i32, i32) {
        (self.k_min, self.k_max)
    }

    /// Radius below which the integrals are truncated.
    pub fn inner_radius(&self) -> f64 {
        pow2i(self.k_min - 1)
    }

    /// Radius of the largest ball the scheme covers.
    pub fn outer_radius(&self) -> f64 {
        pow2i(self.k_max)
    }

    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn cancellation(&self) -> Cancellation {
        self.cancellation
    }

    /// Worst-case ratio between the supremum over all radii and the
    /// supremum over the dyadic radii the maximal operators scan: moving
    /// `t` to the next power of two costs at most `2^(n + |alpha-1|)`.
    pub fn dyadic_sup_comparability(&self, alpha: f64) -> f64 {
        ((self.n as f64) + (alpha - 1.0).abs()).exp2()
    }

    /// Dyadic radii scanned by the maximal operators, smallest first.
    pub fn maximal_radii(&self) -> Vec<f64> {
        (self.k_min..=self.k_max).map(pow2i).collect()
    }

    /// Radii of the spherical averages: eight per octave plus the outer
    /// endpoint.
    pub fn spherical_radii(&self) -> Vec<f64> {
        let mut radii = Vec::new();
        for k in self.k_min..=self.k_max {
            for m in 0..8 {
                radii.push(pow2i(k - 1) * (m as f64 / 8.0).exp2());
            }
        }
        radii.push(pow2i(self.k_max));
        radii
    }
}

fn check_grid(f: &GridFunction, scheme: &AnnularScheme) -> Result<(), RoughError> {
    if f.n() != scheme.n {
        return Err(RoughError::DimensionMismatch {
            scheme: scheme.n,
            grid: f.n(),
        });
    }
    Ok(())
}

fn check_symbol(omega: &SphereSymbol, scheme: &AnnularScheme) -> Result<(), RoughError> {
    if !Arc::ptr_eq(&omega.mesh, &scheme.mesh) && omega.mesh.len() != scheme.mesh.len() {
        return Err(RoughError::MeshMismatch {
            expected: scheme.mesh.len(),
            got: omega.mesh.len(),
        });
    }
    Ok(())
}

fn check_mean_zero(omega: &SphereSymbol) -> Result<(), RoughError> {
    let mean = omega.weighted_mean();
    if mean.abs() > 1e-10 * omega.norm_sup().max(1e-300) {
        return Err(RoughError::NotMeanZero(mean));
    }
    Ok(())
}

/// Values `f(x - r theta_j)` for every mesh node, written into `out`.
fn sphere_row(f: &GridFunction, mesh: &SphereMesh, x: &[f64; 3], r: f64, out: &mut [f64]) {
    for (o, node) in out.iter_mut().zip(&mesh.nodes) {
        let y = [
            x[0] - r * node[0],
            x[1] - r * node[1],
            x[2] - r * node[2],
        ];
        *o = f.interpolate(&y);
    }
}

/// Reusable per-point buffers sized to the mesh.
struct Scratch {
    row: Vec<f64>,
    terms: Vec<f64>,
}

impl Scratch {
    fn new(m: usize) -> Scratch {
        Scratch {
            row: vec![0.0; m],
            terms: vec![0.0; m],
        }
    }
}

/// Signed `int int f(x - r theta) dsigma` against the rule's radial weight.
fn shell_integral(
    f: &GridFunction,
    mesh: &SphereMesh,
    rule: &RadialRule,
    x: &[f64; 3],
    scr: &mut Scratch,
) -> f64 {
    let mut acc = 0.0;
    for (&r, &w) in rule.radii.iter().zip(&rule.weights) {
        sphere_row(f, mesh, x, r, &mut scr.row);
        for (t, (&v, &mw)) in scr.terms.iter_mut().zip(scr.row.iter().zip(&mesh.weights)) {
            *t = v * mw;
        }
        acc += w * pairwise_sum(&scr.terms);
    }
    acc
}

/// Per-annulus contributions to the singular integral at `x`, smallest
/// annulus first.
fn singular_annulus_terms(
    f: &GridFunction,
    omega: &SphereSymbol,
    scheme: &AnnularScheme,
    x: &[f64; 3],
    scr: &mut Scratch,
) -> Vec<f64> {
    let mesh = &*scheme.mesh;
    let vn = unit_ball_volume(scheme.n);
    let fx = f.interpolate(x);
    let mut ball = shell_integral(f, mesh, &scheme.core, x, scr);
    let mut terms = Vec::with_capacity(scheme.singular.len());
    for (idx, rule) in scheme.singular.iter().enumerate() {
        ball += shell_integral(f, mesh, &scheme.shells[idx], x, scr);
        let k = scheme.k_min + idx as i32;
        let c = match scheme.cancellation {
            Cancellation::BallAverage => ball / (vn * pow2i(k * scheme.n as i32)),
            Cancellation::CenterValue => fx,
        };
        let mut term = 0.0;
        for (&r, &w) in rule.radii.iter().zip(&rule.weights) {
            sphere_row(f, mesh, x, r, &mut scr.row);
            for (j, t) in scr.terms.iter_mut().enumerate() {
                *t = mesh.weights[j] * omega.values[j] * (scr.row[j] - c);
            }
            term += w * pairwise_sum(&scr.terms);
        }
        terms.push(term);
    }
    terms
}

/// Per-annulus contributions to the nonlinear derivative at `x`, plus the
/// closed-form tail beyond the outer radius.
fn derivative_annulus_terms(
    f: &GridFunction,
    scheme: &AnnularScheme,
    x: &[f64; 3],
    scr: &mut Scratch,
) -> (Vec<f64>, f64) {
    let mesh = &*scheme.mesh;
    let fx = f.interpolate(x);
    let mut terms = Vec::with_capacity(scheme.singular.len());
    for rule in &scheme.singular {
        let mut term = 0.0;
        for (&r, &w) in rule.radii.iter().zip(&rule.weights) {
            sphere_row(f, mesh, x, r, &mut scr.row);
            for (j, t) in scr.terms.iter_mut().enumerate() {
                *t = mesh.weights[j] * (scr.row[j] - fx).abs();
            }
            term += w * pairwise_sum(&scr.terms);
        }
        terms.push(term);
    }
    let alpha = scheme.alpha;
    let tail = fx.abs() * unit_sphere_area(scheme.n) * scheme.outer_radius().powf(alpha - 1.0)
        / (1.0 - alpha);
    (terms, tail)
}

/// Values on an evaluation set together with the truncation error bound.
#[derive(Debug, Clone, Serialize)]
pub struct SingularOutput {
    pub values: Vec<f64>,
    /// Dyadic radius below which the integral is dropped.
    pub inner_radius: f64,
    /// Bound on the dropped part:
    /// `||Omega||_1 sup|grad f| rho^alpha / alpha`.
    pub inner_bound: f64,
}

/// The rough singular integral with kernel `Omega(y') |y|^(alpha-1-n)`,
/// evaluated as the ordered sum of cancelled annulus integrals.
pub fn rough_singular(
    f: &GridFunction,
    omega: &SphereSymbol,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<SingularOutput, RoughError> {
    check_grid(f, scheme)?;
    check_symbol(omega, scheme)?;
    check_mean_zero(omega)?;
    let alpha = scheme.alpha;
    let rho = scheme.inner_radius();
    let grad_sup = f.gradient_magnitude().sup_norm();
    let inner_bound = omega.norm_l1() * grad_sup * rho.powf(alpha) / alpha;
    let m = scheme.mesh.len();
    let values: Vec<f64> = points
        .points
        .par_iter()
        .map_init(
            || Scratch::new(m),
            |scr, x| {
                let terms = singular_annulus_terms(f, omega, scheme, x, scr);
                let mut acc = 0.0;
                for t in terms {
                    acc += t;
                }
                acc
            },
        )
        .collect();
    Ok(SingularOutput {
        values,
        inner_radius: rho,
        inner_bound,
    })
}

/// Values of the nonlinear derivative together with its error accounting.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeOutput {
    pub values: Vec<f64>,
    pub inner_radius: f64,
    /// Bound on the dropped inner part: `sup|grad f| omega_{n-1} rho^alpha / alpha`.
    pub inner_bound: f64,
    /// Radius beyond which `|f(y) - f(x)| = |f(x)|` exactly; that tail is
    /// added in closed form.
    pub tail_radius: f64,
}

/// The nonlinear expression `int |f(y) - f(x)| |x - y|^(alpha-1-n) dy`,
/// defined for `0 < alpha < 1`, on the same annulus nodes as the singular
/// integral so pointwise comparisons hold node by node.
pub fn nonlinear_frac_derivative(
    f: &GridFunction,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<DerivativeOutput, RoughError> {
    check_grid(f, scheme)?;
    let alpha = scheme.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RoughError::AlphaOutOfRange {
            alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let rho = scheme.inner_radius();
    let grad_sup = f.gradient_magnitude().sup_norm();
    let inner_bound = grad_sup * unit_sphere_area(scheme.n) * rho.powf(alpha) / alpha;
    let m = scheme.mesh.len();
    let values: Vec<f64> = points
        .points
        .par_iter()
        .map_init(
            || Scratch::new(m),
            |scr, x| {
                let (terms, tail) = derivative_annulus_terms(f, scheme, x, scr);
                let mut acc = 0.0;
                for t in terms {
                    acc += t;
                }
                acc + tail
            },
        )
        .collect();
    Ok(DerivativeOutput {
        values,
        inner_radius: rho,
        inner_bound,
        tail_radius: scheme.outer_radius(),
    })
}

/// Cached polar samples of `f` at the ball-rule radii around one point.
struct BallRows {
    weights: Vec<f64>,
    values: Vec<Vec<f64>>,
    /// Row count belonging to the ball of radius `2^k`, per annulus index.
    prefix: Vec<usize>,
}

fn ball_rows(f: &GridFunction, scheme: &AnnularScheme, x: &[f64; 3]) -> BallRows {
    let m = scheme.mesh.len();
    let mut weights = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut prefix = Vec::new();
    let push_rule = |rule: &RadialRule, weights: &mut Vec<f64>, values: &mut Vec<Vec<f64>>| {
        for (&r, &w) in rule.radii.iter().zip(&rule.weights) {
            let mut row = vec![0.0; m];
            sphere_row(f, &scheme.mesh, x, r, &mut row);
            weights.push(w);
            values.push(row);
        }
    };
    push_rule(&scheme.core, &mut weights, &mut values);
    for rule in &scheme.shells {
        push_rule(rule, &mut weights, &mut values);
        prefix.push(weights.len());
    }
    BallRows {
        weights,
        values,
        prefix,
    }
}

/// All per-radius quantities the maximal operators and their comparison
/// inequalities need, at one point.  Entry `i` belongs to the dyadic radius
/// `radii[i]`; every average is over the ball of that radius.
#[derive(Debug, Clone, Serialize)]
pub struct MaximalProfile {
    pub radii: Vec<f64>,
    /// `t^(alpha-1)` times the ball average of `|Omega(y') f(x-y)|`.
    pub rough: Vec<f64>,
    /// `t^(alpha-1)` times the absolute ball average of `Omega(y') f(x-y)`.
    pub natural: Vec<f64>,
    /// `t^(alpha-1)` times the ball average of `|Omega| |f - f_B|`.
    pub sharp: Vec<f64>,
    /// Signed ball average of `f`.
    pub ball_mean: Vec<f64>,
    /// Ball average of `|f|`.
    pub abs_ball_mean: Vec<f64>,
    /// Ball average of `|Omega(y')|`; constant in the radius and equal to
    /// `||Omega||_1 / omega_{n-1}` up to quadrature rounding.
    pub symbol_ball_mean: Vec<f64>,
}

impl MaximalProfile {
    fn sup(values: &[f64]) -> f64 {
        values.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn rough_sup(&self) -> f64 {
        Self::sup(&self.rough)
    }

    pub fn natural_sup(&self) -> f64 {
        Self::sup(&self.natural)
    }

    pub fn sharp_sup(&self) -> f64 {
        Self::sup(&self.sharp)
    }

    /// Supremum of `t^(alpha-1)` times the ball average of `|f|`: the plain
    /// fractional maximal function of order `alpha - 1` over balls.
    pub fn fractional_sup(&self, alpha: f64) -> f64 {
        let terms: Vec<f64> = self
            .radii
            .iter()
            .zip(&self.abs_ball_mean)
            .map(|(&t, &a)| t.powf(alpha - 1.0) * a)
            .collect();
        Self::sup(&terms)
    }
}

/// Computes the full per-radius profile at `x` for order `alpha`.
pub fn maximal_profile(
    f: &GridFunction,
    omega: &SphereSymbol,
    alpha: f64,
    scheme: &AnnularScheme,
    x: &[f64; 3],
) -> MaximalProfile {
    let mesh = &*scheme.mesh;
    let m = mesh.len();
    let vn = unit_ball_volume(scheme.n);
    let rows = ball_rows(f, scheme, x);
    let mut terms = vec![0.0; m];
    let mut row_sum = |row: &[f64], map: &mut dyn FnMut(usize) -> f64| -> f64 {
        for (j, t) in terms.iter_mut().enumerate() {
            *t = row[j] * map(j);
        }
        pairwise_sum(&terms)
    };
    let nrows = rows.weights.len();
    let mut s_f = Vec::with_capacity(nrows);
    let mut s_abs = Vec::with_capacity(nrows);
    let mut s_of = Vec::with_capacity(nrows);
    let mut s_oabs = Vec::with_capacity(nrows);
    for row in &rows.values {
        s_f.push(row_sum(row, &mut |j| mesh.weights[j]));
        s_abs.push(row_sum(
            &row.iter().map(|v| v.abs()).collect::<Vec<f64>>(),
            &mut |j| mesh.weights[j],
        ));
        s_of.push(row_sum(row, &mut |j| mesh.weights[j] * omega.values[j]));
        s_oabs.push(row_sum(
            &row.iter().map(|v| v.abs()).collect::<Vec<f64>>(),
            &mut |j| mesh.weights[j] * omega.values[j].abs(),
        ));
    }
    let count = scheme.shells.len();
    let mut profile = MaximalProfile {
        radii: Vec::with_capacity(count),
        rough: Vec::with_capacity(count),
        natural: Vec::with_capacity(count),
        sharp: Vec::with_capacity(count),
        ball_mean: Vec::with_capacity(count),
        abs_ball_mean: Vec::with_capacity(count),
        symbol_ball_mean: Vec::with_capacity(count),
    };
    let omega_l1 = omega.norm_l1();
    let mut cursor = 0usize;
    let (mut i_f, mut i_abs, mut i_of, mut i_oabs, mut i_w) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (idx, &pref) in rows.prefix.iter().enumerate() {
        while cursor < pref {
            let w = rows.weights[cursor];
            i_f += w * s_f[cursor];
            i_abs += w * s_abs[cursor];
            i_of += w * s_of[cursor];
            i_oabs += w * s_oabs[cursor];
            i_w += w;
            cursor += 1;
        }
        let k = scheme.k_min + idx as i32;
        let t = pow2i(k);
        let vol = vn * pow2i(k * scheme.n as i32);
        let tpow = t.powf(alpha - 1.0);
        let fb = i_f / vol;
        let mut sharp_int = 0.0;
        for (row, &w) in rows.values[..pref].iter().zip(&rows.weights[..pref]) {
            for (j, tterm) in terms.iter_mut().enumerate() {
                *tterm = mesh.weights[j] * omega.values[j].abs() * (row[j] - fb).abs();
            }
            sharp_int += w * pairwise_sum(&terms);
        }
        profile.radii.push(t);
        profile.rough.push(tpow * i_oabs / vol);
        profile.natural.push(tpow * i_of.abs() / vol);
        profile.sharp.push(tpow * sharp_int / vol);
        profile.ball_mean.push(fb);
        profile.abs_ball_mean.push(i_abs / vol);
        profile.symbol_ball_mean.push(i_w * omega_l1 / vol);
    }
    profile
}

fn maximal_values<G: Fn(&MaximalProfile) -> f64 + Sync>(
    f: &GridFunction,
    omega: &SphereSymbol,
    alpha: f64,
    scheme: &AnnularScheme,
    points: &EvalSet,
    pick: G,
) -> Vec<f64> {
    points
        .points
        .par_iter()
        .map(|x| pick(&maximal_profile(f, omega, alpha, scheme, x)))
        .collect()
}

/// `sup_t t^(alpha-1)` average of `|Omega(y') f(x-y)|` over `B(x,t)`,
/// scanned over the dyadic radii.  Requires `1 <= alpha < n`: without
/// cancellation the expression degenerates for smaller orders.
pub fn rough_maximal(
    f: &GridFunction,
    omega: &SphereSymbol,
    alpha: f64,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<Vec<f64>, RoughError> {
    check_grid(f, scheme)?;
    check_symbol(omega, scheme)?;
    if !(alpha >= 1.0 && alpha < scheme.n as f64) {
        return Err(RoughError::AlphaOutOfRange {
            alpha,
            lo: 1.0,
            hi: scheme.n as f64,
        });
    }
    Ok(maximal_values(f, omega, alpha, scheme, points, |p| {
        p.rough_sup()
    }))
}

/// `sup_t t^(alpha-1)` absolute ball average of `Omega(y') f(x-y)`; the
/// signed average keeps the cancellation, so the symbol must be mean zero.
pub fn natural_rough_maximal(
    f: &GridFunction,
    omega: &SphereSymbol,
    alpha: f64,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<Vec<f64>, RoughError> {
    check_grid(f, scheme)?;
    check_symbol(omega, scheme)?;
    check_mean_zero(omega)?;
    if !(alpha > 0.0 && alpha < scheme.n as f64) {
        return Err(RoughError::AlphaOutOfRange {
            alpha,
            lo: 0.0,
            hi: scheme.n as f64,
        });
    }
    Ok(maximal_values(f, omega, alpha, scheme, points, |p| {
        p.natural_sup()
    }))
}

/// `sup_t t^(alpha-1)` ball average of `|Omega(y')| |f(x-y) - f_B(x,t)|`.
pub fn sharp_rough_maximal(
    f: &GridFunction,
    omega: &SphereSymbol,
    alpha: f64,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<Vec<f64>, RoughError> {
    check_grid(f, scheme)?;
    check_symbol(omega, scheme)?;
    if !(alpha > 0.0 && alpha < scheme.n as f64) {
        return Err(RoughError::AlphaOutOfRange {
            alpha,
            lo: 0.0,
            hi: scheme.n as f64,
        });
    }
    Ok(maximal_values(f, omega, alpha, scheme, points, |p| {
        p.sharp_sup()
    }))
}

/// Spherical maximal values together with the radius attaining each one.
#[derive(Debug, Clone, Serialize)]
pub struct SphericalOutput {
    pub values: Vec<f64>,
    pub argmax_radii: Vec<f64>,
}

/// Shell averages of `|f|` at the refined radii around `x`:
/// pairs `(r, average over the sphere of radius r)`.
pub fn spherical_profile(f: &GridFunction, scheme: &AnnularScheme, x: &[f64; 3]) -> Vec<(f64, f64)> {
    let mesh = &*scheme.mesh;
    let total = mesh.total_weight();
    let mut row = vec![0.0; mesh.len()];
    let mut terms = vec![0.0; mesh.len()];
    scheme
        .spherical_radii()
        .into_iter()
        .map(|r| {
            sphere_row(f, mesh, x, r, &mut row);
            for (t, (&v, &w)) in terms.iter_mut().zip(row.iter().zip(&mesh.weights)) {
                *t = v.abs() * w;
            }
            (r, pairwise_sum(&terms) / total)
        })
        .collect()
}

/// `sup_r r^beta` shell average of `|f|` for `0 <= beta < n-1`, scanned
/// over eight radii per octave.
pub fn spherical_maximal(
    f: &GridFunction,
    beta: f64,
    scheme: &AnnularScheme,
    points: &EvalSet,
) -> Result<SphericalOutput, RoughError> {
    check_grid(f, scheme)?;
    let top = (scheme.n - 1) as f64;
    if !(beta >= 0.0 && beta < top) {
        return Err(RoughError::AlphaOutOfRange {
            alpha: beta,
            lo: 0.0,
            hi: top,
        });
    }
    let pairs: Vec<(f64, f64)> = points
        .points
        .par_iter()
        .map(|x| {
            let mut best = (0.0f64, 0.0f64);
            for (r, avg) in spherical_profile(f, scheme, x) {
                let v = r.powf(beta) * avg;
                if v > best.1 {
                    best = (r, v);
                }
            }
            (best.1, best.0)
        })
        .collect();
    Ok(SphericalOutput {
        values: pairs.iter().map(|p| p.0).collect(),
        argmax_radii: pairs.iter().map(|p| p.1).collect(),
    })
}

/// `int_t^R int_S g(x - r theta) dsigma dr` where `R` is the scheme's outer
/// radius: the shell-to-gradient comparison integral, whose radial weight
/// cancels exactly.  `g` is expected to be a nonnegative field such as a
/// gradient magnitude.
pub fn truncated_gradient_potential(
    g: &GridFunction,
    scheme: &AnnularScheme,
    x: &[f64; 3],
    t: f64,
) -> f64 {
    let outer = scheme.outer_radius();
    if t >= outer {
        return 0.0;
    }
    let mesh = &*scheme.mesh;
    let mut bounds = vec![t];
    for k in (scheme.k_min - 1)..=scheme.k_max {
        let b = pow2i(k);
        if b > t {
            bounds.push(b);
        }
    }
    let mut row = vec![0.0; mesh.len()];
    let mut terms = vec![0.0; mesh.len()];
    let mut acc = 0.0;
    // the integrand has no radial weight to tame, and at large radii an
    // octave panel is much wider than the features of the field, so this
    // rule is denser than the four-node annulus rules
    for pair in bounds.windows(2) {
        for (r, w) in GAUSS_16.mapped(pair[0], pair[1]) {
            sphere_row(g, mesh, x, r, &mut row);
            for (tt, (&v, &mw)) in terms.iter_mut().zip(row.iter().zip(&mesh.weights)) {
                *tt = v * mw;
            }
            acc += w * pairwise_sum(&terms);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::corpus::{sample, CorpusParams};
    use crate::grid::{BoxSpec, EvalSet, GridFunction};
    use crate::potentials::{maximal_on, riesz_constant, MaximalOptions, RieszOperator};
    use crate::sphere::{symbol, SphereMesh, SymbolParams};

    fn circle() -> Arc<SphereMesh> {
        Arc::new(SphereMesh::standard(2).unwrap())
    }

    fn bump_grid(res: usize) -> GridFunction {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let params = CorpusParams::new().set("radius", 4.0);
        sample("bump", &params, spec, res).unwrap()
    }

    /// Grid shifted by half a cell so that a sample sits exactly on the
    /// origin.
    fn centered_grid(id: &str, params: CorpusParams) -> GridFunction {
        let spec = BoxSpec::new(2, [-8.125, -8.125, 0.0], 16.0).unwrap();
        sample(id, &params, spec, 64).unwrap()
    }

    fn single_point(grid: &GridFunction, idx: [usize; 3]) -> EvalSet {
        let flat = grid.flat_index(idx);
        EvalSet {
            flat: vec![flat],
            points: vec![grid.point(flat)],
        }
    }

    #[test]
    fn annuli_tile_the_truncation_region() {
        let f = bump_grid(64);
        let mesh = circle();
        let scheme = AnnularScheme::new(&f, 0.7, mesh, Cancellation::BallAverage).unwrap();
        let h = f.h();
        assert!(scheme.inner_radius() >= h && scheme.inner_radius() < 2.0 * h);
        assert!(scheme.outer_radius() >= f.spec().side * 2f64.sqrt());
        let (k_min, k_max) = scheme.k_range();
        assert_eq!((k_max - k_min + 1) as usize, scheme.singular.len());
        for (idx, rule) in scheme.singular.iter().enumerate() {
            let k = k_min + idx as i32;
            for &r in &rule.radii {
                assert!(r > pow2i(k - 1) && r < pow2i(k));
            }
            let exact = (pow2i(k).powf(0.7 - 1.0) - pow2i(k - 1).powf(0.7 - 1.0)) / (0.7 - 1.0);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - exact).abs() <= 1e-12 * exact.abs());
        }
    }

    #[test]
    fn singular_annuli_vanish_where_the_input_is_constant() {
        let params = CorpusParams::new().set("radius", 2.0).set("width", 0.5);
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = sample("mollified_indicator", &params, spec, 64).unwrap();
        let mesh = circle();
        let omega = symbol("third_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        for mode in [Cancellation::BallAverage, Cancellation::CenterValue] {
            let scheme = AnnularScheme::new(&f, 0.8, mesh.clone(), mode).unwrap();
            let x = f.point(f.flat_index([32, 32, 0]));
            let mut scr = Scratch::new(mesh.len());
            let terms = singular_annulus_terms(&f, &omega, &scheme, &x, &mut scr);
            // the plateau is exactly 1 for |y| <= 1.75 and the evaluation
            // point sits within 0.18 of the origin, so the annuli with outer
            // radius 1 lie in the constant region
            let (k_min, _) = scheme.k_range();
            for k in k_min..=0 {
                let term = terms[(k - k_min) as usize];
                assert!(
                    term.abs() <= 1e-12,
                    "annulus {k} term {term:e} under {mode:?}"
                );
            }
        }
    }

    #[test]
    fn singular_vanishes_at_center_of_radial_input() {
        let f = centered_grid("bump", CorpusParams::new().set("radius", 4.0));
        let mesh = circle();
        let omega = symbol("first_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        let scheme = AnnularScheme::new(&f, 1.0, mesh, Cancellation::BallAverage).unwrap();
        let points = single_point(&f, [32, 32, 0]);
        assert_eq!(points.points[0], [0.0, 0.0, 0.0]);
        let out = rough_singular(&f, &omega, &scheme, &points).unwrap();
        // mirror symmetry of the grid, the mesh, and the symbol cancels the
        // quadrature exactly, not merely to interpolation accuracy
        assert!(out.values[0].abs() <= 1e-10, "got {:e}", out.values[0]);
    }

    #[test]
    fn cancellation_modes_agree_for_mean_zero_symbols() {
        let f = bump_grid(64);
        let mesh = circle();
        let omega = symbol("power_log_singular", SymbolParams::default(), mesh.clone()).unwrap();
        let ball = AnnularScheme::new(&f, 1.3, mesh.clone(), Cancellation::BallAverage).unwrap();
        let center = AnnularScheme::new(&f, 1.3, mesh, Cancellation::CenterValue).unwrap();
        let points = EvalSet::strided(&f, 16);
        let a = rough_singular(&f, &omega, &ball, &points).unwrap();
        let b = rough_singular(&f, &omega, &center, &points).unwrap();
        for (va, vb) in a.values.iter().zip(&b.values) {
            assert!((va - vb).abs() <= 1e-10 * (1.0 + va.abs()));
        }
    }

    #[test]
    fn hypersingular_bound_holds_node_by_node() {
        let f = bump_grid(64);
        let mesh = circle();
        let omega = symbol("third_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        let scheme = AnnularScheme::new(&f, 0.5, mesh, Cancellation::CenterValue).unwrap();
        let points = EvalSet::strided(&f, 16);
        let t = rough_singular(&f, &omega, &scheme, &points).unwrap();
        let d = nonlinear_frac_derivative(&f, &scheme, &points).unwrap();
        let sup = omega.norm_sup();
        for (tv, dv) in t.values.iter().zip(&d.values) {
            assert!(*dv >= 0.0);
            assert!(
                tv.abs() <= sup * dv + 1e-12,
                "|T| = {:e} exceeds {:e}",
                tv.abs(),
                sup * dv
            );
        }
    }

    #[test]
    fn derivative_matches_linear_region_closed_form() {
        // f equals y_1 on a neighborhood of the evaluation point wide
        // enough to contain three full annuli
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = GridFunction::from_fn(spec, 64, "windowed_ramp", |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let window = if r <= 6.0 {
                1.0
            } else if r >= 6.5 {
                0.0
            } else {
                let u = (r - 6.0) / 0.5;
                (0.5 * std::f64::consts::PI * u).cos().powi(2)
            };
            x[0].abs() * window
        })
        .unwrap();
        let mesh = circle();
        let alpha = 0.6;
        let scheme = AnnularScheme::new(&f, alpha, mesh.clone(), Cancellation::CenterValue).unwrap();
        let x = f.point(f.flat_index([40, 32, 0]));
        assert!((x[0] - 2.125).abs() < 1e-12);
        let mut scr = Scratch::new(mesh.len());
        let (terms, _) = derivative_annulus_terms(&f, &scheme, &x, &mut scr);
        let first_abs: Vec<f64> = mesh.nodes.iter().map(|n| n[0].abs()).collect();
        let weights = &mesh.weights;
        let l1: Vec<f64> = first_abs.iter().zip(weights).map(|(a, w)| a * w).collect();
        let theta_l1 = pairwise_sum(&l1);
        let (k_min, _) = scheme.k_range();
        for k in -1..=1 {
            let (a, b) = (pow2i(k - 1), pow2i(k));
            let exact = theta_l1 * (b.powf(alpha) - a.powf(alpha)) / alpha;
            let term = terms[(k - k_min) as usize];
            assert!(
                (term - exact).abs() <= 1e-5 * exact,
                "annulus {k}: {term} vs {exact}"
            );
        }
    }

    #[test]
    fn derivative_is_absolutely_homogeneous() {
        let f = bump_grid(32);
        let g = f.map("bump|neg", |v| -2.0 * v);
        let mesh = circle();
        let scheme = AnnularScheme::new(&f, 0.4, mesh, Cancellation::CenterValue).unwrap();
        let points = EvalSet::strided(&f, 8);
        let df = nonlinear_frac_derivative(&f, &scheme, &points).unwrap();
        let dg = nonlinear_frac_derivative(&g, &scheme, &points).unwrap();
        for (a, b) in df.values.iter().zip(&dg.values) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn singular_dilation_covariance() {
        let res = 128;
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let f = sample("bump", &CorpusParams::new().set("radius", 4.0), spec, res).unwrap();
        let f2 = sample("bump", &CorpusParams::new().set("radius", 2.0), spec, res).unwrap();
        let mesh = circle();
        let omega = symbol("third_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        let alpha = 1.4;
        let scheme = AnnularScheme::new(&f, alpha, mesh, Cancellation::BallAverage).unwrap();
        let base: Vec<[f64; 3]> = vec![
            [0.5625, 0.0625, 0.0],
            [-1.1875, 0.8125, 0.0],
            [1.3125, -1.6875, 0.0],
            [-0.4375, -2.1875, 0.0],
            [2.0625, 0.9375, 0.0],
            [-2.5625, 1.4375, 0.0],
        ];
        let halved = EvalSet {
            flat: vec![0; base.len()],
            points: base.clone(),
        };
        let doubled = EvalSet {
            flat: vec![0; base.len()],
            points: base.iter().map(|p| [2.0 * p[0], 2.0 * p[1], 0.0]).collect(),
        };
        let lhs = rough_singular(&f2, &omega, &scheme, &halved).unwrap();
        let rhs = rough_singular(&f, &omega, &scheme, &doubled).unwrap();
        let scale = 2f64.powf(1.0 - alpha);
        let mut num = 0.0;
        let mut den = 0.0;
        for (l, r) in lhs.values.iter().zip(&rhs.values) {
            num += (l - scale * r).powi(2);
            den += (scale * r).powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.02, "relative dilation defect {rel}");
    }

    #[test]
    fn maximal_trio_chain_holds_per_radius() {
        let configs: Vec<(GridFunction, Arc<SphereMesh>, f64)> = vec![
            (
                {
                    let spec = BoxSpec::symmetric(2, 8.0).unwrap();
                    sample(
                        "oscillating_bump",
                        &CorpusParams::new().set("radius", 3.0).set("freq", 2.0),
                        spec,
                        64,
                    )
                    .unwrap()
                },
                circle(),
                1.3,
            ),
            (
                {
                    let spec = BoxSpec::symmetric(3, 8.0).unwrap();
                    sample("bump", &CorpusParams::new().set("radius", 4.0), spec, 32).unwrap()
                },
                Arc::new(SphereMesh::icosphere(3).unwrap()),
                1.5,
            ),
        ];
        for (f, mesh, alpha) in configs {
            let n = f.n();
            let omega = symbol("quadrant_sign", SymbolParams::default(), mesh.clone()).unwrap();
            let scheme =
                AnnularScheme::new(&f, alpha, mesh.clone(), Cancellation::BallAverage).unwrap();
            let points = EvalSet::strided(&f, 16);
            let area = unit_sphere_area(n);
            let scale = f.sup_norm();
            for x in &points.points {
                let p = maximal_profile(&f, &omega, alpha, &scheme, x);
                for i in 0..p.radii.len() {
                    let t = p.radii[i];
                    assert!(p.rough[i] >= 0.0 && p.natural[i] >= 0.0 && p.sharp[i] >= 0.0);
                    let slack = 1e-10 * (1.0 + scale) * t.powf(alpha - 1.0);
                    assert!(
                        p.natural[i] <= p.sharp[i] + slack,
                        "natural {} sharp {}",
                        p.natural[i],
                        p.sharp[i]
                    );
                    let defect =
                        t.powf(alpha - 1.0) * p.ball_mean[i].abs() * p.symbol_ball_mean[i];
                    assert!(
                        (p.rough[i] - p.sharp[i]).abs() <= defect + slack,
                        "defect bound failed at radius {t}"
                    );
                    // the quadrature reproduces the constant ball average of
                    // the symbol magnitude exactly
                    assert!((p.symbol_ball_mean[i] - omega.norm_l1() / area).abs() <= 1e-11);
                    if n == 2 {
                        // circle nodes never sit on the axes, so the sign
                        // symbol has magnitude one everywhere and the
                        // average collapses to the constant of the display
                        assert!((p.symbol_ball_mean[i] - 1.0).abs() <= 1e-10);
                    }
                }
                let defect_sup = omega.norm_l1() / area * p.fractional_sup(alpha);
                assert!(
                    (p.rough_sup() - p.sharp_sup()).abs()
                        <= defect_sup + 1e-10 * (1.0 + defect_sup)
                );
            }
        }
    }

    #[test]
    fn maximal_preconditions_are_enforced() {
        let f = bump_grid(32);
        let mesh = circle();
        let one = symbol("one", SymbolParams::default(), mesh.clone()).unwrap();
        let odd = symbol("first_harmonic", SymbolParams::default(), mesh.clone()).unwrap();
        let scheme = AnnularScheme::new(&f, 0.5, mesh.clone(), Cancellation::BallAverage).unwrap();
        let points = EvalSet::strided(&f, 16);
        assert!(matches!(
            natural_rough_maximal(&f, &one, 1.2, &scheme, &points),
            Err(RoughError::NotMeanZero(_))
        ));
        assert!(matches!(
            rough_maximal(&f, &odd, 0.5, &scheme, &points),
            Err(RoughError::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            rough_singular(&f, &one, &scheme, &points),
            Err(RoughError::NotMeanZero(_))
        ));
        assert!(matches!(
            nonlinear_frac_derivative(
                &f,
                &AnnularScheme::new(&f, 1.3, mesh.clone(), Cancellation::CenterValue).unwrap(),
                &points
            ),
            Err(RoughError::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            spherical_maximal(&f, 1.0, &scheme, &points),
            Err(RoughError::AlphaOutOfRange { .. })
        ));
        assert!(matches!(
            AnnularScheme::new(&f, 2.5, mesh, Cancellation::BallAverage),
            Err(RoughError::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn uniform_symbol_maximal_brackets_the_cube_maximal() {
        let f = bump_grid(64);
        let mesh = circle();
        let one = symbol("one", SymbolParams::default(), mesh.clone()).unwrap();
        let scheme = AnnularScheme::new(&f, 1.0, mesh, Cancellation::BallAverage).unwrap();
        let points = EvalSet::strided(&f, 16);
        let ball = rough_maximal(&f, &one, 1.0, &scheme, &points).unwrap();
        let cube = maximal_on(&f, &points, &MaximalOptions::plain(0.0, 2));
        for (b, c) in ball.iter().zip(&cube) {
            assert!(*b > 0.0 && *c > 0.0);
            // ball averages inflate cube averages by at most the volume
            // ratio of the circumscribed construction and vice versa; the
            // factors are generous because the radius grids differ
            assert!(*b <= 350.0 * c && *c <= 30.0 * b, "ball {b} cube {c}");
        }
    }

    #[test]
    fn spherical_average_is_exact_on_plateaus_and_zero() {
        let params = CorpusParams::new().set("radius", 2.0).set("width", 0.5);
        let f = centered_grid("mollified_indicator", params);
        let mesh = circle();
        let scheme = AnnularScheme::new(&f, 1.0, mesh, Cancellation::BallAverage).unwrap();
        let x = [0.0, 0.0, 0.0];
        for (r, avg) in spherical_profile(&f, &scheme, &x) {
            if r <= 1.5 {
                assert!((avg - 1.0).abs() <= 1e-12, "radius {r} average {avg}");
            }
            assert!(avg <= 1.0 + 1e-12);
        }
        let points = EvalSet {
            flat: vec![0],
            points: vec![x],
        };
        let out = spherical_maximal(&f, 0.0, &scheme, &points).unwrap();
        assert!((out.values[0] - 1.0).abs() <= 1e-12);
        let zero = f.map("zero", |_| 0.0);
        let z = spherical_maximal(&zero, 0.5, &scheme, &points).unwrap();
        assert_eq!(z.values[0], 0.0);
    }

    #[test]
    fn spherical_profile_tracks_radial_sections() {
        let f = centered_grid("bump", CorpusParams::new().set("radius", 4.0));
        let mesh = circle();
        let scheme = AnnularScheme::new(&f, 1.0, mesh, Cancellation::BallAverage).unwrap();
        let field = f.analytic().unwrap().clone();
        for (r, avg) in spherical_profile(&f, &scheme, &[0.0, 0.0, 0.0]) {
            if !(0.5..=3.0).contains(&r) {
                continue;
            }
            let exact = (field.value)(&[r, 0.0, 0.0]);
            assert!(
                (avg - exact).abs() <= 2e-3 * (1.0 + exact),
                "radius {r}: {avg} vs {exact}"
            );
        }
    }

    #[test]
    fn shell_averages_obey_the_gradient_chain() {
        let f = bump_grid(64);
        let grad = f.gradient_magnitude();
        let mesh = circle();
        let alpha = 1.5;
        let scheme = AnnularScheme::new(&f, alpha, mesh, Cancellation::BallAverage).unwrap();
        let points = EvalSet::strided(&f, 16);
        let area = unit_sphere_area(2);
        let riesz = RieszOperator::new(&f, alpha, true).unwrap();
        let potential = riesz.apply(&grad).unwrap();
        for (x, &flat) in points.points.iter().zip(&points.flat) {
            let mut sup = 0.0f64;
            for (idx, (r, avg)) in spherical_profile(&f, &scheme, x).into_iter().enumerate() {
                if idx % 4 != 0 {
                    continue;
                }
                let bound = truncated_gradient_potential(&grad, &scheme, x, r) / area;
                assert!(
                    avg <= bound * 1.05 + 1e-12,
                    "shell {r}: {avg} vs bound {bound}"
                );
                sup = sup.max(r.powf(alpha - 1.0) * avg);
            }
            let rhs = potential.values()[flat] / (area * riesz_constant(2, alpha));
            assert!(sup <= rhs * 1.05 + 1e-12, "sup {sup} vs potential {rhs}");
        }
    }
}
