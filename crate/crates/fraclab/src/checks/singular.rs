//! Pointwise domination checks for the rough singular integrals, the
//! gradient bound behind them, the weak Sobolev transfer, and the Riesz
//! composition law.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::grid::{EvalSet, GridFunction};
use crate::norms::{LorentzExponents, OrliczClass};
use crate::numeric::{unit_sphere_area, GAUSS_16};
use crate::potentials::{riesz_constant, RieszOperator};
use crate::rough::{nonlinear_frac_derivative, rough_singular, AnnularScheme, Cancellation};
use crate::sparse::build_sparse;
use crate::sphere::{symbol, SphereMesh, SphereSymbol, SymbolParams};

use super::{
    corpus_grid, empirical_verdict, fast_power_maximal, require, subset_lp, sup_ratio,
    thinned_eval, CheckError, CheckReport, CheckSpec, ResolutionRow, RunConfig, Verdict,
};
use crate::dyadic::shifts;

const HALF: f64 = 8.0;

pub(super) fn raw_riesz(g: &GridFunction, alpha: f64) -> Result<GridFunction, CheckError> {
    Ok(RieszOperator::new(g, alpha, false)?.apply(g)?)
}

fn circle_mesh() -> Result<Arc<SphereMesh>, CheckError> {
    Ok(Arc::new(SphereMesh::circle(256)?))
}

fn ball_scheme(
    grid: &GridFunction,
    alpha: f64,
    mesh: Arc<SphereMesh>,
) -> Result<AnnularScheme, CheckError> {
    Ok(AnnularScheme::new(
        grid,
        alpha,
        mesh,
        Cancellation::BallAverage,
    )?)
}

/// PW-SOB: every compactly supported C^1 function satisfies
/// `|f(x)| <= (1/omega_{n-1}) int |grad f(y)| |x-y|^(1-n) dy`
/// with equality at the peak of a radially decreasing profile. Checked at
/// every grid point against the FFT realization of the raw potential.
pub(super) fn pw_sob(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let corpus = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump", "two_bumps"])?;
    report.param("alpha", 1.0);
    report.param("constant", 1.0 / unit_sphere_area(2));
    let mut verdict = Verdict::Pass;
    let mut last_defect = f64::INFINITY;
    for &res in &cfg.ladder(spec) {
        // Kernel cell-averaging error scales like h at the peak; the band
        // was calibrated on the bump profile and halves with the mesh.
        let band = 12.0 / res as f64;
        let mut worst = 0.0f64;
        let mut where_at = [0.0; 3];
        for id in &corpus {
            let f = corpus_grid(id, &[], 2, HALF, res)?;
            let gm = f.gradient_magnitude();
            let pot = raw_riesz(&gm, 1.0)?;
            let omega = unit_sphere_area(2);
            let lhs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
            let rhs: Vec<f64> = pot.values().iter().map(|v| v / omega).collect();
            let stat = sup_ratio(&lhs, &rhs, 1e-8);
            if stat.sup > worst {
                worst = stat.sup;
                where_at = f.point(stat.index);
            }
        }
        let defect = (worst - 1.0).abs();
        if !(worst <= 1.0 + band) {
            verdict = Verdict::Fail;
        }
        if defect > last_defect + 1e-12 {
            verdict = Verdict::Fail;
        }
        last_defect = defect;
        report.per_resolution.push(
            ResolutionRow::new(res, worst)
                .with_bound(band)
                .at(&where_at, 2),
        );
    }
    report.note("checked at every grid point; the peak ratio sits at the bump center where the bound is sharp");
    report.verdict = verdict;
    Ok(report)
}

/// CH-SOB: with `T` realized as a critical rough integral obeying the
/// pointwise gradient bound, the weak Sobolev inequality
/// `||Tf||_{L^{n/(n-alpha),oo}(mu)} <= C int |grad f| (M mu)^(1-alpha/n)`
/// is checked for the Lebesgue measure and for a smooth density.
pub(super) fn ch_sob(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let alpha = 1.0;
    let q = 2.0 / (2.0 - alpha);
    report.param("alpha", alpha);
    report.param("q", q);
    report.param("omega", "third_harmonic");
    let corpus = cfg.corpus_pick(spec.id, &["bump", "two_bumps"])?;
    let mesh = circle_mesh()?;
    let mut ladders: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &res in &cfg.ladder(spec) {
        for id in &corpus {
            let f = corpus_grid(id, &[], 2, HALF, res)?;
            let gm = f.gradient_magnitude();
            let scheme = ball_scheme(&f, alpha, mesh.clone())?;
            let omega = symbol("third_harmonic", SymbolParams::default(), mesh.clone())?;
            let stride = (res / 16).max(1);
            let eval = EvalSet::strided(&f, stride);
            let out = rough_singular(&f, &omega, &scheme, &eval)?;
            let cell = f.cell_volume();
            let stride_cell = cell * (stride * stride) as f64;
            let grad_l1: f64 = gm.lp_norm(1.0);

            // Lebesgue measure: the maximal function of the measure is one.
            let measures = vec![stride_cell; out.values.len()];
            let weak = crate::norms::lorentz_norm(
                &out.values,
                &measures,
                LorentzExponents::new(q, f64::INFINITY),
            );
            ladders
                .entry(format!("{id} lebesgue"))
                .or_default()
                .push(weak / grad_l1);

            // Smooth density centered off origin.
            let dens = corpus_grid("mollified_indicator", &[("cx", 1.5)], 2, HALF, res)?;
            let full = EvalSet::full(&dens);
            let mdens = fast_power_maximal(&dens, 1.0, 0.0, &full);
            let rhs: f64 = gm
                .values()
                .iter()
                .zip(&mdens)
                .map(|(g, m)| g * m.powf(1.0 - alpha / 2.0) * cell)
                .sum();
            let mu: Vec<f64> = eval
                .flat
                .iter()
                .map(|&i| dens.values()[i] * stride_cell)
                .collect();
            let weak_mu = crate::norms::lorentz_norm(
                &out.values,
                &mu,
                LorentzExponents::new(q, f64::INFINITY),
            );
            ladders
                .entry(format!("{id} density"))
                .or_default()
                .push(weak_mu / rhs);
        }
        let maxc = ladders.values().filter_map(|l| l.last()).fold(0.0f64, |m, &v| m.max(v));
        report
            .per_resolution
            .push(ResolutionRow::new(res, maxc).noted("largest weak-norm ratio over measures"));
    }
    for (key, ladder) in &ladders {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&ladders.into_values().collect::<Vec<_>>());
    Ok(report)
}

struct RoughCase {
    alpha: f64,
    omega_id: &'static str,
    omega_params: SymbolParams,
    f_id: &'static str,
}

/// Shared driver: computes `sup |T f| / rhs` ladders over a list of rough
/// cases, with the right side supplied per case.
#[allow(clippy::too_many_arguments)]
fn rough_ladders(
    report: &mut CheckReport,
    spec: &CheckSpec,
    n: usize,
    resolutions: &[usize],
    cases: &[RoughCase],
    mesh: Arc<SphereMesh>,
    rhs_for: &dyn Fn(&GridFunction, &GridFunction, &RoughCase, &EvalSet, &SphereSymbol)
        -> Result<Vec<f64>, CheckError>,
) -> Result<BTreeMap<String, Vec<f64>>, CheckError> {
    let mut ladders: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let half = if n == 3 { 4.0 } else { HALF };
    for &res in resolutions {
        let mut row_worst = 0.0f64;
        let mut row_at = [0.0; 3];
        let mut row_bound = 0.0f64;
        for case in cases {
            let f = corpus_grid(case.f_id, &[], n, half, res)?;
            let gm = f.gradient_magnitude();
            let scheme = ball_scheme(&f, case.alpha, mesh.clone())?;
            let omega = symbol(case.omega_id, case.omega_params, mesh.clone())?;
            let eval = thinned_eval(&f, 16);
            let out = rough_singular(&f, &omega, &scheme, &eval)?;
            let rhs = rhs_for(&f, &gm, case, &eval, &omega)?;
            let stat = sup_ratio(&out.values, &rhs, 1e-3);
            require(
                stat.counted > 0,
                spec.id,
                "the right side must be nonvanishing on the evaluation set",
            )?;
            let key = format!(
                "n={} alpha={} omega={} f={}",
                n, case.alpha, case.omega_id, case.f_id
            );
            ladders.entry(key).or_default().push(stat.sup);
            if stat.sup > row_worst {
                row_worst = stat.sup;
                row_at = eval.points[stat.index];
            }
            let peak = out.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                row_bound = row_bound.max(out.inner_bound / peak);
            }
        }
        report.per_resolution.push(
            ResolutionRow::new(res, row_worst)
                .with_bound(row_bound)
                .at(&row_at, n)
                .noted(format!("n={n}: worst ratio over {} cases; bound is the inner truncation relative to the peak", cases.len())),
        );
    }
    Ok(ladders)
}

/// PW-CRIT: for a mean-zero symbol in weak L^n, the rough integral of
/// order alpha is pointwise dominated by the symbol norm times the raw
/// Riesz potential of the gradient.
pub(super) fn pw_crit(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let picked = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump"])?;
    let mut cases = Vec::new();
    for &alpha in &[0.5, 1.0, 1.5] {
        for &f_id in &picked {
            cases.push(RoughCase {
                alpha,
                omega_id: "third_harmonic",
                omega_params: SymbolParams::default(),
                f_id,
            });
        }
    }
    cases.push(RoughCase {
        alpha: 1.0,
        omega_id: "power_log_singular",
        omega_params: SymbolParams { r: 2.0, c: 1.5 },
        f_id: picked[0],
    });
    report.param("alphas", vec![0.5, 1.0, 1.5]);
    report.param("symbol_norm", "weak L^2 on the circle");
    let mesh = circle_mesh()?;
    let resolutions = cfg.ladder(spec);
    // One potential per (alpha, f) pair, shared across symbols.
    let rhs_for = |_f: &GridFunction,
                   gm: &GridFunction,
                   case: &RoughCase,
                   eval: &EvalSet,
                   omega: &SphereSymbol|
     -> Result<Vec<f64>, CheckError> {
        let norm = omega.norm_lorentz(LorentzExponents::new(2.0, f64::INFINITY));
        let pot = raw_riesz(gm, case.alpha)?;
        Ok(eval
            .flat
            .iter()
            .map(|&i| norm * pot.values()[i])
            .collect())
    };
    let ladders = rough_ladders(
        &mut report,
        spec,
        2,
        &resolutions,
        &cases,
        mesh,
        &rhs_for,
    )?;
    for (key, ladder) in &ladders {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&ladders.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// PW-SUB: for a mean-zero symbol in the Lorentz class `L^{r,r*}` with
/// `1 < r < n`, the rough integral of order `alpha < 1 + n/r'` is dominated
/// by the symbol norm times the sum over shifts of sparse L^s potentials of
/// the gradient, where `1/s = 1/n + 1/r'`.
pub(super) fn pw_sub(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let picked = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump"])?;
    let mut all_ladders: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let resolutions = cfg.ladder(spec);

    for &(n, r) in &[(2usize, 1.5f64), (3usize, 2.0f64)] {
        let rp = r / (r - 1.0);
        let nf = n as f64;
        let s = rp * nf / (nf + rp);
        let rstar = nf * r / (nf - r);
        require(
            r > 1.0 && r < nf,
            spec.id,
            "the symbol class needs 1 < r < n",
        )?;
        require(
            (1.0 / s - 1.0 / nf - 1.0 / rp).abs() < 1e-12,
            spec.id,
            "the sparse exponent must satisfy 1/s = 1/n + 1/r'",
        )?;
        let alphas = [0.5, 1.2];
        for &alpha in &alphas {
            require(
                alpha < 1.0 + nf / rp,
                spec.id,
                "the subcritical bound needs alpha < 1 + n/r'",
            )?;
        }
        let mesh: Arc<SphereMesh> = if n == 2 {
            circle_mesh()?
        } else {
            Arc::new(SphereMesh::icosphere(2)?)
        };
        let (omega_id, omega_params) = if n == 2 {
            (
                "power_log_singular",
                SymbolParams { r: 1.5, c: 1.5 },
            )
        } else {
            ("quadrant_sign", SymbolParams::default())
        };
        let f_ids: Vec<&'static str> = if n == 2 {
            picked.clone()
        } else {
            vec!["bump"]
        };
        let mut cases = Vec::new();
        for &alpha in &alphas {
            for &f_id in &f_ids {
                cases.push(RoughCase {
                    alpha,
                    omega_id,
                    omega_params,
                    f_id,
                });
            }
        }
        let res_n: Vec<usize> = if n == 3 {
            resolutions.iter().map(|&r| (r / 4).max(16)).collect()
        } else {
            resolutions.clone()
        };
        let rhs_for = |_f: &GridFunction,
                       gm: &GridFunction,
                       case: &RoughCase,
                       eval: &EvalSet,
                       omega: &SphereSymbol|
         -> Result<Vec<f64>, CheckError> {
            let norm = omega.norm_lorentz(LorentzExponents::new(r, rstar));
            let mut total = vec![0.0f64; eval.points.len()];
            for shift in shifts(n) {
                let family = build_sparse(gm, s, shift)?;
                let vals = family.apply(case.alpha, eval)?;
                for (t, v) in total.iter_mut().zip(&vals) {
                    *t += v;
                }
            }
            Ok(total.iter().map(|v| norm * v).collect())
        };
        let ladders = rough_ladders(
            &mut report,
            spec,
            n,
            &res_n,
            &cases,
            mesh,
            &rhs_for,
        )?;
        all_ladders.extend(ladders);
    }
    report.param("r", vec![1.5, 2.0]);
    report.param("s", 1.2);
    for (key, ladder) in &all_ladders {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&all_ladders.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// PW-END: for a mean-zero symbol with finite L log L power 1/n' norm and
/// `alpha < 1`, the rough integral is dominated by the symbol norm times
/// sparse L^n potentials of the gradient.
pub(super) fn pw_end(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let picked = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump"])?;
    let s = 2.0;
    let alphas = [0.5, 0.8];
    for &alpha in &alphas {
        require(alpha < 1.0, spec.id, "the endpoint bound needs alpha < 1")?;
    }
    let mut cases = Vec::new();
    for &alpha in &alphas {
        for &f_id in &picked {
            cases.push(RoughCase {
                alpha,
                omega_id: "log_tamed_singular",
                omega_params: SymbolParams::default(),
                f_id,
            });
        }
    }
    report.param("s", s);
    report.param("symbol_norm", "L log L^(1/2) on the circle");
    let mesh = circle_mesh()?;
    let resolutions = cfg.ladder(spec);
    let rhs_for = |_f: &GridFunction,
                   gm: &GridFunction,
                   case: &RoughCase,
                   eval: &EvalSet,
                   omega: &SphereSymbol|
     -> Result<Vec<f64>, CheckError> {
        let norm = omega.norm_orlicz(OrliczClass::LogPower(0.5));
        let mut total = vec![0.0f64; eval.points.len()];
        for shift in shifts(2) {
            let family = build_sparse(gm, s, shift)?;
            let vals = family.apply(case.alpha, eval)?;
            for (t, v) in total.iter_mut().zip(&vals) {
                *t += v;
            }
        }
        Ok(total.iter().map(|v| norm * v).collect())
    };
    let ladders = rough_ladders(
        &mut report,
        spec,
        2,
        &resolutions,
        &cases,
        mesh,
        &rhs_for,
    )?;
    for (key, ladder) in &ladders {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&ladders.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// HS-DOM: with center-value cancellation every annulus obeys the triangle
/// inequality, so `|T f| <= ||Omega||_oo D^(1-alpha) f` holds with constant
/// one up to rounding; the derivative output also carries the closed-form
/// far tail, which only enlarges the right side.
pub(super) fn hs_dom(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let picked = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump"])?;
    let mesh = circle_mesh()?;
    report.param("constant", 1.0);
    report.param("omega", "third_harmonic");
    let mut verdict = Verdict::Pass;
    for &res in &cfg.ladder(spec) {
        let mut worst = 0.0f64;
        let mut at = [0.0; 3];
        for &alpha in &[0.5, 0.8] {
            require(alpha < 1.0, spec.id, "the derivative bound needs alpha < 1")?;
            for id in &picked {
                let f = corpus_grid(id, &[], 2, HALF, res)?;
                let scheme = AnnularScheme::new(&f, alpha, mesh.clone(), Cancellation::CenterValue)?;
                let omega = symbol("third_harmonic", SymbolParams::default(), mesh.clone())?;
                let eval = thinned_eval(&f, 16);
                let out = rough_singular(&f, &omega, &scheme, &eval)?;
                let deriv = nonlinear_frac_derivative(&f, &scheme, &eval)?;
                let sup = omega.norm_sup();
                let rhs: Vec<f64> = deriv.values.iter().map(|v| sup * v).collect();
                let stat = sup_ratio(&out.values, &rhs, 1e-6);
                if stat.sup > worst {
                    worst = stat.sup;
                    at = eval.points[stat.index];
                }
            }
        }
        let band = 1e-8;
        if !(worst <= 1.0 + band) {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(res, worst).with_bound(band).at(&at, 2));
    }
    report.note("both sides share the annular quadrature, so the bound is exact per node");
    report.verdict = verdict;
    Ok(report)
}

/// Far-field correction for the composed potential: the integral of
/// `|x-y|^(gamma-n) |y|^(beta-n)` over the complement of the centered box,
/// in dimension two. The radial tail is flattened by substituting
/// `rho = v^(-1/kappa)` with `kappa = 2 - gamma - beta`, which leaves a
/// smooth integrand on a bounded panel.
fn outside_tail(x: &[f64; 3], half: f64, gamma: f64, beta: f64) -> f64 {
    let kappa = 2.0 - gamma - beta;
    let mut total = 0.0;
    for p in 0..8 {
        let a0 = PI / 4.0 * p as f64;
        for (theta, wt) in GAUSS_16.mapped(a0, a0 + PI / 4.0) {
            let (cs, sn) = (theta.cos(), theta.sin());
            let rho0 = half / cs.abs().max(sn.abs());
            let v0 = rho0.powf(-kappa);
            let mut inner = 0.0;
            for (v, wv) in GAUSS_16.mapped(0.0, v0) {
                let u = v.powf(1.0 / kappa);
                let dx = u * x[0] - cs;
                let dy = u * x[1] - sn;
                inner += wv * (dx * dx + dy * dy).powf(0.5 * (gamma - 2.0));
            }
            total += wt * inner / kappa;
        }
    }
    total
}

/// RZ-COMP: `I_gamma(I_beta f) = I_(gamma+beta) f` for normalized
/// potentials. The box truncation drops the far field of the inner
/// potential; adding the monopole correction
/// `c_gamma c_beta (int f) int_(outside) |x-y|^(gamma-n)|y|^(beta-n) dy`
/// leaves a relative L^2 defect on the central half-box that falls under
/// refinement.
pub(super) fn rz_comp(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    let (gamma, beta) = (0.6, 0.6);
    require(
        gamma + beta < 2.0,
        spec.id,
        "the composed order must stay below the dimension",
    )?;
    report.param("gamma", gamma);
    report.param("beta", beta);
    report.param("f", "bump");
    let cg = riesz_constant(2, gamma);
    let cb = riesz_constant(2, beta);
    let mut verdict = Verdict::Pass;
    let mut last = f64::INFINITY;
    for &res in &cfg.ladder(spec) {
        let tol = if res >= 256 { 0.02 } else { 0.05 };
        let f = corpus_grid("bump", &[], 2, HALF, res)?;
        let mass = f.integral();
        let inner = RieszOperator::new(&f, beta, true)?.apply(&f)?;
        let composed = RieszOperator::new(&inner, gamma, true)?.apply(&inner)?;
        let direct = RieszOperator::new(&f, gamma + beta, true)?.apply(&f)?;
        // Central half-box sample subset.
        let stride = (res / 32).max(1);
        let eval = EvalSet::strided(&f, stride);
        let keep: Vec<usize> = (0..eval.points.len())
            .filter(|&i| {
                let p = eval.points[i];
                p[0].abs() <= HALF / 2.0 && p[1].abs() <= HALF / 2.0
            })
            .collect();
        let diffs: Vec<f64> = keep
            .par_iter()
            .map(|&i| {
                let x = eval.points[i];
                let flat = eval.flat[i];
                let corrected =
                    composed.values()[flat] + cg * cb * mass * outside_tail(&x, HALF, gamma, beta);
                corrected - direct.values()[flat]
            })
            .collect();
        let base: Vec<f64> = keep.iter().map(|&i| direct.values()[eval.flat[i]]).collect();
        let cell = f.cell_volume() * (stride * stride) as f64;
        let rel = subset_lp(&diffs, 2.0, cell) / subset_lp(&base, 2.0, cell);
        if !(rel <= tol) || rel > last + 1e-12 {
            verdict = Verdict::Fail;
        }
        last = rel;
        report.per_resolution.push(
            ResolutionRow::new(res, rel)
                .with_bound(tol)
                .noted("relative L^2 defect of the corrected composition on the central half-box"),
        );
    }
    report.note("correction uses the monopole far field; the dipole remainder and kernel cell-averaging drive the residual");
    report.verdict = verdict;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    
    #[test]
    fn outside_tail_matches_the_radial_closed_form_at_the_origin() {
        // At x = 0 the angular integral collapses to
        // int_S rho0(theta)^(gamma+beta-2) / (2-gamma-beta) dtheta.
        let (gamma, beta, half) = (0.6, 0.6, 8.0);
        let kappa = 2.0 - gamma - beta;
        let mut expect = 0.0;
        for p in 0..8 {
            let a0 = PI / 4.0 * p as f64;
            expect += crate::numeric::GAUSS_32.integrate(a0, a0 + PI / 4.0, |t| {
                let rho0 = half / t.cos().abs().max(t.sin().abs());
                rho0.powf(-kappa) / kappa
            });
        }
        let got = outside_tail(&[0.0, 0.0, 0.0], half, gamma, beta);
        assert!(
            (got - expect).abs() <= 1e-9 * expect,
            "tail {got} vs closed form {expect}"
        );
    }

    #[test]
    fn outside_tail_decays_away_from_the_boundary_towards_corners() {
        let t0 = outside_tail(&[0.0, 0.0, 0.0], 8.0, 0.6, 0.6);
        let t1 = outside_tail(&[3.0, 2.0, 0.0], 8.0, 0.6, 0.6);
        assert!(t0 > 0.0 && t1 > 0.0);
        assert!(t1 > t0, "closer to the boundary the tail grows");
    }
}
