//! Cube-local inequality checks: Holder inequalities in Lorentz and Orlicz
//! scales, the Poincare-Sobolev family, the Trudinger bound, and the
//! equal-exponent Lorentz identity.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Cube, GridFunction};
use crate::norms::{
    holder_defect_lorentz, holder_defect_orlicz, lorentz_average, luxemburg_average,
    LorentzExponents, OrliczClass,
};

use super::{
    corpus_grid, empirical_verdict, require, CheckError, CheckReport, CheckSpec, ResolutionRow,
    RunConfig, Verdict,
};

const HALF: f64 = 8.0;

fn random_data(rng: &mut ChaCha8Rng, len: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(len);
    let mut g = Vec::with_capacity(len);
    let mut meas = Vec::with_capacity(len);
    for _ in 0..len {
        let zero_f = rng.random_range(0.0..1.0) < 0.1;
        let zero_g = rng.random_range(0.0..1.0) < 0.1;
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(0.0..1.0);
        f.push(if zero_f { 0.0 } else { 10.0 * a.powi(3) });
        g.push(if zero_g { 0.0 } else { 4.0 * b.powi(2) });
        meas.push(rng.random_range(0.5..1.5) * 0.01);
    }
    (f, g, meas)
}

/// HL-ORL: the normalized average of `|f g|` is at most a fixed multiple of
/// the product of Luxemburg averages for a complementary pair. The factor
/// four covers the equivalent-pair mismatch of the discrete associate.
pub(super) fn hl_orl(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("bound", 4.0);
    let classes = [
        OrliczClass::ExpPower(2.0),
        OrliczClass::ExpPower(1.0),
        OrliczClass::LogPower(1.0),
    ];
    let mut verdict = Verdict::Pass;
    for &len in &cfg.ladder(spec) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (f, g, meas) = random_data(&mut rng, len);
            let total: f64 = meas.iter().sum();
            for class in &classes {
                let rep = holder_defect_orlicz(&f, &g, &meas, total, *class);
                worst = worst.max(rep.ratio);
            }
        }
        if !(worst <= 4.0) {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(len, worst).with_bound(0.0).noted(
                "largest ratio of the product average to the paired Luxemburg averages",
            ));
    }
    report.note("twenty random samples per size over three Young classes");
    report.verdict = verdict;
    Ok(report)
}

/// HL-LOR: the Lorentz Holder inequality against the dual exponent pair
/// holds with constant one on arbitrary weighted samples.
pub(super) fn hl_lor(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("constant", 1.0);
    let pairs = [
        LorentzExponents::new(2.0, 2.0),
        LorentzExponents::new(1.5, 1.0),
        LorentzExponents::new(3.0, 1.5),
    ];
    let band = 1e-9;
    let mut verdict = Verdict::Pass;
    for &len in &cfg.ladder(spec) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (f, g, meas) = random_data(&mut rng, len);
            let total: f64 = meas.iter().sum();
            for exps in &pairs {
                let rep = holder_defect_lorentz(&f, &g, &meas, total, *exps);
                worst = worst.max(rep.ratio);
            }
        }
        if !(worst <= 1.0 + band) {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(len, worst).with_bound(band));
    }
    report.note("dual pairs (2,2), (1.5,1), (3,1.5) against their conjugates");
    report.verdict = verdict;
    Ok(report)
}

struct SampledCube {
    flats: Vec<usize>,
    side: f64,
    center: [f64; 3],
}

/// Draws resolution-independent random cubes with at least eight cells per
/// side at the coarsest resolution in use.
fn random_cubes(
    grid: &GridFunction,
    seed: u64,
    count: usize,
) -> Vec<SampledCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let side = (2.0f64).powf(rng.random_range(0.0..2.0));
        let cx = rng.random_range(-5.0..5.0);
        let cy = rng.random_range(-5.0..5.0);
        let lower = [cx - side / 2.0, cy - side / 2.0, 0.0];
        let cube = Cube::new(2, lower, side);
        let flats = grid.samples_in_cube(&cube);
        if flats.len() >= 16 {
            out.push(SampledCube {
                flats,
                side,
                center: [cx, cy, 0.0],
            });
        }
    }
    out
}

fn oscillation(values: &[f64], flats: &[usize]) -> (Vec<f64>, f64) {
    let mean = flats.iter().map(|&i| values[i]).sum::<f64>() / flats.len() as f64;
    (
        flats.iter().map(|&i| (values[i] - mean).abs()).collect(),
        mean,
    )
}

fn power_mean(values: &[f64], flats: &[usize], p: f64) -> f64 {
    let sum: f64 = flats.iter().map(|&i| values[i].abs().powf(p)).sum();
    (sum / flats.len() as f64).powf(1.0 / p)
}

type Ladders = BTreeMap<String, Vec<f64>>;

fn poincare_sweep(
    spec: &CheckSpec,
    cfg: &RunConfig,
    lhs_kind: &dyn Fn(&GridFunction, &SampledCube, &[f64]) -> f64,
    rhs_kind: &dyn Fn(&GridFunction, &SampledCube, &GridFunction) -> f64,
    label: &str,
) -> Result<(CheckReport, Ladders), CheckError> {
    let mut report = CheckReport::new(spec);
    let corpus = cfg.corpus_pick(spec.id, &["bump", "oscillating_bump", "two_bumps"])?;
    let mut ladders: Ladders = BTreeMap::new();
    for &res in &cfg.ladder(spec) {
        let mut row_worst = 0.0f64;
        let mut at = [0.0; 3];
        for id in &corpus {
            let f = corpus_grid(id, &[], 2, HALF, res)?;
            let gm = f.gradient_magnitude();
            let cubes = random_cubes(&f, cfg.seed, 160);
            let mut worst = 0.0f64;
            for cube in &cubes {
                let (osc, _) = oscillation(f.values(), &cube.flats);
                let lhs = lhs_kind(&f, cube, &osc);
                let rhs = rhs_kind(&f, cube, &gm);
                if rhs > 1e-14 {
                    let ratio = lhs / rhs;
                    if ratio > worst {
                        worst = ratio;
                        at = cube.center;
                    }
                }
            }
            ladders.entry(format!("{label} {id}")).or_default().push(worst);
            row_worst = row_worst.max(worst);
        }
        report
            .per_resolution
            .push(ResolutionRow::new(res, row_worst).at(&at, 2).noted(
                "largest oscillation to gradient ratio over 160 shared random cubes",
            ));
    }
    Ok((report, ladders))
}

/// PS-CLS: `(avg |f - f_Q|^q)^(1/q) <= C l(Q) (avg |grad f|^p)^(1/p)` for
/// p = 1 and q in {1, 2}; the constant is empirical and must be stable
/// under refinement.
pub(super) fn ps_cls(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let (p, qs) = (1.0, [1.0, 2.0]);
    require(p < 2.0, spec.id, "the gradient exponent needs p < n")?;
    for &q in &qs {
        require(
            q <= 2.0 * p / (2.0 - p),
            spec.id,
            "the oscillation exponent needs q <= p* = np/(n-p)",
        )?;
    }
    let mut merged: Ladders = BTreeMap::new();
    let mut report = CheckReport::new(spec);
    for &q in &qs {
        let lhs = move |_f: &GridFunction, _cube: &SampledCube, osc: &[f64]| {
            let sum: f64 = osc.iter().map(|v| v.powf(q)).sum();
            (sum / osc.len() as f64).powf(1.0 / q)
        };
        let rhs = move |_f: &GridFunction, cube: &SampledCube, gm: &GridFunction| {
            cube.side * power_mean(gm.values(), &cube.flats, p)
        };
        let (rep, ladders) = poincare_sweep(spec, cfg, &lhs, &rhs, &format!("q={q}"))?;
        if report.per_resolution.is_empty() {
            report = rep;
        } else {
            for (row, new_row) in report.per_resolution.iter_mut().zip(&rep.per_resolution) {
                if new_row.constant > row.constant {
                    row.constant = new_row.constant;
                    row.lhs_sup_location = new_row.lhs_sup_location.clone();
                }
            }
        }
        merged.extend(ladders);
    }
    report.param("p", p);
    report.param("q", vec![1.0, 2.0]);
    for (key, ladder) in &merged {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&merged.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// PS-LOR: the sharpened form with the Lorentz `(p*, p)` average on the
/// oscillation side, for p in {1, 3/2}.
pub(super) fn ps_lor(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut merged: Ladders = BTreeMap::new();
    let mut report = CheckReport::new(spec);
    for &p in &[1.0f64, 1.5] {
        require(p < 2.0, spec.id, "the gradient exponent needs p < n")?;
        let pstar = 2.0 * p / (2.0 - p);
        let exps = LorentzExponents::new(pstar, p);
        let lhs = move |f: &GridFunction, _cube: &SampledCube, osc: &[f64]| {
            let cell = f.cell_volume();
            let meas = vec![cell; osc.len()];
            lorentz_average(osc, &meas, cell * osc.len() as f64, exps)
        };
        let rhs = move |_f: &GridFunction, cube: &SampledCube, gm: &GridFunction| {
            cube.side * power_mean(gm.values(), &cube.flats, p)
        };
        let (rep, ladders) = poincare_sweep(spec, cfg, &lhs, &rhs, &format!("p={p}"))?;
        if report.per_resolution.is_empty() {
            report = rep;
        } else {
            for (row, new_row) in report.per_resolution.iter_mut().zip(&rep.per_resolution) {
                if new_row.constant > row.constant {
                    row.constant = new_row.constant;
                    row.lhs_sup_location = new_row.lhs_sup_location.clone();
                }
            }
        }
        merged.extend(ladders);
    }
    report.param("p", vec![1.0, 1.5]);
    for (key, ladder) in &merged {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&merged.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// PS-TRU: at the borderline exponent the oscillation is measured in the
/// exponential Orlicz average and the gradient side is the unnormalized
/// L^n integral.
pub(super) fn ps_tru(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let class = OrliczClass::ExpPower(2.0);
    let lhs = move |f: &GridFunction, _cube: &SampledCube, osc: &[f64]| {
        let cell = f.cell_volume();
        let meas = vec![cell; osc.len()];
        luxemburg_average(osc, &meas, cell * osc.len() as f64, class)
    };
    let rhs = move |f: &GridFunction, cube: &SampledCube, gm: &GridFunction| {
        let cell = f.cell_volume();
        let sum: f64 = cube.flats.iter().map(|&i| gm.values()[i].powi(2) * cell).sum();
        sum.sqrt()
    };
    let (mut report, ladders) = poincare_sweep(spec, cfg, &lhs, &rhs, "exp L^2")?;
    report.param("young_function", "exp(t^2) - 1");
    for (key, ladder) in &ladders {
        report.note(format!("{key}: constants {ladder:?}"));
    }
    report.verdict = empirical_verdict(&ladders.into_values().collect::<Vec<_>>());
    Ok(report)
}

/// ID-LOR: with equal exponents the Lorentz average collapses to the plain
/// power average, including tied values.
pub(super) fn id_lor(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("p", vec![1.0, 2.0, 3.0]);
    let band = 1e-12;
    let mut verdict = Verdict::Pass;
    for &res in &cfg.ladder(spec) {
        let f = corpus_grid("oscillating_bump", &[], 2, HALF, res)?;
        let cubes = random_cubes(&f, cfg.seed.wrapping_add(5), 60);
        let cell = f.cell_volume();
        let mut worst = 0.0f64;
        for cube in &cubes {
            let vals: Vec<f64> = cube.flats.iter().map(|&i| f.values()[i]).collect();
            let meas = vec![cell; vals.len()];
            let total = cell * vals.len() as f64;
            for &p in &[1.0, 2.0, 3.0] {
                let lorentz = lorentz_average(&vals, &meas, total, LorentzExponents::new(p, p));
                let plain = power_mean(f.values(), &cube.flats, p);
                let denom = plain.max(1e-300);
                worst = worst.max((lorentz - plain).abs() / denom);
            }
        }
        if !(worst <= band) {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(res, worst).with_bound(band).noted(
                "largest relative gap between the equal-exponent Lorentz average and the power mean",
            ));
    }
    report.verdict = verdict;
    Ok(report)
}
