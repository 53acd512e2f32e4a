//! Dyadic lattice checks: nesting, the one-third trick, and its level-exact
//! variant. All containment claims are verified in exact rational
//! arithmetic, so these checks carry a zero error band.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::{locate, shifts, third_trick, third_trick_level, RationalCube};
use crate::grid::Cube;

use super::{CheckError, CheckReport, CheckSpec, ResolutionRow, RunConfig, Verdict};

fn random_cube(rng: &mut ChaCha8Rng, n: usize) -> Cube {
    let mut lower = [0.0; 3];
    for a in lower.iter_mut().take(n) {
        *a = rng.random_range(-10.0..10.0);
    }
    let side = (2.0f64).powf(rng.random_range(-6.0..4.0));
    Cube::new(n, lower, side)
}

/// DY-NEST: located cubes contain their point, children tile their parent,
/// and a child's parent is the original cube.
pub(super) fn dy_nest(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("seed", cfg.seed);
    let mut verdict = Verdict::Pass;
    for &trials in &cfg.ladder(spec) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut ok = 0usize;
        for n in [2usize, 3] {
            for _ in 0..trials / 2 {
                let mut x = [0.0; 3];
                for a in x.iter_mut().take(n) {
                    *a = rng.random_range(-16.0..16.0);
                }
                let level = rng.random_range(-8..6);
                let shift = shifts(n).nth(rng.random_range(0..(1 << n))).unwrap();
                let cube = locate(n, &x, level, shift);
                let mut good = cube.contains_point(&x);
                let children = cube.children();
                good &= children.len() == 1 << n;
                let child_vol: f64 = children.iter().map(|c| c.to_cube().volume()).sum();
                good &= (child_vol - cube.to_cube().volume()).abs()
                    <= 1e-12 * cube.to_cube().volume();
                for child in &children {
                    good &= child.parent() == cube;
                    let center = child.to_cube().center();
                    good &= cube.contains_point(&center);
                    good &= locate(n, &center, child.level, shift) == *child;
                }
                if good {
                    ok += 1;
                }
            }
        }
        let total = 2 * (trials / 2);
        let fraction = ok as f64 / total as f64;
        if fraction < 1.0 {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(trials, fraction).with_bound(0.0));
    }
    report.note("resolution counts sampled cubes across dimensions two and three");
    report.verdict = verdict;
    Ok(report)
}

/// DY-THIRD: for random cubes the one-third trick produces a shifted dyadic
/// container whose side is at most six times the query side. Containment
/// and the ratio bound are checked in exact rational arithmetic.
pub(super) fn dy_third(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("seed", cfg.seed);
    report.param("bound", 6.0);
    let mut verdict = Verdict::Pass;
    for &trials in &cfg.ladder(spec) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut worst = 0.0f64;
        let mut failures = 0usize;
        for i in 0..trials + trials / 10 {
            let n = if i < trials { 2 } else { 3 };
            let cube = random_cube(&mut rng, n);
            let q = RationalCube::from_f64(&cube)?;
            let found = third_trick(&q)?;
            let ratio = found.side_ratio.to_f64().unwrap_or(f64::INFINITY);
            if !found.container.contains_rational(&q) || ratio > 6.0 {
                failures += 1;
            }
            if ratio > worst {
                worst = ratio;
            }
        }
        if failures > 0 {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(trials, worst).with_bound(0.0).noted(
                format!("{failures} containment failures; constant is the worst side ratio"),
            ));
    }
    report.note("the full count runs in dimension two plus a tenth extra in dimension three");
    report.verdict = verdict;
    Ok(report)
}

/// DY-LEVEL: a cube of side exactly 2^k lands in a shifted dyadic container
/// at level exactly k + 3.
pub(super) fn dy_level(spec: &CheckSpec, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::new(spec);
    report.param("seed", cfg.seed);
    let mut verdict = Verdict::Pass;
    for &trials in &cfg.ladder(spec) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut ok = 0usize;
        let total = trials + trials / 10;
        for i in 0..total {
            let n = if i < trials { 2 } else { 3 };
            let k: i32 = rng.random_range(-8..6);
            let mut lower = [0.0; 3];
            for a in lower.iter_mut().take(n) {
                *a = rng.random_range(-10.0..10.0);
            }
            let cube = Cube::new(n, lower, (2.0f64).powi(k));
            let q = RationalCube::from_f64(&cube)?;
            let found = third_trick_level(&q)?;
            if found.container.level == k + 3 && found.container.contains_rational(&q) {
                ok += 1;
            }
        }
        let fraction = ok as f64 / total as f64;
        if fraction < 1.0 {
            verdict = Verdict::Fail;
        }
        report
            .per_resolution
            .push(ResolutionRow::new(trials, fraction).with_bound(0.0));
    }
    report.note("constant is the fraction of cubes contained exactly three levels up");
    report.verdict = verdict;
    Ok(report)
}
