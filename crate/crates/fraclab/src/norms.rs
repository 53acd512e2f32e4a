//! Lorentz and Orlicz functionals on weighted sample sets.
//!
//! Samples are pairs of a value and a measure; a grid cell contributes its
//! sample value with measure `h^n`, a sphere node its symbol value with its
//! quadrature weight. All functionals here are exact on step functions,
//! which sampled data always is, so closed-form test values are available
//! at machine precision.

use crate::numeric::{pairwise_sum, solve_decreasing};

/// Lorentz exponents; `q = f64::INFINITY` selects the weak space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzExponents {
    pub p: f64,
    pub q: f64,
}

impl LorentzExponents {
    pub fn new(p: f64, q: f64) -> Self {
        assert!(p > 0.0 && p.is_finite(), "p must be finite positive");
        assert!(q > 0.0, "q must be positive (possibly infinite)");
        LorentzExponents { p, q }
    }

    /// Dual exponents `(p', q')` for the Hoelder pairing; defined for
    /// `p > 1`.
    pub fn dual(&self) -> LorentzExponents {
        assert!(self.p > 1.0);
        let p = self.p / (self.p - 1.0);
        let q = if self.q.is_infinite() {
            1.0
        } else if self.q <= 1.0 {
            f64::INFINITY
        } else {
            self.q / (self.q - 1.0)
        };
        LorentzExponents { p, q }
    }
}

/// Lorentz norm of a sampled function given as (value, measure) pairs.
///
/// The norm is computed through the decreasing rearrangement: with the
/// distinct values `v_1 > v_2 > ...` and cumulative measures `M_i` of the
/// superlevel sets, the q-th power is `(p/q) sum_i M_i^{q/p} (v_i^q -
/// v_{i+1}^q)`; for `q = inf` it is `max_i v_i M_i^{1/p}`. Ties in the
/// values contribute zero-width steps and need no special casing. Absolute
/// values of the samples are taken; measures must be nonnegative.
pub fn lorentz_norm(values: &[f64], measures: &[f64], exps: LorentzExponents) -> f64 {
    assert_eq!(values.len(), measures.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(a.cmp(&b))
    });
    let p = exps.p;
    let q = exps.q;
    let mut cum = 0.0;
    if q.is_infinite() {
        let mut best = 0.0f64;
        for &i in &order {
            let v = values[i].abs();
            cum += measures[i];
            if v == 0.0 {
                break;
            }
            best = best.max(v * cum.powf(1.0 / p));
        }
        return best;
    }
    let mut terms = Vec::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        cum += measures[i];
        let v = values[i].abs();
        if v == 0.0 {
            break;
        }
        let next = if pos + 1 < order.len() {
            values[order[pos + 1]].abs()
        } else {
            0.0
        };
        terms.push(cum.powf(q / p) * (v.powf(q) - next.powf(q)));
    }
    ((p / q) * pairwise_sum(&terms)).powf(1.0 / q)
}

/// Normalized Lorentz average over a set of total measure `total`:
/// `total^(-1/p)` times the norm restricted to the set.
pub fn lorentz_average(
    values: &[f64],
    measures: &[f64],
    total: f64,
    exps: LorentzExponents,
) -> f64 {
    assert!(total > 0.0);
    total.powf(-1.0 / exps.p) * lorentz_norm(values, measures, exps)
}

/// Young functions for the Orlicz functionals used by the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrliczClass {
    /// `Phi(t) = exp(t^q) - 1`; the exponential class `exp L^q`.
    ExpPower(f64),
    /// `Phi(t) = t ln(1 + t)^a`; the Zygmund class `L (log L)^a`.
    LogPower(f64),
}

impl OrliczClass {
    pub fn phi(&self, t: f64) -> f64 {
        match *self {
            OrliczClass::ExpPower(qexp) => (t.powf(qexp)).exp() - 1.0,
            OrliczClass::LogPower(a) => t * (1.0 + t).ln().powf(a),
        }
    }

    /// The complementary class used on the other side of the Hoelder
    /// pairing (equivalent, not the exact Legendre conjugate).
    pub fn associate(&self) -> OrliczClass {
        match *self {
            OrliczClass::ExpPower(qexp) => OrliczClass::LogPower(1.0 / qexp),
            OrliczClass::LogPower(a) => OrliczClass::ExpPower(1.0 / a),
        }
    }
}

/// Luxemburg functional of the normalized average: the least `lam` with
/// `(1/total) sum_i m_i Phi(|v_i| / lam) <= 1`.
///
/// Solved by bisection to a relative bracket width of 1e-10; zero data
/// yields zero. `total` need not equal the sum of the measures, which lets
/// callers average over a cube while samples only cover part of it.
pub fn luxemburg_average(
    values: &[f64],
    measures: &[f64],
    total: f64,
    class: OrliczClass,
) -> f64 {
    assert_eq!(values.len(), measures.len());
    assert!(total > 0.0);
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax == 0.0 {
        return 0.0;
    }
    let mean = |lam: f64| -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(measures)
            .map(|(&v, &m)| m * class.phi(v.abs() / lam))
            .collect();
        pairwise_sum(&terms) / total
    };
    solve_decreasing(mean, vmax, 1e-10).unwrap_or(0.0)
}

/// Both sides of a Hoelder-type pairing and their ratio.
#[derive(Debug, Clone, Copy)]
pub struct HolderReport {
    /// The average of `|f g|`.
    pub lhs: f64,
    /// The product of the two norms on the right-hand side.
    pub rhs: f64,
    /// `lhs / rhs`; zero when both sides vanish.
    pub ratio: f64,
}

fn ratio_or_zero(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Lorentz pairing: compares the average of `|f g|` against the product of
/// dual Lorentz averages. The underlying rearrangement inequality has
/// constant exactly one, so the reported ratio never exceeds one up to
/// rounding.
pub fn holder_defect_lorentz(
    f: &[f64],
    g: &[f64],
    measures: &[f64],
    total: f64,
    exps: LorentzExponents,
) -> HolderReport {
    assert_eq!(f.len(), g.len());
    assert_eq!(f.len(), measures.len());
    let prods: Vec<f64> = f
        .iter()
        .zip(g)
        .zip(measures)
        .map(|((&a, &b), &m)| (a * b).abs() * m)
        .collect();
    let lhs = pairwise_sum(&prods) / total;
    let rhs = lorentz_average(f, measures, total, exps)
        * lorentz_average(g, measures, total, exps.dual());
    HolderReport {
        lhs,
        rhs,
        ratio: ratio_or_zero(lhs, rhs),
    }
}

/// Orlicz pairing between an exponential class and its Zygmund associate.
pub fn holder_defect_orlicz(
    f: &[f64],
    g: &[f64],
    measures: &[f64],
    total: f64,
    class: OrliczClass,
) -> HolderReport {
    assert_eq!(f.len(), g.len());
    assert_eq!(f.len(), measures.len());
    let prods: Vec<f64> = f
        .iter()
        .zip(g)
        .zip(measures)
        .map(|((&a, &b), &m)| (a * b).abs() * m)
        .collect();
    let lhs = pairwise_sum(&prods) / total;
    let rhs = luxemburg_average(f, measures, total, class)
        * luxemburg_average(g, measures, total, class.associate());
    HolderReport {
        lhs,
        rhs,
        ratio: ratio_or_zero(lhs, rhs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorentz_norm_of_indicator_has_closed_form() {
        // Indicator of measure mu: norm = (p/q)^(1/q) mu^(1/p).
        let values = [1.0, 1.0, 0.0];
        let measures = [2.0, 1.5, 10.0];
        for (p, q) in [(2.0, 1.0), (1.5, 4.0), (3.0, 3.0)] {
            let got = lorentz_norm(&values, &measures, LorentzExponents::new(p, q));
            let want = (p / q).powf(1.0 / q) * 3.5f64.powf(1.0 / p);
            assert!(
                (got - want).abs() < 1e-12 * want,
                "p={p} q={q}: {got} vs {want}"
            );
        }
        let weak = lorentz_norm(&values, &measures, LorentzExponents::new(2.0, f64::INFINITY));
        let want = 3.5f64.sqrt();
        assert!((weak - want).abs() < 1e-12);
    }

    #[test]
    fn lorentz_norm_matches_hand_computed_two_step() {
        // f* = 2 on [0,1), 1 on [1,4); p = 2, q = 1 gives
        // int t^(-1/2) f*(t) dt = 4 + 2 = 6.
        let got = lorentz_norm(
            &[1.0, 2.0],
            &[3.0, 1.0],
            LorentzExponents::new(2.0, 1.0),
        );
        assert!((got - 6.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn lorentz_collapses_to_lp_when_q_equals_p() {
        let values = [0.3, -1.7, 2.5, 0.0, 0.3, 1.1];
        let measures = [0.2, 0.7, 0.1, 0.5, 0.4, 0.25];
        for p in [1.0, 1.5, 2.0, 3.7] {
            let lorentz = lorentz_norm(&values, &measures, LorentzExponents::new(p, p));
            let terms: Vec<f64> = values
                .iter()
                .zip(&measures)
                .map(|(&v, &m)| v.abs().powf(p) * m)
                .collect();
            let lp = pairwise_sum(&terms).powf(1.0 / p);
            assert!(
                (lorentz - lp).abs() < 1e-12 * lp.max(1.0),
                "p={p}: {lorentz} vs {lp}"
            );
        }
    }

    #[test]
    fn lorentz_norm_ignores_tie_ordering() {
        let a = lorentz_norm(
            &[1.0, 2.0, 1.0, 2.0],
            &[0.5, 0.25, 1.0, 0.25],
            LorentzExponents::new(1.7, 2.9),
        );
        let b = lorentz_norm(
            &[2.0, 2.0, 1.0, 1.0],
            &[0.25, 0.25, 0.5, 1.0],
            LorentzExponents::new(1.7, 2.9),
        );
        assert!((a - b).abs() < 1e-13 * a);
    }

    #[test]
    fn luxemburg_constant_function_closed_forms() {
        // Constant c: ExpPower(2) gives c / sqrt(ln 2).
        let values = [0.7; 5];
        let measures = [1.0, 2.0, 0.5, 0.25, 0.25];
        let got = luxemburg_average(&values, &measures, 4.0, OrliczClass::ExpPower(2.0));
        let want = 0.7 / (2.0f64.ln()).sqrt();
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn luxemburg_half_indicator_closed_form() {
        // Indicator of half the mass under ExpPower(1):
        // (1/2)(e^{1/lam} - 1) = 1 at lam = 1/ln 3.
        let got = luxemburg_average(
            &[1.0, 0.0],
            &[1.0, 1.0],
            2.0,
            OrliczClass::ExpPower(1.0),
        );
        let want = 1.0 / 3.0f64.ln();
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn luxemburg_scales_linearly() {
        let values = [0.2, 1.4, 0.9, 2.2];
        let measures = [1.0, 0.5, 0.75, 0.25];
        let base = luxemburg_average(&values, &measures, 2.5, OrliczClass::LogPower(0.5));
        let scaled: Vec<f64> = values.iter().map(|v| 3.0 * v).collect();
        let thrice = luxemburg_average(&scaled, &measures, 2.5, OrliczClass::LogPower(0.5));
        assert!((thrice - 3.0 * base).abs() < 1e-8 * thrice);
    }

    #[test]
    fn lorentz_holder_ratio_never_exceeds_one() {
        let f = [3.0, 1.0, 0.5, 2.0, 0.0, 1.5];
        let g = [0.2, 2.0, 1.0, 0.7, 4.0, 0.1];
        let m = [0.3, 0.2, 0.5, 0.25, 0.5, 0.25];
        let total: f64 = m.iter().sum();
        for (p, q) in [(2.0, 2.0), (1.5, 1.0), (3.0, 4.0)] {
            let rep =
                holder_defect_lorentz(&f, &g, &m, total, LorentzExponents::new(p, q));
            assert!(
                rep.ratio <= 1.0 + 1e-12,
                "p={p} q={q}: ratio {}",
                rep.ratio
            );
        }
    }

    #[test]
    fn lorentz_holder_is_sharp_for_aligned_pairs() {
        // Aligned decreasing powers approach equality in the rearrangement
        // inequality; t^(-1/4) against t^(-1/4) in L^{2,2} x L^{2,2}.
        let count = 4096;
        let mut f = Vec::with_capacity(count);
        let mut m = Vec::with_capacity(count);
        for i in 0..count {
            let t = (i as f64 + 0.5) / count as f64;
            f.push(t.powf(-0.25));
            m.push(1.0 / count as f64);
        }
        let rep = holder_defect_lorentz(&f, &f, &m, 1.0, LorentzExponents::new(2.0, 2.0));
        assert!(rep.ratio > 0.999, "ratio {}", rep.ratio);
        assert!(rep.ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn orlicz_holder_ratio_is_order_one() {
        let f = [2.0, 0.5, 1.0, 3.0];
        let g = [0.3, 1.2, 2.0, 0.4];
        let m = [1.0, 1.0, 0.5, 0.5];
        let rep = holder_defect_orlicz(&f, &g, &m, 3.0, OrliczClass::ExpPower(1.0));
        assert!(rep.ratio.is_finite());
        assert!(rep.ratio < 4.0, "ratio {}", rep.ratio);
        assert!(rep.lhs > 0.0 && rep.rhs > 0.0);
    }

    #[test]
    fn associate_classes_pair_up() {
        assert_eq!(
            OrliczClass::ExpPower(2.0).associate(),
            OrliczClass::LogPower(0.5)
        );
        assert_eq!(
            OrliczClass::LogPower(0.5).associate(),
            OrliczClass::ExpPower(2.0)
        );
    }
}
