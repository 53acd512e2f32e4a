//! Low-level numeric helpers shared by every operator module.
//!
//! All reductions that feed reported constants go through [`pairwise_sum`]
//! so repeated runs produce bit-identical output regardless of thread
//! scheduling elsewhere.

/// Threshold below which pairwise summation falls back to a serial loop.
const PAIRWISE_LEAF: usize = 32;

/// Sums a slice in a fixed pairwise (tree) order.
///
/// The result does not depend on chunking decisions made by callers, only
/// on the order of the slice itself, so it is reproducible across runs and
/// platforms with IEEE-754 doubles.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Surface area of the unit sphere in `R^n` (the boundary, not the ball).
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Conjugate exponent `p/(p-1)`, with `1 -> inf` and `inf -> 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p <= 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Tables are standard double-precision values; panels of up to 32 points
/// cover every quadrature task in the crate.
pub struct GaussRule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

pub const GAUSS_2: GaussRule = GaussRule {
    nodes: &[-0.5773502691896257, 0.5773502691896257],
    weights: &[1.0, 1.0],
};

pub const GAUSS_4: GaussRule = GaussRule {
    nodes: &[
        -0.8611363115940526,
        -0.33998104358485626,
        0.33998104358485626,
        0.8611363115940526,
    ],
    weights: &[
        0.3478548451374537,
        0.6521451548625462,
        0.6521451548625462,
        0.3478548451374537,
    ],
};

pub const GAUSS_8: GaussRule = GaussRule {
    nodes: &[
        -0.9602898564975362,
        -0.7966664774136267,
        -0.525532409916329,
        -0.18343464249564978,
        0.18343464249564978,
        0.525532409916329,
        0.7966664774136267,
        0.9602898564975362,
    ],
    weights: &[
        0.10122853629037669,
        0.22238103445337434,
        0.31370664587788705,
        0.36268378337836177,
        0.36268378337836177,
        0.31370664587788705,
        0.22238103445337434,
        0.10122853629037669,
    ],
};

pub const GAUSS_16: GaussRule = GaussRule {
    nodes: &[
        -0.9894009349916499,
        -0.9445750230732326,
        -0.8656312023878318,
        -0.755404408355003,
        -0.6178762444026438,
        -0.45801677765722737,
        -0.2816035507792589,
        -0.09501250983763745,
        0.09501250983763745,
        0.2816035507792589,
        0.45801677765722737,
        0.6178762444026438,
        0.755404408355003,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ],
    weights: &[
        0.027152459411754037,
        0.062253523938647706,
        0.09515851168249259,
        0.12462897125553403,
        0.14959598881657676,
        0.16915651939500262,
        0.1826034150449236,
        0.18945061045506859,
        0.18945061045506859,
        0.1826034150449236,
        0.16915651939500262,
        0.14959598881657676,
        0.12462897125553403,
        0.09515851168249259,
        0.062253523938647706,
        0.027152459411754037,
    ],
};

pub const GAUSS_32: GaussRule = GaussRule {
    nodes: &[
        -0.9972638618494816,
        -0.9856115115452684,
        -0.9647622555875064,
        -0.9349060759377397,
        -0.8963211557660522,
        -0.84936761373257,
        -0.7944837959679424,
        -0.7321821187402897,
        -0.6630442669302152,
        -0.5877157572407623,
        -0.5068999089322294,
        -0.42135127613063533,
        -0.33186860228212767,
        -0.23928736225213706,
        -0.1444719615827965,
        -0.04830766568773831,
        0.04830766568773831,
        0.1444719615827965,
        0.23928736225213706,
        0.33186860228212767,
        0.42135127613063533,
        0.5068999089322294,
        0.5877157572407623,
        0.6630442669302152,
        0.7321821187402897,
        0.7944837959679424,
        0.84936761373257,
        0.8963211557660522,
        0.9349060759377397,
        0.9647622555875064,
        0.9856115115452684,
        0.9972638618494816,
    ],
    weights: &[
        0.007018610009469298,
        0.016274394730905965,
        0.025392065309262427,
        0.034273862913021626,
        0.042835898022226426,
        0.050998059262376244,
        0.058684093478535704,
        0.06582222277636175,
        0.07234579410884845,
        0.07819389578707031,
        0.08331192422694685,
        0.08765209300440391,
        0.09117387869576386,
        0.09384439908080457,
        0.09563872007927483,
        0.09654008851472781,
        0.09654008851472781,
        0.09563872007927483,
        0.09384439908080457,
        0.09117387869576386,
        0.08765209300440391,
        0.08331192422694685,
        0.07819389578707031,
        0.07234579410884845,
        0.06582222277636175,
        0.058684093478535704,
        0.050998059262376244,
        0.042835898022226426,
        0.034273862913021626,
        0.025392065309262427,
        0.016274394730905965,
        0.007018610009469298,
    ],
};

impl GaussRule {
    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

/// Solves `g(lam) = 1` for a continuous strictly decreasing `g` on
/// `(0, inf)`, as used by Luxemburg functionals.
///
/// Returns the bracket midpoint once the relative bracket width drops
/// below `rel_tol`. Returns `None` when `g` never exceeds one (the
/// functional of the zero sample set).
pub fn solve_decreasing<F: FnMut(f64) -> f64>(
    mut g: F,
    seed: f64,
    rel_tol: f64,
) -> Option<f64> {
    assert!(seed > 0.0 && seed.is_finite());
    let mut hi = seed;
    let mut grow = 0;
    while g(hi) > 1.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return None;
        }
    }
    let mut lo = hi;
    let mut shrink = 0;
    loop {
        let next = lo * 0.5;
        if g(next) > 1.0 {
            break;
        }
        lo = next;
        shrink += 1;
        if shrink > 200 {
            // g stays at or below one arbitrarily close to zero.
            return None;
        }
    }
    // After the loops: g(lo) <= 1 and g(lo/2) > 1, so the crossing lies in
    // [lo/2, lo].
    let mut a = lo * 0.5;
    let mut b = lo;
    while (b - a) > rel_tol * b {
        let m = 0.5 * (a + b);
        if g(m) > 1.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn pairwise_sum_is_deterministic_under_repeats() {
        let xs: Vec<f64> = (0..4097)
            .map(|k| ((k * 2654435761_u64 as usize) % 1000) as f64 * 1e-7 + 0.1)
            .collect();
        let a = pairwise_sum(&xs);
        let b = pairwise_sum(&xs);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        // A k-point rule is exact through degree 2k-1.
        let val = GAUSS_4.integrate(0.0, 1.0, |x| x.powi(7));
        assert!((val - 0.125).abs() < 1e-14, "G4 x^7: {val}");
        let val = GAUSS_8.integrate(-1.0, 3.0, |x| x.powi(15));
        let exact = (3.0f64.powi(16) - 1.0) / 16.0;
        assert!((val - exact).abs() < 1e-9 * exact.abs(), "G8 x^15: {val}");
        let val = GAUSS_2.integrate(0.0, 2.0, |x| x.powi(3));
        assert!((val - 4.0).abs() < 1e-13, "G2 x^3: {val}");
    }

    #[test]
    fn gauss_rule_weights_sum_to_interval_length() {
        for rule in [&GAUSS_2, &GAUSS_4, &GAUSS_8, &GAUSS_16, &GAUSS_32] {
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-14);
            assert_eq!(rule.nodes.len(), rule.weights.len());
        }
    }

    #[test]
    fn solve_decreasing_recovers_reciprocal_root() {
        // g(lam) = 2 / lam crosses one at lam = 2.
        let root = solve_decreasing(|lam| 2.0 / lam, 1.0, 1e-12).unwrap();
        assert!((root - 2.0).abs() < 1e-10, "root={root}");
    }

    #[test]
    fn solve_decreasing_handles_zero_function() {
        assert!(solve_decreasing(|_| 0.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn conjugate_exponent_pairs() {
        assert_eq!(conjugate_exponent(2.0), 2.0);
        assert!((conjugate_exponent(1.5) - 3.0).abs() < 1e-15);
        assert!(conjugate_exponent(1.0).is_infinite());
        assert_eq!(conjugate_exponent(f64::INFINITY), 1.0);
    }
}
