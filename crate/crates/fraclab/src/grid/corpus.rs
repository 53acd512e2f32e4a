//! The sampled function corpus.
//!
//! Every entry is defined by a closed-form expression with a small set of
//! named parameters, carries an analytic gradient when one exists, and is
//! compactly supported well inside its box so the two-cell zero margin of
//! [`super::SUPPORT_MARGIN_CELLS`] holds by construction.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{AnalyticField, BoxSpec, GridError, GridFunction};

/// Quintic smoothstep: 0 for `t <= 0`, 1 for `t >= 1`, C^2 across both ends.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// Derivative of [`smoothstep`].
fn smoothstep_d(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// C-infinity bump profile `exp(1 - 1/(1 - u^2))` for `|u| < 1`, else 0;
/// normalized to 1 at `u = 0`. Accepts signed arguments so tensor products
/// can feed per-axis offsets directly.
fn bump_profile(u: f64) -> f64 {
    if u * u >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Derivative of [`bump_profile`] with respect to `u`.
fn bump_profile_d(u: f64) -> f64 {
    if u * u >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        bump_profile(u) * (-2.0 * u) / (w * w)
    }
}

/// Named scalar parameters for a corpus entry; unspecified names fall back
/// to entry defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusParams(pub BTreeMap<String, f64>);

impl CorpusParams {
    pub fn new() -> Self {
        CorpusParams(BTreeMap::new())
    }

    pub fn set(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get_or(&self, name: &str, default: f64) -> f64 {
        *self.0.get(name).unwrap_or(&default)
    }
}

/// Catalog row describing one corpus entry.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub description: &'static str,
    /// Whether an analytic gradient is available.
    pub has_gradient: bool,
    /// Whether the function is nonnegative everywhere.
    pub nonnegative: bool,
}

/// The corpus catalog in a fixed order.
pub fn catalog() -> &'static [CorpusEntry] {
    &[
        CorpusEntry {
            id: "zero",
            description: "identically zero",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "bump",
            description: "radial C-infinity bump (params: radius, amp, cx, cy, cz)",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "tensor_bump",
            description: "product of 1-d bumps (params: rx, ry, rz)",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "two_bumps",
            description: "two offset bumps of different widths (params: sep)",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "oscillating_bump",
            description: "radial bump times cos(freq x_1) (params: radius, freq)",
            has_gradient: true,
            nonnegative: false,
        },
        CorpusEntry {
            id: "log_power",
            description: "power of a capped logarithm with outer cutoff \
                          (params: gamma, r0, cap_cells); the cap scales with \
                          the cell width so refinement sharpens the peak",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "mollified_indicator",
            description: "C^2 smoothed ball indicator (params: radius, width, cx, cy, cz)",
            has_gradient: true,
            nonnegative: true,
        },
        CorpusEntry {
            id: "indicator_ball",
            description: "sharp ball indicator (params: radius, cx, cy, cz); no gradient",
            has_gradient: false,
            nonnegative: true,
        },
        CorpusEntry {
            id: "indicator_cube",
            description: "indicator of [0, side)^n anchored at the origin \
                          (params: side); no gradient",
            has_gradient: false,
            nonnegative: true,
        },
        CorpusEntry {
            id: "ring_power",
            description: "truncated radial power r^(-beta) with inner hole at eps \
                          and outer cutoff (params: beta, eps)",
            has_gradient: true,
            nonnegative: true,
        },
    ]
}

pub fn lookup(id: &str) -> Option<&'static CorpusEntry> {
    catalog().iter().find(|e| e.id == id)
}

fn radial_parts(x: &[f64; 3], center: [f64; 3], n: usize) -> (f64, [f64; 3]) {
    let mut d = [0.0; 3];
    let mut r2 = 0.0;
    for a in 0..n {
        d[a] = x[a] - center[a];
        r2 += d[a] * d[a];
    }
    (r2.sqrt(), d)
}

/// Samples a corpus entry over the given box and resolution.
///
/// The returned grid carries analytic value and gradient closures when the
/// entry defines them; the support margin is validated.
pub fn sample(
    id: &str,
    params: &CorpusParams,
    spec: BoxSpec,
    resolution: usize,
) -> Result<GridFunction, GridError> {
    let entry = lookup(id).ok_or_else(|| GridError::UnknownCorpusId(id.to_string()))?;
    let n = spec.n;
    let h = spec.side / resolution as f64;
    let center = [
        params.get_or("cx", 0.0),
        params.get_or("cy", 0.0),
        if n == 3 { params.get_or("cz", 0.0) } else { 0.0 },
    ];

    let field: AnalyticField = match entry.id {
        "zero" => AnalyticField {
            value: Box::new(|_| 0.0),
            gradient: Some(Box::new(|_| [0.0; 3])),
        },
        "bump" => {
            let radius = params.get_or("radius", 1.0);
            let amp = params.get_or("amp", 1.0);
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                amp * bump_profile(r / radius)
            };
            let grad = move |x: &[f64; 3]| {
                let (r, d) = radial_parts(x, center, n);
                if r < 1e-300 {
                    return [0.0; 3];
                }
                let slope = amp * bump_profile_d(r / radius) / radius;
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = slope * d[a] / r;
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "tensor_bump" => {
            let r = [
                params.get_or("rx", 1.0),
                params.get_or("ry", 0.8),
                params.get_or("rz", 0.9),
            ];
            let val = move |x: &[f64; 3]| {
                let mut p = 1.0;
                for a in 0..n {
                    p *= bump_profile((x[a] - center[a]) / r[a]);
                }
                p
            };
            let grad = move |x: &[f64; 3]| {
                let mut f = [0.0; 3];
                let mut fd = [0.0; 3];
                for a in 0..n {
                    let u = (x[a] - center[a]) / r[a];
                    f[a] = bump_profile(u);
                    fd[a] = bump_profile_d(u) / r[a];
                }
                let mut g = [0.0; 3];
                for a in 0..n {
                    let mut p = fd[a];
                    for b in 0..n {
                        if b != a {
                            p *= f[b];
                        }
                    }
                    g[a] = p;
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "two_bumps" => {
            let sep = params.get_or("sep", 1.0);
            let c1 = [center[0] - 0.5 * sep, center[1], center[2]];
            let c2 = [center[0] + 0.5 * sep, center[1], center[2]];
            let val = move |x: &[f64; 3]| {
                let (r1, _) = radial_parts(x, c1, n);
                let (r2, _) = radial_parts(x, c2, n);
                bump_profile(r1) + 0.7 * bump_profile(r2 / 0.6)
            };
            let grad = move |x: &[f64; 3]| {
                let mut g = [0.0; 3];
                for (c, amp, rad) in [(c1, 1.0, 1.0), (c2, 0.7, 0.6)] {
                    let (r, d) = radial_parts(x, c, n);
                    if r < 1e-300 {
                        continue;
                    }
                    let slope = amp * bump_profile_d(r / rad) / rad;
                    for a in 0..n {
                        g[a] += slope * d[a] / r;
                    }
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "oscillating_bump" => {
            let radius = params.get_or("radius", 1.0);
            let freq = params.get_or("freq", 3.0);
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                bump_profile(r / radius) * (freq * x[0]).cos()
            };
            let grad = move |x: &[f64; 3]| {
                let (r, d) = radial_parts(x, center, n);
                let c = (freq * x[0]).cos();
                let s = (freq * x[0]).sin();
                let b = bump_profile(r / radius);
                let mut g = [0.0; 3];
                if r >= 1e-300 {
                    let slope = bump_profile_d(r / radius) / radius;
                    for a in 0..n {
                        g[a] = slope * d[a] / r * c;
                    }
                }
                g[0] += b * (-freq * s);
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "log_power" => {
            let gamma = params.get_or("gamma", 1.0);
            let r0 = params.get_or("r0", 1.0);
            let cap = params.get_or("cap_cells", 2.0) * h;
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                let chi = smoothstep((2.0 * r0 - r) / r0);
                if chi == 0.0 {
                    return 0.0;
                }
                let rho = (r * r + cap * cap).sqrt();
                let big_l = (r0 * std::f64::consts::E / rho).ln();
                big_l.powf(gamma) * chi
            };
            let grad = move |x: &[f64; 3]| {
                let (r, d) = radial_parts(x, center, n);
                let chi = smoothstep((2.0 * r0 - r) / r0);
                if chi == 0.0 || r < 1e-300 {
                    return [0.0; 3];
                }
                let rho2 = r * r + cap * cap;
                let big_l = (r0 * std::f64::consts::E / rho2.sqrt()).ln();
                // d/dr of L^gamma = gamma L^(gamma-1) * (-r / rho^2).
                let core_d = gamma * big_l.powf(gamma - 1.0) * (-r / rho2);
                let chi_d = smoothstep_d((2.0 * r0 - r) / r0) * (-1.0 / r0);
                let slope = core_d * chi + big_l.powf(gamma) * chi_d;
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = slope * d[a] / r;
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "mollified_indicator" => {
            let radius = params.get_or("radius", 1.0);
            let width = params.get_or("width", 0.25);
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                smoothstep((radius + 0.5 * width - r) / width)
            };
            let grad = move |x: &[f64; 3]| {
                let (r, d) = radial_parts(x, center, n);
                if r < 1e-300 {
                    return [0.0; 3];
                }
                let slope =
                    smoothstep_d((radius + 0.5 * width - r) / width) * (-1.0 / width);
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = slope * d[a] / r;
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        "indicator_ball" => {
            let radius = params.get_or("radius", 1.0);
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                if r <= radius {
                    1.0
                } else {
                    0.0
                }
            };
            AnalyticField {
                value: Box::new(val),
                gradient: None,
            }
        }
        "indicator_cube" => {
            let side = params.get_or("side", 1.0);
            let val = move |x: &[f64; 3]| {
                if (0..n).all(|a| x[a] >= 0.0 && x[a] < side) {
                    1.0
                } else {
                    0.0
                }
            };
            AnalyticField {
                value: Box::new(val),
                gradient: None,
            }
        }
        "ring_power" => {
            let beta = params.get_or("beta", 1.0);
            let eps = params.get_or("eps", 0.0625);
            let rho1 = 0.5;
            let rho2 = 0.75;
            let val = move |x: &[f64; 3]| {
                let (r, _) = radial_parts(x, center, n);
                if r <= eps || r >= rho2 {
                    return 0.0;
                }
                let inner = smoothstep(r / eps - 1.0);
                let outer = smoothstep((rho2 - r) / (rho2 - rho1));
                inner * r.powf(-beta) * outer
            };
            let grad = move |x: &[f64; 3]| {
                let (r, d) = radial_parts(x, center, n);
                if r <= eps || r >= rho2 {
                    return [0.0; 3];
                }
                let inner = smoothstep(r / eps - 1.0);
                let inner_d = smoothstep_d(r / eps - 1.0) / eps;
                let outer = smoothstep((rho2 - r) / (rho2 - rho1));
                let outer_d = smoothstep_d((rho2 - r) / (rho2 - rho1)) * (-1.0 / (rho2 - rho1));
                let p = r.powf(-beta);
                let p_d = -beta * r.powf(-beta - 1.0);
                let slope = inner_d * p * outer + inner * p_d * outer + inner * p * outer_d;
                let mut g = [0.0; 3];
                for a in 0..n {
                    g[a] = slope * d[a] / r;
                }
                g
            };
            AnalyticField {
                value: Box::new(val),
                gradient: Some(Box::new(grad)),
            }
        }
        other => return Err(GridError::UnknownCorpusId(other.to_string())),
    };

    let field = Arc::new(field);
    let sampled = {
        let value = &field.value;
        GridFunction::from_fn(spec, resolution, id, |x| value(x))?
    };
    sampled.check_support_margin()?;
    Ok(sampled.with_analytic(field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> BoxSpec {
        BoxSpec::symmetric(2, 2.0).unwrap()
    }

    #[test]
    fn catalog_ids_are_unique_and_sampleable() {
        let mut seen = std::collections::BTreeSet::new();
        for entry in catalog() {
            assert!(seen.insert(entry.id), "duplicate id {}", entry.id);
            let spec = match entry.id {
                "indicator_cube" => BoxSpec::symmetric(2, 2.0).unwrap(),
                "log_power" => BoxSpec::symmetric(2, 4.0).unwrap(),
                _ => spec2(),
            };
            let g = sample(entry.id, &CorpusParams::new(), spec, 32).unwrap();
            assert_eq!(g.corpus_id(), entry.id);
        }
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(matches!(
            sample("no_such_entry", &CorpusParams::new(), spec2(), 32),
            Err(GridError::UnknownCorpusId(_))
        ));
    }

    #[test]
    fn bump_center_value_and_mass() {
        // Mass of the unit bump in the plane, computed independently by
        // high-precision radial quadrature: 2 pi int_0^1 e^{1-1/(1-r^2)} r dr.
        let g = sample("bump", &CorpusParams::new(), spec2(), 256).unwrap();
        let mass = g.integral();
        assert!(
            (mass - 1.2681121611275961).abs() < 5e-4,
            "bump mass {mass}"
        );
        let peak = g.sup_norm();
        assert!(peak <= 1.0 && peak > 0.999, "bump peak {peak}");
    }

    #[test]
    fn bump_mass_matches_in_three_dimensions() {
        let spec = BoxSpec::symmetric(3, 2.0).unwrap();
        let g = sample("bump", &CorpusParams::new(), spec, 64).unwrap();
        let mass = g.integral();
        assert!(
            (mass - 1.1990039070192139).abs() < 2e-3,
            "bump mass n=3: {mass}"
        );
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        // Sharp features are kept several cells wide so the O(h^2) central
        // difference resolves them; elsewhere defaults apply.
        let cases: [(&str, BoxSpec, CorpusParams); 7] = [
            ("bump", spec2(), CorpusParams::new()),
            ("tensor_bump", spec2(), CorpusParams::new()),
            ("two_bumps", spec2(), CorpusParams::new()),
            ("oscillating_bump", spec2(), CorpusParams::new()),
            (
                "log_power",
                BoxSpec::symmetric(2, 4.0).unwrap(),
                CorpusParams::new().set("cap_cells", 8.0),
            ),
            ("mollified_indicator", spec2(), CorpusParams::new()),
            (
                "ring_power",
                BoxSpec::symmetric(2, 1.0).unwrap(),
                CorpusParams::new().set("eps", 0.125),
            ),
        ];
        for (id, spec, params) in cases {
            let g = sample(id, &params, spec, 256).unwrap();
            let analytic = g.gradient_magnitude();
            let stripped =
                GridFunction::from_values(g.spec(), g.resolution(), "raw", g.values().to_vec())
                    .unwrap();
            let fd = stripped.gradient_magnitude();
            // Central differences are O(h^2); compare in relative L2.
            let err = fd.rel_l2_error(&analytic);
            assert!(err < 3e-2, "{id}: gradient mismatch {err}");
        }
    }

    #[test]
    fn log_power_cap_tracks_resolution() {
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let lo = sample("log_power", &CorpusParams::new(), spec, 64).unwrap();
        let hi = sample("log_power", &CorpusParams::new(), spec, 128).unwrap();
        // Peak grows like 1 + ln(1 / (2h)) as h shrinks.
        let expect_lo = 1.0 + (1.0 / (2.0 * lo.h())).ln();
        let expect_hi = 1.0 + (1.0 / (2.0 * hi.h())).ln();
        let got_lo = lo.sup_norm();
        let got_hi = hi.sup_norm();
        assert!(
            (got_lo - expect_lo).abs() < 0.05 * expect_lo,
            "lo peak {got_lo} vs {expect_lo}"
        );
        assert!(
            (got_hi - expect_hi).abs() < 0.05 * expect_hi,
            "hi peak {got_hi} vs {expect_hi}"
        );
        assert!(got_hi > got_lo);
    }

    #[test]
    fn indicator_cube_mass_is_exact_on_aligned_box() {
        // Box [-8,8)^2 at resolution 256 has cell width 1/16, so the faces
        // x = 0 and x = 1 of the unit cube lie exactly on cell boundaries
        // and the sampled mass is exact.
        let spec = BoxSpec::symmetric(2, 8.0).unwrap();
        let g = sample("indicator_cube", &CorpusParams::new(), spec, 256).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-12, "mass {}", g.integral());
    }

    #[test]
    fn ring_power_vanishes_inside_hole() {
        let spec = BoxSpec::symmetric(2, 1.0).unwrap();
        let params = CorpusParams::new().set("beta", 1.5).set("eps", 0.125);
        let g = sample("ring_power", &params, spec, 128).unwrap();
        for flat in 0..g.len() {
            let p = g.point(flat);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r <= 0.125 {
                assert_eq!(g.values()[flat], 0.0, "hole leak at r={r}");
            }
        }
        assert!(g.sup_norm() > 0.0);
    }
}
