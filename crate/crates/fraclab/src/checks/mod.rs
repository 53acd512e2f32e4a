//! Check registry, runners, and report serialization.
//!
//! Every verification the laboratory performs is packaged as a named check.
//! A check fixes an operator configuration, runs it over a ladder of grid
//! resolutions, extracts one constant per resolution, and turns the ladder
//! into a verdict:
//!
//! * checks with a documented constant pass when the measured constant stays
//!   inside the carried error band at every resolution;
//! * checks with an empirical constant pass when the ladder is stable, that
//!   is each constant is within ten percent of its predecessor;
//! * consistency checks compare two realizations of the same quantity and
//!   pass when they agree to the stated tolerance;
//! * falsified checks are expected to fail, and the runner treats the
//!   documented failure as the correct outcome.
//!
//! Reports serialize to JSON with a fixed field order, so a rerun with the
//! same configuration produces byte-identical output.

mod lattice;
mod local_inequalities;
mod maximal;
mod singular;
mod sparse_sums;
mod weighted;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::{locate, shifts, DyadicError};
use crate::grid::corpus::{sample, CorpusParams};
use crate::grid::{BoxSpec, EvalSet, GridError, GridFunction};
use crate::numeric::pairwise_sum;
use crate::potentials::{CubeAggregates, PotentialError};
use crate::rough::RoughError;
use crate::sparse::SparseError;
use crate::sphere::SphereError;
use crate::weights::WeightError;

/// Errors raised while assembling or running checks.
#[derive(Debug, Error)]
pub enum CheckError {
    #[error("unknown check id `{0}`")]
    UnknownCheck(String),
    #[error("check {check}: hypothesis violated: {message}")]
    Hypothesis { check: String, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Rough(#[from] RoughError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Outcome of a check run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

/// How the check's constant is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantKind {
    /// A documented closed-form constant with a carried error band.
    Exact,
    /// A measured constant judged by stability under refinement.
    Empirical,
    /// Two realizations of one quantity compared at a tight tolerance.
    Consistency,
    /// A documented failure: the measured quantity must blow up.
    Falsified,
}

impl fmt::Display for ConstantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstantKind::Exact => "exact",
            ConstantKind::Empirical => "empirical",
            ConstantKind::Consistency => "consistency",
            ConstantKind::Falsified => "falsified",
        };
        f.write_str(s)
    }
}

/// Static description of a registered check.
#[derive(Debug, Clone, Copy)]
pub struct CheckSpec {
    pub id: &'static str,
    /// Statement the check verifies, in words.
    pub anchor: &'static str,
    /// Coverage group; every family in [`FAMILIES`] is hit by some check.
    pub family: &'static str,
    pub dimension: usize,
    pub kind: ConstantKind,
    pub expected: Verdict,
    /// Resolution ladder used when the caller does not override it. For
    /// combinatorial checks the entries count sampled cubes instead of grid
    /// points per side.
    pub default_resolutions: &'static [usize],
}

/// Coverage families. The registry test asserts that the set of families
/// named by checks equals this list exactly.
pub const FAMILIES: &[&str] = &[
    "dyadic grids",
    "sparse potentials",
    "sparse divergence",
    "operator identities",
    "poincare sobolev",
    "holder inequalities",
    "gradient pointwise bounds",
    "critical pointwise bound",
    "subcritical pointwise bound",
    "endpoint pointwise bound",
    "fractional derivative bound",
    "riesz composition",
    "rough maximal comparison",
    "maximal counterexample",
    "spherical maximal",
    "weight windows",
    "weight rescaling",
    "weighted maximal equivalence",
    "weighted sparse comparison",
    "weighted power bounds",
];

static REGISTRY: &[CheckSpec] = &[
    CheckSpec {
        id: "DY-NEST",
        anchor: "shifted dyadic grids nest: children tile their parent and located cubes contain their point",
        family: "dyadic grids",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[2000],
    },
    CheckSpec {
        id: "DY-THIRD",
        anchor: "every cube lies inside a shifted dyadic cube of side at most six times its own",
        family: "dyadic grids",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[10000],
    },
    CheckSpec {
        id: "DY-LEVEL",
        anchor: "a cube of side 2^k fits inside a shifted dyadic cube exactly three levels up",
        family: "dyadic grids",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[10000],
    },
    CheckSpec {
        id: "SP-DOM",
        anchor: "the dyadic potential is dominated by its sparse subfamily with constant 2^((n+1)/s)/(1-2^-alpha)",
        family: "sparse potentials",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PD-CMP",
        anchor: "the dyadic potential computed from level masses matches the potential summed through the sparse forest",
        family: "sparse potentials",
        dimension: 2,
        kind: ConstantKind::Consistency,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "DIV-EX",
        anchor: "the sparse L^s potential of the unit cube over origin-anchored cubes sums the series 2^(k(alpha-n/s))",
        family: "sparse divergence",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[256],
    },
    CheckSpec {
        id: "ID-MAX",
        anchor: "the L^s fractional maximal function is the 1/s power of the order-alpha-s maximal function of |f|^s",
        family: "operator identities",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "ID-LOR",
        anchor: "lorentz averages with equal exponents reduce to plain power averages on cubes",
        family: "operator identities",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[64],
    },
    CheckSpec {
        id: "PS-CLS",
        anchor: "cube oscillation is bounded by sidelength times the gradient average over the cube",
        family: "poincare sobolev",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PS-LOR",
        anchor: "cube oscillation in the lorentz (p*, p) average is bounded by sidelength times the L^p gradient average",
        family: "poincare sobolev",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PS-TRU",
        anchor: "cube oscillation in the exponential orlicz average is bounded by the L^n gradient integral",
        family: "poincare sobolev",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "HL-ORL",
        anchor: "the product of two samples integrates against a measure within a fixed multiple of paired orlicz averages",
        family: "holder inequalities",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[1024, 4096],
    },
    CheckSpec {
        id: "HL-LOR",
        anchor: "the lorentz holder inequality with dual exponent pairs holds with constant one",
        family: "holder inequalities",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[1024, 4096],
    },
    CheckSpec {
        id: "PW-SOB",
        anchor: "|f| is pointwise at most the riesz potential of |grad f| of order one divided by the sphere area",
        family: "gradient pointwise bounds",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "CH-SOB",
        anchor: "a pointwise riesz gradient bound transfers to a weak sobolev inequality against maximal-smoothed measures",
        family: "gradient pointwise bounds",
        dimension: 2,
        kind: ConstantKind::Consistency,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "PW-CRIT",
        anchor: "the critical rough singular integral is dominated by the weak-L^n symbol norm times the riesz potential of the gradient",
        family: "critical pointwise bound",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PW-SUB",
        anchor: "the subcritical rough singular integral is dominated by shifted sparse L^s potentials of the gradient",
        family: "subcritical pointwise bound",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PW-END",
        anchor: "the endpoint rough singular integral with log-integrable symbol is dominated by sparse L^n potentials of the gradient",
        family: "endpoint pointwise bound",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "HS-DOM",
        anchor: "with centered cancellation the rough integral is bounded by the symbol sup norm times the nonlinear fractional derivative",
        family: "fractional derivative bound",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "RZ-COMP",
        anchor: "riesz potentials compose along the semigroup law once the far-field truncation is corrected",
        family: "riesz composition",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PW-MAXSHARP",
        anchor: "the rough maximal function differs from its sharp variant by the L^1 symbol norm over the sphere area times the maximal function one order down",
        family: "rough maximal comparison",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "PW-MAXTRIO",
        anchor: "the sharp rough maximal function is dominated through gradient maximal functions in three symbol classes",
        family: "rough maximal comparison",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "MX-NAT",
        anchor: "the cancelled rough maximal function never exceeds its sharp variant",
        family: "rough maximal comparison",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128],
    },
    CheckSpec {
        id: "NEG-MAX",
        anchor: "no gradient-free bound: the ratio of the maximal function to the gradient maximal function grows on log spikes",
        family: "maximal counterexample",
        dimension: 2,
        kind: ConstantKind::Falsified,
        expected: Verdict::Fail,
        default_resolutions: &[64, 128, 256],
    },
    CheckSpec {
        id: "PW-SPH",
        anchor: "the spherical maximal function of order beta is dominated by the order beta+1 riesz potential of the gradient over the sphere area",
        family: "spherical maximal",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "SPH-SOB",
        anchor: "the spherical maximal operator maps gradient L^p into L^q strongly for p above one and weakly at p equal one",
        family: "spherical maximal",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "W-INT",
        anchor: "power weights satisfy the two-exponent muckenhoupt condition exactly inside the open lambda window",
        family: "weight windows",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[8],
    },
    CheckSpec {
        id: "W-WIN",
        anchor: "rescaling by s narrows the power window to lambda below n/s - n/p, and grid realizations turn divergence into octave growth",
        family: "weight windows",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[6, 8],
    },
    CheckSpec {
        id: "W-RSC",
        anchor: "w lies in the two-exponent class iff w^q is muckenhoupt with exponent 1 + q/p', and the s-rescaled product rebases the same way",
        family: "weight rescaling",
        dimension: 2,
        kind: ConstantKind::Consistency,
        expected: Verdict::Pass,
        default_resolutions: &[8],
    },
    CheckSpec {
        id: "W-EQV",
        anchor: "weighted bounds for the maximal, sparse, and potential realizations hold together exactly when the rescaled weight condition holds",
        family: "weighted maximal equivalence",
        dimension: 2,
        kind: ConstantKind::Consistency,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "W-END1",
        anchor: "at p equal s the rescaled weight condition with one fixed exponent gives a weak-type maximal bound",
        family: "weighted maximal equivalence",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[64, 128],
    },
    CheckSpec {
        id: "W-CMP",
        anchor: "weighted norms of the sparse L^s potential are controlled by the L^s fractional maximal function",
        family: "weighted sparse comparison",
        dimension: 2,
        kind: ConstantKind::Empirical,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "W-POW1",
        anchor: "the subcritical gradient-to-operator bound holds with power weights exactly inside its lambda window",
        family: "weighted power bounds",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
    CheckSpec {
        id: "W-POW2",
        anchor: "the endpoint gradient-to-operator bound holds with power weights inside its narrower lambda window",
        family: "weighted power bounds",
        dimension: 2,
        kind: ConstantKind::Exact,
        expected: Verdict::Pass,
        default_resolutions: &[128, 256],
    },
];

/// The full check registry.
pub fn registry() -> &'static [CheckSpec] {
    REGISTRY
}

/// Looks up a check by id.
pub fn find(id: &str) -> Option<&'static CheckSpec> {
    REGISTRY.iter().find(|c| c.id == id)
}

/// One resolution rung of a report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionRow {
    pub res: usize,
    pub constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_sup_location: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResolutionRow {
    pub(crate) fn new(res: usize, constant: f64) -> Self {
        ResolutionRow {
            res,
            constant,
            error_bound: None,
            lhs_sup_location: None,
            note: None,
        }
    }

    pub(crate) fn with_bound(mut self, bound: f64) -> Self {
        self.error_bound = Some(bound);
        self
    }

    pub(crate) fn at(mut self, point: &[f64; 3], n: usize) -> Self {
        self.lhs_sup_location = Some(point[..n].to_vec());
        self
    }

    pub(crate) fn noted(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Full outcome of one check run.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check_id: String,
    /// The statement under test, copied from the registry anchor.
    pub theorem: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub per_resolution: Vec<ResolutionRow>,
    pub verdict: Verdict,
    pub expected: Verdict,
    /// Wall-clock time; kept out of the JSON export so identical runs
    /// produce identical bytes.
    #[serde(skip_serializing)]
    pub runtime_ms: u64,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub(crate) fn new(spec: &CheckSpec) -> Self {
        CheckReport {
            check_id: spec.id.to_string(),
            theorem: spec.anchor.to_string(),
            params: BTreeMap::new(),
            per_resolution: Vec::new(),
            verdict: Verdict::Inconclusive,
            expected: spec.expected,
            runtime_ms: 0,
            notes: Vec::new(),
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// True when the verdict equals the registered expectation.
    pub fn as_expected(&self) -> bool {
        self.verdict == self.expected
    }
}

/// Runtime configuration shared by all checks.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Overrides each check's default resolution ladder when set.
    pub resolutions: Option<Vec<usize>>,
    /// Restricts corpus sweeps to these function ids when set.
    pub corpus: Option<Vec<String>>,
    /// Seed for every randomized sweep.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            resolutions: None,
            corpus: None,
            seed: 7,
        }
    }
}

#[derive(Debug, serde::Deserialize)]
struct ConfigFile {
    resolutions: Option<Vec<usize>>,
    corpus: Option<Vec<String>>,
    seed: Option<u64>,
}

impl RunConfig {
    /// Loads overrides from a TOML file with optional keys `resolutions`,
    /// `corpus`, and `seed`.
    pub fn from_file(path: &Path) -> Result<RunConfig, CheckError> {
        let text = std::fs::read_to_string(path)?;
        let parsed: ConfigFile =
            toml::from_str(&text).map_err(|e| CheckError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        cfg.resolutions = parsed.resolutions;
        cfg.corpus = parsed.corpus;
        if let Some(seed) = parsed.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    /// The resolution ladder for a check, honoring the override.
    pub(crate) fn ladder(&self, spec: &CheckSpec) -> Vec<usize> {
        match &self.resolutions {
            Some(r) if !r.is_empty() => r.clone(),
            _ => spec.default_resolutions.to_vec(),
        }
    }

    /// Intersects a check's supported corpus ids with the override.
    pub(crate) fn corpus_pick(
        &self,
        check: &str,
        supported: &[&'static str],
    ) -> Result<Vec<&'static str>, CheckError> {
        match &self.corpus {
            None => Ok(supported.to_vec()),
            Some(wanted) => {
                let picked: Vec<&'static str> = supported
                    .iter()
                    .copied()
                    .filter(|id| wanted.iter().any(|w| w == id))
                    .collect();
                if picked.is_empty() {
                    Err(CheckError::Config(format!(
                        "corpus override leaves no usable function for {check}; it supports {supported:?}"
                    )))
                } else {
                    Ok(picked)
                }
            }
        }
    }
}

/// Runs one check by id.
pub fn run_check(id: &str, cfg: &RunConfig) -> Result<CheckReport, CheckError> {
    let spec = find(id).ok_or_else(|| CheckError::UnknownCheck(id.to_string()))?;
    let start = Instant::now();
    let mut report = match spec.id {
        "DY-NEST" => lattice::dy_nest(spec, cfg)?,
        "DY-THIRD" => lattice::dy_third(spec, cfg)?,
        "DY-LEVEL" => lattice::dy_level(spec, cfg)?,
        "SP-DOM" => sparse_sums::sp_dom(spec, cfg)?,
        "PD-CMP" => sparse_sums::pd_cmp(spec, cfg)?,
        "DIV-EX" => sparse_sums::div_ex(spec, cfg)?,
        "ID-MAX" => maximal::id_max(spec, cfg)?,
        "ID-LOR" => local_inequalities::id_lor(spec, cfg)?,
        "PS-CLS" => local_inequalities::ps_cls(spec, cfg)?,
        "PS-LOR" => local_inequalities::ps_lor(spec, cfg)?,
        "PS-TRU" => local_inequalities::ps_tru(spec, cfg)?,
        "HL-ORL" => local_inequalities::hl_orl(spec, cfg)?,
        "HL-LOR" => local_inequalities::hl_lor(spec, cfg)?,
        "PW-SOB" => singular::pw_sob(spec, cfg)?,
        "CH-SOB" => singular::ch_sob(spec, cfg)?,
        "PW-CRIT" => singular::pw_crit(spec, cfg)?,
        "PW-SUB" => singular::pw_sub(spec, cfg)?,
        "PW-END" => singular::pw_end(spec, cfg)?,
        "HS-DOM" => singular::hs_dom(spec, cfg)?,
        "RZ-COMP" => singular::rz_comp(spec, cfg)?,
        "PW-MAXSHARP" => maximal::pw_maxsharp(spec, cfg)?,
        "PW-MAXTRIO" => maximal::pw_maxtrio(spec, cfg)?,
        "MX-NAT" => maximal::mx_nat(spec, cfg)?,
        "NEG-MAX" => maximal::neg_max(spec, cfg)?,
        "PW-SPH" => maximal::pw_sph(spec, cfg)?,
        "SPH-SOB" => maximal::sph_sob(spec, cfg)?,
        "W-INT" => weighted::w_int(spec, cfg)?,
        "W-WIN" => weighted::w_win(spec, cfg)?,
        "W-RSC" => weighted::w_rsc(spec, cfg)?,
        "W-EQV" => weighted::w_eqv(spec, cfg)?,
        "W-END1" => weighted::w_end1(spec, cfg)?,
        "W-CMP" => weighted::w_cmp(spec, cfg)?,
        "W-POW1" => weighted::w_pow1(spec, cfg)?,
        "W-POW2" => weighted::w_pow2(spec, cfg)?,
        other => return Err(CheckError::UnknownCheck(other.to_string())),
    };
    report.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// Runs a list of checks in registry order.
pub fn run_many(ids: &[String], cfg: &RunConfig) -> Result<Vec<CheckReport>, CheckError> {
    let mut reports = Vec::new();
    for spec in REGISTRY {
        if ids.iter().any(|w| w == spec.id) {
            reports.push(run_check(spec.id, cfg)?);
        }
    }
    for id in ids {
        if find(id).is_none() {
            return Err(CheckError::UnknownCheck(id.clone()));
        }
    }
    Ok(reports)
}

/// True when every verdict matches its registered expectation.
pub fn all_as_expected(reports: &[CheckReport]) -> bool {
    reports.iter().all(CheckReport::as_expected)
}

/// Serializes reports as pretty JSON with a trailing newline. The field
/// order is fixed by the struct layout and the parameter map is sorted, so
/// identical runs produce identical bytes.
pub fn reports_json(reports: &[CheckReport]) -> String {
    let mut text = serde_json::to_string_pretty(reports).expect("report serialization");
    text.push('\n');
    text
}

/// Flat CSV export: one line per resolution rung.
pub fn reports_csv(reports: &[CheckReport]) -> String {
    let mut out = String::from("check_id,res,constant,error_bound,verdict,expected,runtime_ms\n");
    for r in reports {
        for row in &r.per_resolution {
            let bound = row
                .error_bound
                .map(|b| format!("{b:.9e}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.9e},{},{},{},{}\n",
                r.check_id, row.res, row.constant, bound, r.verdict, r.expected, r.runtime_ms
            ));
        }
    }
    out
}

// Shared helpers used by the check implementations.

/// Box centered at the origin, widened by half a cell so that sample points
/// land on the dyadic lattice and one sample sits exactly at the origin.
pub(crate) fn centered_spec(n: usize, half: f64, res: usize) -> Result<BoxSpec, CheckError> {
    let side = 2.0 * half;
    let h = side / res as f64;
    let lo = -half - 0.5 * h;
    let lower = if n == 3 {
        [lo, lo, lo]
    } else {
        [lo, lo, 0.0]
    };
    Ok(BoxSpec::new(n, lower, side)?)
}

/// Samples a corpus entry on the centered box.
pub(crate) fn corpus_grid(
    id: &str,
    params: &[(&str, f64)],
    n: usize,
    half: f64,
    res: usize,
) -> Result<GridFunction, CheckError> {
    let mut cp = CorpusParams::default();
    for (name, value) in params {
        cp = cp.set(name, *value);
    }
    Ok(sample(id, &cp, centered_spec(n, half, res)?, res)?)
}

/// Evaluation set with roughly `target` points per side in dimension two
/// and `target/4` in dimension three, always at least stride one.
pub(crate) fn thinned_eval(grid: &GridFunction, target: usize) -> EvalSet {
    let res = grid.resolution();
    let per_side = if grid.n() == 3 {
        (target / 4).max(4)
    } else {
        target.max(4)
    };
    let stride = (res / per_side).max(1);
    EvalSet::strided(grid, stride)
}

/// Largest ratio `lhs/rhs` over points where the right side is above a
/// relative floor; returns the ratio and the index attaining it.
pub(crate) struct RatioStat {
    pub sup: f64,
    pub index: usize,
    pub counted: usize,
}

pub(crate) fn sup_ratio(lhs: &[f64], rhs: &[f64], floor_frac: f64) -> RatioStat {
    let peak = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = peak * floor_frac;
    let mut sup = 0.0;
    let mut index = 0;
    let mut counted = 0;
    for (i, (&a, &b)) in lhs.iter().zip(rhs).enumerate() {
        if b.abs() > floor && b.abs() > 0.0 {
            counted += 1;
            let r = a.abs() / b.abs();
            if r > sup {
                sup = r;
                index = i;
            }
        }
    }
    RatioStat {
        sup,
        index,
        counted,
    }
}

/// Stability rule for empirical ladders: every constant is finite and each
/// successive constant is at most `1 + tol` times its predecessor.
pub(crate) fn stable_ladder(constants: &[f64], tol: f64) -> bool {
    if constants.iter().any(|c| !c.is_finite()) {
        return false;
    }
    constants
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + tol) + 1e-300)
}

/// Verdict for an empirical check from per-combination ladders: pass when
/// every ladder is stable at ten percent.
pub(crate) fn empirical_verdict(ladders: &[Vec<f64>]) -> Verdict {
    if ladders
        .iter()
        .all(|ladder| stable_ladder(ladder, 0.10))
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Fractional maximal function with L^s cube averages, evaluated through
/// per-level mass tables. Matches `potentials::maximal_at` with
/// `CubeAverage::Power(s)` exactly: same shifted cubes, same level range
/// from cell scale to one level above the box, and the same
/// extension-by-zero average `mass/|Q|`.
pub(crate) fn fast_power_maximal(
    grid: &GridFunction,
    s: f64,
    alpha: f64,
    eval: &EvalSet,
) -> Vec<f64> {
    let n = grid.n();
    let powered: Vec<f64> = if (s - 1.0).abs() < 1e-15 {
        grid.values().iter().map(|v| v.abs()).collect()
    } else {
        grid.values().iter().map(|v| v.abs().powf(s)).collect()
    };
    let aggs: Vec<CubeAggregates> = shifts(n)
        .map(|t| CubeAggregates::build(grid, &powered, t))
        .collect();
    let finest = grid.h().log2().round() as i32;
    let coarsest = grid.spec().side.log2().round() as i32 + 1;
    let inv_s = 1.0 / s;
    let plain = (s - 1.0).abs() < 1e-15;
    eval.points
        .par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for agg in &aggs {
                for level in finest..=coarsest {
                    let cube = locate(n, x, level, agg.shift);
                    let mass = agg.mass(&cube);
                    if mass > 0.0 {
                        let side = cube.side_f64();
                        let avg = mass / side.powi(n as i32);
                        let v = if plain {
                            side.powf(alpha) * avg
                        } else {
                            side.powf(alpha) * avg.powf(inv_s)
                        };
                        if v > best {
                            best = v;
                        }
                    }
                }
            }
            best
        })
        .collect()
}

/// `(sum |v|^p cell)^(1/p)` over a value slice with constant cell measure.
pub(crate) fn subset_lp(values: &[f64], p: f64, cell: f64) -> f64 {
    let terms: Vec<f64> = values.iter().map(|v| v.abs().powf(p) * cell).collect();
    pairwise_sum(&terms).powf(1.0 / p)
}

/// Hypothesis guard: returns a check error naming the violated assumption.
pub(crate) fn require(
    cond: bool,
    check: &str,
    hypothesis: &str,
) -> Result<(), CheckError> {
    if cond {
        Ok(())
    } else {
        Err(CheckError::Hypothesis {
            check: check.to_string(),
            message: hypothesis.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{maximal_on, CubeAverage, MaximalOptions};
    use std::collections::BTreeSet;

    #[test]
    fn registry_covers_every_family_with_unique_ids_and_anchors() {
        let mut ids = BTreeSet::new();
        let mut anchors = BTreeSet::new();
        let mut families = BTreeSet::new();
        for spec in registry() {
            assert!(ids.insert(spec.id), "duplicate id {}", spec.id);
            assert!(anchors.insert(spec.anchor), "duplicate anchor for {}", spec.id);
            assert!(!spec.anchor.is_empty());
            assert!(!spec.default_resolutions.is_empty());
            assert!(
                FAMILIES.contains(&spec.family),
                "unknown family {} on {}",
                spec.family,
                spec.id
            );
            families.insert(spec.family);
            let expected_fail = spec.kind == ConstantKind::Falsified;
            assert_eq!(spec.expected == Verdict::Fail, expected_fail);
        }
        let canonical: BTreeSet<&str> = FAMILIES.iter().copied().collect();
        assert_eq!(families, canonical, "every family must be exercised");
        assert_eq!(registry().len(), 34);
    }

    #[test]
    fn report_serialization_is_deterministic_and_csv_is_flat() {
        let spec = find("DY-THIRD").unwrap();
        let mut report = CheckReport::new(spec);
        report.param("cubes", 100);
        report.param("alpha", 0.5);
        report.per_resolution.push(
            ResolutionRow::new(100, 5.5)
                .with_bound(0.0)
                .at(&[0.25, -0.5, 0.0], 2)
                .noted("largest blowup ratio"),
        );
        report.verdict = Verdict::Pass;
        let a = reports_json(std::slice::from_ref(&report));
        let b = reports_json(std::slice::from_ref(&report));
        assert_eq!(a, b);
        assert!(a.contains("\"check_id\": \"DY-THIRD\""));
        assert!(a.contains("\"lhs_sup_location\""));
        assert!(a.ends_with('\n'));
        let csv = reports_csv(std::slice::from_ref(&report));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "check_id,res,constant,error_bound,verdict,expected,runtime_ms"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("DY-THIRD,100,5.5"));
        assert!(row.contains(",pass,pass,"));
    }

    #[test]
    fn fast_power_maximal_matches_the_reference_operator() {
        for &(s, alpha) in &[(1.0, 0.5), (1.5, 0.5), (2.0, 1.2)] {
            let f = corpus_grid("oscillating_bump", &[], 2, 4.0, 32).unwrap();
            let eval = thinned_eval(&f, 16);
            let fast = fast_power_maximal(&f, s, alpha, &eval);
            let opts = MaximalOptions {
                alpha,
                average: CubeAverage::Power(s),
                shifts: shifts(2).collect(),
            };
            let slow = maximal_on(&f, &eval, &opts);
            for (a, b) in fast.iter().zip(&slow) {
                assert!(
                    (a - b).abs() <= 1e-10 * (1.0 + b.abs()),
                    "fast {a} vs reference {b}"
                );
            }
        }
    }

    #[test]
    fn ladder_stability_and_ratio_helpers_behave() {
        assert!(stable_ladder(&[2.0, 2.1, 2.0], 0.10));
        assert!(!stable_ladder(&[2.0, 2.5], 0.10));
        assert!(!stable_ladder(&[2.0, f64::INFINITY], 0.10));
        assert_eq!(empirical_verdict(&[vec![1.0, 1.05]]), Verdict::Pass);
        assert_eq!(empirical_verdict(&[vec![1.0, 1.2]]), Verdict::Fail);
        let stat = sup_ratio(&[1.0, 4.0, 0.1], &[1.0, 2.0, 1e-9], 1e-6);
        assert_eq!(stat.index, 1);
        assert!((stat.sup - 2.0).abs() < 1e-15);
        assert_eq!(stat.counted, 2);
    }

    #[test]
    fn config_ladder_override_and_corpus_intersection_apply() {
        let spec = find("PW-SOB").unwrap();
        let cfg = RunConfig::default();
        assert_eq!(cfg.ladder(spec), vec![128, 256]);
        let over = RunConfig {
            resolutions: Some(vec![64]),
            corpus: Some(vec!["bump".into()]),
            seed: 3,
        };
        assert_eq!(over.ladder(spec), vec![64]);
        let picked = over.corpus_pick("PW-SOB", &["bump", "two_bumps"]).unwrap();
        assert_eq!(picked, vec!["bump"]);
        assert!(over.corpus_pick("PW-SOB", &["two_bumps"]).is_err());
        assert!(matches!(
            run_check("NO-SUCH", &cfg),
            Err(CheckError::UnknownCheck(_))
        ));
    }
}
