//! Command-line front end: run registry checks, build sparse families,
//! evaluate operators on corpus functions, and list the symbol catalog.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fraclab::checks::{self, RunConfig};
use fraclab::dyadic::shifts;
use fraclab::grid::corpus::{self, CorpusParams};
use fraclab::grid::{BoxSpec, EvalSet, GridFunction};
use fraclab::potentials::{maximal_on, CubeAverage, MaximalOptions, RieszOperator};
use fraclab::rough::{rough_singular, spherical_maximal, AnnularScheme, Cancellation};
use fraclab::sparse::{build_sparse, domination_report};
use fraclab::sphere::{self, SphereMesh, SymbolParams};

#[derive(Parser)]
#[command(
    name = "fraclab",
    version,
    about = "Numerical laboratory for fractional operators and weighted inequalities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List every registered check with its statement and defaults.
    ListChecks,
    /// Run one check by id, or all of them.
    Run {
        /// Check id, or "all".
        id: String,
        /// Comma-separated resolution override applied to every check run.
        #[arg(long, value_delimiter = ',')]
        res: Option<Vec<usize>>,
        /// Write the JSON report to this path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Write the flat CSV export to this path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// TOML file overriding resolutions, corpus, and seed.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build sparse cube families for a corpus function and print their
    /// certificates and the tree-to-sparse domination report.
    BuildSparse {
        /// Corpus function id.
        #[arg(default_value = "bump")]
        f: String,
        #[arg(long, default_value_t = 128)]
        res: usize,
        /// Inner exponent of the cube averages.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Order of the sparse potential in the domination report.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Evaluate an operator on a corpus function and print summary
    /// statistics over a thinned evaluation set.
    Eval {
        /// One of: riesz, maximal, sparse, rough, spherical.
        operator: String,
        /// Corpus function id.
        f: String,
        #[arg(long, default_value_t = 128)]
        res: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Inner exponent for maximal and sparse cube averages.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Radius power for the spherical maximal operator.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Symbol id for the rough singular integral.
        #[arg(long, default_value = "first_harmonic")]
        omega: String,
    },
    /// List the sphere symbol catalog with basic norms.
    ListSymbols,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::ListChecks => {
            list_checks();
            Ok(true)
        }
        Command::Run {
            id,
            res,
            json,
            csv,
            config,
        } => run(&id, res, json, csv, config),
        Command::BuildSparse { f, res, s, alpha } => build_sparse_cmd(&f, res, s, alpha),
        Command::Eval {
            operator,
            f,
            res,
            alpha,
            s,
            beta,
            omega,
        } => eval_cmd(&operator, &f, res, alpha, s, beta, &omega),
        Command::ListSymbols => list_symbols(),
    }
}

fn list_checks() {
    println!(
        "{:<12} {:<10} {:<8} {:<24} {}",
        "id", "kind", "expected", "resolutions", "statement"
    );
    for spec in checks::registry() {
        println!(
            "{:<12} {:<10} {:<8} {:<24} {}",
            spec.id,
            format!("{:?}", spec.kind).to_lowercase(),
            spec.expected.to_string(),
            format!("{:?}", spec.default_resolutions),
            spec.anchor
        );
    }
}

fn run(
    id: &str,
    res: Option<Vec<usize>>,
    json: Option<PathBuf>,
    csv: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Result<bool> {
    let mut cfg = match config {
        Some(path) => RunConfig::from_file(&path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if res.is_some() {
        cfg.resolutions = res;
    }
    let ids: Vec<String> = if id == "all" {
        checks::registry().iter().map(|c| c.id.to_string()).collect()
    } else {
        vec![id.to_string()]
    };
    let reports = checks::run_many(&ids, &cfg)?;
    let mut all_expected = true;
    for report in &reports {
        let mark = if report.verdict == report.expected {
            "ok"
        } else {
            all_expected = false;
            "UNEXPECTED"
        };
        let constants: Vec<String> = report
            .per_resolution
            .iter()
            .map(|r| format!("{}:{:.6}", r.res, r.constant))
            .collect();
        println!(
            "{:<12} {:<7} expected {:<7} {:<10} {:>7} ms  [{}]",
            report.check_id,
            report.verdict.to_string(),
            report.expected.to_string(),
            mark,
            report.runtime_ms,
            constants.join(", ")
        );
    }
    if let Some(path) = json {
        std::fs::write(&path, checks::reports_json(&reports))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = csv {
        std::fs::write(&path, checks::reports_csv(&reports))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(all_expected)
}

fn corpus_grid(id: &str, res: usize) -> Result<GridFunction> {
    let spec = BoxSpec::symmetric(2, 8.0)?;
    let g = corpus::sample(id, &CorpusParams::new(), spec, res)?;
    Ok(g)
}

fn build_sparse_cmd(f: &str, res: usize, s: f64, alpha: f64) -> Result<bool> {
    let g = corpus_grid(f, res)?;
    let eval = EvalSet::strided(&g, (res / 16).max(1));
    let mut ok = true;
    for shift in shifts(2) {
        let family = build_sparse(&g, s, shift)?;
        let cert = family.certify()?;
        let dom = domination_report(&family, alpha, &eval)?;
        println!(
            "shift {shift}: {} cubes, certificate {}, worst |Q|/|E_Q| {:.4}, \
             domination constant {:.4}, worst observed ratio {:.4} over {} points",
            family.len(),
            if cert.all_ok() { "ok" } else { "FAILED" },
            cert.worst_volume_ratio,
            dom.constant,
            dom.worst_ratio,
            eval.len() - dom.trivial_points,
        );
        if !cert.all_ok() || !(dom.worst_ratio <= dom.constant) {
            ok = false;
        }
    }
    Ok(ok)
}

fn eval_cmd(
    operator: &str,
    f: &str,
    res: usize,
    alpha: f64,
    s: f64,
    beta: f64,
    omega: &str,
) -> Result<bool> {
    let g = corpus_grid(f, res)?;
    let eval = EvalSet::strided(&g, (res / 16).max(1));
    let values: Vec<f64> = match operator {
        "riesz" => {
            let out = RieszOperator::new(&g, alpha, true)?.apply(&g)?;
            eval.flat.iter().map(|&i| out.values()[i]).collect()
        }
        "maximal" => {
            let opts = MaximalOptions {
                alpha,
                average: CubeAverage::Power(s),
                shifts: shifts(2).collect(),
            };
            maximal_on(&g, &eval, &opts)
        }
        "sparse" => {
            let mut best = vec![0.0f64; eval.len()];
            for shift in shifts(2) {
                let family = build_sparse(&g, s, shift)?;
                for (b, v) in best.iter_mut().zip(family.apply(alpha, &eval)?) {
                    *b = b.max(v);
                }
            }
            best
        }
        "rough" => {
            let mesh = Arc::new(SphereMesh::circle(256)?);
            let om = sphere::symbol(omega, SymbolParams::default(), mesh.clone())?;
            let scheme = AnnularScheme::new(&g, alpha, mesh, Cancellation::BallAverage)?;
            let out = rough_singular(&g, &om, &scheme, &eval)?;
            println!(
                "inner radius {:.4}, truncation bound {:.3e}",
                out.inner_radius, out.inner_bound
            );
            out.values
        }
        "spherical" => {
            let mesh = Arc::new(SphereMesh::circle(256)?);
            let scheme = AnnularScheme::new(&g, alpha.max(0.1), mesh, Cancellation::BallAverage)?;
            spherical_maximal(&g, beta, &scheme, &eval)?.values
        }
        other => bail!("unknown operator {other:?}; use riesz, maximal, sparse, rough, or spherical"),
    };
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    let mut sum = 0.0;
    let mut at = [0.0f64; 3];
    for (v, x) in values.iter().zip(&eval.points) {
        if *v > sup {
            sup = *v;
            at = *x;
        }
        inf = inf.min(*v);
        sum += v;
    }
    println!(
        "{operator} of {f} at res {res} over {} points: sup {:.6} at ({:.3}, {:.3}), \
         inf {:.6}, mean {:.6}",
        values.len(),
        sup,
        at[0],
        at[1],
        inf,
        sum / values.len() as f64
    );
    Ok(true)
}

fn list_symbols() -> Result<bool> {
    let mesh = Arc::new(SphereMesh::standard(2)?);
    println!(
        "{:<20} {:<9} {:>10} {:>10}  {}",
        "id", "meanzero", "l1", "sup", "description"
    );
    for entry in sphere::catalog() {
        let sym = sphere::symbol(entry.id, SymbolParams::default(), mesh.clone())?;
        println!(
            "{:<20} {:<9} {:>10.4} {:>10.4}  {}",
            entry.id,
            entry.mean_zero,
            sym.norm_l1(),
            sym.norm_sup(),
            entry.description
        );
    }
    Ok(true)
}
