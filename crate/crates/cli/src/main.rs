//! Command line front end: spectra, curve tracing, eigenvalue derivatives and
//! regularity reports for signed p-Schrödinger operators on graphs.
//!
//! Exit codes: 0 success, 2 malformed input, 3 precondition failure
//! (for example a non-tree graph handed to the secular solver), 4 numerical
//! failure (no convergence, residual too large).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pcut_core::continuation::{
    find_critical_points, solve_eigenpair_near, trace, TRACE_LAMBDA_GRID,
};
use pcut_core::error::Error;
use pcut_core::graph::{load_graph, CutParams, CutSpec, SignedGraph, VertexFunction};
use pcut_core::newton::multistart_spectrum;
use pcut_core::operator::Eigenpair;
use pcut_core::perturbation::{hf_eigenvalue_derivative, regularity};
use pcut_core::surgery::build_cut_operator;
use pcut_core::tree::{default_lambda_range, tree_spectrum};

#[derive(Parser)]
#[command(name = "pcut", version, about = "Spectra of signed p-Schrödinger operators on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum Method {
    /// Secular-function scan; requires the (cut) graph to be a tree.
    Tree,
    /// Multistart projected Newton from random starts.
    Newton,
}

#[derive(Subcommand)]
enum Command {
    /// Compute eigenpairs and print them as JSON.
    Spectrum {
        /// Graph document (JSON).
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "newton")]
        method: Method,
        /// Number of random starts for the newton method.
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 1)]
        rng_seed: u64,
        /// Lower end of the eigenvalue window (tree scan / newton filter).
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        /// Upper end of the eigenvalue window.
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: Option<f64>,
        /// Apply the document's cut at this parameter value before solving.
        /// One value per cut edge, or a single value for all of them.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        alpha: Option<Vec<f64>>,
    },
    /// Trace the eigenvalue curves of the cut operator over a parameter range
    /// and refine their critical points.
    Trace {
        /// Graph document (JSON) with a single cut edge.
        graph: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        alpha_max: f64,
        /// Grid resolution over [alpha-min, alpha-max].
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Curve samples as CSV (alpha,branch,lambda,slope).
        #[arg(long)]
        out_csv: PathBuf,
        /// Critical points and crossing flags as JSON.
        #[arg(long)]
        out_json: PathBuf,
    },
    /// Hellmann-Feynman eigenvalue derivative at one point of a branch, with
    /// a finite-difference cross-check.
    Hf {
        /// Graph document (JSON) with a cut.
        graph: PathBuf,
        /// Cut parameter value (applied to every cut edge).
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        /// Eigenvalue guess locating the branch.
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        /// Which cut edge to differentiate against.
        #[arg(long, default_value_t = 0)]
        edge: usize,
    },
    /// Regularity report (Hessian kernel dimension) for a given eigenpair.
    Regularity {
        /// Graph document (JSON).
        graph: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        /// Eigenvector, comma separated, one entry per vertex.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        f: Vec<f64>,
        /// Largest residual accepted before refusing to classify.
        #[arg(long, default_value_t = 1e-6)]
        residual_tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Parse(_) | Error::Invalid(_) | Error::Io(_) | Error::Json(_) => 2,
                Error::Precondition(_) => 3,
                Error::Numerical(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> pcut_core::error::Result<()> {
    match command {
        Command::Spectrum { graph, method, seeds, rng_seed, lambda_min, lambda_max, alpha } => {
            let (g, cut) = read_graph(&graph)?;
            let g = match alpha {
                None => g,
                Some(values) => cut_graph(&g, cut.as_ref(), &values)?,
            };
            let pairs = match method {
                Method::Tree => {
                    let (dlo, dhi) = default_lambda_range(&g);
                    let range = (lambda_min.unwrap_or(dlo), lambda_max.unwrap_or(dhi));
                    tree_spectrum(&g, range, TRACE_LAMBDA_GRID)?
                }
                Method::Newton => {
                    let mut pairs = multistart_spectrum(&g, seeds, rng_seed);
                    if let Some(lo) = lambda_min {
                        pairs.retain(|p| p.lambda >= lo);
                    }
                    if let Some(hi) = lambda_max {
                        pairs.retain(|p| p.lambda <= hi);
                    }
                    pairs
                }
            };
            let rows: Vec<serde_json::Value> = pairs.iter().map(eigenpair_json).collect();
            println!("{}", serde_json::to_string_pretty(&rows)?);
        }
        Command::Trace { graph, alpha_min, alpha_max, points, out_csv, out_json } => {
            let (g, cut) = read_graph(&graph)?;
            let cut = require_cut(cut)?;
            let grid = alpha_grid(alpha_min, alpha_max, points)?;
            let curves = trace(&g, &cut, &grid, None)?;
            let critical = find_critical_points(&curves, &g, &cut);
            let csv = BufWriter::new(File::create(&out_csv)?);
            let json = BufWriter::new(File::create(&out_json)?);
            pcut_core::continuation::curve_report(&g, &cut, &curves, &critical, csv, json)?;

            let n_samples: usize = curves.iter().map(|c| c.samples.len()).sum();
            println!(
                "traced {} branches ({} samples) over alpha in [{}, {}]",
                curves.len(),
                n_samples,
                alpha_min,
                alpha_max
            );
            println!("curves: {}", out_csv.display());
            println!("critical points: {}", out_json.display());
            if critical.is_empty() {
                println!("no critical points in range");
            } else {
                println!("{:>14} {:>14} {:>9} {:>8} {:>10}", "lambda*", "alpha*", "regular", "sigma", "certified");
                for p in &critical {
                    let sigma = match &p.sigma {
                        Ok(signs) => signs
                            .iter()
                            .map(|s| if *s > 0.0 { "+1" } else { "-1" })
                            .collect::<Vec<_>>()
                            .join(","),
                        Err(_) => "?".to_string(),
                    };
                    println!(
                        "{:>14.8} {:>14.8} {:>9} {:>8} {:>10}",
                        p.lambda_star,
                        p.alpha_star,
                        if p.regularity.is_regular { "yes" } else { "no" },
                        sigma,
                        if p.certified { "yes" } else { "no" },
                    );
                }
            }
        }
        Command::Hf { graph, alpha, lambda, edge } => {
            let (g, cut) = read_graph(&graph)?;
            let cut = require_cut(cut)?;
            if edge >= cut.len() {
                return Err(Error::Invalid(format!(
                    "edge index {edge} out of range for a cut of {} edges",
                    cut.len()
                )));
            }
            let params = CutParams::new(vec![alpha; cut.len()])?;
            let pair = solve_eigenpair_near(&g, &cut, &params, lambda, None)?;
            let slope = hf_eigenvalue_derivative(&g, &cut, &params, &pair, edge)?;

            let h = 1e-5;
            let fd = {
                let shifted = |da: f64| -> pcut_core::error::Result<f64> {
                    let mut a = params.alpha().to_vec();
                    a[edge] += da;
                    let p = CutParams::new(a)?;
                    Ok(solve_eigenpair_near(&g, &cut, &p, pair.lambda, Some(&pair.f))?.lambda)
                };
                (shifted(h)? - shifted(-h)?) / (2.0 * h)
            };
            let doc = serde_json::json!({
                "lambda": pair.lambda,
                "dlambda_dalpha": slope,
                "fd_check": fd,
                "f": pair.f.iter().copied().collect::<Vec<f64>>(),
                "residual": pair.residual,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Regularity { graph, lambda, f, residual_tol } => {
            let (g, _) = read_graph(&graph)?;
            if f.len() != g.n_vertices() {
                return Err(Error::Invalid(format!(
                    "eigenvector has {} entries for a graph on {} vertices",
                    f.len(),
                    g.n_vertices()
                )));
            }
            let pair = Eigenpair::new(&g, lambda, &VertexFunction::from_vec(f))?;
            if !(pair.residual <= residual_tol) {
                return Err(Error::Numerical(format!(
                    "residual {:.3e} exceeds {residual_tol:.3e}: not an eigenpair",
                    pair.residual
                )));
            }
            let report = regularity(&g, &pair, None)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn read_graph(path: &PathBuf) -> pcut_core::error::Result<(SignedGraph, Option<CutSpec>)> {
    let file = File::open(path)?;
    load_graph(BufReader::new(file))
}

fn require_cut(cut: Option<CutSpec>) -> pcut_core::error::Result<CutSpec> {
    cut.ok_or_else(|| Error::Invalid("graph document declares no cut".into()))
}

fn cut_graph(
    g: &SignedGraph,
    cut: Option<&CutSpec>,
    alpha: &[f64],
) -> pcut_core::error::Result<SignedGraph> {
    let cut = cut.ok_or_else(|| Error::Invalid("--alpha given but the graph has no cut".into()))?;
    let values = if alpha.len() == 1 {
        vec![alpha[0]; cut.len()]
    } else {
        alpha.to_vec()
    };
    let op = build_cut_operator(g, cut, &CutParams::new(values)?)?;
    Ok(op.graph)
}

/// Linear grid over the requested range, skipping the forbidden parameter
/// values 0 and 1 and a small neighborhood of 0 where the cut potential
/// blows up.
fn alpha_grid(lo: f64, hi: f64, points: usize) -> pcut_core::error::Result<Vec<f64>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Invalid(format!("bad alpha range [{lo}, {hi}]")));
    }
    if points < 2 {
        return Err(Error::Invalid("need at least 2 grid points".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|k| lo + step * k as f64)
        .filter(|a| a.abs() > 1e-2 && (a - 1.0).abs() > 1e-3)
        .collect();
    if grid.len() < 2 {
        return Err(Error::Invalid(
            "alpha range leaves fewer than 2 usable grid points".into(),
        ));
    }
    Ok(grid)
}

fn eigenpair_json(pair: &Eigenpair) -> serde_json::Value {
    serde_json::json!({
        "lambda": pair.lambda,
        "f": pair.f.iter().copied().collect::<Vec<f64>>(),
        "residual": pair.residual,
    })
}
