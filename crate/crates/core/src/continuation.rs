//! Eigenvalue-curve continuation in the cut parameter.
//!
//! For a single cut edge, the cut operator's eigenvalues form curves
//! `lambda(alpha)`. This module traces them over an `alpha` grid with the
//! tree solver, matches samples into branches by slope-predicted proximity,
//! locates critical points of each branch as sign changes of the analytic
//! eigenvalue derivative, and certifies every critical value as an eigenvalue
//! of the original graph with signs extended over the cut edge.

use crate::error::{Error, Result};
use crate::graph::{CutParams, CutSpec, SignedGraph, VertexFunction};
use crate::newton::newton_solve;
use crate::operator::{residual, Eigenpair};
use crate::perturbation::{hf_eigenvalue_derivative, regularity, RegularityReport};
use crate::surgery::{build_cut_operator, extend_sigma};
use crate::tree::{default_lambda_range, tree_spectrum, RESIDUAL_ACCEPT};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;

/// Lambda samples per alpha when scanning the tree spectrum.
pub const TRACE_LAMBDA_GRID: usize = 2001;

/// Rank tolerance used when classifying refined critical points. Eigenvectors
/// approach non-regular points with a cube-root rate in `alpha`, so after
/// refining `alpha` to ~1e-11 the kernel singular values still sit around
/// 1e-4 of the largest; the default 1e-8 threshold would misread every
/// non-regular point as regular.
pub const CRITICAL_RANK_TOL: f64 = 1e-3;

/// Full-graph residual bound for certifying a critical value.
pub const CERTIFY_TOL: f64 = 1e-8;

/// One traced point of an eigenvalue curve.
#[derive(Debug, Clone)]
pub struct CurveSample {
    pub alpha: f64,
    pub lambda: f64,
    /// Unit eigenvector, sign-aligned with the previous sample of the branch.
    pub f: VertexFunction,
    /// Analytic derivative of lambda in alpha at this sample.
    pub slope: f64,
    pub residual: f64,
}

/// A matched eigenvalue branch over the alpha grid.
#[derive(Debug, Clone)]
pub struct EigCurve {
    pub branch_id: usize,
    pub samples: Vec<CurveSample>,
}

/// A refined critical point of one branch, with its certification outcome.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub branch_id: usize,
    pub alpha_star: f64,
    pub lambda_star: f64,
    pub f_star: VertexFunction,
    /// Eigenvalue slope at the refined point; should be near zero.
    pub grad: f64,
    /// Regularity of the cut-operator eigenpair at the refined point,
    /// classified at [`CRITICAL_RANK_TOL`].
    pub regularity: RegularityReport,
    /// Extended sign per cut edge, or a note on why extension failed.
    pub sigma: std::result::Result<Vec<f64>, String>,
    pub certified: bool,
    /// Residual of `(lambda_star, f_star)` on the sign-extended original
    /// graph; NaN when no extension was found.
    pub residual: f64,
}

/// Default parameter grid: 200 log-spaced magnitudes per sign between 1e-2
/// and 10^1.5, skipping a 1e-3 neighborhood of 1, sorted ascending.
pub fn default_alpha_grid() -> Vec<f64> {
    let n = 200;
    let (lo, hi) = (-2.0, 1.5);
    let mags: Vec<f64> = (0..n)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect();
    let mut grid: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    grid.extend(mags.iter().copied().filter(|m| (m - 1.0).abs() > 1e-3));
    grid
}

fn validate_alpha_grid(alpha_grid: &[f64]) -> Result<()> {
    if alpha_grid.is_empty() {
        return Err(Error::Invalid("alpha grid is empty".into()));
    }
    for w in alpha_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Invalid("alpha grid must be strictly increasing".into()));
        }
    }
    if alpha_grid.iter().any(|&a| a == 0.0 || a == 1.0 || !a.is_finite()) {
        return Err(Error::Invalid("alpha grid must avoid 0 and 1".into()));
    }
    Ok(())
}

struct OpenBranch {
    curve_index: usize,
    last_step: usize,
    alpha: f64,
    lambda: f64,
    slope: f64,
    f: VertexFunction,
}

/// Traces all detectable eigenvalue curves of the cut operator over
/// `alpha_grid`. `lambda_range = None` recomputes the scan window from the
/// cut operator at each alpha, which tracks the potential as it grows.
pub fn trace(
    g: &SignedGraph,
    cut: &CutSpec,
    alpha_grid: &[f64],
    lambda_range: Option<(f64, f64)>,
) -> Result<Vec<EigCurve>> {
    if cut.len() != 1 {
        return Err(Error::Invalid(
            "curve tracing handles exactly one cut edge".into(),
        ));
    }
    validate_alpha_grid(alpha_grid)?;

    let mut curves: Vec<EigCurve> = Vec::new();
    let mut open: Vec<OpenBranch> = Vec::new();

    for (step, &alpha) in alpha_grid.iter().enumerate() {
        let params = CutParams::single(alpha)?;
        let op = build_cut_operator(g, cut, &params)?;
        let range = lambda_range.unwrap_or_else(|| default_lambda_range(&op.graph));
        let pairs = tree_spectrum(&op.graph, range, TRACE_LAMBDA_GRID)?;

        let mut candidates: Vec<CurveSample> = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let slope = hf_eigenvalue_derivative(g, cut, &params, &pair, 0)?;
            candidates.push(CurveSample {
                alpha,
                lambda: pair.lambda,
                f: pair.f,
                slope,
                residual: pair.residual,
            });
        }

        // a branch may bridge one missing sample; older ones are closed
        open.retain(|b| step - b.last_step <= 2);

        let mut proposals: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, branch) in open.iter().enumerate() {
            // curves are singular across alpha = 0; never bridge the gap
            if branch.alpha.signum() != alpha.signum() {
                continue;
            }
            let da = alpha - branch.alpha;
            let threshold = 10.0 * da * (branch.slope.abs() + 0.05 * (1.0 + branch.lambda.abs()));
            let predicted = branch.lambda + branch.slope * da;
            for (ci, cand) in candidates.iter().enumerate() {
                let dist = (cand.lambda - predicted).abs();
                if dist < threshold {
                    proposals.push((dist, bi, ci));
                }
            }
        }
        proposals.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let mut branch_taken = vec![false; open.len()];
        let mut cand_taken = vec![false; candidates.len()];
        let mut assignment: Vec<(usize, usize)> = Vec::new();
        for (_, bi, ci) in proposals {
            if !branch_taken[bi] && !cand_taken[ci] {
                branch_taken[bi] = true;
                cand_taken[ci] = true;
                assignment.push((bi, ci));
            }
        }

        let mut new_samples: Vec<(usize, CurveSample)> = Vec::new();
        for (bi, ci) in assignment {
            let branch = &open[bi];
            let mut sample = candidates[ci].clone();
            if sample.f.dot(&branch.f) < 0.0 {
                sample.f = -sample.f;
            }
            new_samples.push((bi, sample));
        }
        for (bi, sample) in new_samples {
            let branch = &mut open[bi];
            branch.last_step = step;
            branch.alpha = sample.alpha;
            branch.lambda = sample.lambda;
            branch.slope = sample.slope;
            branch.f = sample.f.clone();
            curves[branch.curve_index].samples.push(sample);
        }
        for (ci, cand) in candidates.into_iter().enumerate() {
            if cand_taken[ci] {
                continue;
            }
            let curve_index = curves.len();
            open.push(OpenBranch {
                curve_index,
                last_step: step,
                alpha: cand.alpha,
                lambda: cand.lambda,
                slope: cand.slope,
                f: cand.f.clone(),
            });
            curves.push(EigCurve { branch_id: curve_index, samples: vec![cand] });
        }
    }
    Ok(curves)
}

/// Solves for the cut-operator eigenpair closest to `lambda_hint` at the
/// given parameters: first a windowed secular scan, then Newton from the
/// warm-start vector and a few seeded starts. Fails when nothing converges
/// inside the window.
pub fn solve_eigenpair_near(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    lambda_hint: f64,
    f_hint: Option<&VertexFunction>,
) -> Result<Eigenpair> {
    let op = build_cut_operator(g, cut, params)?;
    let window = 0.02 * (1.0 + lambda_hint.abs());

    if op.graph.is_tree() {
        if let Ok(pairs) =
            tree_spectrum(&op.graph, (lambda_hint - window, lambda_hint + window), 201)
        {
            if let Some(best) = pairs.into_iter().min_by(|a, b| {
                (a.lambda - lambda_hint)
                    .abs()
                    .partial_cmp(&(b.lambda - lambda_hint).abs())
                    .unwrap()
            }) {
                return Ok(best);
            }
        }
    }

    let n = op.graph.n_vertices();
    let mut starts: Vec<VertexFunction> = Vec::new();
    if let Some(fh) = f_hint {
        starts.push(fh.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x501e);
    for _ in 0..8 {
        let raw = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        if let Ok(f0) = op.graph.normalize(&raw) {
            starts.push(f0);
        }
    }
    for f0 in &starts {
        if let Ok(pair) = newton_solve(&op.graph, lambda_hint, f0, 200, 1e-12) {
            if (pair.lambda - lambda_hint).abs() <= window && pair.residual < RESIDUAL_ACCEPT {
                return Ok(pair);
            }
        }
    }
    Err(Error::Numerical(format!(
        "no eigenpair within {window:.3e} of lambda = {lambda_hint} at alpha = {:?}",
        params.alpha()
    )))
}

/// Certification outcome: extended signs, the polished full-graph eigenpair
/// and its residual.
struct Certification {
    sigma: Vec<f64>,
    lambda: f64,
    f: VertexFunction,
    residual: f64,
}

/// Tries to realize `(lambda, f)` as an eigenpair of the original graph with
/// some sign on the cut edge. The sign suggested by the extension identity is
/// tried first; refined points near non-regular eigenpairs carry an O(1e-4)
/// eigenvector error (cube-root approach), so both signs are attempted and
/// the candidate is polished by Newton on the full signed graph before the
/// residual gate.
fn certify(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
) -> std::result::Result<Certification, String> {
    let (u, v) = cut.edges()[0];
    let mut sign_candidates: Vec<f64> = Vec::new();
    match extend_sigma(g, cut, params, pair) {
        Ok(signed) => {
            let (_, s) = signed.omega_sigma(u, v).expect("cut edge exists");
            sign_candidates.push(s);
        }
        Err(_) => sign_candidates.extend([1.0, -1.0]),
    }

    let mut best: Option<Certification> = None;
    let mut note = String::from("sign extension failed");
    for s in sign_candidates {
        let signed = match g.with_sigma_on(u, v, s) {
            Ok(signed) => signed,
            Err(e) => {
                note = e.to_string();
                continue;
            }
        };
        let polished = match newton_solve(&signed, pair.lambda, &pair.f, 200, 1e-12) {
            Ok(p) => p,
            Err(e) => {
                note = format!("polish with sigma {s} failed: {e}");
                continue;
            }
        };
        let drift_l = (polished.lambda - pair.lambda).abs();
        let drift_f = (&polished.f - &pair.f).amax().min((&polished.f + &pair.f).amax());
        if drift_l > 1e-3 * (1.0 + pair.lambda.abs()) || drift_f > 0.05 {
            note = format!("polish with sigma {s} drifted to lambda {}", polished.lambda);
            continue;
        }
        let r = residual(&signed, polished.lambda, &polished.f);
        let cand = Certification { sigma: vec![s], lambda: polished.lambda, f: polished.f, residual: r };
        if best.as_ref().map_or(true, |b| cand.residual < b.residual) {
            best = Some(cand);
        }
    }
    best.ok_or(note)
}

fn critical_point_from(
    g: &SignedGraph,
    cut: &CutSpec,
    branch_id: usize,
    alpha: f64,
    pair: &Eigenpair,
    slope: f64,
) -> Result<CriticalPoint> {
    let params = CutParams::single(alpha)?;
    let op = build_cut_operator(g, cut, &params)?;
    let report = regularity(&op.graph, pair, Some(CRITICAL_RANK_TOL))?;
    let (sigma, lambda_star, f_star, res, certified) =
        match certify(g, cut, &params, pair) {
            Ok(c) => {
                let ok = c.residual < CERTIFY_TOL;
                (Ok(c.sigma), c.lambda, c.f, c.residual, ok)
            }
            Err(note) => (Err(note), pair.lambda, pair.f.clone(), f64::NAN, false),
        };
    Ok(CriticalPoint {
        branch_id,
        alpha_star: alpha,
        lambda_star,
        f_star,
        grad: slope,
        regularity: report,
        sigma,
        certified,
        residual: res,
    })
}

/// Scans every branch for sign changes of the eigenvalue slope, refines each
/// bracket by bisection on the slope (re-solving the eigenpair at every trial
/// alpha with a warm start), and certifies the refined point against the
/// original graph. Points that resist refinement or certification are
/// returned flagged rather than dropped.
pub fn find_critical_points(
    curves: &[EigCurve],
    g: &SignedGraph,
    cut: &CutSpec,
) -> Vec<CriticalPoint> {
    let mut out: Vec<CriticalPoint> = Vec::new();
    for curve in curves {
        for w in curve.samples.windows(2) {
            let (s0, s1) = (&w[0], &w[1]);
            if !(s0.slope.is_finite() && s1.slope.is_finite()) {
                continue;
            }
            let bracket = if s0.slope == 0.0 {
                Some((s0.alpha, s0.alpha))
            } else if s0.slope * s1.slope < 0.0 {
                Some((s0.alpha, s1.alpha))
            } else {
                None
            };
            let Some((mut a, mut b)) = bracket else { continue };

            let mut slope_a = s0.slope;
            let mut lam_a = s0.lambda;
            let mut lam_b = s1.lambda;
            let mut current: Option<(f64, Eigenpair, f64)> = None;
            let mut warm = s0.f.clone();
            for _ in 0..200 {
                if (b - a).abs() <= 1e-11 * (1.0 + a.abs().max(b.abs())) {
                    break;
                }
                let mid = 0.5 * (a + b);
                let hint = 0.5 * (lam_a + lam_b);
                let Ok(params) = CutParams::single(mid) else { break };
                let Ok(pair) = solve_eigenpair_near(g, cut, &params, hint, Some(&warm)) else {
                    break;
                };
                let Ok(slope) = hf_eigenvalue_derivative(g, cut, &params, &pair, 0) else {
                    break;
                };
                warm = pair.f.clone();
                let lam_mid = pair.lambda;
                current = Some((mid, pair, slope));
                if (slope > 0.0) == (slope_a > 0.0) {
                    a = mid;
                    slope_a = slope;
                    lam_a = lam_mid;
                } else {
                    b = mid;
                    lam_b = lam_mid;
                }
            }

            let refined = match current {
                Some(found) => Some(found),
                None if s0.slope == 0.0 => {
                    let pair = Eigenpair {
                        lambda: s0.lambda,
                        f: s0.f.clone(),
                        residual: s0.residual,
                    };
                    Some((s0.alpha, pair, s0.slope))
                }
                None => {
                    // refinement never produced a trial solve; flag the less
                    // sloped endpoint instead of dropping the bracket
                    let s = if s0.slope.abs() <= s1.slope.abs() { s0 } else { s1 };
                    let pair = Eigenpair { lambda: s.lambda, f: s.f.clone(), residual: s.residual };
                    Some((s.alpha, pair, s.slope))
                }
            };
            if let Some((alpha, pair, slope)) = refined {
                if let Ok(point) = critical_point_from(g, cut, curve.branch_id, alpha, &pair, slope)
                {
                    out.push(point);
                }
            }
        }
    }
    out
}

/// Flags alpha-grid locations where two traced branches nearly touch. Whether
/// such intersections are always eigenvalues of both signed operators is not
/// established, so they are reported without any claim.
pub fn crossing_flags(curves: &[EigCurve]) -> Vec<(f64, f64)> {
    let mut by_alpha: Vec<(f64, f64)> = Vec::new();
    let mut all: Vec<(u64, f64)> = Vec::new();
    for curve in curves {
        for s in &curve.samples {
            all.push((s.alpha.to_bits(), s.lambda));
        }
    }
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for group in all.chunk_by(|x, y| x.0 == y.0) {
        for pair in group.windows(2) {
            let (l0, l1) = (pair[0].1, pair[1].1);
            if (l1 - l0).abs() < 1e-3 * (1.0 + l0.abs()) {
                by_alpha.push((f64::from_bits(pair[0].0), 0.5 * (l0 + l1)));
            }
        }
    }
    by_alpha.sort_by(|x, y| x.partial_cmp(y).unwrap());
    by_alpha
}

/// Writes the traced curves as CSV (`alpha,branch,lambda,slope`) and the
/// critical points plus crossing flags as a JSON document. Output is
/// byte-stable for identical inputs.
pub fn curve_report<C: Write, J: Write>(
    g: &SignedGraph,
    cut: &CutSpec,
    curves: &[EigCurve],
    points: &[CriticalPoint],
    mut csv: C,
    json: J,
) -> Result<()> {
    writeln!(csv, "alpha,branch,lambda,slope")?;
    for curve in curves {
        for s in &curve.samples {
            writeln!(csv, "{},{},{},{}", s.alpha, curve.branch_id, s.lambda, s.slope)?;
        }
    }

    let mut rendered = Vec::with_capacity(points.len());
    for p in points {
        let sigma_value = match &p.sigma {
            Ok(signs) => {
                let mut map = serde_json::Map::new();
                for (&(u, v), &s) in cut.edges().iter().zip(signs.iter()) {
                    map.insert(format!("{}-{}", g.id(u), g.id(v)), serde_json::json!(s));
                }
                serde_json::Value::Object(map)
            }
            Err(_) => serde_json::Value::Null,
        };
        let sigma_error = match &p.sigma {
            Ok(_) => serde_json::Value::Null,
            Err(note) => serde_json::json!(note),
        };
        rendered.push(serde_json::json!({
            "alpha": p.alpha_star,
            "lambda": p.lambda_star,
            "f": p.f_star.iter().copied().collect::<Vec<f64>>(),
            "grad": p.grad,
            "regular": p.regularity.is_regular,
            "kernel_dim": p.regularity.kernel_dim,
            "sigma": sigma_value,
            "sigma_error": sigma_error,
            "certified": p.certified,
            "residual": if p.residual.is_finite() {
                serde_json::json!(p.residual)
            } else {
                serde_json::Value::Null
            },
            "branch": p.branch_id,
        }));
    }
    let crossings: Vec<serde_json::Value> = crossing_flags(curves)
        .into_iter()
        .map(|(a, l)| serde_json::json!({"alpha": a, "lambda": l}))
        .collect();
    let doc = serde_json::json!({
        "critical_points": rendered,
        "crossings": crossings,
    });
    serde_json::to_writer_pretty(json, &doc)?;
    Ok(())
}
