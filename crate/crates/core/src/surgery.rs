//! Edge-cut surgery: trading cut edges for parameter-dependent potentials.
//!
//! Removing a cut edge `(u, v)` and adding `omega_uv phi_p(1 - alpha)` to the
//! potential at `u` and `omega_uv phi_p(1 - 1/alpha)` at `v` produces a family
//! of operators on the cut graph whose eigenvalue curves, at critical values
//! of `alpha`, recover eigenvalues of the original graph (possibly with a
//! flipped sign on the cut edge). The reversed edge orientation corresponds to
//! the reciprocal parameter, so both endpoints are treated symmetrically.

use crate::error::{Error, Result};
use crate::graph::{CutParams, CutSpec, SignedGraph, VertexFunction};
use crate::operator::{phi_p, Eigenpair};

use nalgebra::DVector;

/// Relative tolerance for the critical-point identity `|f_v| = |alpha| |f_u|`
/// and for rounding extended signs to exactly ±1.
pub const SIGMA_EXTENSION_TOL: f64 = 1e-6;

/// Relative threshold below which an eigenvector component counts as zero on
/// a cut endpoint.
pub const ENDPOINT_ZERO_TOL: f64 = 1e-9;

/// The cut-graph operator at fixed parameters: the original graph minus the
/// cut edges, with the parameter potentials folded into `kappa`.
#[derive(Debug, Clone)]
pub struct CutOperator {
    pub graph: SignedGraph,
    pub cut: CutSpec,
    pub params: CutParams,
}

/// Materializes the cut operator at `params`. The endpoint `u_i` of cut edge
/// `(u_i, v_i)` receives `omega phi_p(1 - alpha_i)`, the endpoint `v_i`
/// receives `omega phi_p(1 - 1/alpha_i)`; everything else is untouched.
pub fn build_cut_operator(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
) -> Result<CutOperator> {
    params.check_len(cut)?;
    let p = g.p();
    let mut kappa = g.kappa_vec().to_vec();
    for (i, &(u, v)) in cut.edges().iter().enumerate() {
        let a = params.alpha()[i];
        let (omega, _) = g
            .omega_sigma(u, v)
            .ok_or_else(|| Error::Invalid("cut edge is not an edge of the graph".into()))?;
        kappa[u] += omega * phi_p(p, 1.0 - a);
        kappa[v] += omega * phi_p(p, 1.0 - 1.0 / a);
    }
    let graph = g.without_edges(cut.edges(), kappa)?;
    Ok(CutOperator { graph, cut: cut.clone(), params: params.clone() })
}

/// Reads the cut parameters off an eigenpair of the original graph:
/// `alpha_i = sigma_uv f_v / f_u`, or `-1` when the eigenvector vanishes on
/// both endpoints. Fails when it vanishes on exactly one endpoint, since no
/// finite nonzero parameter reproduces that eigenpair.
pub fn reconstruct_alpha(g: &SignedGraph, cut: &CutSpec, pair: &Eigenpair) -> Result<CutParams> {
    let scale = pair.f.amax();
    let mut alpha = Vec::with_capacity(cut.len());
    for &(u, v) in cut.edges() {
        let (_, sigma) = g
            .omega_sigma(u, v)
            .ok_or_else(|| Error::Invalid("cut edge is not an edge of the graph".into()))?;
        let zero_u = pair.f[u].abs() <= ENDPOINT_ZERO_TOL * scale;
        let zero_v = pair.f[v].abs() <= ENDPOINT_ZERO_TOL * scale;
        match (zero_u, zero_v) {
            (false, false) => alpha.push(sigma * pair.f[v] / pair.f[u]),
            (true, true) => alpha.push(-1.0),
            _ => {
                return Err(Error::Precondition(format!(
                    "eigenvector vanishes on exactly one endpoint of cut edge {}-{}",
                    g.id(u),
                    g.id(v)
                )))
            }
        }
    }
    CutParams::new(alpha)
}

/// Extends the cut-graph signs back to the full edge set at a critical point:
/// on cut edge `(u_i, v_i)` the sign is `alpha_i f_u / f_v`, which the
/// critical-point identity `|f_v| = |alpha_i| |f_u|` forces to ±1 (taken as
/// `+1` when the eigenvector vanishes on the cut edge). Returns the original
/// graph with the extended signs installed.
pub fn extend_sigma(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
) -> Result<SignedGraph> {
    params.check_len(cut)?;
    let scale = pair.f.amax();
    let mut result = g.clone();
    for (i, &(u, v)) in cut.edges().iter().enumerate() {
        let a = params.alpha()[i];
        let fu = pair.f[u];
        let fv = pair.f[v];
        let zero_u = fu.abs() <= ENDPOINT_ZERO_TOL * scale;
        let zero_v = fv.abs() <= ENDPOINT_ZERO_TOL * scale;
        let sigma = if zero_u || zero_v {
            if zero_u != zero_v {
                return Err(Error::Precondition(format!(
                    "not a critical point: eigenvector vanishes on exactly one endpoint of {}-{}",
                    g.id(u),
                    g.id(v)
                )));
            }
            1.0
        } else {
            let gap = (fv.abs() - a.abs() * fu.abs()).abs();
            if gap > SIGMA_EXTENSION_TOL * fv.abs().max(a.abs() * fu.abs()) {
                return Err(Error::Precondition(format!(
                    "not a critical point: |f_v| = |alpha| |f_u| fails on {}-{} (gap {gap:.3e})",
                    g.id(u),
                    g.id(v)
                )));
            }
            let raw = a * fu / fv;
            if (raw.abs() - 1.0).abs() > SIGMA_EXTENSION_TOL {
                return Err(Error::Numerical(format!(
                    "extended sign on {}-{} is {raw}, not within tolerance of ±1",
                    g.id(u),
                    g.id(v)
                )));
            }
            raw.signum()
        };
        result = result.with_sigma_on(u, v, sigma)?;
    }
    Ok(result)
}

/// Parameter derivative of the Lagrangian gradient, scaled by `1/p`:
/// differentiating the cut potentials in `alpha_i` gives a vector supported on
/// the two endpoints of cut edge `i`,
///
/// ```text
/// at u_i:  -omega (p-1) |1 - alpha_i|^(p-2) phi_p(f_u)
/// at v_i:  +omega (p-1) |1 - 1/alpha_i|^(p-2) phi_p(f_v) / alpha_i^2
/// ```
pub fn d_alpha_f(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    f: &VertexFunction,
    i: usize,
) -> Result<VertexFunction> {
    params.check_len(cut)?;
    if i >= cut.len() {
        return Err(Error::Invalid(format!("cut edge index {i} out of range")));
    }
    let p = g.p();
    let (u, v) = cut.edges()[i];
    let a = params.alpha()[i];
    let (omega, _) = g
        .omega_sigma(u, v)
        .ok_or_else(|| Error::Invalid("cut edge is not an edge of the graph".into()))?;
    let mut out = DVector::zeros(g.n_vertices());
    out[u] = -omega * (p - 1.0) * (1.0 - a).abs().powf(p - 2.0) * phi_p(p, f[u]);
    out[v] =
        omega * (p - 1.0) * (1.0 - 1.0 / a).abs().powf(p - 2.0) * phi_p(p, f[v]) / (a * a);
    Ok(out)
}
