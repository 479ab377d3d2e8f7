//! Closed-form regularity classification for the cut triangle at p = 4.
//!
//! Cutting one edge of a weighted triangle leaves the path `u - w - v` with
//! the parameter potentials at `u` and `v`. For this family an eigenpair is
//! regular exactly when the eigenvector separates both endpoints from the
//! middle vertex: `f_u != f_w` and `f_v != f_w`. The classifier evaluates
//! that criterion and cross-checks it against the general singular-value
//! test, which must agree.

use crate::error::{Error, Result};
use crate::graph::{CutParams, CutSpec, Edge, SignedGraph};
use crate::operator::{residual, Eigenpair};
use crate::perturbation::{regularity, RegularityReport};
use crate::surgery::build_cut_operator;

/// Residual bound for accepting the input as an eigenpair of the cut
/// operator.
pub const EIGENPAIR_TOL: f64 = 1e-6;

/// Relative threshold for treating two eigenvector components as equal in the
/// closed-form criterion.
pub const COMPONENT_EQ_TOL: f64 = 1e-6;

/// Verdict of the closed-form criterion next to the general rank test.
#[derive(Debug, Clone)]
pub struct TriangleCutClassification {
    /// `f_u != f_w` and `f_v != f_w`, the closed-form regularity criterion.
    pub criterion_regular: bool,
    /// The singular-value based report on the same eigenpair.
    pub witness: RegularityReport,
    pub agree: bool,
}

/// The weighted triangle on vertices `u, v, w` at p = 4 with the designated
/// cut edge `u-v`. Weights are ordered as `[omega_uv, omega_uw, omega_vw]`.
pub fn triangle_with_cut(omega: [f64; 3]) -> Result<(SignedGraph, CutSpec)> {
    let ids = vec!["u".to_string(), "v".to_string(), "w".to_string()];
    let edges = vec![
        Edge { u: 0, v: 1, omega: omega[0], sigma: 1.0 },
        Edge { u: 0, v: 2, omega: omega[1], sigma: 1.0 },
        Edge { u: 1, v: 2, omega: omega[2], sigma: 1.0 },
    ];
    let g = SignedGraph::new(4.0, ids, vec![1.0; 3], vec![0.0; 3], edges)?;
    let cut = CutSpec::new(&g, vec![(0, 1)])?;
    Ok((g, cut))
}

/// Classifies an eigenpair of the cut-triangle operator at `(omega, alpha)`
/// by the closed-form criterion and attaches the rank-test witness. Fails
/// when `(lambda, f)` is not actually an eigenpair of that operator.
pub fn classify_triangle_cut(
    omega: [f64; 3],
    alpha: f64,
    pair: &Eigenpair,
) -> Result<TriangleCutClassification> {
    let (g, cut) = triangle_with_cut(omega)?;
    let op = build_cut_operator(&g, &cut, &CutParams::single(alpha)?)?;
    let r = residual(&op.graph, pair.lambda, &pair.f);
    if !(r <= EIGENPAIR_TOL) {
        return Err(Error::Precondition(format!(
            "(lambda, f) is not an eigenpair of the cut operator (residual {r:.3e})"
        )));
    }
    let scale = pair.f.amax().max(f64::MIN_POSITIVE);
    let separated = |x: f64, y: f64| (x - y).abs() > COMPONENT_EQ_TOL * scale;
    let criterion_regular = separated(pair.f[0], pair.f[2]) && separated(pair.f[1], pair.f[2]);
    let witness = regularity(&op.graph, pair, None)?;
    Ok(TriangleCutClassification {
        criterion_regular,
        agree: criterion_regular == witness.is_regular,
        witness,
    })
}
