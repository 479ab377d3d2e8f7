//! First-order perturbation theory for eigenpairs of the cut operator.
//!
//! At an eigenpair `(lambda, f)` the Lagrangian gradient `F` vanishes, and
//! differentiating `F(alpha, f(alpha)) = 0` along a smooth branch gives the
//! eigenvalue slope as a pairing against the eigenvector and, at regular
//! eigenpairs, the eigenvector slope as a tangent-space linear solve. The
//! tangent space is the orthogonal complement of `rho phi_p(f)`, which is
//! exactly the kernel of the derivative of the normalization constraint.

use crate::error::{Error, Result};
use crate::graph::{CutParams, CutSpec, SignedGraph, VertexFunction};
use crate::operator::{hessian, phi_p, Eigenpair};
use crate::surgery::{build_cut_operator, d_alpha_f};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Relative singular-value threshold separating numerical kernel from range.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Numerical-rank analysis of the Lagrangian Hessian at an eigenpair.
///
/// An eigenpair is regular when the Hessian kernel is exactly the span of the
/// eigenvector, i.e. one-dimensional; only then is the restricted Hessian on
/// the tangent space invertible and the eigenvector differentiable in the cut
/// parameters.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub kernel_dim: usize,
    pub is_regular: bool,
    /// Singular values of the Hessian, largest first.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

/// Classifies `(lambda, f)` by the numerical kernel dimension of the Hessian:
/// singular values below `tol` times the largest one count as kernel. `None`
/// uses [`DEFAULT_RANK_TOL`].
pub fn regularity(g: &SignedGraph, pair: &Eigenpair, tol: Option<f64>) -> Result<RegularityReport> {
    let tol = tol.unwrap_or(DEFAULT_RANK_TOL);
    if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
        return Err(Error::Invalid(format!(
            "rank tolerance must lie strictly between 0 and 1, got {tol}"
        )));
    }
    let hess = hessian(g, pair.lambda, &pair.f)?;
    let mut sv: Vec<f64> = hess
        .matrix
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let largest = sv.first().copied().unwrap_or(0.0);
    let kernel_dim = if largest == 0.0 {
        sv.len()
    } else {
        sv.iter().filter(|&&s| s < tol * largest).count()
    };
    Ok(RegularityReport {
        kernel_dim,
        is_regular: kernel_dim == 1,
        singular_values: sv,
        tolerance_used: tol,
    })
}

/// An orthonormal basis of the tangent space `{rho phi_p(f)}^perp`, stored as
/// the columns of an `n x (n-1)` matrix.
#[derive(Debug, Clone)]
pub struct TBasis {
    pub matrix: DMatrix<f64>,
}

/// Builds a tangent basis by completing `rho phi_p(f)` to an orthonormal frame
/// with the standard basis vectors and dropping the seed. Deterministic in the
/// vertex order.
pub fn t_basis(g: &SignedGraph, f: &VertexFunction) -> Result<TBasis> {
    let n = g.n_vertices();
    let p = g.p();
    let w = DVector::from_fn(n, |u, _| g.rho(u) * phi_p(p, f[u]));
    let wn = w.norm();
    if !(wn.is_finite() && wn > 0.0) {
        return Err(Error::Invalid(
            "tangent basis needs a nonzero vertex function".into(),
        ));
    }
    let mut frame: Vec<DVector<f64>> = vec![w / wn];
    for i in 0..n {
        let mut v: DVector<f64> = DVector::zeros(n);
        v[i] = 1.0;
        // two orthogonalization passes keep the frame orthonormal to machine
        // precision even when e_i is nearly parallel to an earlier column
        for _ in 0..2 {
            for b in &frame {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let vn = v.norm();
        if vn > 1e-8 {
            frame.push(v / vn);
        }
        if frame.len() == n {
            break;
        }
    }
    if frame.len() != n {
        return Err(Error::Numerical(
            "tangent frame completion lost a direction".into(),
        ));
    }
    let mut matrix = DMatrix::zeros(n, n - 1);
    for (j, col) in frame.iter().skip(1).enumerate() {
        matrix.set_column(j, col);
    }
    Ok(TBasis { matrix })
}

/// Slope of the eigenvalue in the cut parameter `alpha_i` along a smooth
/// branch through an eigenpair of the cut operator:
///
/// ```text
/// dlambda/dalpha_i = <(1/p) D_alpha_i F, f> / sum_u rho_u |f_u|^p
///                  = (p-1) omega |1-alpha_i|^(p-2)
///                      (|f_v|^p / |alpha_i|^p - |f_u|^p) / sum_u rho_u |f_u|^p
/// ```
///
/// which vanishes exactly when `|f_v| = |alpha_i| |f_u|` on the cut edge.
pub fn hf_eigenvalue_derivative(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
    i: usize,
) -> Result<f64> {
    let d = d_alpha_f(g, cut, params, &pair.f, i)?;
    let den = g.pnorm(&pair.f).powf(g.p());
    Ok(d.dot(&pair.f) / den)
}

/// All eigenvalue slopes at once, one per cut edge.
pub fn hf_gradient(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
) -> Result<Vec<f64>> {
    (0..cut.len())
        .map(|i| hf_eigenvalue_derivative(g, cut, params, pair, i))
        .collect()
}

/// Slope of the eigenvector in `alpha_i` at a regular eigenpair:
/// `df/dalpha_i = -T (T' H T)^(-1) T' D_alpha_i F` with `H` the Lagrangian
/// Hessian of the cut operator and `T` a tangent basis at `f`.
pub fn hf_eigenvector_derivative(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
    i: usize,
) -> Result<VertexFunction> {
    let t = t_basis(g, &pair.f)?;
    hf_eigenvector_derivative_with_basis(g, cut, params, pair, i, &t)
}

/// Same as [`hf_eigenvector_derivative`] with a caller-supplied tangent basis;
/// the result does not depend on which valid basis is used.
pub fn hf_eigenvector_derivative_with_basis(
    g: &SignedGraph,
    cut: &CutSpec,
    params: &CutParams,
    pair: &Eigenpair,
    i: usize,
    t: &TBasis,
) -> Result<VertexFunction> {
    let op = build_cut_operator(g, cut, params)?;
    let hess = hessian(&op.graph, pair.lambda, &pair.f)?;
    let inner = t.matrix.transpose() * &hess.matrix * &t.matrix;

    let sv = inner.clone().svd(false, false).singular_values;
    let largest = sv.max();
    let smallest = sv.min();
    if !(largest > 0.0) || smallest < DEFAULT_RANK_TOL * largest {
        return Err(Error::Precondition(format!(
            "eigenpair is not regular: restricted Hessian is singular \
             (smallest/largest singular value = {:.3e})",
            if largest > 0.0 { smallest / largest } else { 0.0 }
        )));
    }

    let big_d = d_alpha_f(g, cut, params, &pair.f, i)? * g.p();
    let rhs = t.matrix.transpose() * big_d;
    let y = inner
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("restricted Hessian solve failed".into()))?;
    Ok(-(&t.matrix * y))
}
