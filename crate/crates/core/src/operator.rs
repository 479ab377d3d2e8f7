//! The signed p-Schrödinger operator, its Rayleigh Lagrangian, gradient and Hessian.
//!
//! Everything here is pointwise arithmetic over the edge and vertex sets:
//!
//! * `phi_p(x) = |x|^(p-2) x`, the odd power nonlinearity,
//! * `(H_p f)(u) = sum_v omega_uv phi_p(f_u - sigma_uv f_v) + kappa_u phi_p(f_u)`,
//! * eigenpairs solve `H_p f = lambda rho phi_p(f)`.
//!
//! The Lagrangian of the constrained Rayleigh problem is
//! `L = energy(f) - lambda (||f||_p^p - 1)`; its f-gradient is
//! `F = p (H_p f - lambda rho phi_p(f))` and the Hessian entries carry the
//! shared factor `p (p-1)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{SignedGraph, VertexFunction};

/// Odd power `|x|^(p-2) x`, an increasing bijection of the real line.
pub fn phi_p(p: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 2.0) * x
    }
}

/// Inverse of [`phi_p`]: the odd power with the conjugate exponent
/// `q = p / (p - 1)`.
pub fn phi_p_inverse(p: f64, y: f64) -> f64 {
    phi_p(p / (p - 1.0), y)
}

/// `|x|^(p-2)` with the convention `|0|^0 = 1` (p = 2) and `|0|^(p-2) = 0`
/// for p > 2. IEEE `powf` already implements exactly this, the helper just
/// names the convention.
pub(crate) fn abs_pow_pm2(p: f64, x: f64) -> f64 {
    x.abs().powf(p - 2.0)
}

/// Applies the operator: `(H_p f)(u)`.
pub fn apply_operator(g: &SignedGraph, f: &VertexFunction) -> VertexFunction {
    let p = g.p();
    DVector::from_fn(g.n_vertices(), |u, _| {
        let mut acc = g.kappa(u) * phi_p(p, f[u]);
        for (v, e) in g.neighbors(u) {
            acc += e.omega * phi_p(p, f[u] - e.sigma * f[v]);
        }
        acc
    })
}

/// The p-Dirichlet energy plus potential term:
/// `sum_uv omega |f_u - sigma f_v|^p + sum_u kappa_u |f_u|^p`
/// (one term per undirected edge).
pub fn energy(g: &SignedGraph, f: &VertexFunction) -> f64 {
    let p = g.p();
    let mut acc = 0.0;
    for e in g.edges() {
        acc += e.omega * (f[e.u] - e.sigma * f[e.v]).abs().powf(p);
    }
    for u in 0..g.n_vertices() {
        acc += g.kappa(u) * f[u].abs().powf(p);
    }
    acc
}

/// Full Lagrangian `energy(f) - lambda (||f||_p^p - 1)`. Vanishingly close to
/// `energy(f)` whenever `f` has unit p-norm, for every `lambda`.
pub fn lagrangian(g: &SignedGraph, lambda: f64, f: &VertexFunction) -> f64 {
    energy(g, f) - lambda * (g.pnorm(f).powf(g.p()) - 1.0)
}

/// Gradient of the Lagrangian in `f`:
/// `F(lambda, f) = p (H_p f - lambda rho phi_p(f))`.
/// Zero exactly at eigenpairs; homogeneous of degree p-1 in `f`.
pub fn grad_f(g: &SignedGraph, lambda: f64, f: &VertexFunction) -> VertexFunction {
    let p = g.p();
    DVector::from_fn(g.n_vertices(), |u, _| {
        let mut acc = (g.kappa(u) - lambda * g.rho(u)) * phi_p(p, f[u]);
        for (v, e) in g.neighbors(u) {
            acc += e.omega * phi_p(p, f[u] - e.sigma * f[v]);
        }
        p * acc
    })
}

/// Sup-norm eigen-residual `max_u |(H_p f)(u) - lambda rho_u phi_p(f_u)|`.
pub fn residual(g: &SignedGraph, lambda: f64, f: &VertexFunction) -> f64 {
    (grad_f(g, lambda, f) / g.p()).amax()
}

/// Hessian of the Lagrangian in `f`, with a conditioning note.
#[derive(Debug, Clone)]
pub struct Hessian {
    /// The full matrix `nabla_f^2 L`, including the `p (p-1)` factor.
    pub matrix: DMatrix<f64>,
    /// Set when `2 <= p < 3` and some edge difference `|f_u - sigma f_v|`
    /// falls below `1e-8`: the entries depend on fractional powers of nearly
    /// vanishing differences there, so downstream solves may lose accuracy.
    pub ill_conditioned: bool,
}

/// Assembles `nabla_f^2 L` at `(lambda, f)`. Requires `p >= 2`; the entries use
/// `|0|^(p-2) = 0` for p > 2 and `= 1` for p = 2.
pub fn hessian(g: &SignedGraph, lambda: f64, f: &VertexFunction) -> Result<Hessian> {
    let p = g.p();
    if p < 2.0 {
        return Err(Error::Precondition(format!(
            "Hessian requires p >= 2 (entries are unbounded below that), got p = {p}"
        )));
    }
    let n = g.n_vertices();
    let scale = p * (p - 1.0);
    let mut m = DMatrix::zeros(n, n);
    let mut near_kink = false;
    for u in 0..n {
        let mut diag = (g.kappa(u) - lambda * g.rho(u)) * abs_pow_pm2(p, f[u]);
        for (v, e) in g.neighbors(u) {
            let d = f[u] - e.sigma * f[v];
            if d.abs() < 1e-8 {
                near_kink = true;
            }
            let w = abs_pow_pm2(p, d);
            diag += e.omega * w;
            m[(u, v)] = -scale * e.omega * e.sigma * w;
        }
        m[(u, u)] = scale * diag;
    }
    Ok(Hessian { matrix: m, ill_conditioned: p < 3.0 && near_kink })
}

/// A candidate eigenpair: `H_p f = lambda rho phi_p(f)` up to `residual`,
/// with `f` held at unit p-norm and canonical sign.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub f: VertexFunction,
    pub residual: f64,
}

impl Eigenpair {
    /// Normalizes `f` and records the residual at the normalized scale.
    pub fn new(g: &SignedGraph, lambda: f64, f: &VertexFunction) -> Result<Self> {
        let f = g.normalize(f)?;
        let residual = residual(g, lambda, &f);
        Ok(Self { lambda, f, residual })
    }
}
