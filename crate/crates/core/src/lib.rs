//! Signed p-Schrödinger operators on finite graphs: eigenpairs, first-order
//! perturbation theory, and edge-cut spectral surgery.
//!
//! The operator acts on functions `f` over the vertices of a weighted signed
//! graph as
//!
//! ```text
//! (H f)(u) = sum_{v ~ u} omega_uv phi_p(f(u) - sigma_uv f(v)) + kappa_u phi_p(f(u))
//! ```
//!
//! with `phi_p(x) = |x|^{p-2} x`. Eigenpairs solve `H f = lambda rho phi_p(f)`
//! and arise as constrained critical points of the p-energy on the sphere
//! `sum_u rho_u |f(u)|^p = 1`.
//!
//! The crate covers three layers on top of the operator itself:
//!
//! * direct solution: projected Newton iteration from one or many starts
//!   ([`newton`]), and an exact secular-function sweep on trees ([`tree`]);
//! * perturbation: the Hessian-based regularity test and the first-order
//!   derivatives of a simple eigenpair along a cut parameter
//!   ([`perturbation`]);
//! * surgery: cutting an edge into a parameter-dependent potential,
//!   reconstructing the parameter from an eigenpair, and tracing eigenvalue
//!   curves whose critical values recover the spectrum of the original graph
//!   ([`surgery`], [`continuation`]).
//!
//! [`catalog`] instantiates the theory on the weighted triangle, where
//! regularity along the cut has a closed form.

pub mod catalog;
pub mod continuation;
pub mod error;
pub mod graph;
pub mod newton;
pub mod operator;
pub mod perturbation;
pub mod surgery;
pub mod tree;

pub use catalog::{classify_triangle_cut, triangle_with_cut, TriangleCutClassification};
pub use continuation::{
    crossing_flags, curve_report, default_alpha_grid, find_critical_points,
    solve_eigenpair_near, trace, CriticalPoint, CurveSample, EigCurve,
};
pub use error::{Error, Result};
pub use graph::{CutParams, CutSpec, Edge, SignedGraph, VertexFunction};
pub use newton::{multistart_spectrum, newton_solve};
pub use operator::{
    apply_operator, energy, grad_f, hessian, lagrangian, phi_p, phi_p_inverse, residual,
    Eigenpair, Hessian,
};
pub use perturbation::{
    hf_eigenvalue_derivative, hf_eigenvector_derivative, hf_gradient, regularity,
    RegularityReport, TBasis,
};
pub use surgery::{
    build_cut_operator, d_alpha_f, extend_sigma, reconstruct_alpha, CutOperator,
};
pub use tree::{default_lambda_range, default_root, secular, tree_spectrum, SecularEvaluation};
