//! Secular-equation eigenvalue solver for tree-shaped operators.
//!
//! On a tree, an eigenvector that vanishes nowhere is determined by the
//! ratios `r_u = f_u / f_parent(u)`, which propagate from the leaves to the
//! root; the eigen-equation collapses to a single scalar "secular" function
//! of `lambda` at the root. Scanning a grid of `lambda`, bracketing sign
//! changes and bisecting finds those eigenvalues.
//!
//! Eigenvectors with interior zeros break the propagation: they show up as
//! poles of the secular function, and an eigenvalue may sit exactly at such a
//! pole (the sign change across the jump still brackets it). Candidates whose
//! ratio-reconstructed vector fails the residual test are therefore retried
//! with the direct Newton solver pinned near the bracketed value, which
//! recovers interior-zero eigenvectors and discards spurious pole crossings.

use crate::error::{Error, Result};
use crate::graph::{SignedGraph, VertexFunction};
use crate::newton::{dedup_insert, newton_solve, sort_eigenpairs};
use crate::operator::{phi_p, phi_p_inverse, Eigenpair};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Absolute threshold on the ratio denominator below which the recursion
/// reports a pole instead of a number.
pub const POLE_TOL: f64 = 1e-12;

/// Residual bound an eigenpair must meet to be returned by the scan.
pub const RESIDUAL_ACCEPT: f64 = 1e-9;

/// One evaluation of the secular recursion at a fixed `lambda`.
#[derive(Debug, Clone)]
pub struct SecularEvaluation {
    /// Root-equation value, or `None` when a denominator vanished on the way
    /// up. Zeros over `lambda` are eigenvalues with nowhere-zero eigenvectors.
    pub value: Option<f64>,
    /// `ratios[u] = f_u / f_parent(u)` for non-root `u` (NaN past a pole);
    /// the root entry is fixed at 1.
    pub ratios: Vec<f64>,
    /// Vertices at which the recursion hit a vanishing denominator.
    pub pole_flags: Vec<usize>,
}

/// The vertex of maximum degree (lowest index on ties): rooting there keeps
/// the recursion shallow and puts the residual equation at a star's center.
pub fn default_root(g: &SignedGraph) -> usize {
    (0..g.n_vertices()).max_by_key(|&u| (g.degree(u), usize::MAX - u)).unwrap_or(0)
}

/// Parent map and root-first traversal order of the tree.
fn traversal(g: &SignedGraph, root: usize) -> Result<(Vec<Option<usize>>, Vec<usize>)> {
    let n = g.n_vertices();
    if root >= n {
        return Err(Error::Invalid(format!("root index {root} out of range")));
    }
    if !g.is_tree() {
        return Err(Error::Precondition(
            "the secular recursion needs a tree (connected, |E| = |V| - 1)".into(),
        ));
    }
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[root] = true;
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for (v, _) in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                order.push(v);
            }
        }
    }
    Ok((parent, order))
}

/// Evaluates the leaf-to-root recursion at `lambda`: at each non-root vertex
/// `u` with parent `w`,
///
/// ```text
/// s_u = lambda rho_u - kappa_u - sum_c omega_uc phi_p(1 - sigma_uc r_c)
/// r_u = sigma_uw / (1 - phi_q(s_u / omega_uw))
/// ```
///
/// and the returned value is the same expression `s` at the root, whose zeros
/// over `lambda` are the detectable eigenvalues.
pub fn secular(g: &SignedGraph, root: usize, lambda: f64) -> Result<SecularEvaluation> {
    let (parent, order) = traversal(g, root)?;
    let p = g.p();
    let n = g.n_vertices();
    let mut ratios = vec![f64::NAN; n];
    ratios[root] = 1.0;
    let mut value = None;
    for &u in order.iter().rev() {
        let mut s = lambda * g.rho(u) - g.kappa(u);
        for (v, e) in g.neighbors(u) {
            if parent[v] == Some(u) {
                s -= e.omega * phi_p(p, 1.0 - e.sigma * ratios[v]);
            }
        }
        match parent[u] {
            None => value = Some(s),
            Some(w) => {
                let (omega, sigma) = g.omega_sigma(u, w).expect("tree edge");
                let denom = 1.0 - phi_p_inverse(p, s / omega);
                if denom.abs() < POLE_TOL {
                    return Ok(SecularEvaluation {
                        value: None,
                        ratios,
                        pole_flags: vec![u],
                    });
                }
                ratios[u] = sigma / denom;
            }
        }
    }
    Ok(SecularEvaluation { value, ratios, pole_flags: Vec::new() })
}

/// Propagates `f_root = 1` down the tree through the ratios.
fn reconstruct(parent: &[Option<usize>], order: &[usize], ratios: &[f64]) -> VertexFunction {
    let mut f = DVector::zeros(parent.len());
    for &u in order {
        match parent[u] {
            None => f[u] = 1.0,
            Some(w) => f[u] = ratios[u] * f[w],
        }
    }
    f
}

/// A crude two-sided cap on the spectrum: the energy of a unit vector is at
/// most `2^p (max deg) (max omega)` plus the positive potential, and at least
/// the negative potential, both inflated by `1 / min rho` and a unit margin.
pub fn default_lambda_range(g: &SignedGraph) -> (f64, f64) {
    let max_deg = (0..g.n_vertices()).map(|u| g.degree(u)).max().unwrap_or(0) as f64;
    let max_omega = g.edges().iter().map(|e| e.omega).fold(0.0, f64::max);
    let rho_min = (0..g.n_vertices()).map(|u| g.rho(u)).fold(f64::INFINITY, f64::min);
    let k_max = g.kappa_vec().iter().copied().fold(0.0, f64::max);
    let k_min = g.kappa_vec().iter().copied().fold(0.0, f64::min);
    let base = 2f64.powf(g.p()) * max_deg * max_omega;
    ((k_min / rho_min) - 1.0, (base + k_max) / rho_min + 1.0)
}

fn try_accept(
    g: &SignedGraph,
    root: usize,
    parent: &[Option<usize>],
    order: &[usize],
    lambda: f64,
) -> Option<Eigenpair> {
    let ev = secular(g, root, lambda).ok()?;
    ev.value?;
    if !ev.ratios.iter().all(|r| r.is_finite()) {
        return None;
    }
    let f = reconstruct(parent, order, &ev.ratios);
    let pair = Eigenpair::new(g, lambda, &f).ok()?;
    if pair.residual >= RESIDUAL_ACCEPT {
        return None;
    }
    // run the accepted pair through the Newton front end: it converges on the
    // spot and its polishing tail removes the cube-root reconstruction error
    // that flat eigenvector directions leave behind for p > 2
    match newton_solve(g, pair.lambda, &pair.f, 50, RESIDUAL_ACCEPT) {
        Ok(polished) if polished.residual <= pair.residual => Some(polished),
        _ => Some(pair),
    }
}

/// Retries a bracketed candidate with Newton starts pinned at `lambda_star`.
/// Only solutions that stay in a tight window around the bracket survive, so
/// pole crossings without an eigenvalue return nothing.
fn rescue(g: &SignedGraph, lambda_star: f64) -> Vec<Eigenpair> {
    let n = g.n_vertices();
    let window = 1e-6 * (1.0 + lambda_star.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ec5ca);
    let mut out = Vec::new();
    for _ in 0..12 {
        let raw = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let Ok(f0) = g.normalize(&raw) else { continue };
        if let Ok(pair) = newton_solve(g, lambda_star, &f0, 200, 1e-12) {
            if (pair.lambda - lambda_star).abs() <= window && pair.residual < RESIDUAL_ACCEPT {
                dedup_insert(&mut out, pair);
            }
        }
    }
    out
}

/// Scans `grid` equally spaced values of `lambda`, brackets sign changes of
/// the secular value between consecutive finite samples, refines each bracket
/// by bisection, and reconstructs eigenvectors by ratio propagation (falling
/// back to pinned Newton starts when the reconstruction misses, see module
/// docs). Every returned eigenpair is residual-checked; the list is sorted by
/// eigenvalue.
pub fn tree_spectrum(
    g: &SignedGraph,
    lambda_range: (f64, f64),
    grid: usize,
) -> Result<Vec<Eigenpair>> {
    let (lo, hi) = lambda_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Invalid(format!("bad lambda range [{lo}, {hi}]")));
    }
    if grid < 2 {
        return Err(Error::Invalid("lambda grid needs at least 2 samples".into()));
    }
    let root = default_root(g);
    let (parent, order) = traversal(g, root)?;

    let value_at = |lambda: f64| -> Option<f64> {
        secular(g, root, lambda)
            .ok()
            .and_then(|ev| ev.value)
            .filter(|v| v.is_finite())
    };

    let step = (hi - lo) / (grid - 1) as f64;
    let samples: Vec<(f64, Option<f64>)> = (0..grid)
        .map(|k| {
            let l = lo + step * k as f64;
            (l, value_at(l))
        })
        .collect();

    let mut found: Vec<Eigenpair> = Vec::new();
    let consider = |lambda_star: f64, found: &mut Vec<Eigenpair>| {
        if let Some(pair) = try_accept(g, root, &parent, &order, lambda_star) {
            dedup_insert(found, pair);
        } else {
            for pair in rescue(g, lambda_star) {
                dedup_insert(found, pair);
            }
        }
    };

    for window in samples.windows(2) {
        let (l0, v0) = window[0];
        let (l1, v1) = window[1];
        let (Some(v0), Some(v1)) = (v0, v1) else { continue };
        if v0 == 0.0 {
            consider(l0, &mut found);
            continue;
        }
        if v0 * v1 >= 0.0 {
            continue;
        }
        // bisect the sign change; a pole at the midpoint gets nudged aside,
        // and an unresolvable one just stops the refinement early
        let (mut a, mut b, mut va) = (l0, l1, v0);
        for _ in 0..200 {
            if (b - a) <= 1e-12 * b.abs().max(1.0) {
                break;
            }
            let mut mid = 0.5 * (a + b);
            let mut vm = value_at(mid);
            if vm.is_none() {
                mid += 1e-3 * (b - a);
                vm = value_at(mid);
            }
            let Some(vm) = vm else { break };
            if vm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if (vm > 0.0) == (va > 0.0) {
                a = mid;
                va = vm;
            } else {
                b = mid;
            }
        }
        consider(0.5 * (a + b), &mut found);
    }
    if let Some(&(l_last, Some(v_last))) = samples.last() {
        if v_last == 0.0 {
            consider(l_last, &mut found);
        }
    }

    sort_eigenpairs(&mut found);
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};

    fn close_up_to_sign(a: &VertexFunction, b: &VertexFunction, tol: f64) -> bool {
        (a - b).amax() < tol || (a + b).amax() < tol
    }

    #[test]
    fn two_vertex_path_has_the_closed_form_spectrum() {
        let g = SignedGraph::uniform(4.0, 2, &[(0, 1)]).unwrap();
        let pairs = tree_spectrum(&g, (-1.0, 10.0), 2001).unwrap();
        assert_eq!(pairs.len(), 2, "got {:?}", pairs.iter().map(|q| q.lambda).collect::<Vec<_>>());
        assert!(pairs[0].lambda.abs() < 1e-10);
        assert_relative_eq!(pairs[1].lambda, 8.0, epsilon = 1e-9);
        let even = g.normalize(&dvector![1.0, 1.0]).unwrap();
        let odd = g.normalize(&dvector![1.0, -1.0]).unwrap();
        // the constant eigenvector is flat at p = 4 (cube-root sensitivity of
        // the ratio reconstruction); the Newton polish must still pin it down
        assert!(close_up_to_sign(&pairs[0].f, &even, 1e-12));
        assert!(close_up_to_sign(&pairs[1].f, &odd, 1e-12));
    }

    #[test]
    fn constant_vector_is_an_exact_secular_zero_on_unsigned_trees() {
        let g = SignedGraph::uniform(4.0, 4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(default_root(&g), 0);
        let ev = secular(&g, 0, 0.0).unwrap();
        assert_eq!(ev.value, Some(0.0));
        assert!(ev.pole_flags.is_empty());
        assert_eq!(ev.ratios, vec![1.0; 4]);
    }

    #[test]
    fn leaf_pole_is_reported_as_a_marker() {
        // path 0-1-2 with kappa = 0: at lambda = 1 a leaf ratio denominator
        // vanishes, which is exactly where the interior-zero eigenvector lives
        let g = SignedGraph::uniform(4.0, 3, &[(0, 1), (1, 2)]).unwrap();
        let ev = secular(&g, default_root(&g), 1.0).unwrap();
        assert!(ev.value.is_none());
        assert_eq!(ev.pole_flags.len(), 1);
        assert_eq!(g.degree(ev.pole_flags[0]), 1);
    }

    #[test]
    fn path_spectrum_includes_the_interior_zero_eigenvector() {
        let g = SignedGraph::uniform(4.0, 3, &[(0, 1), (1, 2)]).unwrap();
        let pairs = tree_spectrum(&g, (-1.0, 13.0), 2001).unwrap();
        let lambdas: Vec<f64> = pairs.iter().map(|q| q.lambda).collect();
        let third = (1.0 + 2f64.cbrt()).powi(3);
        assert!(lambdas.iter().any(|l| l.abs() < 1e-9), "{lambdas:?}");
        assert!(lambdas.iter().any(|l| (l - 1.0).abs() < 1e-9), "{lambdas:?}");
        assert!(lambdas.iter().any(|l| (l - third).abs() < 1e-8), "{lambdas:?}");
        for pair in &pairs {
            assert!(pair.residual < RESIDUAL_ACCEPT);
        }
        let dirichlet = pairs.iter().find(|q| (q.lambda - 1.0).abs() < 1e-9).unwrap();
        let expected = g.normalize(&dvector![1.0, 0.0, -1.0]).unwrap();
        assert!(close_up_to_sign(&dirichlet.f, &expected, 1e-8));
    }

    #[test]
    fn cut_triangle_spectrum_at_the_critical_parameter() {
        // kappa = (8, 8, 0) is the triangle cut at alpha = -1; the eigenvalue
        // 9 sits on a pole of the secular function and its eigenvector
        // vanishes at the root, so this exercises the Newton fallback
        let g = SignedGraph::uniform(4.0, 3, &[(0, 2), (1, 2)])
            .unwrap()
            .with_kappa(vec![8.0, 8.0, 0.0])
            .unwrap();
        let pairs = tree_spectrum(&g, default_lambda_range(&g), 2001).unwrap();
        let nine = pairs.iter().find(|q| (q.lambda - 9.0).abs() < 1e-8).unwrap();
        let expected = g.normalize(&dvector![1.0, -1.0, 0.0]).unwrap();
        assert!(close_up_to_sign(&nine.f, &expected, 1e-7));

        let sixteen = pairs.iter().find(|q| (q.lambda - 16.0).abs() < 1e-8).unwrap();
        let expected = g.normalize(&dvector![1.0, 1.0, -1.0]).unwrap();
        assert!(close_up_to_sign(&sixteen.f, &expected, 1e-7));
    }

    #[test]
    fn non_trees_are_rejected() {
        let g = SignedGraph::uniform(4.0, 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        assert!(matches!(
            tree_spectrum(&g, (0.0, 1.0), 10),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(secular(&g, 0, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn bad_ranges_are_rejected() {
        let g = SignedGraph::uniform(4.0, 2, &[(0, 1)]).unwrap();
        assert!(tree_spectrum(&g, (1.0, 1.0), 10).is_err());
        assert!(tree_spectrum(&g, (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn default_root_prefers_the_hub() {
        let path = SignedGraph::uniform(4.0, 3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(default_root(&path), 1);
        let star = SignedGraph::uniform(4.0, 4, &[(3, 0), (3, 1), (3, 2)]).unwrap();
        assert_eq!(default_root(&star), 3);
    }

    #[test]
    fn agrees_with_the_direct_solver_on_a_random_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let edges = [(0, 1), (1, 2), (1, 3), (3, 4)];
        let edges: Vec<crate::graph::Edge> = edges
            .iter()
            .map(|&(u, v)| crate::graph::Edge {
                u,
                v,
                omega: rng.gen_range(0.5..2.0),
                sigma: 1.0,
            })
            .collect();
        let kappa: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ids = (0..5).map(|i| format!("t{i}")).collect();
        let g = SignedGraph::new(4.0, ids, vec![1.0; 5], kappa, edges).unwrap();

        let scanned = tree_spectrum(&g, default_lambda_range(&g), 4001).unwrap();
        let direct = multistart(&g);
        for pair in direct {
            let everywhere_nonzero = pair.f.iter().all(|x| x.abs() > 1e-6 * pair.f.amax());
            if !everywhere_nonzero {
                continue;
            }
            let hit = scanned.iter().any(|q| {
                (q.lambda - pair.lambda).abs() < 1e-8 && close_up_to_sign(&q.f, &pair.f, 1e-6)
            });
            assert!(hit, "missing lambda = {}", pair.lambda);
        }
    }

    fn multistart(g: &SignedGraph) -> Vec<Eigenpair> {
        crate::newton::multistart_spectrum(g, 150, 5)
    }
}
