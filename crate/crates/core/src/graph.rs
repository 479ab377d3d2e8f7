//! Weighted signed graphs with vertex potentials, and their JSON document format.
//!
//! All numeric code works with dense vertex indices `0..n`; the string ids from
//! the document format are kept only for reporting. Edges are undirected and
//! stored once per unordered pair; both directed views of an edge return the
//! same weight and sign.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued function on the vertex set, aligned with the vertex order.
pub type VertexFunction = DVector<f64>;

/// Relative threshold below which a component counts as zero when the sign
/// convention looks for the first nonzero entry.
const SIGN_EPS: f64 = 1e-9;

/// One undirected edge with coupling weight `omega > 0` and sign `sigma = ±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub omega: f64,
    pub sigma: f64,
}

impl Edge {
    pub fn other(&self, w: usize) -> usize {
        if self.u == w {
            self.v
        } else {
            self.u
        }
    }

    fn key(&self) -> (usize, usize) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

/// Finite weighted signed graph with vertex measure `rho > 0`, vertex
/// potential `kappa` and a fixed exponent `p > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    p: f64,
    ids: Vec<String>,
    rho: Vec<f64>,
    kappa: Vec<f64>,
    edges: Vec<Edge>,
    /// Per vertex: (neighbor, edge index) pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl SignedGraph {
    /// Builds a graph and checks every structural invariant, including
    /// connectivity. This is the constructor used for ingested data.
    pub fn new(
        p: f64,
        ids: Vec<String>,
        rho: Vec<f64>,
        kappa: Vec<f64>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let g = Self::assemble(p, ids, rho, kappa, edges)?;
        if !g.is_connected() {
            return Err(Error::Invalid("graph is not connected".into()));
        }
        Ok(g)
    }

    /// Like [`SignedGraph::new`] but tolerates a disconnected edge set.
    /// Cutting edges out of a connected graph may disconnect it; the operator,
    /// Lagrangian and Hessian are still well defined on the result.
    pub(crate) fn assemble(
        p: f64,
        ids: Vec<String>,
        rho: Vec<f64>,
        kappa: Vec<f64>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Invalid(format!("exponent p must be finite and > 1, got {p}")));
        }
        let n = ids.len();
        if n == 0 {
            return Err(Error::Invalid("graph has no vertices".into()));
        }
        if rho.len() != n || kappa.len() != n {
            return Err(Error::Invalid("rho/kappa length does not match vertex count".into()));
        }
        let mut seen_ids = HashSet::new();
        for id in &ids {
            if !seen_ids.insert(id.clone()) {
                return Err(Error::Invalid(format!("duplicate vertex id {id:?}")));
            }
        }
        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Invalid(format!("rho must be positive at vertex {:?}", ids[i])));
            }
        }
        for (i, &k) in kappa.iter().enumerate() {
            if !k.is_finite() {
                return Err(Error::Invalid(format!("kappa must be finite at vertex {:?}", ids[i])));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen_edges = HashSet::new();
        for (ei, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::Invalid("edge endpoint out of range".into()));
            }
            if e.u == e.v {
                return Err(Error::Invalid(format!("self loop at vertex {:?}", ids[e.u])));
            }
            if !(e.omega > 0.0) || !e.omega.is_finite() {
                return Err(Error::Invalid(format!(
                    "omega must be positive on edge {:?}-{:?}",
                    ids[e.u], ids[e.v]
                )));
            }
            if e.sigma != 1.0 && e.sigma != -1.0 {
                return Err(Error::Invalid(format!(
                    "sigma must be +1 or -1 on edge {:?}-{:?}",
                    ids[e.u], ids[e.v]
                )));
            }
            if !seen_edges.insert(e.key()) {
                return Err(Error::Invalid(format!(
                    "duplicate edge {:?}-{:?}",
                    ids[e.u], ids[e.v]
                )));
            }
            adjacency[e.u].push((e.v, ei));
            adjacency[e.v].push((e.u, ei));
        }
        Ok(Self { p, ids, rho, kappa, edges, adjacency })
    }

    /// Convenience constructor: `n` vertices named `v0..`, unit weights and
    /// measure, zero potential, all signs `+1`.
    pub fn uniform(p: f64, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let ids = (0..n).map(|i| format!("v{i}")).collect();
        let edges = edges
            .iter()
            .map(|&(u, v)| Edge { u, v, omega: 1.0, sigma: 1.0 })
            .collect();
        Self::new(p, ids, vec![1.0; n], vec![0.0; n], edges)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, u: usize) -> &str {
        &self.ids[u]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn rho(&self, u: usize) -> f64 {
        self.rho[u]
    }

    pub fn kappa(&self, u: usize) -> f64 {
        self.kappa[u]
    }

    pub fn kappa_vec(&self) -> &[f64] {
        &self.kappa
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    /// Neighbors of `u` as `(neighbor, edge)` pairs.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, &Edge)> {
        self.adjacency[u].iter().map(move |&(v, ei)| (v, &self.edges[ei]))
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<&Edge> {
        self.adjacency[u]
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, ei)| &self.edges[ei])
    }

    /// Directed view of an edge: `(omega, sigma)` for the ordered pair `(u, v)`.
    /// Symmetric by construction: the same values come back for `(v, u)`.
    pub fn omega_sigma(&self, u: usize, v: usize) -> Option<(f64, f64)> {
        self.edge_between(u, v).map(|e| (e.omega, e.sigma))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n_vertices() && self.is_connected()
    }

    /// Copy with the potential replaced.
    #[cfg(test)]
    pub(crate) fn with_kappa(&self, kappa: Vec<f64>) -> Result<Self> {
        Self::assemble(self.p, self.ids.clone(), self.rho.clone(), kappa, self.edges.clone())
    }

    /// Copy with the listed unordered edge pairs removed and the potential
    /// replaced. The result may be disconnected.
    pub(crate) fn without_edges(&self, remove: &[(usize, usize)], kappa: Vec<f64>) -> Result<Self> {
        let removed: HashSet<(usize, usize)> = remove
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| !removed.contains(&e.key()))
            .cloned()
            .collect();
        Self::assemble(self.p, self.ids.clone(), self.rho.clone(), kappa, edges)
    }

    /// Copy with the sign of the edge between `u` and `v` replaced.
    pub fn with_sigma_on(&self, u: usize, v: usize, sigma: f64) -> Result<Self> {
        let key = (u.min(v), u.max(v));
        let mut edges = self.edges.clone();
        let mut found = false;
        for e in &mut edges {
            if e.key() == key {
                e.sigma = sigma;
                found = true;
            }
        }
        if !found {
            return Err(Error::Invalid(format!(
                "no edge between {:?} and {:?}",
                self.ids.get(u),
                self.ids.get(v)
            )));
        }
        Self::assemble(self.p, self.ids.clone(), self.rho.clone(), self.kappa.clone(), edges)
    }

    /// rho-weighted p-norm `(sum_u rho_u |f_u|^p)^(1/p)`.
    pub fn pnorm(&self, f: &VertexFunction) -> f64 {
        let p = self.p;
        let mut acc = 0.0;
        for (u, &r) in self.rho.iter().enumerate() {
            acc += r * f[u].abs().powf(p);
        }
        acc.powf(1.0 / p)
    }

    /// Scales `f` to unit p-norm and flips the sign so the first component
    /// that is not numerically zero is positive.
    pub fn normalize(&self, f: &VertexFunction) -> Result<VertexFunction> {
        let norm = self.pnorm(f);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invalid("cannot normalize: zero or non-finite function".into()));
        }
        let mut g = f / norm;
        let scale = g.amax();
        for u in 0..g.len() {
            if g[u].abs() > SIGN_EPS * scale {
                if g[u] < 0.0 {
                    g = -g;
                }
                break;
            }
        }
        Ok(g)
    }
}

/// A set of edges selected for cutting, each stored as an ordered pair
/// `(u, v)`: the orientation decides which endpoint the parameter `alpha`
/// refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSpec {
    edges: Vec<(usize, usize)>,
}

impl CutSpec {
    pub fn new(g: &SignedGraph, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for &(u, v) in &edges {
            if g.edge_between(u, v).is_none() {
                return Err(Error::Invalid(format!(
                    "cut edge {:?}-{:?} is not an edge of the graph",
                    g.ids.get(u),
                    g.ids.get(v)
                )));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Invalid("cut lists the same edge twice".into()));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// One real parameter per cut edge; `alpha_i != 0`. The reversed orientation
/// of a cut edge corresponds to the reciprocal parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CutParams {
    alpha: Vec<f64>,
}

impl CutParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        for &a in &alpha {
            if a == 0.0 || !a.is_finite() {
                return Err(Error::Invalid(format!(
                    "cut parameters must be finite and nonzero, got {a}"
                )));
            }
        }
        Ok(Self { alpha })
    }

    pub fn single(a: f64) -> Result<Self> {
        Self::new(vec![a])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub(crate) fn check_len(&self, cut: &CutSpec) -> Result<()> {
        if self.alpha.len() != cut.len() {
            return Err(Error::Invalid(format!(
                "{} cut parameters for {} cut edges",
                self.alpha.len(),
                cut.len()
            )));
        }
        Ok(())
    }
}

fn default_rho() -> f64 {
    1.0
}

fn default_omega() -> f64 {
    1.0
}

fn default_sigma() -> i64 {
    1
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    id: String,
    #[serde(default = "default_rho")]
    rho: f64,
    #[serde(default)]
    kappa: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    u: String,
    v: String,
    #[serde(default = "default_omega")]
    omega: f64,
    #[serde(default = "default_sigma")]
    sigma: i64,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    p: f64,
    vertices: Vec<VertexDoc>,
    edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cut: Option<Vec<(String, String)>>,
}

/// Parses a graph document. Defaults: `rho = 1`, `kappa = 0`, `omega = 1`,
/// `sigma = +1`; the `cut` list is optional.
pub fn load_graph<R: Read>(reader: R) -> Result<(SignedGraph, Option<CutSpec>)> {
    let doc: GraphDoc =
        serde_json::from_reader(reader).map_err(|e| Error::Parse(e.to_string()))?;
    let ids: Vec<String> = doc.vertices.iter().map(|v| v.id.clone()).collect();
    let index: HashMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if index.len() != ids.len() {
        return Err(Error::Invalid("duplicate vertex id".into()));
    }
    let look = |id: &str| -> Result<usize> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Invalid(format!("unknown vertex id {id:?}")))
    };
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        if e.sigma != 1 && e.sigma != -1 {
            return Err(Error::Invalid(format!(
                "sigma must be +1 or -1 on edge {:?}-{:?}",
                e.u, e.v
            )));
        }
        edges.push(Edge { u: look(&e.u)?, v: look(&e.v)?, omega: e.omega, sigma: e.sigma as f64 });
    }
    let cut_edges = match &doc.cut {
        None => None,
        Some(pairs) => {
            let mut resolved = Vec::with_capacity(pairs.len());
            for (u, v) in pairs {
                resolved.push((look(u)?, look(v)?));
            }
            Some(resolved)
        }
    };
    let rho = doc.vertices.iter().map(|v| v.rho).collect();
    let kappa = doc.vertices.iter().map(|v| v.kappa).collect();
    let g = SignedGraph::new(doc.p, ids, rho, kappa, edges)?;
    let cut = match cut_edges {
        None => None,
        Some(resolved) => Some(CutSpec::new(&g, resolved)?),
    };
    Ok((g, cut))
}

/// Serializes a graph (and optionally its cut) back into the document format.
pub fn save_graph<W: Write>(writer: W, g: &SignedGraph, cut: Option<&CutSpec>) -> Result<()> {
    let doc = GraphDoc {
        p: g.p,
        vertices: g
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| VertexDoc { id: id.clone(), rho: g.rho[i], kappa: g.kappa[i] })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeDoc {
                u: g.ids[e.u].clone(),
                v: g.ids[e.v].clone(),
                omega: e.omega,
                sigma: e.sigma as i64,
            })
            .collect(),
        cut: cut.map(|c| {
            c.edges()
                .iter()
                .map(|&(u, v)| (g.ids[u].clone(), g.ids[v].clone()))
                .collect()
        }),
    };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}
