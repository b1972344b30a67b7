//! Undirected attributed graphs and the local-neighbourhood machinery built on them.

mod generate;
mod io;
mod normalize;

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use generate::{generate_graph_dataset, generate_synthetic, FeatureSpec, GeneratorParams};
pub use io::{
    dataset_from_json, dataset_to_json, graph_from_json, graph_to_json, load_dataset, load_graph,
    save_dataset, save_graph,
};
pub use normalize::{normalize, normalize_with, IsolatedNodes, MatrixKind, NormalizeOptions, NormalizedMatrix};

/// Undirected edge stored as `(u, v)` with `u < v`.
pub type Edge = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum Labels {
    #[default]
    None,
    Node(Vec<usize>),
    Graph(usize),
}

/// Undirected, unweighted graph with a dense node-feature matrix.
///
/// Edges are kept sorted and unique; features are reference counted so that
/// augmented views share the exact same feature buffer as their source.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<T> {
    n: usize,
    edges: Vec<Edge>,
    features: Arc<Array2<T>>,
    labels: Labels,
}

fn canonical(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph, rejecting self-loops, out-of-range endpoints, duplicate
    /// edges (in either orientation) and feature/label shape mismatches.
    pub fn new(n: usize, edges: Vec<Edge>, features: Array2<T>, labels: Labels) -> Result<Self> {
        if features.nrows() != n {
            return Err(Error::Validation(format!(
                "features has {} rows but the graph has {n} nodes",
                features.nrows()
            )));
        }
        if let Labels::Node(l) = &labels {
            if l.len() != n {
                return Err(Error::Validation(format!("labels has {} entries but n = {n}", l.len())));
            }
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!("edge [{u}, {v}] has an endpoint outside [0, {n})")));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop on node {u}")));
            }
            canon.push(canonical(u, v));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate edge [{}, {}]", w[0].0, w[0].1)));
        }
        Ok(Self { n, edges: canon, features: Arc::new(features), labels })
    }

    /// Same node set, features and labels with a different edge set.
    /// Edges must already be canonical, sorted and unique.
    pub(crate) fn with_sorted_edges(&self, edges: Vec<Edge>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(u, v)| u < v && v < self.n));
        Self { n: self.n, edges, features: Arc::clone(&self.features), labels: self.labels.clone() }
    }

    /// Same node set and features with an arbitrary edge list (canonicalized here).
    pub fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= self.n || v >= self.n || u == v {
                return Err(Error::Validation(format!("invalid edge [{u}, {v}] for n = {}", self.n)));
            }
            canon.push(canonical(u, v));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(self.with_sorted_edges(canon))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn shares_features_with(&self, other: &Graph<T>) -> bool {
        Arc::ptr_eq(&self.features, &other.features)
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Labels::Node(l) => Some(l),
            _ => None,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.edges.binary_search(&canonical(u, v)).is_ok()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn degree_info(&self) -> DegreeInfo {
        DegreeInfo::from_degrees(self.degrees(), None)
    }

    /// Degrees of every node with extremes taken over `nodes` only.
    pub fn degree_info_over(&self, nodes: &[usize]) -> DegreeInfo {
        DegreeInfo::from_degrees(self.degrees(), Some(nodes))
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_dense(&self) -> Array2<T> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = T::one();
            a[[v, u]] = T::one();
        }
        a
    }

    /// Applies a node permutation: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Shape(format!("permutation of length {} for n = {}", perm.len(), self.n)));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Argument("not a permutation".into()));
            }
        }
        let mut features = Array2::zeros(self.features.raw_dim());
        for (i, &p) in perm.iter().enumerate() {
            features.row_mut(p).assign(&self.features.row(i));
        }
        let labels = match &self.labels {
            Labels::Node(l) => {
                let mut out = vec![0; self.n];
                for (i, &p) in perm.iter().enumerate() {
                    out[p] = l[i];
                }
                Labels::Node(out)
            }
            other => other.clone(),
        };
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Graph::new(self.n, edges, features, labels)
    }

    /// Nodes within shortest-path distance `k` of `v`, ascending.
    pub fn k_hop_nodes(&self, v: usize, k: usize) -> Result<Vec<usize>> {
        if v >= self.n {
            return Err(Error::Argument(format!("node {v} out of range for n = {}", self.n)));
        }
        Ok(k_hop_nodes_with(&self.neighbors(), v, k))
    }
}

pub(crate) fn k_hop_nodes_with(adj: &[Vec<usize>], v: usize, k: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[v] = 0;
    queue.push_back(v);
    let mut out = vec![v];
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &w in &adj[u] {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Edges of `adj`'s graph with both endpoints in the (sorted) node set.
pub(crate) fn induced_edges(adj: &[Vec<usize>], nodes: &[usize], mask: &mut [bool]) -> Vec<Edge> {
    for &u in nodes {
        mask[u] = true;
    }
    let mut out = Vec::new();
    for &u in nodes {
        for &w in &adj[u] {
            if u < w && mask[w] {
                out.push((u, w));
            }
        }
    }
    for &u in nodes {
        mask[u] = false;
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeInfo {
    pub degrees: Vec<usize>,
    pub d_min: usize,
    pub d_max: usize,
}

impl DegreeInfo {
    fn from_degrees(degrees: Vec<usize>, over: Option<&[usize]>) -> Self {
        let pick: Vec<usize> = match over {
            Some(nodes) => nodes.iter().map(|&i| degrees[i]).collect(),
            None => degrees.clone(),
        };
        let d_min = pick.iter().copied().min().unwrap_or(0);
        let d_max = pick.iter().copied().max().unwrap_or(0);
        Self { degrees, d_min, d_max }
    }
}

/// A k-hop neighbourhood with local node ids; `mapping[local] = global`.
#[derive(Clone, Debug)]
pub struct Subgraph<T> {
    pub graph: Graph<T>,
    pub mapping: Vec<usize>,
    pub center: usize,
}

/// Induced subgraph on all nodes within `k` hops of `v`, relabeled in ascending global order.
pub fn k_hop_subgraph<T: Scalar>(graph: &Graph<T>, v: usize, k: usize) -> Result<Subgraph<T>> {
    let nodes = graph.k_hop_nodes(v, k)?;
    let adj = graph.neighbors();
    let mut mask = vec![false; graph.n()];
    let edges = induced_edges(&adj, &nodes, &mut mask);
    let mut local = vec![usize::MAX; graph.n()];
    for (i, &g) in nodes.iter().enumerate() {
        local[g] = i;
    }
    let local_edges: Vec<Edge> = edges.iter().map(|&(a, b)| (local[a], local[b])).collect();
    let features = graph.features().select(Axis(0), &nodes);
    let labels = match graph.labels() {
        Labels::Node(l) => Labels::Node(nodes.iter().map(|&i| l[i]).collect()),
        other => other.clone(),
    };
    let sub = Graph::new(nodes.len(), local_edges, features, labels)?;
    Ok(Subgraph { graph: sub, center: local[v], mapping: nodes })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationStrength {
    pub delta: f64,
    pub k: usize,
    pub argmax_node: usize,
    /// Nodes whose k-hop subgraph in the source graph has no edges.
    pub skipped: Vec<usize>,
}

/// Per-node symmetric-difference counts between two graphs' k-hop edge sets.
#[derive(Clone, Debug)]
pub struct LocalChange {
    pub node: usize,
    pub nodes: Vec<usize>,
    pub nodes_prime: Vec<usize>,
    pub edges: Vec<Edge>,
    pub edges_prime: Vec<Edge>,
    pub sym_diff: usize,
}

/// Computes the k-hop edge sets around every node in both graphs.
pub fn local_changes<T: Scalar>(g: &Graph<T>, g_prime: &Graph<T>, k: usize) -> Result<Vec<LocalChange>> {
    if g.n() != g_prime.n() {
        return Err(Error::Shape(format!("graphs have {} and {} nodes", g.n(), g_prime.n())));
    }
    let adj = g.neighbors();
    let adj_p = g_prime.neighbors();
    let mut mask = vec![false; g.n()];
    let mut out = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let nodes = k_hop_nodes_with(&adj, v, k);
        let nodes_prime = k_hop_nodes_with(&adj_p, v, k);
        let edges = induced_edges(&adj, &nodes, &mut mask);
        let edges_prime = induced_edges(&adj_p, &nodes_prime, &mut mask);
        let common = count_common(&edges, &edges_prime);
        let sym_diff = edges.len() + edges_prime.len() - 2 * common;
        out.push(LocalChange { node: v, nodes, nodes_prime, edges, edges_prime, sym_diff });
    }
    Ok(out)
}

fn count_common(a: &[Edge], b: &[Edge]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Worst-case fraction of k-hop edge changes over all nodes.
pub fn perturbation_strength<T: Scalar>(g: &Graph<T>, g_prime: &Graph<T>, k: usize) -> Result<PerturbationStrength> {
    let changes = local_changes(g, g_prime, k)?;
    strength_from_changes(&changes, k)
}

pub(crate) fn strength_from_changes(changes: &[LocalChange], k: usize) -> Result<PerturbationStrength> {
    let mut best: Option<(f64, usize)> = None;
    let mut skipped = Vec::new();
    for c in changes {
        if c.edges.is_empty() {
            skipped.push(c.node);
            continue;
        }
        let ratio = c.sym_diff as f64 / c.edges.len() as f64;
        if best.is_none_or(|(b, _)| ratio > b) {
            best = Some((ratio, c.node));
        }
    }
    let (delta, argmax_node) =
        best.ok_or_else(|| Error::Argument("no node has a non-empty k-hop edge set".into()))?;
    Ok(PerturbationStrength { delta, k, argmax_node, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn g(n: usize, edges: &[Edge]) -> Graph<f64> {
        Graph::new(n, edges.to_vec(), Array2::zeros((n, 1)), Labels::None).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        let f = || Array2::<f64>::zeros((3, 1));
        assert!(Graph::new(3, vec![(0, 5)], f(), Labels::None).is_err());
        assert!(Graph::new(3, vec![(1, 1)], f(), Labels::None).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)], f(), Labels::None).is_err());
        assert!(Graph::new(2, vec![], f(), Labels::None).is_err());
    }

    #[test]
    fn degrees_sum_to_twice_edges() {
        let t = g(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        let info = t.degree_info();
        assert_eq!(info.degrees.iter().sum::<usize>(), 2 * t.num_edges());
        assert_eq!((info.d_min, info.d_max), (1, 3));
    }

    #[test]
    fn path_one_hop() {
        let p = g(3, &[(0, 1), (1, 2)]);
        let s = k_hop_subgraph(&p, 0, 1).unwrap();
        assert_eq!(s.mapping, vec![0, 1]);
        assert_eq!(s.graph.edges(), &[(0, 1)]);
        let s0 = k_hop_subgraph(&p, 1, 0).unwrap();
        assert_eq!(s0.mapping, vec![1]);
        assert_eq!(s0.graph.num_edges(), 0);
        let whole = k_hop_subgraph(&p, 0, 5).unwrap();
        assert_eq!(whole.graph.edges(), p.edges());
    }

    #[test]
    fn identical_graphs_have_zero_strength() {
        let t = g(4, &[(0, 1), (1, 2), (2, 0), (2, 3)]);
        for k in 0..4 {
            if k == 0 {
                assert!(perturbation_strength(&t, &t, k).is_err());
                continue;
            }
            assert_eq!(perturbation_strength(&t, &t, k).unwrap().delta, 0.0);
        }
    }

    #[test]
    fn k4_two_flips_whole_graph() {
        let all: Vec<Edge> = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let k4 = g(4, &all);
        let flipped = g(4, &all[2..]);
        let s = perturbation_strength(&k4, &flipped, 3).unwrap();
        assert!((s.delta - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_sizes() {
        assert!(matches!(perturbation_strength(&g(3, &[]), &g(4, &[]), 1), Err(Error::Shape(_))));
    }
}
