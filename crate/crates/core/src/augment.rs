//! Topological augmentations: DropEdge, AddEdge, PPR diffusion, greedy
//! spectral-distance maximization and the rejection-sampled spectral perturbor.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::symmetric_eigenvalues;
use crate::error::{Error, Result};
use crate::graph::{normalize, Edge, Graph, MatrixKind};
use crate::linalg::{solve, solve_spd};
use crate::rng::WorkbenchRng;
use crate::scalar::Scalar;
use crate::spectrum::{laplacian_spectrum, spectral_distance, Spectrum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AugmentationKind {
    Identity,
    DropEdge {
        p: f64,
    },
    AddEdge {
        q: f64,
    },
    Ppr {
        alpha: f64,
    },
    Span {
        budget: usize,
        #[serde(default = "default_candidates")]
        candidates: usize,
    },
    Spa {
        #[serde(default = "default_r_spa")]
        r_spa: f64,
        #[serde(default)]
        d_spa: f64,
        #[serde(default = "default_max_attempts")]
        max_attempts: usize,
    },
}

fn default_candidates() -> usize {
    16
}

fn default_r_spa() -> f64 {
    0.02
}

fn default_max_attempts() -> usize {
    100
}

/// One augmentation with its parameters and an optional fixed seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    #[serde(flatten)]
    pub kind: AugmentationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AugmentationSpec {
    pub fn new(kind: AugmentationKind) -> Self {
        Self { kind, seed: None }
    }

    pub fn identity() -> Self {
        Self::new(AugmentationKind::Identity)
    }

    pub fn drop_edge(p: f64) -> Self {
        Self::new(AugmentationKind::DropEdge { p })
    }

    pub fn add_edge(q: f64) -> Self {
        Self::new(AugmentationKind::AddEdge { q })
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {x} outside [0, 1]")))
            }
        };
        match &self.kind {
            AugmentationKind::Identity => Ok(()),
            AugmentationKind::DropEdge { p } => unit("p", *p),
            AugmentationKind::AddEdge { q } => unit("q", *q),
            AugmentationKind::Ppr { alpha } => {
                if *alpha > 0.0 && *alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1)")))
                }
            }
            AugmentationKind::Span { candidates, .. } => {
                if *candidates >= 1 {
                    Ok(())
                } else {
                    Err(Error::Parameter("candidates must be >= 1".into()))
                }
            }
            AugmentationKind::Spa { r_spa, d_spa, max_attempts } => {
                if !(*r_spa > 0.0 && *r_spa <= 1.0) {
                    return Err(Error::Parameter(format!("r_spa = {r_spa} outside (0, 1]")));
                }
                if !(*d_spa >= 0.0) {
                    return Err(Error::Parameter(format!("d_spa = {d_spa} must be >= 0")));
                }
                if *max_attempts == 0 {
                    return Err(Error::Parameter("max_attempts must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AugmentReport {
    pub edges_removed: usize,
    pub edges_added: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_spectral_divergence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_met: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// An augmented graph; its feature matrix is shared with the source graph.
#[derive(Clone, Debug)]
pub struct AugmentedView<T> {
    pub graph: Graph<T>,
    pub report: AugmentReport,
}

fn edge_diff(before: &[Edge], after: &[Edge]) -> (usize, usize) {
    let (mut i, mut j, mut removed, mut added) = (0, 0, 0, 0);
    while i < before.len() || j < after.len() {
        if j == after.len() || (i < before.len() && before[i] < after[j]) {
            removed += 1;
            i += 1;
        } else if i == before.len() || after[j] < before[i] {
            added += 1;
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    (removed, added)
}

fn view_from<T: Scalar>(g: &Graph<T>, edges: Vec<Edge>) -> AugmentedView<T> {
    let (edges_removed, edges_added) = edge_diff(g.edges(), &edges);
    AugmentedView {
        graph: g.with_sorted_edges(edges),
        report: AugmentReport { edges_removed, edges_added, ..Default::default() },
    }
}

/// Keeps each undirected edge independently with probability `1 − p`.
pub fn drop_edge<T: Scalar>(g: &Graph<T>, p: f64, rng: &mut WorkbenchRng) -> Result<AugmentedView<T>> {
    AugmentationSpec::drop_edge(p).validate()?;
    let kept = g.edges().iter().copied().filter(|_| !rng.random_bool(p)).collect();
    Ok(view_from(g, kept))
}

/// Adds each absent pair `u < v` independently with probability `q`.
pub fn add_edge<T: Scalar>(g: &Graph<T>, q: f64, rng: &mut WorkbenchRng) -> Result<AugmentedView<T>> {
    AugmentationSpec::add_edge(q).validate()?;
    let n = g.n();
    let existing = g.edges();
    let mut out = Vec::with_capacity(existing.len());
    let mut next = 0;
    for u in 0..n {
        for v in u + 1..n {
            if next < existing.len() && existing[next] == (u, v) {
                out.push((u, v));
                next += 1;
            } else if rng.random_bool(q) {
                out.push((u, v));
            }
        }
    }
    Ok(view_from(g, out))
}

/// Personalized-PageRank diffusion `α (I − (1 − α) Ã)^{-1}` with the
/// self-looped symmetric normalization `Ã`.
pub fn ppr_diffusion<T: Scalar>(g: &Graph<T>, alpha: f64) -> Result<Array2<T>> {
    AugmentationSpec::new(AugmentationKind::Ppr { alpha }).validate()?;
    let a = normalize(g, MatrixKind::Adjacency, true)?.values;
    let n = g.n();
    let m = Array2::<T>::eye(n) - &a * T::lit(1.0 - alpha);
    let rhs = Array2::<T>::eye(n) * T::lit(alpha);
    let s = solve_spd(m.view(), rhs.view()).map_err(|e| Error::Numerical(format!("PPR system: {e}")))?;
    Ok(symmetrize(s))
}

/// Row-stochastic variant `α (I − (1 − α) D̃^{-1}(A + I))^{-1}`; rows sum to one.
pub fn ppr_diffusion_row_stochastic<T: Scalar>(g: &Graph<T>, alpha: f64) -> Result<Array2<T>> {
    AugmentationSpec::new(AugmentationKind::Ppr { alpha }).validate()?;
    let n = g.n();
    let mut p = g.adjacency_dense();
    for i in 0..n {
        p[[i, i]] = T::one();
        let d = p.row(i).sum();
        p.row_mut(i).mapv_inplace(|x| x / d);
    }
    let m = Array2::<T>::eye(n) - &p * T::lit(1.0 - alpha);
    let rhs = Array2::<T>::eye(n) * T::lit(alpha);
    solve(m.view(), rhs.view()).map_err(|e| Error::Numerical(format!("PPR system: {e}")))
}

fn symmetrize<T: Scalar>(s: Array2<T>) -> Array2<T> {
    let half = T::lit(0.5);
    let st = s.t().to_owned();
    (s + st) * half
}

/// Dense adjacency with incremental degrees, used by the spectral search loops.
#[derive(Clone)]
struct Topology {
    n: usize,
    adj: Vec<bool>,
    deg: Vec<usize>,
}

impl Topology {
    fn from_graph<T: Scalar>(g: &Graph<T>) -> Self {
        let n = g.n();
        let mut t = Topology { n, adj: vec![false; n * n], deg: vec![0; n] };
        for &(u, v) in g.edges() {
            t.toggle(u, v);
        }
        t
    }

    fn toggle(&mut self, u: usize, v: usize) {
        let now = !self.adj[u * self.n + v];
        self.adj[u * self.n + v] = now;
        self.adj[v * self.n + u] = now;
        if now {
            self.deg[u] += 1;
            self.deg[v] += 1;
        } else {
            self.deg[u] -= 1;
            self.deg[v] -= 1;
        }
    }

    fn has(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    fn spectrum<T: Scalar>(&self) -> Result<Spectrum<T>> {
        let n = self.n;
        let inv: Vec<T> = self
            .deg
            .iter()
            .map(|&d| if d == 0 { T::zero() } else { T::one() / T::from_usize_lossy(d).sqrt() })
            .collect();
        let mut l = Array2::<T>::zeros((n, n));
        for u in 0..n {
            if self.deg[u] > 0 {
                l[[u, u]] = T::one();
            }
            for v in 0..n {
                if self.adj[u * n + v] {
                    l[[u, v]] = -(inv[u] * inv[v]);
                }
            }
        }
        Ok(Spectrum { values: symmetric_eigenvalues(l.view())? })
    }

    fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if self.adj[u * self.n + v] {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

fn pair_from_index(idx: usize, n: usize) -> Edge {
    let mut u = 0;
    let mut rem = idx;
    while rem >= n - 1 - u {
        rem -= n - 1 - u;
        u += 1;
    }
    (u, u + 1 + rem)
}

fn random_pair(n: usize, rng: &mut WorkbenchRng) -> Edge {
    let u = rng.random_range(0..n);
    let mut v = rng.random_range(0..n - 1);
    if v >= u {
        v += 1;
    }
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Clone, Debug)]
pub struct SpanResult<T> {
    pub views: (AugmentedView<T>, AugmentedView<T>),
    /// Squared spectral distance between the two views after each step (index 0 = start).
    pub objective_history: Vec<f64>,
}

/// Greedy alternating hill climb on `‖eig(L₁) − eig(L₂)‖²` under a flip budget.
///
/// Step `t` modifies view `t mod 2`: `candidates` random pair toggles are scored
/// (all pairs when `candidates` covers them) and the best is kept if it does not
/// decrease the objective.
pub fn span_pair<T: Scalar>(
    g: &Graph<T>,
    budget: usize,
    candidates: usize,
    rng: &mut WorkbenchRng,
) -> Result<SpanResult<T>> {
    AugmentationSpec::new(AugmentationKind::Span { budget, candidates }).validate()?;
    let n = g.n();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut tops = [Topology::from_graph(g), Topology::from_graph(g)];
    let start = tops[0].spectrum::<T>()?;
    let mut specs = [start.clone(), start];
    let mut objective = 0.0f64;
    let mut history = vec![objective];
    for step in 0..budget {
        if pairs == 0 {
            break;
        }
        let side = step % 2;
        let other = 1 - side;
        let cands: Vec<Edge> = if candidates >= pairs {
            (0..pairs).map(|i| pair_from_index(i, n)).collect()
        } else {
            (0..candidates).map(|_| random_pair(n, rng)).collect()
        };
        let mut best: Option<(f64, Edge, Spectrum<T>)> = None;
        for (u, v) in cands {
            tops[side].toggle(u, v);
            let s = tops[side].spectrum::<T>()?;
            tops[side].toggle(u, v);
            let d = spectral_distance(&s, &specs[other])?.to_f64_lossy();
            let obj = d * d;
            if best.as_ref().is_none_or(|b| obj > b.0) {
                best = Some((obj, (u, v), s));
            }
        }
        if let Some((obj, (u, v), s)) = best {
            if obj >= objective {
                tops[side].toggle(u, v);
                specs[side] = s;
                objective = obj;
            }
        }
        history.push(objective);
    }
    let mut v1 = view_from(g, tops[0].edges());
    let mut v2 = view_from(g, tops[1].edges());
    let divergence = objective.sqrt();
    for v in [&mut v1, &mut v2] {
        v.report.achieved_spectral_divergence = Some(divergence);
        if budget > 0 && objective == 0.0 {
            v.report.warning = Some("no flip changed the spectrum; views equal the input".into());
        }
    }
    Ok(SpanResult { views: (v1, v2), objective_history: history })
}

/// Number of flips used by [`spa_perturb`] for a graph with `m` edges.
pub fn spa_flip_count(m: usize, r_spa: f64) -> usize {
    (r_spa * m as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Rejection-samples small random perturbations until the spectral distance to
/// the input reaches `d_spa`, keeping the best candidate if attempts run out.
pub fn spa_perturb<T: Scalar>(
    g: &Graph<T>,
    r_spa: f64,
    d_spa: f64,
    max_attempts: usize,
    rng: &mut WorkbenchRng,
) -> Result<AugmentedView<T>> {
    AugmentationSpec::new(AugmentationKind::Spa { r_spa, d_spa, max_attempts }).validate()?;
    let flips = spa_flip_count(g.num_edges(), r_spa);
    let base = laplacian_spectrum(g)?;
    let base_top = Topology::from_graph(g);
    let mut best: Option<(f64, Topology)> = None;
    let mut attempts = 0;
    for _ in 0..max_attempts {
        attempts += 1;
        let top = random_flips(g, &base_top, flips, rng);
        let d = spectral_distance(&top.spectrum::<T>()?, &base)?.to_f64_lossy();
        let better = best.as_ref().is_none_or(|b| d > b.0);
        if better {
            best = Some((d, top));
        }
        if d >= d_spa {
            break;
        }
    }
    let (d, top) = best.expect("max_attempts >= 1");
    let mut view = view_from(g, top.edges());
    view.report.achieved_spectral_divergence = Some(d);
    view.report.attempts = Some(attempts);
    view.report.target_met = Some(d >= d_spa);
    if d < d_spa {
        view.report.warning = Some(format!("target not met: best divergence {d} < {d_spa}"));
    }
    Ok(view)
}

fn random_flips<T: Scalar>(g: &Graph<T>, base: &Topology, flips: usize, rng: &mut WorkbenchRng) -> Topology {
    let n = g.n();
    let m = g.num_edges();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut top = base.clone();
    let flips = flips.min(pairs);
    let drops = (0..flips).filter(|_| rng.random_bool(0.5)).count().min(m);
    let adds = (flips - drops).min(pairs - m);
    let drops = flips - adds;
    for i in sample(rng, m, drops) {
        let (u, v) = g.edges()[i];
        top.toggle(u, v);
    }
    let mut added = 0;
    while added < adds {
        let (u, v) = random_pair(n, rng);
        if !base.has(u, v) && !top.has(u, v) {
            top.toggle(u, v);
            added += 1;
        }
    }
    top
}

/// Applies a single-graph augmentation. `ppr` and `span` produce other view types
/// and are rejected here.
pub fn apply<T: Scalar>(spec: &AugmentationSpec, g: &Graph<T>, rng: &mut WorkbenchRng) -> Result<AugmentedView<T>> {
    spec.validate()?;
    match &spec.kind {
        AugmentationKind::Identity => Ok(view_from(g, g.edges().to_vec())),
        AugmentationKind::DropEdge { p } => drop_edge(g, *p, rng),
        AugmentationKind::AddEdge { q } => add_edge(g, *q, rng),
        AugmentationKind::Spa { r_spa, d_spa, max_attempts } => spa_perturb(g, *r_spa, *d_spa, *max_attempts, rng),
        AugmentationKind::Ppr { .. } | AugmentationKind::Span { .. } => Err(Error::Argument(
            "ppr and span produce a weighted matrix or a view pair; use ppr_diffusion or span_pair".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Labels;
    use crate::rng::seeded;

    fn g(n: usize, edges: &[Edge]) -> Graph<f64> {
        Graph::new(n, edges.to_vec(), Array2::eye(n), Labels::None).unwrap()
    }

    #[test]
    fn drop_and_add_extremes() {
        let k4 = g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let mut rng = seeded(1);
        assert_eq!(drop_edge(&k4, 0.0, &mut rng).unwrap().graph.edges(), k4.edges());
        let none = drop_edge(&k4, 1.0, &mut rng).unwrap();
        assert_eq!(none.graph.num_edges(), 0);
        assert_eq!(none.report.edges_removed, 6);
        let empty = g(4, &[]);
        assert_eq!(add_edge(&empty, 0.0, &mut rng).unwrap().graph.num_edges(), 0);
        let full = add_edge(&empty, 1.0, &mut rng).unwrap();
        assert_eq!(full.graph.edges(), k4.edges());
        assert!(full.graph.shares_features_with(&empty));
    }

    #[test]
    fn pair_index_enumerates_all_pairs() {
        let n = 6;
        let all: Vec<Edge> = (0..15).map(|i| pair_from_index(i, n)).collect();
        let want: Vec<Edge> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        assert_eq!(all, want);
    }

    #[test]
    fn ppr_single_node_and_k2() {
        let one = g(1, &[]);
        let s = ppr_diffusion(&one, 0.3).unwrap();
        assert!((s[[0, 0]] - 1.0).abs() < 1e-14);
        let k2 = g(2, &[(0, 1)]);
        let alpha = 0.15;
        let s = ppr_diffusion(&k2, alpha).unwrap();
        // Ã = 0.5·J; (I − βÃ)^{-1} = I + β/(2(1−β))·J... with β = 1 − α.
        let beta = 1.0 - alpha;
        let c = beta / (2.0 - 2.0 * beta);
        assert!((s[[0, 0]] - alpha * (1.0 + c)).abs() < 1e-12);
        assert!((s[[0, 1]] - alpha * c).abs() < 1e-12);
    }

    #[test]
    fn span_budget_zero() {
        let t = g(3, &[(0, 1), (1, 2)]);
        let r = span_pair(&t, 0, 4, &mut seeded(2)).unwrap();
        assert_eq!(r.views.0.graph.edges(), t.edges());
        assert_eq!(r.views.1.graph.edges(), t.edges());
        assert_eq!(r.objective_history, vec![0.0]);
    }

    #[test]
    fn spa_flip_counts() {
        assert_eq!(spa_flip_count(100, 0.02), 2);
        assert_eq!(spa_flip_count(101, 0.02), 3);
        let ring: Vec<Edge> = (0..10).map(|i| (i, (i + 1) % 10)).collect();
        let r = g(10, &ring);
        let v = spa_perturb(&r, 0.2, 0.0, 5, &mut seeded(3)).unwrap();
        assert_eq!(v.report.edges_added + v.report.edges_removed, 2);
        assert_eq!(v.report.attempts, Some(1));
        assert_eq!(v.report.target_met, Some(true));
    }

    #[test]
    fn spa_unreachable_target_reports() {
        let r = g(4, &[(0, 1), (1, 2), (2, 3)]);
        let v = spa_perturb(&r, 0.3, 100.0, 3, &mut seeded(4)).unwrap();
        assert_eq!(v.report.target_met, Some(false));
        assert_eq!(v.report.attempts, Some(3));
        assert!(v.report.warning.is_some());
    }

    #[test]
    fn spec_json() {
        let s: AugmentationSpec = serde_json::from_str(r#"{"kind":"drop_edge","p":0.3,"q":0.9}"#).unwrap();
        assert_eq!(s.kind, AugmentationKind::DropEdge { p: 0.3 });
        let s: AugmentationSpec = serde_json::from_str(r#"{"kind":"span","budget":5,"seed":7}"#).unwrap();
        assert_eq!(s.seed, Some(7));
        assert!(AugmentationSpec::drop_edge(1.5).validate().is_err());
    }
}
