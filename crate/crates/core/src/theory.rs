//! InfoNCE bound quantities and empirical checks of the supporting lemmas.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoder::{forward, init_encoder, propagation_operator, EncoderConfig};
use crate::error::{Error, Result};
use crate::graph::{generate_synthetic, local_changes, perturbation_strength, Edge, GeneratorParams, Graph, LocalChange};
use crate::linalg::{frobenius_norm, spectral_norm};
use crate::rng::{seeded, sub_seed, WorkbenchRng};
use crate::scalar::Scalar;

/// Inputs of the bound: graph, encoder and perturbation constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d: usize,
    pub n_v: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub k: u32,
    pub l_w: f64,
    pub x_norm: f64,
    pub p_norm: f64,
    pub tau: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub c_z: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundInputs {
    /// Worked example: 1000 nodes, 4096-dim embeddings, degrees 10..30, one layer.
    pub fn worked_example() -> Self {
        Self {
            n: 1000,
            d: 4096,
            n_v: 30,
            d_min: 10.0,
            d_max: 30.0,
            k: 1,
            l_w: 0.5,
            x_norm: 1.0,
            p_norm: 1.0,
            tau: 0.5,
            delta: 0.1,
            c_z: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!("delta = {} must lie in [0, 1)", self.delta)));
        }
        if self.n < 2 || self.d == 0 || self.n_v == 0 || self.k == 0 {
            return Err(Error::Domain("n >= 2, d, n_v and k must be positive".into()));
        }
        let pos = [
            ("d_min", self.d_min),
            ("d_max", self.d_max),
            ("L_W", self.l_w),
            ("x_norm", self.x_norm),
            ("p_norm", self.p_norm),
            ("tau", self.tau),
            ("c_z", self.c_z),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be positive")));
            }
        }
        if self.d_min < 1.0 || self.d_min > self.d_max {
            return Err(Error::Domain(format!("need 1 <= d_min <= d_max, got {} and {}", self.d_min, self.d_max)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundResult {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
}

pub fn a_constant(n_v: f64, d_min: f64, d_max: f64) -> f64 {
    (n_v * d_max).sqrt() / d_min
}

pub fn b_constant(delta: f64) -> f64 {
    delta.sqrt() + delta / (1.0 - delta).powf(1.5)
}

/// `ε = k A^k B L_W^k ‖X‖₂ ‖P‖₂ / c_z`.
pub fn epsilon(k: u32, a: f64, b: f64, l_w: f64, x_norm: f64, p_norm: f64, c_z: f64) -> f64 {
    let k_i = k as i32;
    k as f64 * a.powi(k_i) * b * l_w.powi(k_i) * x_norm * p_norm / c_z
}

/// `ε′ = √(2 ln n / d)`.
pub fn epsilon_prime(n: usize, d: usize) -> f64 {
    (2.0 * (n as f64).ln() / d as f64).sqrt()
}

pub fn bound_params(inputs: &BoundInputs) -> Result<BoundParams> {
    inputs.validate()?;
    let a = a_constant(inputs.n_v as f64, inputs.d_min, inputs.d_max);
    let b = b_constant(inputs.delta);
    let eps = epsilon(inputs.k, a, b, inputs.l_w, inputs.x_norm, inputs.p_norm, inputs.c_z);
    Ok(BoundParams { a, b, epsilon: eps, epsilon_prime: epsilon_prime(inputs.n, inputs.d) })
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Lower and upper InfoNCE bounds for explicit `ε`, `ε′`, evaluated as softplus in log space.
pub fn bounds_from_eps(n: usize, tau: f64, eps: f64, eps_prime: f64) -> (f64, f64) {
    let log_rest = ((n - 1) as f64).ln();
    let lower = softplus(log_rest + (-eps_prime - 1.0) / tau);
    let upper = softplus(log_rest + (eps_prime - 1.0 + eps * eps / 2.0) / tau);
    (lower, upper)
}

pub fn infonce_bounds(inputs: &BoundInputs) -> Result<BoundResult> {
    let p = bound_params(inputs)?;
    let (lower, upper) = bounds_from_eps(inputs.n, inputs.tau, p.epsilon, p.epsilon_prime);
    Ok(BoundResult {
        a: p.a,
        b: p.b,
        epsilon: p.epsilon,
        epsilon_prime: p.epsilon_prime,
        lower,
        upper,
        gap: upper - lower,
    })
}

/// Settings shared by the graph-based lemma trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrialSpec {
    pub family: GeneratorParams,
    /// Target perturbation strength; sampled perturbations land within ±10%.
    pub delta: f64,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_l_w")]
    pub l_w: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_proj")]
    pub proj_dim: usize,
}

fn default_l_w() -> f64 {
    0.5
}

fn default_hidden() -> usize {
    16
}

fn default_proj() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: u8,
    pub trials: usize,
    pub passes: usize,
    /// Smallest `RHS − LHS` seen over all trials and nodes.
    pub worst_margin: f64,
    pub pass_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_fraction: Option<f64>,
    /// Largest `|RHS − LHS|` at the node attaining δ (equality case of the first lemma).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality_gap: Option<f64>,
    pub achieved_deltas: Vec<f64>,
    pub params: serde_json::Value,
}

pub const MARGIN_TOLERANCE: f64 = -1e-9;

const MAX_PROPOSALS_PER_EDGE: usize = 20;
const MAX_RESTARTS: usize = 20;

/// Randomly toggles node pairs (drop or add with equal probability) until the
/// perturbation strength lands in `[0.9, 1.1]·target`; overshooting flips are undone.
pub fn sample_perturbation<T: Scalar>(
    g: &Graph<T>,
    k: usize,
    target: f64,
    rng: &mut WorkbenchRng,
) -> Result<(Graph<T>, f64)> {
    if target == 0.0 {
        return Ok((g.clone(), 0.0));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("delta target {target} must lie in [0, 1)")));
    }
    let n = g.n();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let (lo, hi) = (0.9 * target, 1.1 * target);
    let budget = MAX_PROPOSALS_PER_EDGE * (g.num_edges() + n);
    let mut best = 0.0f64;
    for _ in 0..MAX_RESTARTS {
        let mut edges: Vec<Edge> = g.edges().to_vec();
        for _ in 0..budget {
            let mut cand = edges.clone();
            let drop = !cand.is_empty() && rng.random_bool(0.5);
            if drop {
                cand.remove(rng.random_range(0..cand.len()));
            } else {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                let e = (u.min(v), u.max(v));
                if u == v || cand.binary_search(&e).is_ok() {
                    continue;
                }
                let pos = cand.binary_search(&e).unwrap_err();
                cand.insert(pos, e);
            }
            let gp = g.with_sorted_edges(cand.clone());
            let d = perturbation_strength(g, &gp, k)?.delta;
            if d > hi {
                continue;
            }
            edges = cand;
            best = best.max(d);
            if d >= lo {
                return Ok((gp, d));
            }
        }
    }
    Err(Error::Sampling { target, achieved: best })
}

/// Dense adjacency of both k-hop subgraphs around a node, indexed by the union of their node sets.
struct LocalPair {
    a: Array2<f64>,
    a_prime: Array2<f64>,
    /// Positions of the original subgraph's nodes inside the union.
    original: Vec<usize>,
}

fn local_pair(c: &LocalChange) -> LocalPair {
    let mut union: Vec<usize> = c.nodes.iter().chain(&c.nodes_prime).copied().collect();
    union.sort_unstable();
    union.dedup();
    let pos = |x: usize| union.binary_search(&x).expect("node in union");
    let m = union.len();
    let mut a = Array2::zeros((m, m));
    let mut a_prime = Array2::zeros((m, m));
    for &(u, v) in &c.edges {
        a[[pos(u), pos(v)]] = 1.0;
        a[[pos(v), pos(u)]] = 1.0;
    }
    for &(u, v) in &c.edges_prime {
        a_prime[[pos(u), pos(v)]] = 1.0;
        a_prime[[pos(v), pos(u)]] = 1.0;
    }
    LocalPair { original: c.nodes.iter().map(|&x| pos(x)).collect(), a, a_prime }
}

fn inv_sqrt_degrees(a: &Array2<f64>) -> Vec<f64> {
    a.rows().into_iter().map(|r| {
        let d = r.sum();
        if d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    }).collect()
}

fn sym_normalize(a: &Array2<f64>) -> Array2<f64> {
    let s = inv_sqrt_degrees(a);
    Array2::from_shape_fn(a.raw_dim(), |(i, j)| a[[i, j]] * s[i] * s[j])
}

/// Subgraph statistics `(n_v, d_min, d_max)` with degrees counted inside the subgraph.
fn subgraph_stats(c: &LocalChange, pair: &LocalPair) -> (f64, f64, f64) {
    let degs: Vec<f64> = pair.original.iter().map(|&i| pair.a.row(i).sum()).collect();
    let d_min = degs.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = degs.iter().copied().fold(0.0, f64::max);
    (c.nodes.len() as f64, d_min, d_max)
}

/// Per-node `(lhs, rhs)` pairs; nodes with an empty k-hop edge set are skipped.
pub type NodeSides = Vec<(usize, f64, f64)>;

/// `‖A_v − A′_v‖_F ≤ √(2 δ |E_v|)`.
pub fn lemma1_sides(changes: &[LocalChange], delta: f64) -> NodeSides {
    changes
        .iter()
        .filter(|c| !c.edges.is_empty())
        .map(|c| {
            let p = local_pair(c);
            let lhs = frobenius_norm((&p.a - &p.a_prime).view());
            (c.node, lhs, (2.0 * delta * c.edges.len() as f64).sqrt())
        })
        .collect()
}

/// Margins `RHS − LHS` of the three degree inequalities around one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegreeMargins {
    /// Worst `δ d_u − |d_u − d′_u|` over the subgraph's nodes.
    pub degree: f64,
    pub frobenius: f64,
    pub spectral: f64,
}

/// Degree-matrix checks on the node set of `𝒢_v^k`, with degrees counted inside
/// each subgraph (a node missing from `𝒢′_v^k` has degree 0 and `0^{-1/2} := 0`).
pub fn lemma2_components(c: &LocalChange, delta: f64) -> (DegreeMargins, [(f64, f64); 3]) {
    let p = local_pair(c);
    let (n_v, d_min, _) = subgraph_stats(c, &p);
    let s = inv_sqrt_degrees(&p.a);
    let sp = inv_sqrt_degrees(&p.a_prime);
    let mut worst_deg = (0.0, 0.0);
    let mut fro_sq = 0.0;
    let mut spec: f64 = 0.0;
    for &i in &p.original {
        let d = p.a.row(i).sum();
        let dp = p.a_prime.row(i).sum();
        let (l, r) = ((d - dp).abs(), delta * d);
        if r - l < worst_deg.1 - worst_deg.0 {
            worst_deg = (l, r);
        }
        let diff = (s[i] - sp[i]).abs();
        fro_sq += diff * diff;
        spec = spec.max(diff);
    }
    let per = delta / (2.0 * d_min.sqrt() * (1.0 - delta).powf(1.5));
    let sides = [worst_deg, (fro_sq.sqrt(), per * n_v.sqrt()), (spec, per)];
    let m = DegreeMargins {
        degree: sides[0].1 - sides[0].0,
        frobenius: sides[1].1 - sides[1].0,
        spectral: sides[2].1 - sides[2].0,
    };
    (m, sides)
}

/// Worst of the three degree inequalities per node.
pub fn lemma2_sides(changes: &[LocalChange], delta: f64) -> NodeSides {
    changes
        .iter()
        .filter(|c| !c.edges.is_empty())
        .map(|c| {
            let (_, sides) = lemma2_components(c, delta);
            let (lhs, rhs) = sides
                .into_iter()
                .min_by(|x, y| (x.1 - x.0).partial_cmp(&(y.1 - y.0)).expect("finite"))
                .expect("three sides");
            (c.node, lhs, rhs)
        })
        .collect()
}

/// `‖Ã_v − Ã′_v‖_F ≤ A_v B`.
pub fn lemma3_sides(changes: &[LocalChange], delta: f64) -> NodeSides {
    let b = b_constant(delta);
    changes
        .iter()
        .filter(|c| !c.edges.is_empty())
        .map(|c| {
            let p = local_pair(c);
            let (n_v, d_min, d_max) = subgraph_stats(c, &p);
            let lhs = frobenius_norm((&sym_normalize(&p.a) - &sym_normalize(&p.a_prime)).view());
            (c.node, lhs, a_constant(n_v, d_min, d_max) * b)
        })
        .collect()
}

/// Largest `A_v` over nodes with a non-empty k-hop edge set.
pub fn worst_a(changes: &[LocalChange]) -> f64 {
    changes
        .iter()
        .filter(|c| !c.edges.is_empty())
        .map(|c| {
            let p = local_pair(c);
            let (n_v, d_min, d_max) = subgraph_stats(c, &p);
            a_constant(n_v, d_min, d_max)
        })
        .fold(0.0, f64::max)
}

/// Encoder-output checks: `‖h_v − h′_v‖ ≤ k (A L_W)^k B ‖X‖₂` and
/// `sim(z_v, z′_v) ≥ 1 − ε²/2`, with `A` the largest local constant.
pub struct EncoderSides {
    pub lemma4: NodeSides,
    pub lemma5: NodeSides,
    pub epsilon: f64,
    pub c_z: f64,
}

pub fn encoder_sides<T: Scalar>(
    g: &Graph<T>,
    g_prime: &Graph<T>,
    changes: &[LocalChange],
    delta: f64,
    config: &EncoderConfig,
    state: &crate::encoder::EncoderState<T>,
) -> Result<EncoderSides> {
    let l_w = config.l_w.ok_or_else(|| Error::Config("encoder checks need L_W enforced".into()))?;
    if !config.normalize_output || config.self_loops {
        return Err(Error::Config("encoder checks need normalized output and no self-loops".into()));
    }
    let op = propagation_operator(g, false)?;
    let op_p = propagation_operator(g_prime, false)?;
    let x = g.features().view();
    let unnormalized = EncoderConfig { normalize_output: false, ..config.clone() };
    let f = forward(state, &unnormalized, op.view(), x)?;
    let fp = forward(state, &unnormalized, op_p.view(), x)?;
    let x_norm = spectral_norm(x).to_f64_lossy();
    let p_norm = spectral_norm(state.projection.view()).to_f64_lossy();
    let k = config.k() as u32;
    let a = worst_a(changes);
    let b = b_constant(delta);
    let rhs4 = k as f64 * (a * l_w).powi(k as i32) * b * x_norm;
    let raw_norm = |m: &Array2<T>, i: usize| m.row(i).iter().map(|&v| v * v).sum::<T>().sqrt().to_f64_lossy();
    let c_z = (0..g.n())
        .flat_map(|i| [raw_norm(&f.raw, i), raw_norm(&fp.raw, i)])
        .fold(f64::INFINITY, f64::min);
    let eps = epsilon(k, a, b, l_w, x_norm, p_norm, c_z);
    let mut lemma4 = Vec::new();
    let mut lemma5 = Vec::new();
    for c in changes.iter().filter(|c| !c.edges.is_empty()) {
        let v = c.node;
        let dh: f64 = f
            .hidden
            .row(v)
            .iter()
            .zip(fp.hidden.row(v))
            .map(|(&a, &b)| (a - b).to_f64_lossy().powi(2))
            .sum::<f64>()
            .sqrt();
        lemma4.push((v, dh, rhs4));
        let (na, nb) = (raw_norm(&f.raw, v), raw_norm(&fp.raw, v));
        let dot: f64 = f.raw.row(v).iter().zip(fp.raw.row(v)).map(|(&a, &b)| (a * b).to_f64_lossy()).sum();
        let cos = if na > 0.0 && nb > 0.0 { dot / (na * nb) } else { 0.0 };
        lemma5.push((v, 1.0 - eps * eps / 2.0, cos));
    }
    Ok(EncoderSides { lemma4, lemma5, epsilon: eps, c_z })
}

fn margin(sides: &NodeSides) -> f64 {
    sides.iter().map(|&(_, l, r)| r - l).fold(f64::INFINITY, f64::min)
}

/// Runs `trials` randomized checks of lemma `id` ∈ {1, …, 5}.
pub fn verify_lemma<T: Scalar>(id: u8, spec: &LemmaTrialSpec) -> Result<LemmaReport> {
    if !(1..=5).contains(&id) {
        return Err(Error::Argument(format!("graph lemma id must be 1..=5, got {id} (use verify_lemma6)")));
    }
    if spec.k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    let mut passes = 0;
    let mut worst = f64::INFINITY;
    let mut eq_gap: f64 = 0.0;
    let mut deltas = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let ts = sub_seed(spec.seed, t as u64);
        let g: Graph<T> = generate_synthetic(&spec.family, sub_seed(ts, 0))?;
        let (gp, delta) = sample_perturbation(&g, spec.k, spec.delta, &mut seeded(sub_seed(ts, 1)))?;
        deltas.push(delta);
        let changes = local_changes(&g, &gp, spec.k)?;
        let sides = match id {
            1 => lemma1_sides(&changes, delta),
            2 => lemma2_sides(&changes, delta),
            3 => lemma3_sides(&changes, delta),
            _ => {
                let mut dims = vec![g.features().ncols()];
                dims.extend(std::iter::repeat_n(spec.hidden, spec.k));
                let config = EncoderConfig {
                    dims,
                    proj_dim: spec.proj_dim,
                    l_w: Some(spec.l_w),
                    self_loops: false,
                    normalize_output: true,
                };
                let state = init_encoder(&config, &mut seeded(sub_seed(ts, 2)))?;
                let e = encoder_sides(&g, &gp, &changes, delta, &config, &state)?;
                if id == 4 {
                    e.lemma4
                } else {
                    e.lemma5
                }
            }
        };
        if id == 1 && delta > 0.0 {
            if let Ok(s) = crate::graph::strength_from_changes(&changes, spec.k) {
                if let Some(&(_, l, r)) = sides.iter().find(|x| x.0 == s.argmax_node) {
                    eq_gap = eq_gap.max((r - l).abs());
                }
            }
        }
        let m = margin(&sides);
        worst = worst.min(m);
        if m >= MARGIN_TOLERANCE {
            passes += 1;
        }
    }
    Ok(LemmaReport {
        lemma: id,
        trials: spec.trials,
        passes,
        worst_margin: worst,
        pass_fraction: if spec.trials == 0 { 0.0 } else { passes as f64 / spec.trials as f64 },
        expected_fraction: None,
        equality_gap: (id == 1).then_some(eq_gap),
        achieved_deltas: deltas,
        params: serde_json::to_value(spec)?,
    })
}

/// Monte Carlo check of the negative-pair concentration: fraction of random
/// unit-vector pairs in `R^d` with `|⟨z, z′⟩| ≤ √(2 ln n / d)`.
pub fn verify_lemma6(n: usize, d: usize, pairs: usize, seed: u64) -> Result<LemmaReport> {
    if n < 2 || d == 0 || pairs == 0 {
        return Err(Error::Argument("lemma 6 needs n >= 2, d >= 1, pairs >= 1".into()));
    }
    let eps = epsilon_prime(n, d);
    let mut rng = seeded(seed);
    let mut a = vec![0.0f64; d];
    let mut b = vec![0.0f64; d];
    let mut passes = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        for x in a.iter_mut().chain(b.iter_mut()) {
            *x = StandardNormal.sample(&mut rng);
        }
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
        let m = eps - cos.abs();
        worst = worst.min(m);
        if m >= 0.0 {
            passes += 1;
        }
    }
    Ok(LemmaReport {
        lemma: 6,
        trials: pairs,
        passes,
        worst_margin: worst,
        pass_fraction: passes as f64 / pairs as f64,
        expected_fraction: Some(1.0 - 2.0 / n as f64),
        equality_gap: None,
        achieved_deltas: Vec::new(),
        params: serde_json::json!({"n": n, "d": d, "pairs": pairs, "seed": seed, "epsilon_prime": eps}),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Positive cosines in `[1 − ε²/2, 1]`, negative cosines within `±ε′`.
    #[default]
    Hypotheses,
    /// Same negatives, positive cosines pinned at `1 − ε²` (below the hypothesis).
    NegativeControl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub loss: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
    pub min_positive_cos: f64,
    pub max_negative_abs_cos: f64,
}

/// Sparse view of a constructed embedding pair: `z_v = s_v e_{π(v)}`, `z′_u` dense.
pub struct ConstructedPair {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub z_prime: Array2<f64>,
}

impl ConstructedPair {
    /// Dense `Z` (rows are signed basis vectors).
    pub fn z(&self) -> Array2<f64> {
        let n = self.perm.len();
        let mut z = Array2::zeros((n, self.z_prime.ncols()));
        for v in 0..n {
            z[[v, self.perm[v]]] = self.signs[v];
        }
        z
    }

    /// Cosine similarity matrix `S_vu = sim(z_v, z′_u)`.
    pub fn similarities(&self) -> Array2<f64> {
        let n = self.perm.len();
        let norms: Vec<f64> = self.z_prime.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        Array2::from_shape_fn((n, n), |(v, u)| self.signs[v] * self.z_prime[[u, self.perm[v]]] / norms[u])
    }
}

/// Builds unit embeddings meeting (or, for the control, violating) the positive
/// and negative similarity hypotheses.
pub fn construct_embeddings(
    n: usize,
    d: usize,
    eps: f64,
    eps_prime: f64,
    kind: Construction,
    rng: &mut WorkbenchRng,
) -> Result<ConstructedPair> {
    if n < 2 || d < 2 * n {
        return Err(Error::Constructibility(format!(
            "need d >= 2n (got d = {d}, n = {n}); near-orthogonality also needs d >= 2 ln n / eps'^2 = {:.1}",
            2.0 * (n.max(2) as f64).ln() / (eps_prime * eps_prime)
        )));
    }
    let mut dims: Vec<usize> = (0..d).collect();
    for i in 0..2 * n {
        let j = rng.random_range(i..d);
        dims.swap(i, j);
    }
    let perm = dims[..n].to_vec();
    let spare = dims[n..2 * n].to_vec();
    let signs: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let clip = 0.999 * eps_prime;
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid");
    let mut z_prime = Array2::zeros((n, d));
    for u in 0..n {
        let mut sum_sq = 0.0;
        for j in 0..n {
            if j == u {
                continue;
            }
            let c = normal.sample(rng).clamp(-clip, clip);
            z_prime[[u, perm[j]]] = c * signs[j];
            sum_sq += c * c;
        }
        let a_max = (1.0 - sum_sq).max(0.0).sqrt();
        let a = match kind {
            Construction::Hypotheses => {
                let a_min = (1.0 - eps * eps / 2.0).max(-1.0);
                if a_min > a_max {
                    return Err(Error::Constructibility(format!(
                        "positive cosine {a_min:.4} unreachable with negative mass {sum_sq:.4}; increase d or eps"
                    )));
                }
                rng.random_range(a_min..=a_max)
            }
            Construction::NegativeControl => {
                let a = 1.0 - eps * eps;
                if a.abs() > a_max {
                    return Err(Error::Constructibility("negative control does not fit in the unit sphere".into()));
                }
                a
            }
        };
        z_prime[[u, perm[u]]] = a * signs[u];
        z_prime[[u, spare[u]]] = (1.0 - sum_sq - a * a).max(0.0).sqrt();
    }
    Ok(ConstructedPair { perm, signs, z_prime })
}

/// InfoNCE from a cosine-similarity matrix.
pub fn infonce_from_similarities(s: &Array2<f64>, tau: f64) -> f64 {
    let n = s.nrows();
    let mut total = 0.0;
    for v in 0..n {
        let row = s.row(v);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) / tau;
        let lse = m + row.iter().map(|&x| (x / tau - m).exp()).sum::<f64>().ln();
        total += lse - row[v] / tau;
    }
    total / n as f64
}

/// Builds a constructed pair and checks its InfoNCE loss against the bounds.
pub fn verify_theorem(
    n: usize,
    d: usize,
    tau: f64,
    eps: f64,
    eps_prime: f64,
    seed: u64,
    kind: Construction,
) -> Result<TheoremCheck> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau = {tau} must be positive")));
    }
    let pair = construct_embeddings(n, d, eps, eps_prime, kind, &mut seeded(seed))?;
    let s = pair.similarities();
    let loss = infonce_from_similarities(&s, tau);
    let (lower, upper) = bounds_from_eps(n, tau, eps, eps_prime);
    let mut min_pos = f64::INFINITY;
    let mut max_neg: f64 = 0.0;
    for ((v, u), &x) in s.indexed_iter() {
        if u == v {
            min_pos = min_pos.min(x);
        } else {
            max_neg = max_neg.max(x.abs());
        }
    }
    Ok(TheoremCheck {
        loss,
        lower,
        upper,
        within: loss >= lower - 1e-9 && loss <= upper + 1e-9,
        min_positive_cos: min_pos,
        max_negative_abs_cos: max_neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_values() {
        let r = infonce_bounds(&BoundInputs::worked_example()).unwrap();
        assert!((r.a - 3.0).abs() < 1e-12);
        assert!((r.b - 0.433349).abs() < 1e-6);
        assert!((r.epsilon - 0.650).abs() < 1e-3);
        assert!((r.epsilon_prime - 0.05805).abs() < 1e-2);
        assert!((r.epsilon_prime - (2.0 * 1000f64.ln() / 4096.0).sqrt()).abs() < 1e-15);
        assert!((r.lower - 4.7989).abs() < 1e-2);
        assert!((r.upper - 5.4497).abs() < 1e-2);
    }

    #[test]
    fn delta_zero_and_domain() {
        let mut i = BoundInputs::worked_example();
        i.delta = 0.0;
        let p = bound_params(&i).unwrap();
        assert_eq!((p.b, p.epsilon), (0.0, 0.0));
        i.delta = 1.0;
        assert!(matches!(bound_params(&i), Err(Error::Domain(_))));
    }

    #[test]
    fn collapsed_bounds() {
        let (lo, hi) = bounds_from_eps(50, 0.5, 0.0, 0.0);
        assert_eq!(lo, hi);
        assert!((lo - (1.0 + 49.0 * (-2.0f64).exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_construction_loss() {
        let c = verify_theorem(20, 64, 0.5, 0.0, 0.0, 1, Construction::Hypotheses).unwrap();
        assert!((c.loss - c.lower).abs() < 1e-12 && c.within);
    }

    #[test]
    fn small_d_is_rejected() {
        assert!(matches!(
            verify_theorem(100, 150, 0.5, 0.5, 0.3, 1, Construction::Hypotheses),
            Err(Error::Constructibility(_))
        ));
    }

    #[test]
    fn zero_target_is_identity() {
        let g: Graph<f64> = generate_synthetic(&GeneratorParams::er(10, 0.4), 3).unwrap();
        let (gp, d) = sample_perturbation(&g, 1, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(gp.edges(), g.edges());
        let ch = local_changes(&g, &gp, 1).unwrap();
        assert!(margin(&lemma2_sides(&ch, 0.0)) >= 0.0);
    }
}
