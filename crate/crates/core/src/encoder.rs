//! Shallow GCN encoder `H^{l+1} = ReLU(Ã H^l W^l)`, `Z = H^k P`, with analytic
//! gradients and spectral-norm capping.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_with, Graph, IsolatedNodes, MatrixKind, NormalizeOptions};
use crate::linalg::spectral_norm;
use crate::rng::WorkbenchRng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Layer widths `[d0, d1, ..., dk]`.
    pub dims: Vec<usize>,
    pub proj_dim: usize,
    /// Spectral-norm cap on every `W^l`; off when `None`.
    #[serde(default, alias = "L_W")]
    pub l_w: Option<f64>,
    #[serde(default = "yes")]
    pub self_loops: bool,
    #[serde(default)]
    pub normalize_output: bool,
}

fn yes() -> bool {
    true
}

impl EncoderConfig {
    pub fn new(dims: Vec<usize>, proj_dim: usize) -> Self {
        Self { dims, proj_dim, l_w: None, self_loops: true, normalize_output: false }
    }

    /// Number of GCN layers `k`.
    pub fn k(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::Config("encoder needs at least one layer (dims = [d0, d1, ...])".into()));
        }
        if self.dims.contains(&0) || self.proj_dim == 0 {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        if let Some(l) = self.l_w {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("L_W = {l} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct EncoderState<T> {
    #[serde(with = "crate::serde_rows::matrices")]
    pub weights: Vec<Array2<T>>,
    #[serde(with = "crate::serde_rows::matrix")]
    pub projection: Array2<T>,
}

impl<T: Scalar> EncoderState<T> {
    pub fn parameters(&self) -> impl Iterator<Item = &Array2<T>> {
        self.weights.iter().chain(std::iter::once(&self.projection))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Array2<T>> {
        self.weights.iter_mut().chain(std::iter::once(&mut self.projection))
    }

    /// Frobenius norm of every parameter matrix, weights first then `P`.
    pub fn norms(&self) -> Vec<f64> {
        self.parameters().map(|m| m.iter().map(|&x| x * x).sum::<T>().sqrt().to_f64_lossy()).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            projection: Array2::zeros(self.projection.raw_dim()),
        }
    }
}

/// Gradients share the parameter layout.
pub type Gradients<T> = EncoderState<T>;

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings<T> {
    pub z: Array2<T>,
    pub normalized: bool,
}

fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut WorkbenchRng) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-limit..=limit)))
}

/// Glorot-uniform initialization, capped when `l_w` is set.
pub fn init_encoder<T: Scalar>(config: &EncoderConfig, rng: &mut WorkbenchRng) -> Result<EncoderState<T>> {
    config.validate()?;
    let weights = config.dims.windows(2).map(|w| glorot(w[0], w[1], rng)).collect();
    let projection = glorot(*config.dims.last().expect("validated"), config.proj_dim, rng);
    let state = EncoderState { weights, projection };
    Ok(match config.l_w {
        Some(l) => spectral_norm_cap(state, l),
        None => state,
    })
}

/// Rescales every `W^l` whose spectral norm exceeds `l_w` onto the cap. `P` is untouched.
pub fn spectral_norm_cap<T: Scalar>(mut state: EncoderState<T>, l_w: f64) -> EncoderState<T> {
    let cap = T::lit(l_w);
    for w in &mut state.weights {
        let s = spectral_norm(w.view());
        if s > cap {
            *w *= cap / s;
        }
    }
    state
}

/// Dense propagation operator for a graph under the encoder's self-loop setting.
/// Without self-loops, isolated nodes get a zero row.
pub fn propagation_operator<T: Scalar>(g: &Graph<T>, self_loops: bool) -> Result<Array2<T>> {
    let opts = NormalizeOptions { self_loops, isolated: IsolatedNodes::Zero };
    Ok(normalize_with(g, MatrixKind::Adjacency, opts)?.values)
}

/// Intermediate activations kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    /// `Ã H^l` for each layer.
    pub propagated: Vec<Array2<T>>,
    /// `Ã H^l W^l` (pre-activation) for each layer.
    pub pre: Vec<Array2<T>>,
    /// `H^k`.
    pub hidden: Array2<T>,
    /// `H^k P` before optional row normalization.
    pub raw: Array2<T>,
    pub output: Embeddings<T>,
}

fn check_dims<T: Scalar>(state: &EncoderState<T>, config: &EncoderConfig, op: ArrayView2<T>, x: ArrayView2<T>) -> Result<()> {
    let n = x.nrows();
    if op.dim() != (n, n) {
        return Err(Error::Shape(format!("operator is {:?} but features have {n} rows", op.dim())));
    }
    if x.ncols() != config.dims[0] {
        return Err(Error::Shape(format!("features have {} columns, encoder expects {}", x.ncols(), config.dims[0])));
    }
    if state.weights.len() != config.k() {
        return Err(Error::Shape(format!("state has {} layers, config {}", state.weights.len(), config.k())));
    }
    for (l, w) in state.weights.iter().enumerate() {
        if w.dim() != (config.dims[l], config.dims[l + 1]) {
            return Err(Error::Shape(format!("W^{} is {:?}", l + 1, w.dim())));
        }
    }
    if state.projection.dim() != (config.dims[config.k()], config.proj_dim) {
        return Err(Error::Shape(format!("P is {:?}", state.projection.dim())));
    }
    Ok(())
}

/// Forward pass on an explicit operator (normalized adjacency or diffusion matrix).
pub fn forward<T: Scalar>(
    state: &EncoderState<T>,
    config: &EncoderConfig,
    op: ArrayView2<T>,
    x: ArrayView2<T>,
) -> Result<ForwardCache<T>> {
    config.validate()?;
    check_dims(state, config, op, x)?;
    let mut h = x.to_owned();
    let mut propagated = Vec::with_capacity(config.k());
    let mut pre = Vec::with_capacity(config.k());
    for w in &state.weights {
        let ah = op.dot(&h);
        let p = ah.dot(w);
        h = p.mapv(|v| v.max(T::zero()));
        propagated.push(ah);
        pre.push(p);
    }
    let raw = h.dot(&state.projection);
    let z = if config.normalize_output { normalize_rows(&raw)? } else { raw.clone() };
    Ok(ForwardCache {
        propagated,
        pre,
        hidden: h,
        raw,
        output: Embeddings { z, normalized: config.normalize_output },
    })
}

pub fn normalize_rows<T: Scalar>(m: &Array2<T>) -> Result<Array2<T>> {
    let mut out = m.clone();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() || !norm.is_finite() {
            return Err(Error::DegenerateInput { node: i });
        }
        row /= norm;
    }
    Ok(out)
}

/// Backward pass through row normalization `z = r/‖r‖`.
pub fn normalize_rows_backward<T: Scalar>(raw: &Array2<T>, z: &Array2<T>, upstream: &Array2<T>) -> Array2<T> {
    let mut out = Array2::zeros(raw.raw_dim());
    for i in 0..raw.nrows() {
        let norm = raw.row(i).iter().map(|&v| v * v).sum::<T>().sqrt();
        let zi = z.row(i);
        let gi = upstream.row(i);
        let dot = zi.dot(&gi);
        Zip::from(out.row_mut(i)).and(zi).and(gi).for_each(|o, &zv, &gv| *o = (gv - zv * dot) / norm);
    }
    out
}

pub fn encode<T: Scalar>(
    state: &EncoderState<T>,
    config: &EncoderConfig,
    op: ArrayView2<T>,
    x: ArrayView2<T>,
) -> Result<Embeddings<T>> {
    Ok(forward(state, config, op, x)?.output)
}

/// Encodes a graph using the operator implied by `config.self_loops`.
pub fn encode_graph<T: Scalar>(state: &EncoderState<T>, config: &EncoderConfig, g: &Graph<T>) -> Result<Embeddings<T>> {
    let op = propagation_operator(g, config.self_loops)?;
    encode(state, config, op.view(), g.features().view())
}

/// Parameter gradients given `dL/dZ` and a cached forward pass.
pub fn backward<T: Scalar>(
    state: &EncoderState<T>,
    op: ArrayView2<T>,
    cache: &ForwardCache<T>,
    upstream: &Array2<T>,
) -> Result<Gradients<T>> {
    if upstream.dim() != cache.output.z.dim() {
        return Err(Error::Shape(format!("upstream is {:?}, embeddings {:?}", upstream.dim(), cache.output.z.dim())));
    }
    let d_raw = if cache.output.normalized {
        normalize_rows_backward(&cache.raw, &cache.output.z, upstream)
    } else {
        upstream.clone()
    };
    let projection = cache.hidden.t().dot(&d_raw);
    let mut dh = d_raw.dot(&state.projection.t());
    let mut weights = vec![Array2::zeros((0, 0)); state.weights.len()];
    for l in (0..state.weights.len()).rev() {
        let mut dpre = dh;
        Zip::from(&mut dpre).and(&cache.pre[l]).for_each(|g, &p| {
            if p <= T::zero() {
                *g = T::zero();
            }
        });
        weights[l] = cache.propagated[l].t().dot(&dpre);
        dh = op.t().dot(&dpre.dot(&state.weights[l].t()));
    }
    Ok(EncoderState { weights, projection })
}

/// Forward and backward in one call.
pub fn encode_grad<T: Scalar>(
    state: &EncoderState<T>,
    config: &EncoderConfig,
    op: ArrayView2<T>,
    x: ArrayView2<T>,
    upstream: &Array2<T>,
) -> Result<Gradients<T>> {
    let cache = forward(state, config, op, x)?;
    backward(state, op, &cache, upstream)
}
