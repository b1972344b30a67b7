use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Edge, Graph, Labels};
use crate::error::{Error, Result};
use crate::rng::{seeded, sub_seed, WorkbenchRng};
use crate::scalar::Scalar;

/// Node features attached by the generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// One-hot node identity (`n × n`).
    #[default]
    Identity,
    /// i.i.d. standard normal features.
    Gaussian { dim: usize },
    /// Standard normal noise around a random per-class mean of scale `signal`.
    /// Falls back to plain Gaussian features when the graph has no node labels.
    ClassGaussian { dim: usize, signal: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorParams {
    Er {
        n: usize,
        p: f64,
        #[serde(default)]
        features: FeatureSpec,
    },
    Sbm {
        block_sizes: Vec<usize>,
        p_in: f64,
        p_out: f64,
        #[serde(default)]
        features: FeatureSpec,
    },
}

impl GeneratorParams {
    pub fn er(n: usize, p: f64) -> Self {
        GeneratorParams::Er { n, p, features: FeatureSpec::Identity }
    }

    pub fn sbm(block_sizes: Vec<usize>, p_in: f64, p_out: f64) -> Self {
        GeneratorParams::Sbm { block_sizes, p_in, p_out, features: FeatureSpec::Identity }
    }

    pub fn with_features(mut self, spec: FeatureSpec) -> Self {
        match &mut self {
            GeneratorParams::Er { features, .. } | GeneratorParams::Sbm { features, .. } => *features = spec,
        }
        self
    }

    pub fn node_count(&self) -> usize {
        match self {
            GeneratorParams::Er { n, .. } => *n,
            GeneratorParams::Sbm { block_sizes, .. } => block_sizes.iter().sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {p} is not a probability")))
            }
        };
        match self {
            GeneratorParams::Er { n, p, .. } => {
                if *n == 0 {
                    return Err(Error::Parameter("er requires n >= 1".into()));
                }
                prob("p", *p)
            }
            GeneratorParams::Sbm { block_sizes, p_in, p_out, .. } => {
                if block_sizes.is_empty() || block_sizes.contains(&0) {
                    return Err(Error::Parameter("sbm block sizes must be >= 1".into()));
                }
                prob("p_in", *p_in)?;
                prob("p_out", *p_out)
            }
        }
    }
}

/// Samples an Erdős–Rényi or stochastic-block-model graph. Deterministic in `seed`.
pub fn generate_synthetic<T: Scalar>(params: &GeneratorParams, seed: u64) -> Result<Graph<T>> {
    params.validate()?;
    let mut rng = seeded(sub_seed(seed, 0));
    let (n, edges, labels, spec) = match params {
        GeneratorParams::Er { n, p, features } => {
            let mut edges = Vec::new();
            for u in 0..*n {
                for v in u + 1..*n {
                    if rng.random_bool(*p) {
                        edges.push((u, v));
                    }
                }
            }
            (*n, edges, Labels::None, features)
        }
        GeneratorParams::Sbm { block_sizes, p_in, p_out, features } => {
            let block: Vec<usize> =
                block_sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
            let n = block.len();
            let mut edges: Vec<Edge> = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let p = if block[u] == block[v] { *p_in } else { *p_out };
                    if rng.random_bool(p) {
                        edges.push((u, v));
                    }
                }
            }
            (n, edges, Labels::Node(block), features)
        }
    };
    let mut frng = seeded(sub_seed(seed, 1));
    let features = make_features::<T>(spec, n, &labels, &mut frng);
    Graph::new(n, edges, features, labels)
}

fn make_features<T: Scalar>(spec: &FeatureSpec, n: usize, labels: &Labels, rng: &mut WorkbenchRng) -> Array2<T> {
    let normal = |rng: &mut WorkbenchRng| -> T { T::lit(StandardNormal.sample(rng)) };
    match spec {
        FeatureSpec::Identity => Array2::eye(n),
        FeatureSpec::Gaussian { dim } => Array2::from_shape_simple_fn((n, *dim), || normal(rng)),
        FeatureSpec::ClassGaussian { dim, signal } => match labels {
            Labels::Node(l) => {
                let classes = l.iter().copied().max().map_or(0, |m| m + 1);
                let means = Array2::from_shape_simple_fn((classes, *dim), || normal(rng) * T::lit(*signal));
                let mut x = Array2::from_shape_simple_fn((n, *dim), || normal(rng));
                for (i, &c) in l.iter().enumerate() {
                    let mut row = x.row_mut(i);
                    row += &means.row(c);
                }
                x
            }
            _ => Array2::from_shape_simple_fn((n, *dim), || normal(rng)),
        },
    }
}

/// Graph-classification dataset: `per_family` graphs from each family, labelled by family index.
pub fn generate_graph_dataset<T: Scalar>(
    families: &[GeneratorParams],
    per_family: usize,
    seed: u64,
) -> Result<Vec<Graph<T>>> {
    let mut out = Vec::with_capacity(families.len() * per_family);
    for i in 0..per_family {
        for (label, params) in families.iter().enumerate() {
            let s = sub_seed(seed, (i * families.len() + label) as u64 + 1);
            let g: Graph<T> = generate_synthetic(params, s)?;
            out.push(Graph { labels: Labels::Graph(label), ..g });
        }
    }
    Ok(out)
}
