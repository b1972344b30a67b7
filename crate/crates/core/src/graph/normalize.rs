use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Adjacency,
    Laplacian,
}

/// Treatment of degree-zero nodes when self-loops are off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolatedNodes {
    /// Fail with a degree-zero error.
    #[default]
    Reject,
    /// Give the node an all-zero row and column (Laplacian eigenvalue 0).
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct NormalizeOptions {
    pub self_loops: bool,
    pub isolated: IsolatedNodes,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMatrix<T> {
    pub kind: MatrixKind,
    pub values: Array2<T>,
    pub self_loops: bool,
}

/// Symmetric normalization `D^{-1/2} (A [+ I]) D^{-1/2}` or its Laplacian.
pub fn normalize<T: Scalar>(g: &Graph<T>, kind: MatrixKind, self_loops: bool) -> Result<NormalizedMatrix<T>> {
    normalize_with(g, kind, NormalizeOptions { self_loops, isolated: IsolatedNodes::Reject })
}

pub fn normalize_with<T: Scalar>(g: &Graph<T>, kind: MatrixKind, opts: NormalizeOptions) -> Result<NormalizedMatrix<T>> {
    let n = g.n();
    let mut deg = g.degrees();
    if opts.self_loops {
        deg.iter_mut().for_each(|d| *d += 1);
    } else if opts.isolated == IsolatedNodes::Reject {
        if let Some(node) = deg.iter().position(|&d| d == 0) {
            return Err(Error::DegreeZero { node });
        }
    }
    let inv_sqrt: Vec<T> = deg
        .iter()
        .map(|&d| if d == 0 { T::zero() } else { T::one() / T::from_usize_lossy(d).sqrt() })
        .collect();
    let mut values = Array2::zeros((n, n));
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        values[[u, v]] = w;
        values[[v, u]] = w;
    }
    if opts.self_loops {
        for i in 0..n {
            values[[i, i]] = inv_sqrt[i] * inv_sqrt[i];
        }
    }
    if kind == MatrixKind::Laplacian {
        values.mapv_inplace(|x| -x);
        for i in 0..n {
            if deg[i] > 0 {
                values[[i, i]] += T::one();
            }
        }
    }
    Ok(NormalizedMatrix { kind, values, self_loops: opts.self_loops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Labels;

    fn g(n: usize, edges: &[(usize, usize)]) -> Graph<f64> {
        Graph::new(n, edges.to_vec(), Array2::zeros((n, 1)), Labels::None).unwrap()
    }

    #[test]
    fn k2_laplacian() {
        let m = normalize(&g(2, &[(0, 1)]), MatrixKind::Laplacian, false).unwrap();
        assert_eq!(m.values, ndarray::array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn isolated_node() {
        let h = g(3, &[(0, 1)]);
        assert!(matches!(normalize(&h, MatrixKind::Laplacian, false), Err(Error::DegreeZero { node: 2 })));
        let m = normalize_with(&h, MatrixKind::Laplacian, NormalizeOptions {
            self_loops: false,
            isolated: IsolatedNodes::Zero,
        })
        .unwrap();
        assert_eq!(m.values.row(2).sum(), 0.0);
        let s = normalize(&h, MatrixKind::Adjacency, true).unwrap();
        assert_eq!(s.values[[2, 2]], 1.0);
    }

    #[test]
    fn triangle_self_loops() {
        let m = normalize(&g(3, &[(0, 1), (1, 2), (0, 2)]), MatrixKind::Adjacency, true).unwrap();
        assert!(m.values.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }
}
