//! Dense linear-algebra helpers: norms, symmetric solves, least squares.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn max_asymmetry<T: Scalar>(m: ArrayView2<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}

pub fn frobenius_norm<T: Scalar>(m: ArrayView2<T>) -> T {
    m.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn vector_norm<T: Scalar>(v: ArrayView1<T>) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Largest singular value by power iteration on `MᵀM`.
///
/// Iterates until the Rayleigh quotient changes by less than ~1e-15 relative
/// (or `4·eps` for low-precision scalars).
pub fn spectral_norm<T: Scalar>(m: ArrayView2<T>) -> T {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return T::zero();
    }
    let tol = T::lit(1e-15).max(T::epsilon() * T::lit(4.0));
    // Deterministic, non-symmetric start vector.
    let mut v = Array1::from_shape_fn(cols, |i| T::one() + T::lit(((i * 7919) % 97) as f64 / 97.0));
    let norm = vector_norm(v.view());
    v /= norm;
    let mut previous = T::zero();
    for _ in 0..100_000 {
        let mv = m.dot(&v);
        let rayleigh = mv.dot(&mv);
        let w = m.t().dot(&mv);
        let wn = vector_norm(w.view());
        if wn == T::zero() {
            return T::zero();
        }
        v = w / wn;
        if (rayleigh - previous).abs() <= tol * rayleigh {
            break;
        }
        previous = rayleigh;
    }
    let mv = m.dot(&v);
    vector_norm(mv.view())
}

/// Cholesky factor `L` with `A = L Lᵀ`; fails if `A` is not positive definite.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("cholesky needs a square matrix, got {:?}", a.dim())));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= T::zero() || !diag.is_finite() {
            return Err(Error::Numerical(format!("matrix not positive definite at pivot {j}")));
        }
        let djj = diag.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn solve_spd<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    let l = cholesky(a)?;
    let n = l.nrows();
    if b.nrows() != n {
        return Err(Error::Shape(format!("rhs has {} rows, expected {n}", b.nrows())));
    }
    let mut x = b.to_owned();
    for col in 0..x.ncols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[[i, col]];
            for k in 0..i {
                s -= l[[i, k]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * x[[k, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Solves the general square system `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Shape(format!("solve: A is {:?}, B is {:?}", a.dim(), b.dim())));
    }
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    let scale = m.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap())
            .unwrap();
        if m[[pivot, col]].abs() <= scale * T::epsilon() * T::from_usize_lossy(n) {
            return Err(Error::Numerical("singular linear system".into()));
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            for k in 0..x.ncols() {
                x.swap([pivot, k], [col, k]);
            }
        }
        let p = m[[col, col]];
        for i in (col + 1)..n {
            let f = m[[i, col]] / p;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[[col, k]];
                m[[i, k]] -= f * v;
            }
            for k in 0..x.ncols() {
                let v = x[[col, k]];
                x[[i, k]] -= f * v;
            }
        }
    }
    for i in (0..n).rev() {
        for k in 0..x.ncols() {
            let mut s = x[[i, k]];
            for j in (i + 1)..n {
                s -= m[[i, j]] * x[[j, k]];
            }
            x[[i, k]] = s / m[[i, i]];
        }
    }
    Ok(x)
}

/// Least-squares fit via Householder QR. Returns the coefficient vector.
///
/// Errors with [`Error::Collinear`] when a diagonal entry of `R` is negligible
/// relative to the largest one.
pub fn lstsq_qr<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>) -> Result<Array1<T>> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("design has {n} rows but response has {}", y.len())));
    }
    if n < p {
        return Err(Error::TooSmall { needed: p, got: n });
    }
    let mut r = x.to_owned();
    let mut qty = y.to_owned();
    for k in 0..p {
        let norm = r.slice(ndarray::s![k.., k]).iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if r[[k, k]] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..n).map(|i| r[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&a| a * a).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        for j in k..p {
            let dot: T = (k..n).map(|i| v[i - k] * r[[i, j]]).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for i in k..n {
                r[[i, j]] -= f * v[i - k];
            }
        }
        let dot: T = (k..n).map(|i| v[i - k] * qty[i]).sum();
        let f = T::lit(2.0) * dot / vnorm2;
        for i in k..n {
            qty[i] -= f * v[i - k];
        }
    }
    let max_diag = (0..p).fold(T::zero(), |acc, i| acc.max(r[[i, i]].abs()));
    let tol = max_diag * T::from_usize_lossy(n.max(p)) * T::epsilon() * T::lit(16.0);
    if (0..p).any(|i| r[[i, i]].abs() <= tol) {
        return Err(Error::Collinear);
    }
    let mut beta = Array1::<T>::zeros(p);
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in (i + 1)..p {
            s -= r[[i, j]] * beta[j];
        }
        beta[i] = s / r[[i, i]];
    }
    Ok(beta)
}

/// Inverse of `XᵀX` for a full-rank design (used for coefficient covariance).
pub fn gram_inverse<T: Scalar>(x: ArrayView2<T>) -> Result<Array2<T>> {
    let gram = x.t().dot(&x);
    let p = gram.nrows();
    solve_spd(gram.view(), Array2::eye(p).view())
}

/// Row-wise L2 norms.
pub fn row_norms<T: Scalar>(m: ArrayView2<T>) -> Array1<T> {
    m.map_axis(Axis(1), |row| vector_norm(row))
}
