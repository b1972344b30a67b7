//! Dense symmetric eigensolvers.
//!
//! Two independent routes are provided:
//!
//! * [`symmetric_eigenvalues`]: Householder tridiagonalization with symmetric
//!   rank-2 updates on a row-major copy, then implicit QL with Wilkinson-style
//!   shifts. Eigenvalues only; this is the hot path for spectrum work.
//! * [`symmetric_eigen`]: the classic `tred2`/`tql2` pair, accumulating the
//!   orthogonal transform so that `A = Q Λ Qᵀ` can be checked.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::max_asymmetry;
use crate::scalar::Scalar;

const MAX_QL_SWEEPS: usize = 90;

fn check_symmetric<T: Scalar>(a: ArrayView2<T>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!("eigensolver needs a square matrix, got {:?}", a.dim())));
    }
    let scale = a.iter().fold(T::one(), |acc, &v| acc.max(v.abs()));
    let asym = max_asymmetry(a);
    if asym > T::symmetry_tolerance() * scale {
        return Err(Error::Symmetry { max_asymmetry: asym.to_f64_lossy() });
    }
    Ok(())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues<T: Scalar>(a: ArrayView2<T>) -> Result<Vec<T>> {
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut diag, mut off) = tridiagonalize(a);
    tridiagonal_ql(&mut diag, &mut off)?;
    diag.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    Ok(diag)
}

/// Householder reduction to tridiagonal form. Returns `(diagonal, off_diagonal)`
/// where `off[k]` couples rows `k` and `k + 1` and `off[n - 1] = 0`.
fn tridiagonalize<T: Scalar>(a: ArrayView2<T>) -> (Vec<T>, Vec<T>) {
    let n = a.nrows();
    let mut m: Vec<T> = a.iter().copied().collect();
    if !a.is_standard_layout() {
        m = (0..n * n).map(|idx| a[[idx / n, idx % n]]).collect();
    }
    let mut diag = vec![T::zero(); n];
    let mut off = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let two = T::lit(2.0);

    for k in 0..n.saturating_sub(2) {
        diag[k] = m[k * n + k];
        let start = k + 1;
        let len = n - start;
        // Column k below the diagonal equals row k right of it.
        let x = &m[k * n + start..k * n + n];
        let norm = x.iter().map(|&t| t * t).sum::<T>().sqrt();
        let tail = x[1..].iter().map(|&t| t * t).sum::<T>();
        if norm == T::zero() || tail == T::zero() {
            off[k] = x[0];
            continue;
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let v = &mut v[..len];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&t| t * t).sum();
        let beta = two / vnorm2;
        off[k] = alpha;

        let p = &mut p[..len];
        for i in 0..len {
            let row = &m[(start + i) * n + start..(start + i) * n + n];
            let mut s = T::zero();
            for (r, vj) in row.iter().zip(v.iter()) {
                s += *r * *vj;
            }
            p[i] = beta * s;
        }
        let pv: T = p.iter().zip(v.iter()).map(|(a, b)| *a * *b).sum();
        let kk = beta * pv / two;
        for i in 0..len {
            p[i] -= kk * v[i];
        }
        // S -= v wᵀ + w vᵀ
        for i in 0..len {
            let vi = v[i];
            let wi = p[i];
            let row = &mut m[(start + i) * n + start..(start + i) * n + n];
            for ((r, vj), wj) in row.iter_mut().zip(v.iter()).zip(p.iter()) {
                *r -= vi * *wj + wi * *vj;
            }
        }
    }
    if n >= 2 {
        diag[n - 2] = m[(n - 2) * n + n - 2];
        off[n - 2] = m[(n - 1) * n + n - 2];
    }
    diag[n - 1] = m[(n - 1) * n + n - 1];
    off[n - 1] = T::zero();
    (diag, off)
}

/// Implicit QL on a symmetric tridiagonal matrix; eigenvalues left in `d` (unsorted).
fn tridiagonal_ql<T: Scalar>(d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let two = T::lit(2.0);
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                if e[m].abs() <= T::epsilon() * tst1 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_SWEEPS {
                return Err(Error::Numerical("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Full symmetric eigendecomposition. Eigenvalues ascending; column `j` of the
/// returned matrix is the unit eigenvector for eigenvalue `j`.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut v: Vec<Vec<T>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("eigenvalues are finite"));
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[r][order[c]]);
    Ok((values, vectors))
}

fn tred2<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
                v[j][i] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[k][j] -= upd;
                }
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[k][j] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = T::zero();
    }
    v[n - 1][n - 1] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > MAX_QL_SWEEPS {
                    return Err(Error::Numerical("tql2 failed to converge".into()));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn zero_diagonal_with_tiny_coupling() {
        let mut d = vec![0.0, 0.0, 1.0, 2.0];
        let mut e = vec![1e-17, 0.5, 0.0, 0.0];
        tridiagonal_ql(&mut d, &mut e).unwrap();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-0.20710678118654752, 0.0, 1.2071067811865475, 2.0];
        for (x, y) in d.iter().zip(want) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_by_two() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let vals = symmetric_eigenvalues(a.view()).unwrap();
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 3.0, epsilon = 1e-14);
        let (v2, q) = symmetric_eigen(a.view()).unwrap();
        assert_relative_eq!(v2[0], 1.0, epsilon = 1e-14);
        let recon = q.dot(&Array2::from_diag(&v2)).dot(&q.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert_relative_eq!(*x, *y, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(matches!(symmetric_eigenvalues(a.view()), Err(Error::Symmetry { .. })));
        assert!(matches!(symmetric_eigen(a.view()), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn one_by_one_and_empty() {
        let a = array![[4.5]];
        assert_eq!(symmetric_eigenvalues(a.view()).unwrap(), vec![4.5]);
        let e = Array2::<f64>::zeros((0, 0));
        assert!(symmetric_eigenvalues(e.view()).unwrap().is_empty());
    }

    #[test]
    fn diagonal_input_sorted() {
        let a = Array2::from_diag(&array![3.0, -1.0, 2.0, 0.0]);
        assert_eq!(symmetric_eigenvalues(a.view()).unwrap(), vec![-1.0, 0.0, 2.0, 3.0]);
    }
}
