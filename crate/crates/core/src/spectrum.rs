//! Normalized-Laplacian spectra, spectral distances, histograms and KDE summaries.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::eigen::{symmetric_eigen, symmetric_eigenvalues};
use crate::error::{Error, Result};
use crate::graph::{normalize_with, Graph, IsolatedNodes, MatrixKind, NormalizeOptions, NormalizedMatrix};
use crate::linalg::frobenius_norm;
use crate::scalar::Scalar;

/// Ascending eigenvalues of a normalized matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn new(mut values: Vec<T>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn eigenvalues<T: Scalar>(m: &NormalizedMatrix<T>) -> Result<Spectrum<T>> {
    Ok(Spectrum { values: symmetric_eigenvalues(m.values.view())? })
}

/// Relative reconstruction error `‖QΛQᵀ − M‖_F / ‖M‖_F` of the full decomposition.
pub fn reconstruction_error<T: Scalar>(m: &NormalizedMatrix<T>) -> Result<T> {
    let (vals, q) = symmetric_eigen(m.values.view())?;
    let mut ql = q.clone();
    for (mut col, &l) in ql.columns_mut().into_iter().zip(vals.iter()) {
        col *= l;
    }
    let rec: Array2<T> = ql.dot(&q.t());
    let norm = frobenius_norm(m.values.view());
    let diff = frobenius_norm((&rec - &m.values).view());
    Ok(if norm > T::zero() { diff / norm } else { diff })
}

/// Spectrum of `I − D^{-1/2} A D^{-1/2}` without self-loops; isolated nodes contribute 0.
pub fn laplacian_spectrum<T: Scalar>(g: &Graph<T>) -> Result<Spectrum<T>> {
    let opts = NormalizeOptions { self_loops: false, isolated: IsolatedNodes::Zero };
    eigenvalues(&normalize_with(g, MatrixKind::Laplacian, opts)?)
}

/// Euclidean distance between two sorted spectra of equal length.
pub fn spectral_distance<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<T> {
    Ok(spectral_distance_sq(a, b)?.sqrt())
}

pub fn spectral_distance_sq<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "spectra have lengths {} and {}; compare graphs of different sizes with kde_curve instead",
            a.len(),
            b.len()
        )));
    }
    Ok(a.values.iter().zip(&b.values).map(|(&x, &y)| (x - y) * (x - y)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Scott's rule `σ̂ · m^{-1/5}` per spectrum.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityCurve<T> {
    pub grid: Vec<T>,
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

/// Gaussian KDE of each spectrum on a uniform grid over `[0, 2]`, with mean and
/// population standard deviation across spectra.
///
/// Mass leaking past either end of the domain is reflected back, and the
/// bandwidth never drops below two grid steps.
pub fn kde_curve<T: Scalar>(spectra: &[Spectrum<T>], bandwidth: Bandwidth, grid_points: usize) -> Result<DensityCurve<T>> {
    if spectra.is_empty() {
        return Err(Error::Argument("kde_curve needs at least one spectrum".into()));
    }
    if grid_points < 16 {
        return Err(Error::Argument(format!("grid_points = {grid_points} < 16")));
    }
    if let Bandwidth::Fixed(h) = bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("bandwidth {h} must be positive")));
        }
    }
    let two = T::lit(2.0);
    let step = two / T::from_usize_lossy(grid_points - 1);
    let grid: Vec<T> = (0..grid_points).map(|i| T::from_usize_lossy(i) * step).collect();
    let curves: Vec<Vec<T>> = spectra
        .iter()
        .map(|s| {
            if s.is_empty() {
                return Err(Error::Argument("empty spectrum".into()));
            }
            let h = match bandwidth {
                Bandwidth::Fixed(h) => T::lit(h),
                Bandwidth::Auto => scott_bandwidth(&s.values),
            }
            .max(step + step);
            Ok(kde_on_grid(&s.values, h, &grid))
        })
        .collect::<Result<_>>()?;
    let m = T::from_usize_lossy(curves.len());
    let mut mean = vec![T::zero(); grid_points];
    for c in &curves {
        for (a, &b) in mean.iter_mut().zip(c) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let mut std = vec![T::zero(); grid_points];
    for c in &curves {
        for ((s, &b), &mu) in std.iter_mut().zip(c).zip(&mean) {
            *s += (b - mu) * (b - mu);
        }
    }
    std.iter_mut().for_each(|x| *x = (*x / m).sqrt());
    Ok(DensityCurve { grid, mean, std })
}

pub fn scott_bandwidth<T: Scalar>(values: &[T]) -> T {
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())
    } else {
        T::zero()
    };
    var.sqrt() * n.powf(T::lit(-0.2))
}

fn kde_on_grid<T: Scalar>(values: &[T], h: T, grid: &[T]) -> Vec<T> {
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let norm = T::one() / (T::from_usize_lossy(values.len()) * h * (two * T::PI()).sqrt());
    let phi = |d: T| (-(d * d) / (two * h * h)).exp();
    grid.iter()
        .map(|&x| {
            values.iter().map(|&l| phi(x - l) + phi(x + l) + phi(x - (four - l))).sum::<T>() * norm
        })
        .collect()
}

/// Trapezoidal integral of `y` over `x`.
pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) / T::lit(2.0)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub density: Vec<T>,
}

/// Density histogram over `[0, 2]`; values outside are clamped into the end bins.
pub fn histogram<T: Scalar>(spectrum: &Spectrum<T>, bins: usize) -> Result<Histogram<T>> {
    if bins < 2 {
        return Err(Error::Argument(format!("bins = {bins} < 2")));
    }
    if spectrum.is_empty() {
        return Err(Error::Argument("empty spectrum".into()));
    }
    let width = T::lit(2.0) / T::from_usize_lossy(bins);
    let edges: Vec<T> = (0..=bins).map(|i| T::from_usize_lossy(i) * width).collect();
    let mut counts = vec![0usize; bins];
    for &v in &spectrum.values {
        let idx = (v / width).floor().to_f64_lossy();
        let idx = if idx.is_nan() || idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    let total = T::from_usize_lossy(spectrum.len()) * width;
    let density = counts.iter().map(|&c| T::from_usize_lossy(c) / total).collect();
    Ok(Histogram { edges, density })
}

/// Entrywise mean of equal-length sorted spectra, with per-entry population std.
pub fn ensemble_mean_spectrum<T: Scalar>(spectra: &[Spectrum<T>]) -> Result<(Spectrum<T>, Vec<T>)> {
    let first = spectra.first().ok_or_else(|| Error::Argument("empty ensemble".into()))?;
    let len = first.len();
    if let Some(bad) = spectra.iter().find(|s| s.len() != len) {
        return Err(Error::Shape(format!("ensemble mixes spectra of length {len} and {}", bad.len())));
    }
    let m = T::from_usize_lossy(spectra.len());
    let mut mean = vec![T::zero(); len];
    for s in spectra {
        for (a, &b) in mean.iter_mut().zip(&s.values) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let mut std = vec![T::zero(); len];
    for s in spectra {
        for ((a, &b), &mu) in std.iter_mut().zip(&s.values).zip(&mean) {
            *a += (b - mu) * (b - mu);
        }
    }
    std.iter_mut().for_each(|x| *x = (*x / m).sqrt());
    Ok((Spectrum { values: mean }, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Labels;

    fn g(n: usize, edges: &[(usize, usize)]) -> Graph<f64> {
        Graph::new(n, edges.to_vec(), Array2::zeros((n, 1)), Labels::None).unwrap()
    }

    #[test]
    fn k2_and_two_components() {
        let s: Spectrum<f64> = laplacian_spectrum(&g(2, &[(0, 1)])).unwrap();
        assert!((s.values[0]).abs() < 1e-12 && (s.values[1] - 2.0).abs() < 1e-12);
        let s = laplacian_spectrum(&g(4, &[(0, 1), (2, 3)])).unwrap();
        let want = [0.0, 0.0, 2.0, 2.0];
        for (a, b) in s.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle() {
        let s = laplacian_spectrum(&g(3, &[(0, 1), (1, 2), (0, 2)])).unwrap();
        for (a, b) in s.values.iter().zip([0.0, 1.5, 1.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_cases() {
        let a = Spectrum::new(vec![0.0, 2.0]);
        let b = Spectrum::new(vec![0.0, 1.0]);
        assert_eq!(spectral_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(spectral_distance(&a, &b).unwrap(), 1.0);
        assert!(matches!(spectral_distance(&a, &Spectrum::new(vec![0.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn histogram_two_bins() {
        let h = histogram(&Spectrum::new(vec![0.0, 2.0]), 2).unwrap();
        assert_eq!(h.density, vec![0.5, 0.5]);
        let h = histogram(&Spectrum::new(vec![0.1, 0.2]), 4).unwrap();
        assert_eq!(h.density[3], 0.0);
    }

    #[test]
    fn kde_peak_and_integral() {
        let s = Spectrum::new(vec![1.0f64; 50]);
        let c = kde_curve(&[s.clone(), s], Bandwidth::Auto, 257).unwrap();
        let arg = c.mean.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(arg, 128);
        assert!(c.std.iter().all(|&x| x == 0.0));
        assert!((trapezoid::<f64>(&c.grid, &c.mean) - 1.0).abs() < 1e-3);
        assert!(kde_curve::<f64>(&[], Bandwidth::Auto, 64).is_err());
    }

    #[test]
    fn ensemble_mean() {
        let (m, s) = ensemble_mean_spectrum(&[Spectrum::new(vec![0.0, 1.0]), Spectrum::new(vec![0.0, 2.0])]).unwrap();
        assert_eq!(m.values, vec![0.0, 1.5]);
        assert_eq!(s, vec![0.0, 0.5]);
        assert!(ensemble_mean_spectrum(&[Spectrum::new(vec![0.0]), Spectrum::new(vec![0.0, 1.0])]).is_err());
    }
}
