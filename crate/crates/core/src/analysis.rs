//! Regression statistics (polynomial OLS, two-stage least squares) and the
//! augmentation timing benchmark.

use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::augment::{add_edge, drop_edge};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{gram_inverse, lstsq_qr};
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::spectrum::laplacian_spectrum;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegressionResult {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// Residual degrees of freedom.
    pub dof: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_stage_f: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COF[0];
    for (i, c) in COF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(F > f)` of the F(d1, d2) distribution.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sst(y: &[f64]) -> f64 {
    let m = mean(y);
    y.iter().map(|v| (v - m).powi(2)).sum()
}

fn predict(design: &Array2<f64>, beta: &Array1<f64>) -> Array1<f64> {
    design.dot(beta)
}

/// OLS of `y` on `[1, x, …, x^order]`.
pub fn poly_regression(x: &[f64], y: &[f64], order: usize) -> Result<RegressionResult> {
    if !(1..=2).contains(&order) {
        return Err(Error::Argument(format!("order must be 1 or 2, got {order}")));
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < order + 2 {
        return Err(Error::TooSmall { needed: order + 2, got: n });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Collinear);
    }
    let design = Array2::from_shape_fn((n, order + 1), |(i, j)| x[i].powi(j as i32));
    let yv = Array1::from(y.to_vec());
    let beta = lstsq_qr(design.view(), yv.view())?;
    let fitted = predict(&design, &beta);
    let ssr: f64 = yv.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(summarize(beta.to_vec(), ssr, sst(y), n, order))
}

fn summarize(coefficients: Vec<f64>, ssr: f64, sst: f64, n: usize, k: usize) -> RegressionResult {
    let dof = n - k - 1;
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / dof as f64;
    let f = if ssr > 0.0 { ((sst - ssr) / k as f64) / (ssr / dof as f64) } else { f64::INFINITY };
    RegressionResult {
        coefficients,
        r_squared: r2,
        adj_r_squared: adj,
        f_statistic: f,
        p_value: f_upper_tail(f, k as f64, dof as f64),
        n,
        dof,
        first_stage_f: None,
        warnings: Vec::new(),
    }
}

/// Two-stage least squares with a single instrument.
///
/// Stage two reports the IV-consistent fit: residuals `y − [1, x] β̂`, the Wald F
/// of the slope with `σ² = SSR / (n − 2)`, and `R² = 1 − SSR / SST` (which can be
/// negative for IV fits).
pub fn iv2sls(y: &[f64], x: &[f64], z: &[f64]) -> Result<RegressionResult> {
    let n = y.len();
    if x.len() != n || z.len() != n {
        return Err(Error::Shape(format!("lengths differ: y {n}, x {}, z {}", x.len(), z.len())));
    }
    if n < 4 {
        return Err(Error::TooSmall { needed: 4, got: n });
    }
    if sst(z) == 0.0 {
        return Err(Error::DegenerateInstrument);
    }
    let first = poly_regression(z, x, 1)?;
    let mut warnings = Vec::new();
    if first.f_statistic < 10.0 {
        warnings.push(format!("weak instrument: first-stage F = {:.3} < 10", first.f_statistic));
    }
    let x_hat: Vec<f64> = z.iter().map(|&v| first.coefficients[0] + first.coefficients[1] * v).collect();
    let design_hat = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { 1.0 } else { x_hat[i] });
    let beta = lstsq_qr(design_hat.view(), Array1::from(y.to_vec()).view())?;
    let ssr: f64 = (0..n).map(|i| (y[i] - beta[0] - beta[1] * x[i]).powi(2)).sum();
    let dof = n - 2;
    let sigma2 = ssr / dof as f64;
    let cov = gram_inverse(design_hat.view())?;
    let var_slope = sigma2 * cov[[1, 1]];
    let f = if var_slope > 0.0 { beta[1] * beta[1] / var_slope } else { f64::INFINITY };
    let total = sst(y);
    let r2 = if total > 0.0 { 1.0 - ssr / total } else { 0.0 };
    Ok(RegressionResult {
        coefficients: beta.to_vec(),
        r_squared: r2,
        adj_r_squared: 1.0 - (1.0 - r2) * (n as f64 - 1.0) / dof as f64,
        f_statistic: f,
        p_value: f_upper_tail(f, 1.0, dof as f64),
        n,
        dof,
        first_stage_f: Some(first.f_statistic),
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimedOp {
    Spectrum,
    DropEdge,
    AddEdge,
}

impl TimedOp {
    pub fn method_name(self) -> &'static str {
        match self {
            TimedOp::Spectrum => "Spectrum calculation",
            TimedOp::DropEdge => "DropEdge",
            TimedOp::AddEdge => "AddEdge",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub seconds_per_call: f64,
}

pub const BENCH_DROP_P: f64 = 0.2;
pub const BENCH_ADD_Q: f64 = 0.001;

/// Median wallclock of `repeats` calls after one warm-up call.
pub fn time_benchmark<T: Scalar>(op: TimedOp, g: &Graph<T>, repeats: usize) -> Result<TimingRow> {
    if repeats < 3 {
        return Err(Error::Argument(format!("repeats must be >= 3, got {repeats}")));
    }
    let mut rng = seeded(0);
    let mut call = || -> Result<()> {
        match op {
            TimedOp::Spectrum => {
                std::hint::black_box(laplacian_spectrum(g)?);
            }
            TimedOp::DropEdge => {
                std::hint::black_box(drop_edge(g, BENCH_DROP_P, &mut rng)?);
            }
            TimedOp::AddEdge => {
                std::hint::black_box(add_edge(g, BENCH_ADD_Q, &mut rng)?);
            }
        }
        Ok(())
    };
    call()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        call()?;
        times.push(t.elapsed().as_secs_f64().max(1e-9));
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mid = times.len() / 2;
    let median = if times.len() % 2 == 1 { times[mid] } else { 0.5 * (times[mid - 1] + times[mid]) };
    Ok(TimingRow { method: op.method_name().into(), n: g.n(), m: g.num_edges(), seconds_per_call: median })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(poly_regression(&lx, &ly, 1)?.coefficients[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line_and_parabola() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = poly_regression(&x, &y, 1).unwrap();
        assert_relative_eq!(r.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.coefficients[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.r_squared, 1.0, epsilon = 1e-12);
        let x = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_relative_eq!(poly_regression(&x, &y, 2).unwrap().r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_x_is_collinear() {
        assert!(matches!(poly_regression(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], 1), Err(Error::Collinear)));
    }

    #[test]
    fn gamma_and_beta_special_values() {
        assert_relative_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-12);
        assert_relative_eq!(reg_inc_beta(1.0, 1.0, 0.3), 0.3, epsilon = 1e-14);
        assert_relative_eq!(reg_inc_beta(2.0, 3.0, 0.4) + reg_inc_beta(3.0, 2.0, 0.6), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_instrument_rejected() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(iv2sls(&v, &v, &[2.0; 4]), Err(Error::DegenerateInstrument)));
    }

    #[test]
    fn timing_needs_three_repeats() {
        let g: Graph<f64> = Graph::new(3, vec![(0, 1)], Array2::eye(3), crate::Labels::None).unwrap();
        assert!(time_benchmark(TimedOp::DropEdge, &g, 2).is_err());
        assert!(time_benchmark(TimedOp::DropEdge, &g, 3).unwrap().seconds_per_call > 0.0);
    }
}
