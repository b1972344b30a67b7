//! Contrastive objectives with analytic gradients for both views.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::encoder::{normalize_rows, normalize_rows_backward};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossConfig {
    Infonce { tau: f64 },
    Jse,
    Byol,
    BarlowTwins { lambda: f64 },
}

impl LossConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LossConfig::Infonce { .. } => "infonce",
            LossConfig::Jse => "jse",
            LossConfig::Byol => "byol",
            LossConfig::BarlowTwins { .. } => "barlow_twins",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossConfig::Infonce { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::Config(format!("tau = {tau} must be positive")))
            }
            LossConfig::BarlowTwins { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::Config(format!("lambda = {lambda} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    pub value: T,
    pub grad1: Array2<T>,
    pub grad2: Array2<T>,
}

/// Standardization epsilon for Barlow Twins column statistics.
pub const BARLOW_EPS: f64 = 1e-8;

pub fn loss_value_and_grad<T: Scalar>(cfg: &LossConfig, z1: &Array2<T>, z2: &Array2<T>) -> Result<LossOutput<T>> {
    loss_value_and_grad_with(cfg, z1, z2, None)
}

/// As [`loss_value_and_grad`], with an explicit negative pairing for JSE:
/// node `v` is contrasted with `negatives[v]` in the second view. The default
/// pairing is the cyclic shift `v → v + 1`.
pub fn loss_value_and_grad_with<T: Scalar>(
    cfg: &LossConfig,
    z1: &Array2<T>,
    z2: &Array2<T>,
    negatives: Option<&[usize]>,
) -> Result<LossOutput<T>> {
    cfg.validate()?;
    if z1.dim() != z2.dim() {
        return Err(Error::Shape(format!("views have shapes {:?} and {:?}", z1.dim(), z2.dim())));
    }
    if z1.nrows() == 0 {
        return Err(Error::TooSmall { needed: 1, got: 0 });
    }
    match *cfg {
        LossConfig::Infonce { tau } => infonce(z1, z2, T::lit(tau)),
        LossConfig::Jse => {
            let n = z1.nrows();
            let shift: Vec<usize>;
            let neg = match negatives {
                Some(p) => {
                    if p.len() != n || p.iter().any(|&j| j >= n) {
                        return Err(Error::Shape("negative pairing must map every node into [0, n)".into()));
                    }
                    p
                }
                None => {
                    shift = (0..n).map(|v| (v + 1) % n).collect();
                    &shift
                }
            };
            jse(z1, z2, neg)
        }
        LossConfig::Byol => byol(z1, z2),
        LossConfig::BarlowTwins { lambda } => barlow_twins(z1, z2, T::lit(lambda)),
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Cross-view InfoNCE on cosine similarities.
fn infonce<T: Scalar>(z1: &Array2<T>, z2: &Array2<T>, tau: T) -> Result<LossOutput<T>> {
    let n = z1.nrows();
    let nt = T::from_usize_lossy(n);
    let u = normalize_rows(z1)?;
    let v = normalize_rows(z2)?;
    let s = u.dot(&v.t()) / tau;
    let mut ds = Array2::zeros((n, n));
    let mut value = T::zero();
    for i in 0..n {
        let row = s.row(i);
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let denom: T = row.iter().map(|&x| (x - m).exp()).sum();
        value += m + denom.ln() - row[i];
        for j in 0..n {
            ds[[i, j]] = (row[j] - m).exp() / denom / nt;
        }
        ds[[i, i]] -= T::one() / nt;
    }
    let du = ds.dot(&v) / tau;
    let dv = ds.t().dot(&u) / tau;
    Ok(LossOutput {
        value: value / nt,
        grad1: normalize_rows_backward(z1, &u, &du),
        grad2: normalize_rows_backward(z2, &v, &dv),
    })
}

/// Jensen–Shannon estimator with an inner-product discriminator:
/// `mean softplus(−s_pos) + mean softplus(s_neg) − 2 ln 2`.
fn jse<T: Scalar>(z1: &Array2<T>, z2: &Array2<T>, neg: &[usize]) -> Result<LossOutput<T>> {
    let n = z1.nrows();
    let nt = T::from_usize_lossy(n);
    let mut g1 = Array2::zeros(z1.raw_dim());
    let mut g2 = Array2::zeros(z2.raw_dim());
    let mut value = T::zero();
    for i in 0..n {
        let sp = z1.row(i).dot(&z2.row(i));
        value += softplus(-sp);
        let gp = -sigmoid(-sp) / nt;
        g1.row_mut(i).scaled_add(gp, &z2.row(i));
        g2.row_mut(i).scaled_add(gp, &z1.row(i));

        let j = neg[i];
        let sn = z1.row(i).dot(&z2.row(j));
        value += softplus(sn);
        let gn = sigmoid(sn) / nt;
        g1.row_mut(i).scaled_add(gn, &z2.row(j));
        g2.row_mut(j).scaled_add(gn, &z1.row(i));
    }
    let value = value / nt - T::lit(2.0) * T::LN_2();
    Ok(LossOutput { value, grad1: g1, grad2: g2 })
}

/// Negative-free alignment `mean(2 − 2 cos(z1_v, z2_v))` with an identity predictor.
fn byol<T: Scalar>(z1: &Array2<T>, z2: &Array2<T>) -> Result<LossOutput<T>> {
    let n = z1.nrows();
    let nt = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let mut g1 = Array2::zeros(z1.raw_dim());
    let mut g2 = Array2::zeros(z2.raw_dim());
    let mut value = T::zero();
    for i in 0..n {
        let a = z1.row(i);
        let b = z2.row(i);
        let na = a.dot(&a).sqrt();
        let nb = b.dot(&b).sqrt();
        if na == T::zero() {
            return Err(Error::DegenerateInput { node: i });
        }
        if nb == T::zero() {
            return Err(Error::DegenerateInput { node: i });
        }
        let c = a.dot(&b) / (na * nb);
        value += two - two * c;
        let scale = -two / nt;
        let da: Array1<T> = (&b / (na * nb) - &a * (c / (na * na))) * scale;
        let db: Array1<T> = (&a / (na * nb) - &b * (c / (nb * nb))) * scale;
        g1.row_mut(i).assign(&da);
        g2.row_mut(i).assign(&db);
    }
    Ok(LossOutput { value: value / nt, grad1: g1, grad2: g2 })
}

struct Standardized<T> {
    z: Array2<T>,
    std: Array1<T>,
}

fn standardize<T: Scalar>(z: &Array2<T>) -> Standardized<T> {
    let mean = z.mean_axis(Axis(0)).expect("non-empty");
    let centered = z - &mean;
    let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty");
    let std = var.mapv(|v| (v + T::lit(BARLOW_EPS)).sqrt());
    Standardized { z: &centered / &std, std }
}

fn standardize_backward<T: Scalar>(s: &Standardized<T>, g: &Array2<T>) -> Array2<T> {
    let mean_g = g.mean_axis(Axis(0)).expect("non-empty");
    let mean_gz = (g * &s.z).mean_axis(Axis(0)).expect("non-empty");
    (g - &mean_g - &(&s.z * &mean_gz)) / &s.std
}

/// Cross-correlation matrix `C = z̃1ᵀ z̃2 / n` of column-standardized views.
pub fn cross_correlation<T: Scalar>(z1: &Array2<T>, z2: &Array2<T>) -> Array2<T> {
    let n = T::from_usize_lossy(z1.nrows());
    standardize(z1).z.t().dot(&standardize(z2).z) / n
}

/// Redundancy reduction `Σ (1 − C_aa)² + λ Σ_{a≠b} C_ab²`.
fn barlow_twins<T: Scalar>(z1: &Array2<T>, z2: &Array2<T>, lambda: T) -> Result<LossOutput<T>> {
    let n = z1.nrows();
    if n < 2 {
        return Err(Error::TooSmall { needed: 2, got: n });
    }
    let nt = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let s1 = standardize(z1);
    let s2 = standardize(z2);
    let c = s1.z.t().dot(&s2.z) / nt;
    let mut dc = Array2::zeros(c.raw_dim());
    let mut value = T::zero();
    for ((a, b), &x) in c.indexed_iter() {
        if a == b {
            value += (T::one() - x) * (T::one() - x);
            dc[[a, b]] = -two * (T::one() - x);
        } else {
            value += lambda * x * x;
            dc[[a, b]] = two * lambda * x;
        }
    }
    let dz1 = s2.z.dot(&dc.t()) / nt;
    let dz2 = s1.z.dot(&dc) / nt;
    Ok(LossOutput { value, grad1: standardize_backward(&s1, &dz1), grad2: standardize_backward(&s2, &dz2) })
}
