//! Analytic gradients against central finite differences.

use cgssl_core::encoder::{encode_grad, forward, init_encoder, propagation_operator, EncoderConfig, EncoderState};
use cgssl_core::graph::{generate_synthetic, FeatureSpec, GeneratorParams, Graph};
use cgssl_core::objectives::{loss_value_and_grad, loss_value_and_grad_with, LossConfig};
use cgssl_core::rng::{seeded, sub_seed, WorkbenchRng};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const H: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn gaussian(r: usize, c: usize, rng: &mut WorkbenchRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || StandardNormal.sample(rng))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-10)
}

fn encoder_case(seed: u64, self_loops: bool) -> Option<f64> {
    let mut rng = seeded(seed);
    let n = rng.random_range(4..=12);
    let d = rng.random_range(2..=8);
    let g: Graph<f64> =
        generate_synthetic(&GeneratorParams::er(n, 0.4).with_features(FeatureSpec::Gaussian { dim: d }), sub_seed(seed, 1)).unwrap();
    let mut dims = vec![d];
    for _ in 0..rng.random_range(1..=2) {
        dims.push(rng.random_range(2..=8));
    }
    let mut config = EncoderConfig::new(dims, rng.random_range(2..=8));
    config.self_loops = self_loops;
    config.normalize_output = rng.random_bool(0.5);
    let state: EncoderState<f64> = init_encoder(&config, &mut rng).unwrap();
    let op = propagation_operator(&g, self_loops).ok()?;
    let x = g.features().view();
    let r = gaussian(n, config.proj_dim, &mut rng);
    let f = |s: &EncoderState<f64>| (&forward(s, &config, op.view(), x).unwrap().output.z * &r).sum();
    let grads = encode_grad(&state, &config, op.view(), x, &r).ok()?;
    let analytic: Vec<f64> = grads.parameters().flat_map(|m| m.iter().copied()).collect();
    let mut numeric = Vec::new();
    for p in 0..state.parameters().count() {
        for i in 0..state.parameters().nth(p).unwrap().len() {
            let mut plus = state.clone();
            let mut minus = state.clone();
            plus.parameters_mut().nth(p).unwrap().as_slice_mut().unwrap()[i] += H;
            minus.parameters_mut().nth(p).unwrap().as_slice_mut().unwrap()[i] -= H;
            numeric.push((f(&plus) - f(&minus)) / (2.0 * H));
        }
    }
    Some(rel_err(&analytic, &numeric))
}

#[test]
fn encoder_backprop() {
    for self_loops in [true, false] {
        let errs: Vec<f64> = (0..).filter_map(|s| encoder_case(sub_seed(40 + self_loops as u64, s), self_loops)).take(20).collect();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        assert!(worst <= TOL, "self_loops={self_loops}: {worst}");
    }
}

fn loss_case(cfg: &LossConfig, seed: u64, negatives: bool) -> f64 {
    let mut rng = seeded(seed);
    let n = rng.random_range(3..=12);
    let d = rng.random_range(2..=8);
    let z1 = gaussian(n, d, &mut rng);
    let z2 = gaussian(n, d, &mut rng);
    let neg: Option<Vec<usize>> = negatives.then(|| (0..n).map(|v| (v + 1 + rng.random_range(0..n - 1)) % n).collect());
    let eval = |a: &Array2<f64>, b: &Array2<f64>| loss_value_and_grad_with(cfg, a, b, neg.as_deref()).unwrap();
    let out = eval(&z1, &z2);
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (i, j) in z1.indexed_iter().map(|(ij, _)| ij) {
        for view in 0..2 {
            let (mut p1, mut p2, mut m1, mut m2) = (z1.clone(), z2.clone(), z1.clone(), z2.clone());
            if view == 0 {
                p1[[i, j]] += H;
                m1[[i, j]] -= H;
                analytic.push(out.grad1[[i, j]]);
            } else {
                p2[[i, j]] += H;
                m2[[i, j]] -= H;
                analytic.push(out.grad2[[i, j]]);
            }
            numeric.push((eval(&p1, &p2).value - eval(&m1, &m2).value) / (2.0 * H));
        }
    }
    rel_err(&analytic, &numeric)
}

#[test]
fn loss_gradients() {
    for cfg in [
        LossConfig::Infonce { tau: 0.5 },
        LossConfig::Infonce { tau: 0.1 },
        LossConfig::Jse,
        LossConfig::Byol,
        LossConfig::BarlowTwins { lambda: 5e-3 },
    ] {
        let worst = (0..20).map(|s| loss_case(&cfg, sub_seed(50, s), false)).fold(0.0, f64::max);
        assert!(worst <= TOL, "{cfg:?}: {worst}");
    }
    let worst = (0..20).map(|s| loss_case(&LossConfig::Jse, sub_seed(51, s), true)).fold(0.0, f64::max);
    assert!(worst <= TOL, "jse with explicit negatives: {worst}");
}

#[test]
fn mismatched_views_are_rejected() {
    let mut rng = seeded(52);
    let a = gaussian(4, 3, &mut rng);
    let b = gaussian(5, 3, &mut rng);
    assert!(loss_value_and_grad(&LossConfig::Byol, &a, &b).is_err());
}
