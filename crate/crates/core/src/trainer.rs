//! Two-view contrastive training loop, data splits, readout and linear probe.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{apply, ppr_diffusion, span_pair, AugmentReport, AugmentationKind, AugmentationSpec};
use crate::encoder::{backward, encode_graph, forward, init_encoder, propagation_operator, spectral_norm_cap, EncoderConfig, EncoderState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::objectives::{loss_value_and_grad_with, LossConfig};
use crate::rng::{seeded, sub_rng, sub_seed, WorkbenchRng};
use crate::scalar::Scalar;
use crate::spectrum::{laplacian_spectrum, spectral_distance, Spectrum};

pub const MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Grace,
    Mvgrl,
    Gbt,
    Bgrl,
}

impl Framework {
    pub fn loss_name(self) -> &'static str {
        match self {
            Framework::Grace => "infonce",
            Framework::Mvgrl => "jse",
            Framework::Gbt => "barlow_twins",
            Framework::Bgrl => "byol",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub framework: Framework,
    pub augmentation_1: AugmentationSpec,
    pub augmentation_2: AugmentationSpec,
    pub encoder: EncoderConfig,
    pub loss: LossConfig,
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectrum_logging: bool,
    /// When set, this many view pairs are drawn once and cycled through the epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_pool: Option<usize>,
}

fn default_lr() -> f64 {
    5e-4
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.framework.loss_name() != self.loss.name() {
            return Err(Error::Config(format!(
                "framework {:?} requires the {} loss, got {}",
                self.framework,
                self.framework.loss_name(),
                self.loss.name()
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr = {} must be >= 0", self.lr)));
        }
        if self.view_pool == Some(0) {
            return Err(Error::Config("view_pool must be >= 1".into()));
        }
        self.loss.validate()?;
        self.encoder.validate()?;
        self.augmentation_1.validate()?;
        self.augmentation_2.validate()?;
        if matches!(self.augmentation_1.kind, AugmentationKind::Ppr { .. }) {
            return Err(Error::Config("ppr diffusion must be the second view".into()));
        }
        let span1 = matches!(self.augmentation_1.kind, AugmentationKind::Span { .. });
        let span2 = matches!(self.augmentation_2.kind, AugmentationKind::Span { .. });
        if span1 != span2 {
            return Err(Error::Config("span produces both views; set both augmentations to span".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "T: Scalar"))]
pub struct RunRecord<T> {
    pub loss_history: Vec<f64>,
    /// Spectra of both views at every epoch, view 1 first.
    pub augmented_spectra: Option<Vec<Spectrum<T>>>,
    pub spectrum_cadence: &'static str,
    pub initial_state: EncoderState<T>,
    pub final_state: EncoderState<T>,
    pub wallclock_per_epoch: Vec<f64>,
    pub augment_reports: Vec<[AugmentReport; 2]>,
}

/// Input to [`train`]: one graph (node-level) or a collection (graph-level).
#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a, T> {
    Node(&'a Graph<T>),
    Graphs(&'a [Graph<T>]),
}

/// One encoder input: dense propagation operator plus features.
struct ViewInput<T> {
    op: Array2<T>,
    graph: Option<Graph<T>>,
    report: AugmentReport,
}

fn make_views<T: Scalar>(
    cfg: &TrainConfig,
    g: &Graph<T>,
    ppr_cache: &mut Option<Array2<T>>,
    rng: &mut WorkbenchRng,
) -> Result<(ViewInput<T>, ViewInput<T>)> {
    let self_loops = cfg.encoder.self_loops;
    let from_graph = |v: crate::augment::AugmentedView<T>| -> Result<ViewInput<T>> {
        Ok(ViewInput { op: propagation_operator(&v.graph, self_loops)?, graph: Some(v.graph), report: v.report })
    };
    if let AugmentationKind::Span { budget, candidates } = cfg.augmentation_1.kind {
        let r = span_pair(g, budget, candidates, rng)?;
        return Ok((from_graph(r.views.0)?, from_graph(r.views.1)?));
    }
    let v1 = from_graph(apply(&cfg.augmentation_1, g, rng)?)?;
    let v2 = match cfg.augmentation_2.kind {
        AugmentationKind::Ppr { alpha } => {
            if ppr_cache.is_none() {
                *ppr_cache = Some(ppr_diffusion(g, alpha)?);
            }
            ViewInput { op: ppr_cache.clone().expect("filled"), graph: None, report: AugmentReport::default() }
        }
        _ => from_graph(apply(&cfg.augmentation_2, g, rng)?)?,
    };
    Ok((v1, v2))
}

fn add_into<T: Scalar>(acc: &mut EncoderState<T>, g: &EncoderState<T>) {
    for (a, b) in acc.parameters_mut().zip(g.parameters()) {
        *a += b;
    }
}

/// Mean of node rows per graph.
pub fn graph_readout<T: Scalar>(per_graph: &[Array2<T>]) -> Result<Array2<T>> {
    let d = per_graph.first().map_or(0, |m| m.ncols());
    let mut out = Array2::zeros((per_graph.len(), d));
    for (i, m) in per_graph.iter().enumerate() {
        if m.nrows() == 0 {
            return Err(Error::Argument(format!("graph {i} has no nodes")));
        }
        if m.ncols() != d {
            return Err(Error::Shape(format!("graph {i} has embedding width {}, expected {d}", m.ncols())));
        }
        out.row_mut(i).assign(&m.mean_axis(Axis(0)).expect("non-empty"));
    }
    Ok(out)
}

/// Runs the two-view contrastive optimization. Deterministic in `config.seed`.
pub fn train<T: Scalar>(config: &TrainConfig, data: TrainData<'_, T>) -> Result<RunRecord<T>> {
    config.validate()?;
    let graphs: Vec<&Graph<T>> = match data {
        TrainData::Node(g) => vec![g],
        TrainData::Graphs(gs) => {
            if gs.is_empty() {
                return Err(Error::Argument("empty dataset".into()));
            }
            gs.iter().collect()
        }
    };
    let graph_level = matches!(data, TrainData::Graphs(_));
    let mut state: EncoderState<T> = init_encoder(&config.encoder, &mut sub_rng(config.seed, 1))?;
    let initial_state = state.clone();
    let mut velocity = state.zeros_like();
    let mut ppr_cache: Vec<Option<Array2<T>>> = vec![None; graphs.len()];
    let mut pool: Vec<Vec<(ViewInput<T>, ViewInput<T>)>> = Vec::new();
    if let Some(size) = config.view_pool {
        for p in 0..size {
            let mut rng = sub_rng(config.seed, 2_000_000 + p as u64);
            let mut pairs = Vec::with_capacity(graphs.len());
            for (gi, g) in graphs.iter().enumerate() {
                pairs.push(make_views(config, g, &mut ppr_cache[gi], &mut rng)?);
            }
            pool.push(pairs);
        }
    }

    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut wallclock = Vec::with_capacity(config.epochs);
    let mut spectra = config.spectrum_logging.then(Vec::new);
    let mut reports = Vec::with_capacity(config.epochs);
    let lr = T::lit(config.lr);
    let mu = T::lit(MOMENTUM);

    for epoch in 0..config.epochs {
        let start = Instant::now();
        let mut rng = seeded(sub_seed(config.seed, 1_000_000 + epoch as u64));
        let fresh;
        let views: &Vec<(ViewInput<T>, ViewInput<T>)> = if pool.is_empty() {
            let mut v = Vec::with_capacity(graphs.len());
            for (gi, g) in graphs.iter().enumerate() {
                v.push(make_views(config, g, &mut ppr_cache[gi], &mut rng)?);
            }
            fresh = v;
            &fresh
        } else {
            &pool[epoch % pool.len()]
        };
        if let Some(s) = spectra.as_mut() {
            for (a, b) in views {
                for v in [a, b] {
                    if let Some(g) = &v.graph {
                        s.push(laplacian_spectrum(g)?);
                    }
                }
            }
        }
        reports.push([views[0].0.report.clone(), views[0].1.report.clone()]);

        let caches = views
            .iter()
            .zip(&graphs)
            .map(|((a, b), g)| {
                let x = g.features().view();
                Ok((forward(&state, &config.encoder, a.op.view(), x)?, forward(&state, &config.encoder, b.op.view(), x)?))
            })
            .collect::<Result<Vec<_>>>()?;

        let (z1, z2) = if graph_level {
            let r1: Vec<Array2<T>> = caches.iter().map(|c| c.0.output.z.clone()).collect();
            let r2: Vec<Array2<T>> = caches.iter().map(|c| c.1.output.z.clone()).collect();
            (graph_readout(&r1)?, graph_readout(&r2)?)
        } else {
            (caches[0].0.output.z.clone(), caches[0].1.output.z.clone())
        };
        let mut negatives: Vec<usize> = (0..z1.nrows()).collect();
        if matches!(config.loss, LossConfig::Jse) {
            negatives.shuffle(&mut rng);
        }
        let out = loss_value_and_grad_with(&config.loss, &z1, &z2, Some(&negatives))?;
        let value = out.value.to_f64_lossy();
        if !value.is_finite() {
            return Err(Error::NonFinite { epoch, norms: state.norms() });
        }
        let stop_grad_2 = matches!(config.loss, LossConfig::Byol);

        let mut grad = state.zeros_like();
        for (gi, ((a, b), (c1, c2))) in views.iter().zip(&caches).enumerate() {
            let (u1, u2) = if graph_level {
                let n = T::from_usize_lossy(c1.output.z.nrows());
                let spread = |row: ndarray::ArrayView1<T>| {
                    let r = row.to_owned() / n;
                    Array2::from_shape_fn(c1.output.z.raw_dim(), |(_, j)| r[j])
                };
                (spread(out.grad1.row(gi)), spread(out.grad2.row(gi)))
            } else {
                (out.grad1.clone(), out.grad2.clone())
            };
            add_into(&mut grad, &backward(&state, a.op.view(), c1, &u1)?);
            if !stop_grad_2 {
                add_into(&mut grad, &backward(&state, b.op.view(), c2, &u2)?);
            }
        }
        for ((p, v), g) in state.parameters_mut().zip(velocity.parameters_mut()).zip(grad.parameters()) {
            *v *= mu;
            *v += g;
            p.scaled_add(-lr, v);
        }
        if let Some(l) = config.encoder.l_w {
            state = spectral_norm_cap(state, l);
        }
        if state.parameters().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite { epoch, norms: state.norms() });
        }
        loss_history.push(value);
        wallclock.push(start.elapsed().as_secs_f64());
    }
    Ok(RunRecord {
        loss_history,
        augmented_spectra: spectra,
        spectrum_cadence: "both views every epoch",
        initial_state,
        final_state: state,
        wallclock_per_epoch: wallclock,
        augment_reports: reports,
    })
}

/// Node embeddings of the unaugmented graph.
pub fn embed_nodes<T: Scalar>(state: &EncoderState<T>, config: &EncoderConfig, g: &Graph<T>) -> Result<Array2<T>> {
    Ok(encode_graph(state, config, g)?.z)
}

/// Mean-readout graph embeddings of a dataset.
pub fn embed_graphs<T: Scalar>(state: &EncoderState<T>, config: &EncoderConfig, graphs: &[Graph<T>]) -> Result<Array2<T>> {
    let per: Vec<Array2<T>> = graphs.iter().map(|g| embed_nodes(state, config, g)).collect::<Result<_>>()?;
    graph_readout(&per)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random split with `⌊n·f⌋` train and validation items; the rest is test.
pub fn split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    if n < 3 {
        return Err(Error::TooSmall { needed: 3, got: n });
    }
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("split fractions {fractions:?} must be positive and sum to 1")));
    }
    let n_train = ((n as f64) * a + 1e-9).floor() as usize;
    let n_val = ((n as f64) * b + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Split { train: idx, val, test })
}

pub const PROBE_STEPS: usize = 500;
pub const PROBE_LR: f64 = 0.1;
pub const PROBE_L2: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub best_step: usize,
}

/// Multinomial logistic regression on frozen embeddings, selected by validation accuracy.
///
/// Features are standardized with training-split statistics.
pub fn linear_probe<T: Scalar>(embeddings: &Array2<T>, labels: &[usize], split: &Split) -> Result<ProbeResult> {
    let n = embeddings.nrows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} embeddings", labels.len())));
    }
    if split.train.is_empty() || split.val.is_empty() || split.test.is_empty() {
        return Err(Error::DegenerateSplit("every split part must be non-empty".into()));
    }
    if split.train.iter().chain(&split.val).chain(&split.test).any(|&i| i >= n) {
        return Err(Error::Shape("split index out of range".into()));
    }
    let first = labels[split.train[0]];
    if split.train.iter().all(|&i| labels[i] == first) {
        return Err(Error::DegenerateSplit(format!("training split contains only class {first}")));
    }
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let x: Array2<f64> = embeddings.mapv(|v| v.to_f64_lossy());
    let xt = x.select(Axis(0), &split.train);
    let mean = xt.mean_axis(Axis(0)).expect("non-empty");
    let std = xt.var_axis(Axis(0), 0.0).mapv(|v| if v > 1e-24 { v.sqrt() } else { 1.0 });
    let xs = (&x - &mean) / &std;
    let xtr = xs.select(Axis(0), &split.train);
    let mut onehot = Array2::<f64>::zeros((split.train.len(), classes));
    for (r, &i) in split.train.iter().enumerate() {
        onehot[[r, labels[i]]] = 1.0;
    }
    let d = xs.ncols();
    let mut w = Array2::<f64>::zeros((d, classes));
    let mut b = Array1::<f64>::zeros(classes);
    let m = split.train.len() as f64;
    let accuracy = |w: &Array2<f64>, b: &Array1<f64>, idx: &[usize]| -> f64 {
        let logits = xs.select(Axis(0), idx).dot(w) + b;
        let correct = logits
            .rows()
            .into_iter()
            .zip(idx)
            .filter(|(row, &i)| argmax(row.as_slice().expect("contiguous")) == labels[i])
            .count();
        correct as f64 / idx.len() as f64
    };
    let mut best = (accuracy(&w, &b, &split.val), 0, w.clone(), b.clone());
    for step in 1..=PROBE_STEPS {
        let mut p = xtr.dot(&w) + &b;
        for mut row in p.rows_mut() {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - mx).exp());
            let s = row.sum();
            row /= s;
        }
        let diff = (p - &onehot) / m;
        let gw = xtr.t().dot(&diff) + &w * PROBE_L2;
        let gb = diff.sum_axis(Axis(0));
        w.scaled_add(-PROBE_LR, &gw);
        b.scaled_add(-PROBE_LR, &gb);
        let val = accuracy(&w, &b, &split.val);
        if val > best.0 {
            best = (val, step, w.clone(), b.clone());
        }
    }
    let (val_accuracy, best_step, w, b) = best;
    Ok(ProbeResult { test_accuracy: accuracy(&w, &b, &split.test), val_accuracy, best_step })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Outcome of one training run: final loss, probe accuracies and spectral drift.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub final_loss: f64,
    pub test_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub untrained_test_accuracy: Option<f64>,
    /// Mean spectral distance between the input and each augmented view.
    pub og_aug: Option<f64>,
    /// Mean spectral distance between the two views of an epoch.
    pub aug_aug: Option<f64>,
}

/// Mean OG-AUG and AUG-AUG distances from per-epoch view spectra logged as
/// consecutive `(view 1, view 2)` pairs.
pub fn spectral_drift<T: Scalar>(original: &Spectrum<T>, views: &[Spectrum<T>]) -> Result<(f64, f64)> {
    if views.is_empty() || views.len() % 2 != 0 {
        return Err(Error::Argument(format!("expected view spectra in pairs, got {}", views.len())));
    }
    let mut og = 0.0;
    for v in views {
        og += spectral_distance(original, v)?.to_f64_lossy();
    }
    let mut aa = 0.0;
    for pair in views.chunks(2) {
        aa += spectral_distance(&pair[0], &pair[1])?.to_f64_lossy();
    }
    Ok((og / views.len() as f64, aa / (views.len() / 2) as f64))
}

/// Probes the initial and final encoders of a node-level run and summarizes its spectra.
pub fn summarize_node_run<T: Scalar>(
    config: &TrainConfig,
    g: &Graph<T>,
    record: &RunRecord<T>,
    fractions: (f64, f64, f64),
    split_seed: u64,
) -> Result<RunSummary> {
    let final_loss = record.loss_history.last().copied().unwrap_or(f64::NAN);
    let (mut test, mut val, mut untrained) = (None, None, None);
    if let Some(labels) = g.node_labels() {
        let sp = split(g.n(), fractions, split_seed)?;
        let after = linear_probe(&embed_nodes(&record.final_state, &config.encoder, g)?, labels, &sp)?;
        let before = linear_probe(&embed_nodes(&record.initial_state, &config.encoder, g)?, labels, &sp)?;
        test = Some(after.test_accuracy);
        val = Some(after.val_accuracy);
        untrained = Some(before.test_accuracy);
    }
    let (mut og_aug, mut aug_aug) = (None, None);
    if let Some(views) = &record.augmented_spectra {
        if !views.is_empty() && views.len() == 2 * record.loss_history.len() {
            let (a, b) = spectral_drift(&laplacian_spectrum(g)?, views)?;
            og_aug = Some(a);
            aug_aug = Some(b);
        }
    }
    Ok(RunSummary { final_loss, test_accuracy: test, val_accuracy: val, untrained_test_accuracy: untrained, og_aug, aug_aug })
}

/// Graph-level analogue of [`summarize_node_run`] using mean-readout embeddings.
pub fn summarize_graph_run<T: Scalar>(
    config: &TrainConfig,
    graphs: &[Graph<T>],
    record: &RunRecord<T>,
    fractions: (f64, f64, f64),
    split_seed: u64,
) -> Result<RunSummary> {
    let final_loss = record.loss_history.last().copied().unwrap_or(f64::NAN);
    let labels: Option<Vec<usize>> = graphs
        .iter()
        .map(|g| match g.labels() {
            crate::graph::Labels::Graph(c) => Some(*c),
            _ => None,
        })
        .collect();
    let (mut test, mut val, mut untrained) = (None, None, None);
    if let Some(labels) = labels {
        let sp = split(graphs.len(), fractions, split_seed)?;
        let after = linear_probe(&embed_graphs(&record.final_state, &config.encoder, graphs)?, &labels, &sp)?;
        let before = linear_probe(&embed_graphs(&record.initial_state, &config.encoder, graphs)?, &labels, &sp)?;
        test = Some(after.test_accuracy);
        val = Some(after.val_accuracy);
        untrained = Some(before.test_accuracy);
    }
    Ok(RunSummary { final_loss, test_accuracy: test, val_accuracy: val, untrained_test_accuracy: untrained, og_aug: None, aug_aug: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, GeneratorParams};

    #[test]
    fn split_sizes() {
        let s = split(10, (0.1, 0.1, 0.8), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 8));
        assert_eq!(s, split(10, (0.1, 0.1, 0.8), 1).unwrap());
        let s = split(2708, (0.1, 0.1, 0.8), 4).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (270, 270, 2168));
        assert!(matches!(split(2, (0.1, 0.1, 0.8), 1), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn probe_one_hot_labels() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((60, 3), |(i, j)| if labels[i] == j { 1.0 } else { 0.0 });
        let s = split(60, (0.4, 0.2, 0.4), 2).unwrap();
        assert_eq!(linear_probe(&x, &labels, &s).unwrap().test_accuracy, 1.0);
    }

    #[test]
    fn probe_single_class() {
        let labels = vec![0, 0, 0, 1];
        let s = Split { train: vec![0, 1], val: vec![2], test: vec![3] };
        assert!(matches!(linear_probe(&Array2::<f64>::ones((4, 2)), &labels, &s), Err(Error::DegenerateSplit(_))));
    }

    #[test]
    fn readout_cases() {
        let a = ndarray::array![[1.0, 2.0]];
        assert_eq!(graph_readout(&[a.clone()]).unwrap(), a);
        let b = ndarray::array![[1.0, 2.0], [1.0, 2.0]];
        assert_eq!(graph_readout(&[b]).unwrap(), a);
        assert!(graph_readout(&[Array2::<f64>::zeros((0, 2))]).is_err());
    }

    fn cfg(loss: LossConfig, framework: Framework) -> TrainConfig {
        TrainConfig {
            framework,
            augmentation_1: AugmentationSpec::identity(),
            augmentation_2: AugmentationSpec::identity(),
            encoder: EncoderConfig::new(vec![12, 8], 4),
            loss,
            epochs: 3,
            lr: 0.0,
            seed: 3,
            spectrum_logging: false,
            view_pool: None,
        }
    }

    #[test]
    fn lr_zero_keeps_state_and_mapping_enforced() {
        let g: Graph<f64> = generate_synthetic(&GeneratorParams::sbm(vec![6, 6], 0.6, 0.1), 1).unwrap();
        let c = cfg(LossConfig::Infonce { tau: 0.5 }, Framework::Grace);
        let r = train(&c, TrainData::Node(&g)).unwrap();
        assert_eq!(r.initial_state, r.final_state);
        assert_eq!(r.loss_history.len(), 3);
        let bad = cfg(LossConfig::BarlowTwins { lambda: 0.1 }, Framework::Grace);
        assert!(matches!(train(&bad, TrainData::Node(&g)), Err(Error::Config(_))));
    }
}
