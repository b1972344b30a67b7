//! `train`, `sweep`, `probe` and `report`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cgssl_core::augment::AugmentationSpec;
use cgssl_core::encoder::EncoderState;
use cgssl_core::graph::{generate_synthetic, GeneratorParams, Labels};
use cgssl_core::plot::{line_plot, Series};
use cgssl_core::spectrum::{ensemble_mean_spectrum, laplacian_spectrum, Spectrum};
use cgssl_core::trainer::{
    embed_graphs, embed_nodes, linear_probe, split, summarize_graph_run, summarize_node_run, train, RunSummary,
    TrainConfig, TrainData,
};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::common::*;

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.1, 0.1, 0.8);

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Train/validation/test fractions for the linear probe.
    #[arg(long, value_parser = parse_fractions)]
    pub split: Option<(f64, f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    initial: EncoderState<f64>,
    #[serde(rename = "final")]
    last: EncoderState<f64>,
}

/// Trains one configuration and writes the run directory.
pub fn run_one(cfg: &TrainConfig, input: &Input, out: &Path, fractions: (f64, f64, f64)) -> CliResult<RunSummary> {
    cfg.validate()?;
    prepare_out(out)?;
    write_json(&out.join("config.json"), cfg)?;
    let (record, summary) = match input {
        Input::Graph(g) => {
            let r = train(cfg, TrainData::Node(g))?;
            let s = summarize_node_run(cfg, g, &r, fractions, cfg.seed)?;
            (r, s)
        }
        Input::Dataset(gs) => {
            let r = train(cfg, TrainData::Graphs(gs))?;
            let s = summarize_graph_run(cfg, gs, &r, fractions, cfg.seed)?;
            (r, s)
        }
    };
    let mut t = Table::create(&out.join("metrics.csv"), &["epoch", "loss"])?;
    for (e, l) in record.loss_history.iter().enumerate() {
        t.row([e.to_string(), num(*l)])?;
    }
    t.finish()?;
    let mut t = Table::create(&out.join("timing.csv"), &["epoch", "seconds"])?;
    for (e, s) in record.wallclock_per_epoch.iter().enumerate() {
        t.row([e.to_string(), num(*s)])?;
    }
    t.finish()?;
    if let (Input::Graph(g), Some(spectra)) = (input, &record.augmented_spectra) {
        let dir = out.join("spectra");
        prepare_out(&dir)?;
        write_spectrum_csv(&dir.join("original.csv"), &laplacian_spectrum(g)?)?;
        for (e, pair) in spectra.chunks(2).enumerate() {
            let mut t = Table::create(&dir.join(format!("epoch_{e:04}.csv")), &["view", "index", "eigenvalue"])?;
            for (vi, s) in pair.iter().enumerate() {
                for (i, v) in s.values.iter().enumerate() {
                    t.row([(vi + 1).to_string(), i.to_string(), num(*v)])?;
                }
            }
            t.finish()?;
        }
    }
    write_json(&out.join("checkpoint.json"), &Checkpoint { initial: record.initial_state, last: record.final_state })?;
    write_json(&out.join("augment_reports.json"), &record.augment_reports)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_spectrum_csv(path: &Path, s: &Spectrum<f64>) -> CliResult<()> {
    let mut t = Table::create(path, &["index", "eigenvalue"])?;
    for (i, v) in s.values.iter().enumerate() {
        t.row([i.to_string(), num(*v)])?;
    }
    t.finish()
}

pub fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let mut cfg: TrainConfig = read_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    } else if std::env::var("CGSSL_SEED").is_ok() {
        cfg.seed = resolve_seed(None)?;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    cfg.validate()?;
    let input = read_graph_input(&a.data)?;
    let out = prepare_out(&a.out)?;
    let s = run_one(&cfg, &input, &out, a.split.unwrap_or(DEFAULT_SPLIT))?;
    write_run_json(&out, "train", Some(cfg.seed), json!({"train": cfg, "data": a.data}))?;
    println!("final_loss={} test_accuracy={}", num(s.final_loss), opt_num(s.test_accuracy));
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Path(PathBuf),
    /// Generated per run; `seed` fixes one graph for all runs, otherwise each run uses its own seed.
    Generate {
        generate: GeneratorParams,
        #[serde(default)]
        seed: Option<u64>,
    },
}

/// A training configuration with sweep axes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub data: DataSource,
    /// DropEdge rates applied to both views.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_p: Option<Vec<f64>>,
    /// AddEdge rates applied to both views.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add_q: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_split() -> [f64; 3] {
    [DEFAULT_SPLIT.0, DEFAULT_SPLIT.1, DEFAULT_SPLIT.2]
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub run: usize,
    pub param_name: &'static str,
    pub param: Option<f64>,
    pub seed: u64,
    pub config: TrainConfig,
}

impl ExperimentConfig {
    pub fn points(&self) -> CliResult<Vec<SweepPoint>> {
        if self.seeds.is_empty() {
            return Err(CliError::usage("seeds must not be empty"));
        }
        let axis: Vec<(&'static str, Option<f64>)> = match (&self.drop_p, &self.add_q) {
            (Some(_), Some(_)) => return Err(CliError::usage("set drop_p or add_q, not both")),
            (Some(ps), None) => ps.iter().map(|&p| ("p", Some(p))).collect(),
            (None, Some(qs)) => qs.iter().map(|&q| ("q", Some(q))).collect(),
            (None, None) => vec![("param", None)],
        };
        let mut out = Vec::new();
        for (name, value) in axis {
            for &seed in &self.seeds {
                let mut c = self.train.clone();
                c.seed = seed;
                c.spectrum_logging = true;
                if let Some(v) = value {
                    let spec = if name == "p" { AugmentationSpec::drop_edge(v) } else { AugmentationSpec::add_edge(v) };
                    c.augmentation_1 = spec.clone();
                    c.augmentation_2 = spec;
                }
                c.validate()?;
                out.push(SweepPoint { run: out.len(), param_name: name, param: value, seed, config: c });
            }
        }
        Ok(out)
    }

    fn input_for(&self, seed: u64) -> CliResult<Input> {
        match &self.data {
            DataSource::Path(p) => read_graph_input(p),
            DataSource::Generate { generate, seed: fixed } => {
                Ok(Input::Graph(generate_synthetic(generate, fixed.unwrap_or(seed))?))
            }
        }
    }
}

pub fn sweep_cmd(a: SweepArgs) -> CliResult<()> {
    let cfg: ExperimentConfig = read_config(&a.config)?;
    let out = a.out.clone().or_else(|| cfg.output_dir.clone()).ok_or_else(|| CliError::usage("sweep needs --out or output_dir"))?;
    if a.jobs == 0 {
        return Err(CliError::usage("--jobs must be >= 1"));
    }
    let points = cfg.points()?;
    let out = prepare_out(&out)?;
    write_json(&out.join("config.json"), &cfg)?;
    let fractions = (cfg.split[0], cfg.split[1], cfg.split[2]);
    let results: Mutex<Vec<Option<RunSummary>>> = Mutex::new(vec![None; points.len()]);
    let errors: Mutex<Vec<CliError>> = Mutex::new(Vec::new());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..a.jobs.min(points.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let pt = &points[i];
                let dir = out.join(format!("run_{i:03}"));
                let r = cfg.input_for(pt.seed).and_then(|input| {
                    let s = run_one(&pt.config, &input, &dir, fractions)?;
                    write_run_json(&dir, "sweep", Some(pt.seed), json!({"train": pt.config, "data": cfg.data}))?;
                    Ok(s)
                });
                match r {
                    Ok(s) => results.lock().expect("lock")[i] = Some(s),
                    Err(e) => errors.lock().expect("lock").push(e),
                }
            });
        }
    });
    if let Some(e) = errors.into_inner().expect("lock").into_iter().next() {
        return Err(e);
    }
    let results = results.into_inner().expect("lock");
    let name = points.first().map_or("param", |p| p.param_name);
    let mut t = Table::create(
        &out.join("sweep.csv"),
        &["run", name, "seed", "og_aug", "aug_aug", "accuracy", "val_accuracy", "untrained_accuracy", "final_loss"],
    )?;
    for (pt, r) in points.iter().zip(&results) {
        let r = r.as_ref().expect("every run finished");
        t.row([
            pt.run.to_string(),
            opt_num(pt.param),
            pt.seed.to_string(),
            opt_num(r.og_aug),
            opt_num(r.aug_aug),
            opt_num(r.test_accuracy),
            opt_num(r.val_accuracy),
            opt_num(r.untrained_test_accuracy),
            num(r.final_loss),
        ])?;
    }
    t.finish()?;
    write_run_json(&out, "sweep", None, serde_json::to_value(&cfg)?)?;
    println!("wrote {} ({} runs)", out.join("sweep.csv").display(), points.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// A `train` output directory (config.json + checkpoint.json).
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_fractions)]
    pub split: Option<(f64, f64, f64)>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn probe_cmd(a: ProbeArgs) -> CliResult<()> {
    let cfg: TrainConfig = read_config(&a.run.join("config.json"))?;
    let ck: Checkpoint = read_config(&a.run.join("checkpoint.json"))?;
    let seed = match a.seed {
        Some(s) => s,
        None if std::env::var("CGSSL_SEED").is_ok() => resolve_seed(None)?,
        None => cfg.seed,
    };
    let fractions = a.split.unwrap_or(DEFAULT_SPLIT);
    let (emb_final, emb_init, labels) = match read_graph_input(&a.data)? {
        Input::Graph(g) => {
            let labels = g.node_labels().ok_or_else(|| CliError::usage("graph has no node labels"))?.to_vec();
            (embed_nodes(&ck.last, &cfg.encoder, &g)?, embed_nodes(&ck.initial, &cfg.encoder, &g)?, labels)
        }
        Input::Dataset(gs) => {
            let labels = gs
                .iter()
                .map(|g| match g.labels() {
                    Labels::Graph(c) => Ok(*c),
                    _ => Err(CliError::usage("every graph needs a graph label")),
                })
                .collect::<CliResult<Vec<_>>>()?;
            (embed_graphs(&ck.last, &cfg.encoder, &gs)?, embed_graphs(&ck.initial, &cfg.encoder, &gs)?, labels)
        }
    };
    let sp = split(labels.len(), fractions, seed)?;
    let trained = linear_probe(&emb_final, &labels, &sp)?;
    let untrained = linear_probe(&emb_init, &labels, &sp)?;
    let out = prepare_out(&a.out)?;
    write_json(&out.join("probe.json"), &json!({"trained": trained, "untrained": untrained, "split": fractions, "seed": seed}))?;
    write_run_json(&out, "probe", Some(seed), json!({"data": a.data, "run": a.run, "split": fractions}))?;
    println!("test_accuracy={} untrained_test_accuracy={}", num(trained.test_accuracy), num(untrained.test_accuracy));
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Run directories (or sweep directories containing `run_*`).
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

struct RunData {
    dir: PathBuf,
    hash: String,
    label: String,
    family: String,
    param: Option<f64>,
    final_loss: f64,
    summary: Option<Value>,
    original: Option<Vec<f64>>,
    views: Vec<Vec<f64>>,
}

fn read_csv_column(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::runtime(format!("{}: no column {column}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(rec[idx].parse().map_err(|_| CliError::runtime(format!("{}: bad number {:?}", path.display(), &rec[idx])))?);
    }
    Ok(out)
}

fn load_run(dir: &Path) -> CliResult<RunData> {
    let losses = read_csv_column(&dir.join("metrics.csv"), "loss")?;
    let config: Value = read_json(&dir.join("config.json")).unwrap_or(Value::Null);
    let mut keyed = config.clone();
    if let Some(o) = keyed.as_object_mut() {
        o.remove("seed");
    }
    let hash = sha256_hex(keyed.to_string().as_bytes())[..12].to_string();
    let aug = |k: &str| config.get(k).map(|v| v.to_string()).unwrap_or_default();
    let label = format!(
        "{} {}",
        config.get("framework").and_then(Value::as_str).unwrap_or("?"),
        aug("augmentation_1")
    );
    let param = config.get("augmentation_1").and_then(|a| a.get("p").or_else(|| a.get("q"))).and_then(Value::as_f64);
    let run_json = read_json(&dir.join("run.json")).ok();
    let family = run_json.as_ref().and_then(|r| r.pointer("/config/data")).map(|d| d.to_string()).unwrap_or_else(|| "data".into());
    let summary = read_json(&dir.join("summary.json")).ok();
    let sdir = dir.join("spectra");
    let original = read_csv_column(&sdir.join("original.csv"), "eigenvalue").ok();
    let mut views = Vec::new();
    if let Ok(entries) = std::fs::read_dir(&sdir) {
        let mut files: Vec<PathBuf> =
            entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("epoch_"))).collect();
        files.sort();
        for f in files {
            let mut r = csv::Reader::from_path(&f)?;
            let mut by_view: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for rec in r.records() {
                let rec = rec?;
                let v: f64 = rec[2].parse().map_err(|_| CliError::runtime(format!("{}: bad number", f.display())))?;
                by_view.entry(rec[0].to_string()).or_default().push(v);
            }
            views.extend(by_view.into_values());
        }
    }
    Ok(RunData {
        dir: dir.to_path_buf(),
        hash,
        label,
        family,
        param,
        final_loss: losses.last().copied().unwrap_or(f64::NAN),
        summary,
        original,
        views,
    })
}

fn mean_std(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.len() >= 2).then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (m, s)
}

pub fn report_cmd(a: ReportArgs) -> CliResult<()> {
    let mut dirs = Vec::new();
    for d in &a.runs {
        if d.join("metrics.csv").exists() {
            dirs.push(d.clone());
            continue;
        }
        let mut sub: Vec<PathBuf> = std::fs::read_dir(d)
            .map(|it| it.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join("metrics.csv").exists()).collect())
            .unwrap_or_default();
        sub.sort();
        if sub.is_empty() {
            dirs.push(d.clone());
        }
        dirs.extend(sub);
    }
    let mut warnings = Vec::new();
    let mut runs = Vec::new();
    for d in dirs {
        match load_run(&d) {
            Ok(r) => runs.push(r),
            Err(e) => {
                let w = format!("{}: skipped ({e})", d.display());
                eprintln!("warning: {w}");
                warnings.push(w);
            }
        }
    }
    let out = prepare_out(&a.out)?;
    let mut groups: BTreeMap<String, Vec<&RunData>> = BTreeMap::new();
    for r in &runs {
        groups.entry(r.hash.clone()).or_default().push(r);
    }
    let metric = |r: &RunData, k: &str| r.summary.as_ref().and_then(|s| s.get(k)).and_then(Value::as_f64);
    let mut t = Table::create(
        &out.join("report.csv"),
        &[
            "config_hash", "label", "param", "runs", "final_loss_mean", "final_loss_std", "accuracy_mean", "accuracy_std",
            "untrained_accuracy_mean", "og_aug_mean", "aug_aug_mean",
        ],
    )?;
    let mut curve: Vec<(f64, f64, f64)> = Vec::new();
    for (hash, rs) in &groups {
        let losses: Vec<f64> = rs.iter().map(|r| r.final_loss).collect();
        let (lm, ls) = mean_std(&losses);
        let col = |k: &str| -> Vec<f64> { rs.iter().filter_map(|r| metric(r, k)).collect() };
        let stat = |k: &str| {
            let v = col(k);
            if v.is_empty() {
                (String::new(), String::new())
            } else {
                let (m, s) = mean_std(&v);
                (num(m), s.map(num).unwrap_or_default())
            }
        };
        let (am, asd) = stat("test_accuracy");
        if let (Some(p), Ok(m)) = (rs[0].param, am.parse::<f64>()) {
            curve.push((p, m, asd.parse().unwrap_or(0.0)));
        }
        t.row([
            hash.clone(),
            rs[0].label.clone(),
            opt_num(rs[0].param),
            rs.len().to_string(),
            num(lm),
            ls.map(num).unwrap_or_default(),
            am,
            asd,
            stat("untrained_test_accuracy").0,
            stat("og_aug").0,
            stat("aug_aug").0,
        ])?;
    }
    t.finish()?;
    if curve.len() >= 2 {
        curve.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let s = Series {
            label: "accuracy".into(),
            x: curve.iter().map(|c| c.0).collect(),
            y: curve.iter().map(|c| c.1).collect(),
            band: Some(curve.iter().map(|c| c.2).collect()),
        };
        std::fs::write(out.join("accuracy.svg"), line_plot("Probe accuracy", "perturbation rate", "test accuracy", &[s]))?;
    }
    let mut families: BTreeMap<&str, Vec<&RunData>> = BTreeMap::new();
    for r in &runs {
        families.entry(r.family.as_str()).or_default().push(r);
    }
    for (fi, (_, rs)) in families.iter().enumerate() {
        let mut series = Vec::new();
        if let Some(o) = rs.iter().find_map(|r| r.original.clone()) {
            let n = o.len().max(2) as f64 - 1.0;
            series.push(Series { label: "original".into(), x: (0..o.len()).map(|i| i as f64 / n).collect(), y: o, band: None });
        }
        let mut by_cfg: BTreeMap<&str, Vec<Spectrum<f64>>> = BTreeMap::new();
        for r in rs {
            by_cfg.entry(r.hash.as_str()).or_default().extend(r.views.iter().map(|v| Spectrum::new(v.clone())));
        }
        for (h, spectra) in by_cfg {
            if spectra.is_empty() {
                continue;
            }
            let Ok((mean, std)) = ensemble_mean_spectrum(&spectra) else { continue };
            let n = mean.values.len().max(2) as f64 - 1.0;
            let label = rs.iter().find(|r| r.hash == h).map(|r| r.label.clone()).unwrap_or_default();
            series.push(Series {
                label: format!("{label} ({h})"),
                x: (0..mean.values.len()).map(|i| i as f64 / n).collect(),
                y: mean.values,
                band: Some(std),
            });
        }
        if !series.is_empty() {
            std::fs::write(
                out.join(format!("spectra_{fi}.svg")),
                line_plot("Mean augmented spectrum", "relative eigenvalue index", "eigenvalue", &series),
            )?;
        }
    }
    write_json(&out.join("report.json"), &json!({"runs": runs.iter().map(|r| r.dir.clone()).collect::<Vec<_>>(), "warnings": warnings}))?;
    write_run_json(&out, "report", None, json!({"runs": a.runs}))?;
    println!("wrote {} ({} runs, {} groups)", out.join("report.csv").display(), runs.len(), groups.len());
    Ok(())
}

