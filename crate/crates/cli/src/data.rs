//! `gen`, `spectrum` and `augment`.

use std::path::PathBuf;

use cgssl_core::augment::{apply, ppr_diffusion, span_pair, AugmentationKind, AugmentationSpec};
use cgssl_core::graph::{
    generate_graph_dataset, generate_synthetic, graph_to_json, save_dataset, save_graph, FeatureSpec, GeneratorParams,
};
use cgssl_core::plot::{line_plot, Series};
use cgssl_core::rng::sub_rng;
use cgssl_core::spectrum::{ensemble_mean_spectrum, histogram, kde_curve, laplacian_spectrum, Bandwidth, Spectrum};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::common::*;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Er,
    Sbm,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Generator JSON, or `{"families": [...], "per_family": N}` for a graph-level dataset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    /// SBM block sizes, e.g. `100,100`.
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    /// `identity`, `gaussian:DIM` or `class-gaussian:DIM:SIGNAL`.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GenConfig {
    Dataset { families: Vec<GeneratorParams>, per_family: usize },
    Single(GeneratorParams),
}

fn parse_features(s: &str) -> CliResult<FeatureSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::usage(format!("bad --features value {s:?}"));
    match parts.as_slice() {
        ["identity"] => Ok(FeatureSpec::Identity),
        ["gaussian", d] => Ok(FeatureSpec::Gaussian { dim: d.parse().map_err(|_| bad())? }),
        ["class-gaussian", d, sig] => Ok(FeatureSpec::ClassGaussian {
            dim: d.parse().map_err(|_| bad())?,
            signal: sig.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

pub fn gen(a: GenArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed)?;
    let out = prepare_out(&a.out)?;
    let features = a.features.as_deref().map(parse_features).transpose()?;
    let config = match (&a.config, a.family) {
        (Some(path), None) => read_config::<GenConfig>(path)?,
        (None, Some(Family::Er)) => {
            let (n, p) = a.n.zip(a.p).ok_or_else(|| CliError::usage("er needs --n and --p"))?;
            GenConfig::Single(GeneratorParams::er(n, p))
        }
        (None, Some(Family::Sbm)) => {
            let blocks = a.blocks.as_deref().ok_or_else(|| CliError::usage("sbm needs --blocks"))?;
            let blocks: Vec<usize> = parse_list(blocks).map_err(CliError::usage)?;
            let (p_in, p_out) = a.p_in.zip(a.p_out).ok_or_else(|| CliError::usage("sbm needs --p-in and --p-out"))?;
            GenConfig::Single(GeneratorParams::sbm(blocks, p_in, p_out))
        }
        (Some(_), Some(_)) => return Err(CliError::usage("use either --config or --family, not both")),
        (None, None) => return Err(CliError::usage("gen needs --config or --family")),
    };
    match config {
        GenConfig::Single(mut params) => {
            if let Some(f) = features {
                params = params.with_features(f);
            }
            let g = generate_synthetic::<f64>(&params, seed)?;
            save_graph(out.join("graph.json"), &g)?;
            write_run_json(&out, "gen", Some(seed), serde_json::to_value(&params)?)?;
            println!("wrote {} (n = {}, m = {})", out.join("graph.json").display(), g.n(), g.num_edges());
        }
        GenConfig::Dataset { mut families, per_family } => {
            if let Some(f) = features {
                families = families.into_iter().map(|p| p.with_features(f.clone())).collect();
            }
            let graphs = generate_graph_dataset::<f64>(&families, per_family, seed)?;
            save_dataset(out.join("dataset.json"), &graphs)?;
            write_run_json(&out, "gen", Some(seed), json!({"families": families, "per_family": per_family}))?;
            println!("wrote {} ({} graphs)", out.join("dataset.json").display(), graphs.len());
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// `auto` (Scott's rule) or a fixed positive bandwidth.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[arg(long)]
    pub svg: bool,
}

fn write_spectrum(path: &std::path::Path, s: &Spectrum<f64>) -> CliResult<()> {
    let mut t = Table::create(path, &["index", "eigenvalue"])?;
    for (i, v) in s.values.iter().enumerate() {
        t.row([i.to_string(), num(*v)])?;
    }
    t.finish()
}

pub fn spectrum(a: SpectrumArgs) -> CliResult<()> {
    let bandwidth = match a.bandwidth.as_str() {
        "auto" => Bandwidth::Auto,
        x => Bandwidth::Fixed(x.parse().map_err(|_| CliError::usage(format!("bad --bandwidth {x:?}")))?),
    };
    let input = read_graph_input(&a.input)?;
    let out = prepare_out(&a.out)?;
    match input {
        Input::Graph(g) => {
            let s = laplacian_spectrum(&g)?;
            write_spectrum(&out.join("spectrum.csv"), &s)?;
            let h = histogram(&s, a.bins)?;
            let mut t = Table::create(&out.join("histogram.csv"), &["bin_left", "bin_right", "density"])?;
            for (i, d) in h.density.iter().enumerate() {
                t.row([num(h.edges[i]), num(h.edges[i + 1]), num(*d)])?;
            }
            t.finish()?;
            if a.svg {
                let centers: Vec<f64> = h.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                let series = Series { label: "density".into(), x: centers, y: h.density.clone(), band: None };
                std::fs::write(out.join("histogram.svg"), line_plot("Eigenvalue histogram", "eigenvalue", "density", &[series]))?;
            }
        }
        Input::Dataset(graphs) => {
            let spectra: Vec<Spectrum<f64>> = graphs.iter().map(laplacian_spectrum).collect::<Result<_, _>>()?;
            let mut t = Table::create(&out.join("spectra.csv"), &["graph", "index", "eigenvalue"])?;
            for (gi, s) in spectra.iter().enumerate() {
                for (i, v) in s.values.iter().enumerate() {
                    t.row([gi.to_string(), i.to_string(), num(*v)])?;
                }
            }
            t.finish()?;
            let curve = kde_curve(&spectra, bandwidth, a.grid)?;
            let mut t = Table::create(&out.join("kde.csv"), &["grid", "mean", "std"])?;
            for i in 0..curve.grid.len() {
                t.row([num(curve.grid[i]), num(curve.mean[i]), num(curve.std[i])])?;
            }
            t.finish()?;
            if a.svg {
                let series = Series { label: "mean ± std".into(), x: curve.grid, y: curve.mean, band: Some(curve.std) };
                std::fs::write(out.join("kde.svg"), line_plot("Eigenvalue density", "eigenvalue", "density", &[series]))?;
            }
        }
    }
    write_run_json(&out, "spectrum", None, json!({"input": a.input, "bins": a.bins, "grid": a.grid, "bandwidth": a.bandwidth}))
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Augmentation as inline JSON, e.g. `{"kind":"drop_edge","p":0.2}`.
    #[arg(long, conflicts_with = "spec_file")]
    pub spec: Option<String>,
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Also write per-view and mean spectra.
    #[arg(long)]
    pub spectra: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn augment(a: AugmentArgs) -> CliResult<()> {
    let spec: AugmentationSpec = match (&a.spec, &a.spec_file) {
        (Some(s), _) => serde_json::from_str(s).map_err(|e| CliError::Usage { kind: "config", message: format!("--spec: {e}") })?,
        (None, Some(p)) => read_config(p)?,
        (None, None) => return Err(CliError::usage("augment needs --spec or --spec-file")),
    };
    spec.validate()?;
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be >= 1"));
    }
    let seed = spec.seed.unwrap_or(resolve_seed(a.seed)?);
    let g = read_graph(&a.input)?;
    let out = prepare_out(&a.out)?;
    let mut reports = Vec::new();
    let mut view_spectra: Vec<(usize, &'static str, Spectrum<f64>)> = Vec::new();
    match spec.kind {
        AugmentationKind::Ppr { alpha } => {
            let s = ppr_diffusion(&g, alpha)?;
            let mut t = Table::create(&out.join("ppr.csv"), &(0..g.n()).map(|i| format!("c{i}")).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>())?;
            for row in s.rows() {
                t.row(row.iter().map(|v| num(*v)))?;
            }
            t.finish()?;
        }
        AugmentationKind::Span { budget, candidates } => {
            for i in 0..a.samples {
                let r = span_pair(&g, budget, candidates, &mut sub_rng(seed, i as u64))?;
                for (tag, v) in [("a", &r.views.0), ("b", &r.views.1)] {
                    std::fs::write(out.join(format!("view_{i:03}_{tag}.json")), serde_json::to_string(&graph_to_json(&v.graph))?)?;
                    if a.spectra {
                        view_spectra.push((i, tag, laplacian_spectrum(&v.graph)?));
                    }
                }
                reports.push(json!({"sample": i, "views": [r.views.0.report, r.views.1.report], "objective_history": r.objective_history}));
            }
        }
        _ => {
            for i in 0..a.samples {
                let v = apply(&spec, &g, &mut sub_rng(seed, i as u64))?;
                std::fs::write(out.join(format!("view_{i:03}.json")), serde_json::to_string(&graph_to_json(&v.graph))?)?;
                if a.spectra {
                    view_spectra.push((i, "a", laplacian_spectrum(&v.graph)?));
                }
                reports.push(json!({"sample": i, "report": v.report}));
            }
        }
    }
    write_json(&out.join("reports.json"), &reports)?;
    if a.spectra && !view_spectra.is_empty() {
        write_spectrum(&out.join("original_spectrum.csv"), &laplacian_spectrum(&g)?)?;
        let mut t = Table::create(&out.join("spectra.csv"), &["sample", "view", "index", "eigenvalue"])?;
        for (i, tag, s) in &view_spectra {
            for (j, v) in s.values.iter().enumerate() {
                t.row([i.to_string(), tag.to_string(), j.to_string(), num(*v)])?;
            }
        }
        t.finish()?;
        let all: Vec<Spectrum<f64>> = view_spectra.into_iter().map(|x| x.2).collect();
        let (mean, std) = ensemble_mean_spectrum(&all)?;
        let mut t = Table::create(&out.join("mean_spectrum.csv"), &["index", "mean", "std"])?;
        for (j, (m, s)) in mean.values.iter().zip(&std).enumerate() {
            t.row([j.to_string(), num(*m), num(*s)])?;
        }
        t.finish()?;
    }
    write_run_json(&out, "augment", Some(seed), json!({"input": a.input, "spec": spec, "samples": a.samples}))
}
