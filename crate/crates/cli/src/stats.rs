//! `analyze` and `bench`.

use std::path::PathBuf;

use cgssl_core::analysis::{iv2sls, log_log_slope, poly_regression, time_benchmark, RegressionResult, TimedOp};
use cgssl_core::graph::{generate_synthetic, GeneratorParams, Graph};
use clap::Args;
use serde_json::json;

use crate::common::*;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// A `sweep.csv` (columns p or q, og_aug, aug_aug, accuracy).
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

struct Columns {
    param_name: String,
    param: Vec<f64>,
    og_aug: Vec<f64>,
    aug_aug: Vec<f64>,
    accuracy: Vec<f64>,
}

fn read_sweep(path: &std::path::Path) -> CliResult<Columns> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Usage { kind: "unreadable_path", message: format!("{}: {e}", path.display()) })?;
    let headers = r.headers()?.clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let pi = find(&["p", "q"]).ok_or_else(|| CliError::usage("sweep.csv needs a p or q column"))?;
    let cols = [
        find(&["og_aug"]).ok_or_else(|| CliError::usage("sweep.csv needs og_aug"))?,
        find(&["aug_aug"]).ok_or_else(|| CliError::usage("sweep.csv needs aug_aug"))?,
        find(&["accuracy", "test_accuracy"]).ok_or_else(|| CliError::usage("sweep.csv needs accuracy"))?,
    ];
    let mut c = Columns { param_name: headers[pi].to_string(), param: vec![], og_aug: vec![], aug_aug: vec![], accuracy: vec![] };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> CliResult<f64> {
            rec[i].parse().map_err(|_| CliError::Usage { kind: "parse", message: format!("row {}: bad number {:?}", line + 1, &rec[i]) })
        };
        c.param.push(get(pi)?);
        c.og_aug.push(get(cols[0])?);
        c.aug_aug.push(get(cols[1])?);
        c.accuracy.push(get(cols[2])?);
    }
    Ok(c)
}

const REG_HEADER: [&str; 13] =
    ["model", "regressor", "instrument", "n", "dof", "b0", "b1", "b2", "r_squared", "adj_r_squared", "f_statistic", "p_value", "first_stage_f"];

fn reg_row(model: String, regressor: &str, instrument: &str, r: &RegressionResult) -> Vec<String> {
    let coef = |i: usize| r.coefficients.get(i).copied().map(num).unwrap_or_default();
    vec![
        model,
        regressor.into(),
        instrument.into(),
        r.n.to_string(),
        r.dof.to_string(),
        coef(0),
        coef(1),
        coef(2),
        num(r.r_squared),
        num(r.adj_r_squared),
        num(r.f_statistic),
        num(r.p_value),
        opt_num(r.first_stage_f),
    ]
}

fn skip(warnings: &mut Vec<String>, what: String, e: cgssl_core::Error) {
    let w = format!("{what}: skipped ({e})");
    eprintln!("warning: {w}");
    warnings.push(w);
}

pub fn analyze_cmd(a: AnalyzeArgs) -> CliResult<()> {
    let c = read_sweep(&a.input)?;
    let out = prepare_out(&a.out)?;
    let regressors: [(&str, &[f64]); 3] = [(&c.param_name, &c.param), ("og_aug", &c.og_aug), ("aug_aug", &c.aug_aug)];
    let mut warnings = Vec::new();
    let mut t = Table::create(&out.join("polynomial.csv"), &REG_HEADER)?;
    for order in [1, 2] {
        for (name, x) in regressors {
            let r = match poly_regression(x, &c.accuracy, order) {
                Ok(r) => r,
                Err(e @ (cgssl_core::Error::Collinear | cgssl_core::Error::TooSmall { .. })) => {
                    skip(&mut warnings, format!("order{order} {name}"), e);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            t.row(reg_row(format!("order{order}"), name, "", &r))?;
            println!("order{order} {name}: r2={} p={}", num(r.r_squared), num(r.p_value));
        }
    }
    t.finish()?;
    let mut t = Table::create(&out.join("iv2sls.csv"), &REG_HEADER)?;
    for (xn, x) in [("og_aug", &c.og_aug), ("aug_aug", &c.aug_aug)] {
        for (zn, z) in [("param", &c.param), ("og_aug", &c.og_aug)] {
            let zn = if zn == "param" { c.param_name.as_str() } else { zn };
            if xn == zn {
                continue;
            }
            let r = match iv2sls(&c.accuracy, x, z) {
                Ok(r) => r,
                Err(e @ (cgssl_core::Error::Collinear | cgssl_core::Error::DegenerateInstrument | cgssl_core::Error::TooSmall { .. })) => {
                    skip(&mut warnings, format!("iv2sls {xn} | {zn}"), e);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            for w in &r.warnings {
                let w = format!("{xn} ~ {zn}: {w}");
                eprintln!("warning: {w}");
                warnings.push(w);
            }
            t.row(reg_row("iv2sls".into(), xn, zn, &r))?;
            println!("iv2sls {xn} | {zn}: b1={} p={}", num(r.coefficients[1]), num(r.p_value));
        }
    }
    t.finish()?;
    write_run_json(&out, "analyze", None, json!({"in": a.input, "warnings": warnings}))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub n: Vec<usize>,
    #[arg(long = "mean-degree", default_value_t = 10.0)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn bench_cmd(a: BenchArgs) -> CliResult<()> {
    let sizes = a.n;
    if sizes.len() < 3 {
        return Err(CliError::usage("--n needs at least three sizes"));
    }
    let seed = resolve_seed(a.seed)?;
    let out = prepare_out(&a.out)?;
    let mut rows = Vec::new();
    for &n in &sizes {
        if n < 2 || a.mean_degree <= 0.0 || a.mean_degree > (n - 1) as f64 {
            return Err(CliError::usage(format!("mean degree {} impossible for n = {n}", a.mean_degree)));
        }
        let g: Graph<f64> = generate_synthetic(&GeneratorParams::er(n, a.mean_degree / (n - 1) as f64), seed)?;
        for op in [TimedOp::Spectrum, TimedOp::DropEdge, TimedOp::AddEdge] {
            let r = time_benchmark(op, &g, a.repeats)?;
            println!("{} n={} m={} seconds={}", r.method, r.n, r.m, num(r.seconds_per_call));
            rows.push(r);
        }
    }
    let mut t = Table::create(&out.join("timing.csv"), &["method", "n", "m", "seconds_per_call"])?;
    for r in &rows {
        t.row([r.method.clone(), r.n.to_string(), r.m.to_string(), num(r.seconds_per_call)])?;
    }
    t.finish()?;
    let series = |op: TimedOp| -> (Vec<f64>, Vec<f64>) {
        rows.iter().filter(|r| r.method == op.method_name()).map(|r| (r.n as f64, r.seconds_per_call)).unzip()
    };
    let (xs, spec) = series(TimedOp::Spectrum);
    let (_, drop) = series(TimedOp::DropEdge);
    let slope = log_log_slope(&xs, &spec)?;
    let largest = spec.len() - 1;
    let ratio = spec[largest] / drop[largest];
    println!("spectrum log-log slope={} ratio at n={}: {}", num(slope), sizes[largest], num(ratio));
    write_json(&out.join("bench.json"), &json!({"spectrum_slope": slope, "largest_n": sizes[largest], "spectrum_to_drop_edge_ratio": ratio}))?;
    write_run_json(&out, "bench", Some(seed), json!({"n": sizes, "mean_degree": a.mean_degree, "repeats": a.repeats}))?;
    Ok(())
}
