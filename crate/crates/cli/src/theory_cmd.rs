//! `bounds` and `verify`.

use std::path::PathBuf;

use cgssl_core::graph::GeneratorParams;
use cgssl_core::rng::sub_seed;
use cgssl_core::theory::{
    bound_params, infonce_bounds, verify_lemma, verify_lemma6, verify_theorem, BoundInputs, Construction, LemmaTrialSpec,
};
use clap::{ArgGroup, Args};
use serde_json::json;

use crate::common::*;

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").args(["preset", "config"])))]
pub struct BoundsArgs {
    /// Built-in inputs (`appendix-d`).
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON file with the bound inputs.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long = "l-w")]
    pub l_w: Option<f64>,
    #[arg(long = "c-z")]
    pub c_z: Option<f64>,
    /// Sweep one input, e.g. `delta=0,0.05,0.1` (n, d, k, tau, delta, l_w, c_z).
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn set_input(i: &mut BoundInputs, name: &str, v: f64) -> CliResult<()> {
    let whole = |v: f64| -> CliResult<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(CliError::usage(format!("{name} must be a non-negative integer, got {v}")))
        }
    };
    match name {
        "n" => i.n = whole(v)?,
        "d" => i.d = whole(v)?,
        "k" => i.k = whole(v)? as u32,
        "n_v" => i.n_v = whole(v)?,
        "tau" => i.tau = v,
        "delta" => i.delta = v,
        "l_w" => i.l_w = v,
        "c_z" => i.c_z = v,
        "d_min" => i.d_min = v,
        "d_max" => i.d_max = v,
        "x_norm" => i.x_norm = v,
        "p_norm" => i.p_norm = v,
        _ => return Err(CliError::usage(format!("cannot sweep unknown input {name:?}"))),
    }
    Ok(())
}

pub fn bounds_cmd(a: BoundsArgs) -> CliResult<()> {
    let mut base = match (&a.preset, &a.config) {
        (Some(p), None) if p == "appendix-d" => BoundInputs::worked_example(),
        (Some(p), None) => return Err(CliError::usage(format!("unknown preset {p:?} (expected appendix-d)"))),
        (None, Some(c)) => read_config(c)?,
        _ => return Err(CliError::usage("bounds needs --preset or --config")),
    };
    for (name, v) in [
        ("n", a.n.map(|x| x as f64)),
        ("d", a.d.map(|x| x as f64)),
        ("k", a.k.map(f64::from)),
        ("tau", a.tau),
        ("delta", a.delta),
        ("l_w", a.l_w),
        ("c_z", a.c_z),
    ] {
        if let Some(v) = v {
            set_input(&mut base, name, v)?;
        }
    }
    let rows: Vec<BoundInputs> = match &a.sweep {
        None => vec![base],
        Some(s) => {
            let (name, values) = s.split_once('=').ok_or_else(|| CliError::usage("--sweep expects NAME=v1,v2,..."))?;
            let values: Vec<f64> = parse_list(values).map_err(CliError::usage)?;
            values
                .into_iter()
                .map(|v| {
                    let mut i = base;
                    set_input(&mut i, name.trim(), v)?;
                    Ok(i)
                })
                .collect::<CliResult<_>>()?
        }
    };
    let results = rows.iter().map(|i| Ok((*i, infonce_bounds(i)?, bound_params(i)?))).collect::<CliResult<Vec<_>>>()?;
    for (_, r, _) in &results {
        println!("lower={} upper={}", num(r.lower), num(r.upper));
    }
    if let Some(out) = &a.out {
        let out = prepare_out(out)?;
        let mut t = Table::create(
            &out.join("bounds.csv"),
            &[
                "n", "d", "n_v", "d_min", "d_max", "k", "l_w", "x_norm", "p_norm", "tau", "delta", "c_z", "a", "b", "epsilon",
                "epsilon_prime", "lower", "upper", "gap",
            ],
        )?;
        for (i, r, _) in &results {
            t.row([
                i.n.to_string(),
                i.d.to_string(),
                i.n_v.to_string(),
                num(i.d_min),
                num(i.d_max),
                i.k.to_string(),
                num(i.l_w),
                num(i.x_norm),
                num(i.p_norm),
                num(i.tau),
                num(i.delta),
                num(i.c_z),
                num(r.a),
                num(r.b),
                num(r.epsilon),
                num(r.epsilon_prime),
                num(r.lower),
                num(r.upper),
                num(r.gap),
            ])?;
        }
        t.finish()?;
        write_run_json(&out, "bounds", None, json!({"inputs": rows, "sweep": a.sweep}))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("target").required(true).args(["lemma", "theorem"])))]
pub struct VerifyArgs {
    /// Lemma to check (1-6).
    #[arg(long)]
    pub lemma: Option<u8>,
    /// Check the InfoNCE bound on constructed embeddings.
    #[arg(long)]
    pub theorem: bool,
    /// Use the negative-control construction (positives below the hypothesis).
    #[arg(long, requires = "theorem")]
    pub control: bool,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Graph size (lemmas 1-5) or embedding count (lemma 6, theorem).
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability of the Erdos-Renyi trial graphs.
    #[arg(long, default_value_t = 0.2)]
    pub p: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long = "l-w", default_value_t = 0.5)]
    pub l_w: f64,
    #[arg(long, default_value_t = 4096)]
    pub d: usize,
    #[arg(long, default_value_t = 100_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Positive-pair tolerance for the theorem check (defaults to the worked example).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify_cmd(a: VerifyArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed)?;
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be >= 1"));
    }
    let report = if a.theorem {
        let n = a.n.unwrap_or(1000);
        let eps = match a.eps {
            Some(e) => e,
            None => infonce_bounds(&BoundInputs::worked_example())?.epsilon,
        };
        let eps_prime = cgssl_core::theory::epsilon_prime(n, a.d);
        let kind = if a.control { Construction::NegativeControl } else { Construction::Hypotheses };
        let mut checks = Vec::with_capacity(a.trials);
        for t in 0..a.trials {
            checks.push(verify_theorem(n, a.d, a.tau, eps, eps_prime, sub_seed(seed, t as u64), kind)?);
        }
        let within = checks.iter().filter(|c| c.within).count();
        let losses: Vec<f64> = checks.iter().map(|c| c.loss).collect();
        println!("within={within}/{} lower={} upper={}", a.trials, num(checks[0].lower), num(checks[0].upper));
        json!({
            "theorem": true, "construction": kind, "trials": a.trials, "within": within,
            "lower": checks[0].lower, "upper": checks[0].upper,
            "loss_min": losses.iter().copied().fold(f64::INFINITY, f64::min),
            "loss_max": losses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "n": n, "d": a.d, "tau": a.tau, "epsilon": eps, "epsilon_prime": eps_prime, "seed": seed,
            "checks": checks,
        })
    } else {
        let id = a.lemma.expect("clap group");
        let r = match id {
            1..=5 => {
                let spec = LemmaTrialSpec {
                    family: GeneratorParams::er(a.n.unwrap_or(40), a.p),
                    delta: a.delta,
                    k: a.k,
                    trials: a.trials,
                    seed,
                    l_w: a.l_w,
                    hidden: 16,
                    proj_dim: 8,
                };
                verify_lemma::<f64>(id, &spec)?
            }
            6 => verify_lemma6(a.n.unwrap_or(1000), a.d, a.pairs, seed)?,
            _ => return Err(CliError::usage(format!("--lemma must be 1-6, got {id}"))),
        };
        println!("lemma={} passes={}/{} worst_margin={}", r.lemma, r.passes, r.trials, num(r.worst_margin));
        serde_json::to_value(&r)?
    };
    if let Some(out) = &a.out {
        let out = prepare_out(out)?;
        write_json(&out.join("verify.json"), &report)?;
        write_run_json(&out, "verify", Some(seed), json!({"lemma": a.lemma, "theorem": a.theorem, "control": a.control}))?;
    }
    Ok(())
}
