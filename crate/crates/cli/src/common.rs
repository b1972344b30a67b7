//! Shared plumbing: output directories, run metadata, CSV/JSON writers, errors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cgssl_core::graph::{dataset_from_json, graph_from_json, Graph};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs, invalid configs (exit 2).
    Usage { kind: &'static str, message: String },
    /// Failures while doing the work (exit 1).
    Runtime { kind: &'static str, message: String },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage { kind: "usage", message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime { kind: "runtime", message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    /// One-line JSON rendering for stderr.
    pub fn to_line(&self) -> String {
        let (kind, message) = match self {
            CliError::Usage { kind, message } | CliError::Runtime { kind, message } => (kind, message),
        };
        json!({"error": kind, "message": message, "exit": self.exit_code()}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl From<cgssl_core::Error> for CliError {
    fn from(e: cgssl_core::Error) -> Self {
        use cgssl_core::Error as E;
        let kind = e.kind();
        let message = e.to_string();
        match e {
            E::Parse { .. } | E::Validation(_) | E::Config(_) | E::Parameter(_) | E::Argument(_) | E::Domain(_) => {
                CliError::Usage { kind, message }
            }
            _ => CliError::Runtime { kind, message },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime { kind: "io", message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime { kind: "json", message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime { kind: "csv", message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `--seed`, then `CGSSL_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("CGSSL_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| CliError::usage(format!("CGSSL_SEED = {v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage { kind: "unreadable_path", message: format!("{}: {e}", path.display()) })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage { kind: "parse", message: format!("{}: {e}", path.display()) })
}

pub fn read_config<C: serde::de::DeserializeOwned>(path: &Path) -> CliResult<C> {
    let v = read_json(path)?;
    serde_json::from_value(v).map_err(|e| CliError::Usage { kind: "config", message: format!("{}: {e}", path.display()) })
}

/// A single graph or a dataset (JSON array of graphs).
pub enum Input {
    Graph(Graph<f64>),
    Dataset(Vec<Graph<f64>>),
}

pub fn read_graph_input(path: &Path) -> CliResult<Input> {
    let v = read_json(path)?;
    if v.is_array() {
        Ok(Input::Dataset(dataset_from_json(&v)?))
    } else {
        Ok(Input::Graph(graph_from_json(&v)?))
    }
}

pub fn read_graph(path: &Path) -> CliResult<Graph<f64>> {
    match read_graph_input(path)? {
        Input::Graph(g) => Ok(g),
        Input::Dataset(_) => Err(CliError::usage(format!("{}: expected a single graph, found a dataset", path.display()))),
    }
}

pub fn prepare_out(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Records tool version, command line, seed and the effective configuration.
pub fn write_run_json(out: &Path, command: &str, seed: Option<u64>, config: Value) -> CliResult<()> {
    let args: Vec<String> = std::env::args().collect();
    write_json(
        &out.join("run.json"),
        &json!({
            "tool": "cgssl",
            "version": VERSION,
            "command": command,
            "args": args,
            "seed": seed,
            "config": config,
        }),
    )
}

/// Shortest decimal representation that round-trips exactly.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    writer: csv::Writer<fs::File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Comma-separated list parsing for flags such as `--n 250,500`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| format!("cannot parse {x:?}")))
        .collect()
}

pub fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = parse_list(s)?;
    match v.as_slice() {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(format!("expected three fractions, got {s:?}")),
    }
}
