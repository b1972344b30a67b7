//! `cgssl`: command-line front end for the workbench.

mod common;
mod data;
mod learn;
mod stats;
mod theory_cmd;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cgssl", version, about = "Graph contrastive learning workbench: spectra, augmentations, training and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic graph or dataset.
    Gen(data::GenArgs),
    /// Laplacian spectrum, histogram and density curves.
    Spectrum(data::SpectrumArgs),
    /// Apply an augmentation and write the views.
    Augment(data::AugmentArgs),
    /// Train an encoder.
    Train(learn::TrainArgs),
    /// Train over a grid of perturbation rates and seeds.
    Sweep(learn::SweepArgs),
    /// Linear probe on a trained run.
    Probe(learn::ProbeArgs),
    /// InfoNCE bounds.
    Bounds(theory_cmd::BoundsArgs),
    /// Empirical checks of the lemmas and the bound.
    Verify(theory_cmd::VerifyArgs),
    /// Regressions over a sweep.
    Analyze(stats::AnalyzeArgs),
    /// Time spectrum computation against edge perturbation.
    Bench(stats::BenchArgs),
    /// Aggregate run directories.
    Report(learn::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => data::gen(a),
        Command::Spectrum(a) => data::spectrum(a),
        Command::Augment(a) => data::augment(a),
        Command::Train(a) => learn::train_cmd(a),
        Command::Sweep(a) => learn::sweep_cmd(a),
        Command::Probe(a) => learn::probe_cmd(a),
        Command::Bounds(a) => theory_cmd::bounds_cmd(a),
        Command::Verify(a) => theory_cmd::verify_cmd(a),
        Command::Analyze(a) => stats::analyze_cmd(a),
        Command::Bench(a) => stats::bench_cmd(a),
        Command::Report(a) => learn::report_cmd(a),
    };
    if let Err(e) = result {
        eprintln!("{}", e.to_line());
        std::process::exit(e.exit_code());
    }
}
