// SPDX-License-Identifier: Apache-2.0

//! `sbgate` command-line driver.

mod jobs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sbgate", version, about = "Simulate and optimise sideband nonlinear phase gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol on one input; writes report.json, wigner.csv, wigner_target.csv and cuts.csv.
    Simulate(Flags),
    /// Differential-evolution search; writes checkpoint.json every generation, history.csv, best.json, protocol.json.
    Optimize(Flags),
    /// Fidelity and variance minimum over coherent inputs; writes sweep.csv and sweep.json.
    Sweep(Flags),
    /// Fidelity under heating and dephasing models; writes noise.csv and noise.json.
    NoiseStudy(Flags),
    /// Fidelity under random relative parameter errors; writes perturb.csv and perturb.json.
    Perturb(Flags),
    /// Nonlinear variance against xi; writes variance.csv and variance.json.
    VarianceScan(Flags),
    /// Density-matrix difference maps; writes diff_<k>.csv and diff.json.
    DiffMap(Flags),
}

#[derive(Args, Debug, Clone)]
pub struct Flags {
    /// Job configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the random seed of stochastic commands.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the Fock-space truncation.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Overrides the Hamiltonian model.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    /// Leading Lamb-Dicke term of each sideband.
    Ld,
    /// Full sideband operators.
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.command {
        Command::Simulate(f) => ("simulate", f),
        Command::Optimize(f) => ("optimize", f),
        Command::Sweep(f) => ("sweep", f),
        Command::NoiseStudy(f) => ("noise-study", f),
        Command::Perturb(f) => ("perturb", f),
        Command::VarianceScan(f) => ("variance-scan", f),
        Command::DiffMap(f) => ("diff-map", f),
    };
    let result = std::fs::create_dir_all(&flags.out)
        .map_err(anyhow::Error::from)
        .and_then(|_| match &cli.command {
            Command::Simulate(f) => jobs::simulate(f),
            Command::Optimize(f) => jobs::optimize(f),
            Command::Sweep(f) => jobs::sweep(f),
            Command::NoiseStudy(f) => jobs::noise_study(f),
            Command::Perturb(f) => jobs::perturb(f),
            Command::VarianceScan(f) => jobs::variance_scan(f),
            Command::DiffMap(f) => jobs::diff_map(f),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({
                "command": name,
                "error": format!("{e:#}"),
            });
            eprintln!("{msg}");
            let _ = std::fs::write(flags.out.join("error.json"), format!("{msg}\n"));
            ExitCode::FAILURE
        }
    }
}
