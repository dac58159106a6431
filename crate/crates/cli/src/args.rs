use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mfcorr_core::{Horizon, OthersLaw};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "mfcorr", version, about = "Mean-field teams and games with correlated types")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Team-optimal prescriptions by backward dynamic programming.
    SolveTeam(SolveTeamArgs),
    /// Mean-field equilibrium through per-stage fixed points.
    SolveMfe(SolveMfeArgs),
    /// Certify an equilibrium report against deviations.
    Verify(VerifyArgs),
    /// Simulate independent blocks along the equilibrium path.
    Simulate(SimulateArgs),
    /// Roll a solved report forward from an initial mean field.
    Assemble(AssembleArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    /// Law of the other block members seen by a focal agent.
    #[arg(long, default_value = "marginal")]
    pub others_law: OthersLaw,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Grid resolution (default depends on the mean-field dimension).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_res: Option<u32>,
    /// Maximum number of grid nodes.
    #[arg(long, env = "MFCORR_GRID_CAP", default_value_t = mfcorr_core::meanfield::DEFAULT_GRID_CAP)]
    pub grid_cap: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveCommon {
    /// Horizon override: a positive integer or `inf`.
    #[arg(long)]
    pub horizon: Option<Horizon>,
    /// Value-iteration tolerance (infinite horizon).
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub tol: f64,
    /// Value-iteration budget (infinite horizon).
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for value, mean-field path and residual CSVs.
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveTeamArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: SolveCommon,
    /// Minimum improvement for a mixed prescription to replace a pure one.
    #[arg(long, default_value_t = 1e-8, value_parser = positive)]
    pub opt_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveMfeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: SolveCommon,
    /// Consistency tolerance of the per-stage fixed point.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub eps: f64,
    /// Record every consistent pure prescription at every node.
    #[arg(long)]
    pub enumerate_all_pure: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Model file; defaults to the one recorded in the report.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub others_law: Option<OthersLaw>,
    #[arg(long)]
    pub report: PathBuf,
    /// Initial mean field: a JSON array or `initial`.
    #[arg(long, default_value = "initial")]
    pub z1: String,
    #[arg(long, default_value_t = 1e-5, value_parser = positive)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-12, value_parser = positive)]
    pub consistency_tol: f64,
    /// Truncation length for stationary reports.
    #[arg(long, default_value_t = 200)]
    pub stages: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub others_law: Option<OthersLaw>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value = "initial")]
    pub z1: String,
    /// Number of independent blocks.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub blocks: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Stages to simulate for stationary reports.
    #[arg(long, default_value_t = 20)]
    pub stages: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AssembleArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub others_law: Option<OthersLaw>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value = "initial")]
    pub z1: String,
    /// Number of stages (defaults to the report horizon).
    #[arg(long = "T")]
    pub stages: Option<usize>,
    /// Directory receiving `zpath.csv` and `prescriptions.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} must be a positive number"))
    }
}
