use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mfcorr_core::meanfield::{default_resolution, grid_cap_from_env, lambda_rollout, PrescriptionSource};
use mfcorr_core::mfe::{
    assemble_equilibrium, solve_mfe_finite_partial, solve_mfe_infinite_partial, EquilibriumPolicy, FixedPointOptions,
    ThetaEval,
};
use mfcorr_core::report::{
    prescriptions_csv, residual_csv, simulation_csv, values_csv, zpath_csv, Meta, Report, RunInfo,
};
use mfcorr_core::simulate::{empirical_meanfield, SimConfig};
use mfcorr_core::team::{solve_team_finite, solve_team_infinite_partial, OptOptions, TeamPolicy};
use mfcorr_core::verify::{verify_mfe, Verdict, VerifyOptions, VerifyReport};
use mfcorr_core::{Horizon, MeanField, OthersLaw, SimplexGrid, Trajectory, ValidatedModel};
use serde::Serialize;

use crate::args::{AssembleArgs, Cli, Command, GridArgs, ModelArgs, SimulateArgs, SolveMfeArgs, SolveTeamArgs, VerifyArgs};
use crate::output::{sha256_hex, write_atomic};

pub enum Outcome {
    Success,
    /// Artifacts were written but the run did not fully succeed.
    Incomplete(String),
}

/// Stages rolled forward for plot data of stationary solutions.
const STATIONARY_PLOT_STAGES: usize = 50;

pub fn run(cli: &Cli) -> Result<Outcome> {
    let started = Instant::now();
    let config = serde_json::to_value(&cli.command)?;
    let ctx = Ctx { started, config };
    match &cli.command {
        Command::SolveTeam(a) => solve_team(&ctx, a),
        Command::SolveMfe(a) => solve_mfe(&ctx, a),
        Command::Verify(a) => verify(&ctx, a),
        Command::Simulate(a) => simulate(a),
        Command::Assemble(a) => assemble(a),
    }
}

struct Ctx {
    started: Instant,
    config: serde_json::Value,
}

impl Ctx {
    fn meta(&self, model_path: &Path, model_hash: String) -> Meta {
        Meta {
            model_hash,
            model_path: std::fs::canonicalize(model_path).unwrap_or_else(|_| model_path.to_path_buf()).display().to_string(),
            config: self.config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        }
    }
}

fn load_model(path: &Path, law: OthersLaw) -> Result<(ValidatedModel, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read model file {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("model file {} is not UTF-8", path.display()))?;
    let model = ValidatedModel::from_json(text).with_context(|| format!("invalid model {}", path.display()))?;
    Ok((model.with_others_law(law), sha256_hex(&bytes)))
}

fn build_grid(model: &ValidatedModel, args: &GridArgs) -> Result<SimplexGrid> {
    let dim = model.meanfield_dim();
    let res = args.grid_res.map_or_else(|| default_resolution(dim), |r| r as usize);
    Ok(SimplexGrid::with_cap(dim, res, args.grid_cap)?)
}

fn with_horizon(model: ValidatedModel, horizon: Option<Horizon>) -> Result<ValidatedModel> {
    Ok(match horizon {
        Some(h) => model.with_horizon(h)?,
        None => model,
    })
}

fn parse_z1(model: &ValidatedModel, text: &str) -> Result<MeanField> {
    if text.trim() == "initial" {
        return Ok(model.initial_meanfield().clone());
    }
    let probs: Vec<f64> =
        serde_json::from_str(text).with_context(|| format!("--z1 must be a JSON array or `initial`, got {text}"))?;
    let z = MeanField::new(probs)?;
    model.check_meanfield(&z)?;
    Ok(z)
}

fn load_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read report {}", path.display()))?;
    Report::from_json(&text).with_context(|| format!("malformed report {}", path.display()))
}

/// Model, grid and report for the commands that consume a report.
struct Loaded {
    model: ValidatedModel,
    model_path: PathBuf,
    model_hash: String,
    grid: SimplexGrid,
    report: Report,
}

fn load_solved(report_path: &Path, model: Option<&PathBuf>, law: Option<OthersLaw>) -> Result<Loaded> {
    let report = load_report(report_path)?;
    let run = report.run();
    let model_path = model.cloned().unwrap_or_else(|| PathBuf::from(&report.meta().model_path));
    let (model, model_hash) = load_model(&model_path, law.unwrap_or(run.others_law))?;
    if model_hash != report.meta().model_hash {
        eprintln!("mfcorr: warning: {} differs from the model the report was solved with", model_path.display());
    }
    let model = model.with_horizon(run.horizon)?;
    if model.discount() != run.discount {
        bail!("report discount {} does not match model discount {}", run.discount, model.discount());
    }
    let grid = SimplexGrid::with_cap(run.grid.dim, run.grid.resolution, grid_cap_from_env())?;
    if grid.len() != run.grid.n_nodes || grid.dim() != model.meanfield_dim() {
        bail!("report grid {:?} does not fit the model", run.grid);
    }
    Ok(Loaded { model, model_path, model_hash, grid, report })
}

/// Rolls the report's generating function forward from `z1`.
fn trajectory(l: &Loaded, z1: &MeanField, stages: usize) -> Result<Trajectory> {
    match &l.report {
        Report::Team { solution, run, .. } => {
            let policy = TeamPolicy {
                model: &l.model,
                solution,
                grid: &l.grid,
                opts: run.optimizer.clone().unwrap_or_default(),
            };
            let rule = |t: usize, z: &MeanField| policy.prescription(t, z);
            Ok(lambda_rollout(&l.model, z1, &PrescriptionSource::Rule(&rule), stages)?)
        }
        Report::Game { solution, run, .. } => {
            let policy = EquilibriumPolicy {
                model: &l.model,
                solution,
                grid: &l.grid,
                opts: run.fixed_point.clone().unwrap_or_default(),
                eval: ThetaEval::Resolve,
            };
            Ok(assemble_equilibrium(&policy, z1, stages)?)
        }
    }
}

fn stages_for(horizon: Horizon, stationary_default: usize) -> usize {
    horizon.finite().unwrap_or(stationary_default)
}

fn emit_plot_data(dir: &Path, l: &Loaded) -> Result<()> {
    write_atomic(&dir.join("values.csv"), &values_csv(&l.report, &l.grid))?;
    write_atomic(&dir.join("residuals.csv"), &residual_csv(l.report.residual_trace()))?;
    let stages = stages_for(l.report.run().horizon, STATIONARY_PLOT_STAGES);
    let path = match trajectory(l, l.model.initial_meanfield(), stages) {
        Ok(t) => t.meanfields,
        Err(e) => {
            eprintln!("mfcorr: warning: mean-field path not available: {e:#}");
            Vec::new()
        }
    };
    write_atomic(&dir.join("zpath.csv"), &zpath_csv(&path, l.grid.dim()))
}

fn finish(
    ctx: &Ctx,
    args_model: &ModelArgs,
    out: &Path,
    plot_dir: Option<&PathBuf>,
    model: ValidatedModel,
    hash: String,
    grid: SimplexGrid,
    build: impl FnOnce(Meta) -> Report,
) -> Result<Outcome> {
    let report = build(ctx.meta(&args_model.model, hash.clone()));
    write_atomic(out, &report.to_json())?;
    let failure = report.run().failure.clone();
    if let Some(dir) = plot_dir {
        let l = Loaded { model, model_path: args_model.model.clone(), model_hash: hash, grid, report };
        emit_plot_data(dir, &l)?;
    }
    Ok(match failure {
        Some(f) => Outcome::Incomplete(format!("{f}; partial report written to {}", out.display())),
        None => Outcome::Success,
    })
}

fn run_info(model: &ValidatedModel, grid: &SimplexGrid) -> RunInfo {
    RunInfo {
        horizon: model.horizon(),
        discount: model.discount(),
        others_law: model.others_law(),
        grid: grid.meta(),
        optimizer: None,
        fixed_point: None,
        failure: None,
    }
}

fn solve_team(ctx: &Ctx, a: &SolveTeamArgs) -> Result<Outcome> {
    let (model, hash) = load_model(&a.model.model, a.model.others_law)?;
    let model = with_horizon(model, a.common.horizon)?;
    let grid = build_grid(&model, &a.grid)?;
    let opts = OptOptions { opt_tol: a.opt_tol, seed: a.common.seed, ..OptOptions::default() };
    let (solution, failure) = match model.horizon() {
        Horizon::Finite(t) => (solve_team_finite(&model, t, &grid, &opts)?, None),
        Horizon::Infinite => {
            let p = solve_team_infinite_partial(&model, &grid, a.common.tol, a.common.max_iter, &opts)?;
            (p.solution, p.failure)
        }
    };
    let mut run = run_info(&model, &grid);
    run.optimizer = Some(opts);
    run.failure = failure.map(|e| e.to_string());
    finish(ctx, &a.model, &a.common.out, a.common.plot_dir.as_ref(), model, hash, grid, |meta| Report::Team {
        meta,
        run,
        solution,
    })
}

fn solve_mfe(ctx: &Ctx, a: &SolveMfeArgs) -> Result<Outcome> {
    let (model, hash) = load_model(&a.model.model, a.model.others_law)?;
    let model = with_horizon(model, a.common.horizon)?;
    let grid = build_grid(&model, &a.grid)?;
    let opts = FixedPointOptions {
        eps_consistency: a.eps,
        seed: a.common.seed,
        enumerate_all_pure: a.enumerate_all_pure,
        ..FixedPointOptions::default()
    };
    let partial = match model.horizon() {
        Horizon::Finite(t) => solve_mfe_finite_partial(&model, t, &grid, None, &opts)?,
        Horizon::Infinite => solve_mfe_infinite_partial(&model, &grid, a.common.tol, a.common.max_iter, &opts)?,
    };
    let mut run = run_info(&model, &grid);
    run.fixed_point = Some(opts);
    run.failure = partial.failure.map(|e| e.to_string());
    let solution = partial.solution;
    finish(ctx, &a.model, &a.common.out, a.common.plot_dir.as_ref(), model, hash, grid, |meta| Report::Game {
        meta,
        run,
        solution,
    })
}

#[derive(Serialize)]
struct VerdictFile<'a> {
    meta: Meta,
    #[serde(flatten)]
    verify: &'a VerifyReport,
}

fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Outcome> {
    let l = load_solved(&a.report, a.model.as_ref(), a.others_law)?;
    if !matches!(l.report, Report::Game { .. }) {
        bail!("verify needs an equilibrium report from solve-mfe");
    }
    if let Some(f) = &l.report.run().failure {
        bail!("report is partial ({f}); nothing to certify");
    }
    let z1 = parse_z1(&l.model, &a.z1)?;
    let horizon = l.report.run().horizon;
    let traj = trajectory(&l, &z1, stages_for(horizon, a.stages))?;
    let opts = VerifyOptions {
        eps: a.eps,
        consistency_tol: a.consistency_tol,
        truncated: horizon == Horizon::Infinite,
    };
    let rep = verify_mfe(&l.model, &traj.prescriptions, &traj.meanfields, &opts)?;
    let file = VerdictFile { meta: ctx.meta(&l.model_path, l.model_hash.clone()), verify: &rep };
    write_atomic(&a.out, &serde_json::to_string_pretty(&file)?)?;
    println!(
        "{:?}: consistency residual {:.3e}, max deviation gain {:.3e}",
        rep.verdict, rep.consistency_residual, rep.max_deviation_gain
    );
    Ok(match rep.verdict {
        Verdict::CertifiedEps => Outcome::Success,
        Verdict::Refuted => Outcome::Incomplete(format!("equilibrium refuted; witness in {}", a.out.display())),
    })
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let l = load_solved(&a.report, a.model.as_ref(), a.others_law)?;
    let z1 = parse_z1(&l.model, &a.z1)?;
    let traj = trajectory(&l, &z1, stages_for(l.report.run().horizon, a.stages))?;
    let cfg = SimConfig { n_blocks: a.blocks as usize, seed: a.seed };
    let path = empirical_meanfield(&l.model, &traj.prescriptions, &z1, cfg)?;
    write_atomic(&a.out, &simulation_csv(&path))?;
    println!("max TV distance to the deterministic path: {:.6e}", path.max_tv());
    Ok(Outcome::Success)
}

fn assemble(a: &AssembleArgs) -> Result<Outcome> {
    let l = load_solved(&a.report, a.model.as_ref(), a.others_law)?;
    let z1 = parse_z1(&l.model, &a.z1)?;
    let horizon = l.report.run().horizon;
    let stages = match (a.stages, horizon) {
        (Some(s), Horizon::Finite(t)) if s > t => bail!("--T {s} exceeds the report horizon {t}"),
        (Some(s), _) => s,
        (None, h) => stages_for(h, STATIONARY_PLOT_STAGES),
    };
    let traj = trajectory(&l, &z1, stages)?;
    write_atomic(&a.out_dir.join("zpath.csv"), &zpath_csv(&traj.meanfields, l.grid.dim()))?;
    write_atomic(&a.out_dir.join("prescriptions.csv"), &prescriptions_csv(&traj))?;
    Ok(Outcome::Success)
}
