//! Team-optimal prescriptions by backward dynamic programming over the mean
//! field. The state of the planner is `z` alone; at each stage it picks the
//! prescription maximizing expected reward plus the discounted continuation
//! evaluated at `phi(z, gamma)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Partial, Result};
use crate::meanfield::{interpolate_value, lambda_rollout, phi_update, PrescriptionSource, SimplexGrid};
use crate::model::{pure_prescriptions, MeanField, Prescription, ValidatedModel};
use crate::rng;

/// Values closer than this are treated as ties and resolved towards the
/// lexicographically smaller prescription.
pub const TIE_TOL: f64 = 1e-12;

/// Continuation value `V_{t+1}` seen by a stage problem.
#[derive(Clone, Copy)]
pub enum TeamContinuation<'a> {
    Zero,
    Table { grid: &'a SimplexGrid, values: &'a [f64] },
}

impl TeamContinuation<'_> {
    fn is_zero(&self) -> bool {
        matches!(self, TeamContinuation::Zero)
    }

    pub fn eval(&self, z: &MeanField) -> f64 {
        match self {
            TeamContinuation::Zero => 0.0,
            TeamContinuation::Table { grid, values } => interpolate_value(grid, values, z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    /// Stop coordinate ascent once a sweep improves by less than this.
    pub opt_tol: f64,
    /// Number of best pure prescriptions used as ascent starts.
    pub pure_starts: usize,
    /// Additional random mixed starts.
    pub random_starts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self { opt_tol: 1e-8, pure_starts: usize::MAX, random_starts: 8, max_sweeps: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    /// Best point is a pure prescription.
    Pure,
    /// Ascent found a mixed prescription better than every pure one.
    Mixed,
    /// Ascent hit the sweep limit; the value is a lower bound only.
    LocalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptDiagnostics {
    pub status: OptStatus,
    pub objective: f64,
    pub best_pure: f64,
    pub evaluations: usize,
}

/// `sum_x marg(z)(x) sum_a gamma(a|x) R(x,a,z) + delta * V_next(phi(z, gamma))`.
pub fn stage_team_objective(
    model: &ValidatedModel,
    z: &MeanField,
    gamma: &Prescription,
    next: &TeamContinuation<'_>,
) -> f64 {
    let rewards = model.reward_table(z);
    let marg = model.marginal(z);
    stage_objective_with(model, z, gamma, next, &rewards, &marg)
}

fn stage_objective_with(
    model: &ValidatedModel,
    z: &MeanField,
    gamma: &Prescription,
    next: &TeamContinuation<'_>,
    rewards: &[f64],
    marg: &[f64],
) -> f64 {
    let na = model.n_actions();
    let mut value = 0.0;
    for (x, m) in marg.iter().enumerate() {
        let row: f64 = gamma.row(x).iter().zip(&rewards[x * na..(x + 1) * na]).map(|(g, r)| g * r).sum();
        value += m * row;
    }
    let delta = model.discount();
    if delta != 0.0 && !next.is_zero() {
        value += delta * next.eval(&phi_update(model, z, gamma));
    }
    value
}

/// Best prescription found for one stage problem.
///
/// All `Na^Nx` pure prescriptions are enumerated first; projected coordinate
/// ascent (golden-section search along each row towards each simplex vertex)
/// is then run from the best pure points and from random mixed starts. A
/// mixed result replaces the best pure one only if it improves by more than
/// `opt_tol`.
pub fn optimize_prescription(
    model: &ValidatedModel,
    z: &MeanField,
    next: &TeamContinuation<'_>,
    opts: &OptOptions,
) -> (Prescription, f64, OptDiagnostics) {
    let (nx, na) = (model.n_states(), model.n_actions());
    let rewards = model.reward_table(z);
    let marg = model.marginal(z);
    let mut evals = 0usize;
    let mut f = |g: &Prescription| {
        evals += 1;
        stage_objective_with(model, z, g, next, &rewards, &marg)
    };

    // With no continuation each row is a linear program with weight
    // marg(x) >= 0, so the row-wise argmax of the reward is optimal, also
    // for rows carrying no mass.
    if next.is_zero() || model.discount() == 0.0 || na == 1 {
        let acts: Vec<usize> = rewards
            .chunks(na)
            .map(|row| (1..na).fold(0, |b, a| if row[a] > row[b] + TIE_TOL { a } else { b }))
            .collect();
        let g = Prescription::pure(&acts, na);
        let v = f(&g);
        let diag = OptDiagnostics { status: OptStatus::Pure, objective: v, best_pure: v, evaluations: evals };
        return (g, v, diag);
    }

    let mut scored: Vec<(f64, Prescription)> = pure_prescriptions(nx, na)
        .map(|acts| {
            let g = Prescription::pure(&acts, na);
            (f(&g), g)
        })
        .collect();
    let mut best_idx = 0;
    for (i, (v, _)) in scored.iter().enumerate() {
        if *v > scored[best_idx].0 + TIE_TOL {
            best_idx = i;
        }
    }
    let (best_pure_value, best_pure) = scored[best_idx].clone();

    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut starts: Vec<Prescription> =
        scored.iter().take(opts.pure_starts.min(scored.len())).map(|(_, g)| g.clone()).collect();
    let mut rng = rng::stream(opts.seed, &[0x7EA3]);
    for _ in 0..opts.random_starts {
        let mut table = Vec::with_capacity(nx * na);
        for _ in 0..nx {
            let e: Vec<f64> = (0..na).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            table.extend(e.into_iter().map(|v| v / s));
        }
        starts.push(Prescription::from_flat_normalized(table, na));
    }

    let mut best = (best_pure_value, best_pure.clone());
    let mut stalled = false;
    for start in starts {
        let (v, g, converged) = coordinate_ascent(start, &mut f, nx, na, opts);
        stalled |= !converged;
        if v > best.0 {
            best = (v, g);
        }
    }
    let (status, value, gamma) = if best.0 > best_pure_value + opts.opt_tol {
        (if stalled { OptStatus::LocalOnly } else { OptStatus::Mixed }, best.0, best.1)
    } else {
        (OptStatus::Pure, best_pure_value, best_pure)
    };
    let diag = OptDiagnostics { status, objective: value, best_pure: best_pure_value, evaluations: evals };
    (gamma, value, diag)
}

fn coordinate_ascent(
    mut gamma: Prescription,
    f: &mut impl FnMut(&Prescription) -> f64,
    nx: usize,
    na: usize,
    opts: &OptOptions,
) -> (f64, Prescription, bool) {
    let mut value = f(&gamma);
    for _ in 0..opts.max_sweeps {
        let before = value;
        for x in 0..nx {
            for a in 0..na {
                let base: Vec<f64> = gamma.row(x).to_vec();
                if base[a] == 1.0 {
                    continue;
                }
                let mut probe = gamma.clone();
                let mut at = |t: f64, probe: &mut Prescription| {
                    let row = probe.row_mut(x);
                    for (i, r) in row.iter_mut().enumerate() {
                        *r = (1.0 - t) * base[i] + if i == a { t } else { 0.0 };
                    }
                    f(probe)
                };
                let (t, v) = line_search(|t| at(t, &mut probe));
                if v > value {
                    at(t, &mut probe);
                    gamma = probe;
                    value = v;
                }
            }
        }
        if value - before < opts.opt_tol {
            return (value, gamma, true);
        }
    }
    (value, gamma, false)
}

/// Maximizes `g` on `[0, 1]`: coarse scan, then golden-section refinement in
/// the bracket around the best scan point.
fn line_search(mut g: impl FnMut(f64) -> f64) -> (f64, f64) {
    const SCAN: usize = 8;
    let mut best = (0.0, g(0.0));
    let mut low = best.1;
    for i in 1..=SCAN {
        let t = i as f64 / SCAN as f64;
        let v = g(t);
        low = low.min(v);
        if v > best.1 {
            best = (t, v);
        }
    }
    // flat up to roundoff: nothing to refine
    if best.1 - low <= 1e-13 * (1.0 + best.1.abs()) {
        return best;
    }
    let step = 1.0 / SCAN as f64;
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), (best.0 + step).min(1.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (g(c), g(d));
    while hi - lo > 1e-10 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = g(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = g(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamSolution {
    /// Finite horizon: `T + 1` tables (`values[t - 1]` holds `V_t`, the last
    /// is identically zero). Infinite horizon: a single stationary table.
    pub values: Vec<Vec<f64>>,
    /// `policies[t - 1][node]`; a single stage for infinite horizon.
    pub policies: Vec<Vec<Prescription>>,
    pub diagnostics: Vec<Vec<OptDiagnostics>>,
    /// Sup-norm change per value iteration (infinite horizon only).
    #[serde(default)]
    pub residual_trace: Vec<f64>,
}

impl TeamSolution {
    pub fn is_stationary(&self) -> bool {
        self.policies.len() == 1 && self.values.len() == 1
    }
}

fn node_seed(seed: u64, stage: usize, node: usize) -> u64 {
    rng::derive_seed(seed, &[stage as u64, node as u64])
}

fn solve_stage(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    next: TeamContinuation<'_>,
    opts: &OptOptions,
    stage: usize,
) -> Vec<(Prescription, f64, OptDiagnostics)> {
    grid.nodes()
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let o = OptOptions { seed: node_seed(opts.seed, stage, i), ..opts.clone() };
            optimize_prescription(model, z, &next, &o)
        })
        .collect()
}

/// Backward induction `t = T, ..., 1` on the grid nodes.
pub fn solve_team_finite(
    model: &ValidatedModel,
    horizon: usize,
    grid: &SimplexGrid,
    opts: &OptOptions,
) -> Result<TeamSolution> {
    if horizon == 0 {
        return Err(Error::HorizonMismatch { expected: 1, got: 0 });
    }
    if grid.dim() != model.meanfield_dim() {
        return Err(Error::BadShape("grid dimension does not match the model".into()));
    }
    let n = grid.len();
    let mut values = vec![vec![0.0; n]; horizon + 1];
    let mut policies = vec![Vec::new(); horizon];
    let mut diagnostics = vec![Vec::new(); horizon];
    for t in (1..=horizon).rev() {
        let out = {
            let next = if t == horizon {
                TeamContinuation::Zero
            } else {
                TeamContinuation::Table { grid, values: &values[t] }
            };
            solve_stage(model, grid, next, opts, t)
        };
        let mut vals = Vec::with_capacity(n);
        let mut pols = Vec::with_capacity(n);
        let mut diags = Vec::with_capacity(n);
        for (g, v, d) in out {
            vals.push(v);
            pols.push(g);
            diags.push(d);
        }
        values[t - 1] = vals;
        policies[t - 1] = pols;
        diagnostics[t - 1] = diags;
    }
    Ok(TeamSolution { values, policies, diagnostics, residual_trace: Vec::new() })
}

/// Value iteration for the discounted infinite-horizon team problem,
/// starting from `V = 0`.
pub fn solve_team_infinite_partial(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    tol: f64,
    max_iter: usize,
    opts: &OptOptions,
) -> Result<Partial<TeamSolution>> {
    if model.discount() >= 1.0 {
        return Err(Error::BadDiscount {
            discount: model.discount(),
            reason: "value iteration needs a discount below 1",
        });
    }
    if grid.dim() != model.meanfield_dim() {
        return Err(Error::BadShape("grid dimension does not match the model".into()));
    }
    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut policies = vec![Prescription::uniform(model.n_states(), model.n_actions()); n];
    let mut diagnostics = Vec::new();
    let mut trace = Vec::new();
    let mut failure = None;
    for k in 1..=max_iter {
        let out = solve_stage(model, grid, TeamContinuation::Table { grid, values: &values }, opts, k);
        let mut residual = 0.0_f64;
        let mut new_values = Vec::with_capacity(n);
        policies.clear();
        diagnostics.clear();
        for (i, (g, v, d)) in out.into_iter().enumerate() {
            residual = residual.max((v - values[i]).abs());
            new_values.push(v);
            policies.push(g);
            diagnostics.push(d);
        }
        values = new_values;
        trace.push(residual);
        if residual <= tol {
            break;
        }
        if k == max_iter {
            failure = Some(Error::NotConverged { iterations: k, residual });
        }
    }
    let solution = TeamSolution {
        values: vec![values],
        policies: vec![policies],
        diagnostics: vec![diagnostics],
        residual_trace: trace,
    };
    Ok(Partial { solution, failure })
}

pub fn solve_team_infinite(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    tol: f64,
    max_iter: usize,
    opts: &OptOptions,
) -> Result<TeamSolution> {
    solve_team_infinite_partial(model, grid, tol, max_iter, opts)?.into_result()
}

/// Expected team reward `sum_t delta^(t-1) sum_x marg(z_t)(x) sum_a gamma_t(a|x) R(x,a,z_t)`
/// along the rollout generated by `source`.
pub fn team_value_of_policy(
    model: &ValidatedModel,
    z1: &MeanField,
    source: &PrescriptionSource<'_>,
    horizon: usize,
) -> Result<f64> {
    let traj = lambda_rollout(model, z1, source, horizon)?;
    Ok(rollout_reward(model, &traj.meanfields, &traj.prescriptions))
}

pub(crate) fn rollout_reward(model: &ValidatedModel, zs: &[MeanField], gammas: &[Prescription]) -> f64 {
    let delta = model.discount();
    let mut total = 0.0;
    let mut weight = 1.0;
    for (z, g) in zs.iter().zip(gammas) {
        total += weight * stage_team_objective(model, z, g, &TeamContinuation::Zero);
        weight *= delta;
    }
    total
}

/// Infinite-horizon policy value truncated after `stages` stages, with the
/// bound `delta^stages * R_max / (1 - delta)` on the neglected tail.
pub fn team_value_truncated(
    model: &ValidatedModel,
    z1: &MeanField,
    source: &PrescriptionSource<'_>,
    stages: usize,
) -> Result<(f64, f64)> {
    let v = team_value_of_policy(model, z1, source, stages)?;
    let delta = model.discount();
    let tail = delta.powi(stages as i32) * model.reward_bound() / (1.0 - delta);
    Ok((v, tail))
}

/// Generating function of a solved team problem: the stored prescription on
/// grid nodes and, off the grid, the stage problem re-solved at `z` against
/// the tabulated continuation.
pub struct TeamPolicy<'a> {
    pub model: &'a ValidatedModel,
    pub solution: &'a TeamSolution,
    pub grid: &'a SimplexGrid,
    pub opts: OptOptions,
}

impl TeamPolicy<'_> {
    pub fn prescription(&self, t: usize, z: &MeanField) -> Result<Prescription> {
        let sol = self.solution;
        let stage = if sol.is_stationary() { 0 } else { t - 1 };
        if stage >= sol.policies.len() {
            return Err(Error::HorizonMismatch { expected: t, got: sol.policies.len() });
        }
        if let Some(i) = self.grid.node_index(z) {
            return Ok(sol.policies[stage][i].clone());
        }
        let next_values = if sol.is_stationary() { &sol.values[0] } else { &sol.values[stage + 1] };
        let next = if !sol.is_stationary() && stage + 1 == sol.policies.len() {
            TeamContinuation::Zero
        } else {
            TeamContinuation::Table { grid: self.grid, values: next_values }
        };
        Ok(optimize_prescription(self.model, z, &next, &self.opts).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::build_simplex_grid;
    use crate::model::testing::{identity_spec, uniform_spec};
    use crate::model::validate_model;

    fn constant_reward(mut spec: crate::model::ModelSpec, c: f64) -> ValidatedModel {
        spec.reward.base = vec![vec![c; spec.n_actions]; spec.n_states];
        validate_model(spec).unwrap()
    }

    #[test]
    fn zero_continuation_is_one_stage_reward() {
        let m = validate_model(identity_spec(2, 2, 2, 0.9)).unwrap();
        let z = MeanField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = Prescription::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        // marg = (0.3, 0.7); R(0,.) = (0,-0.5), R(1,.) = (1, 0.5)
        let want = 0.3 * (-0.25) + 0.7 * (0.25 + 0.375);
        assert!((stage_team_objective(&m, &z, &g, &TeamContinuation::Zero) - want).abs() < 1e-15);
    }

    #[test]
    fn constant_reward_objective() {
        let m = constant_reward(uniform_spec(2, 2, 2, 0.9), 1.5);
        let z = MeanField::uniform(4);
        for acts in pure_prescriptions(2, 2) {
            let g = Prescription::pure(&acts, 2);
            assert_eq!(stage_team_objective(&m, &z, &g, &TeamContinuation::Zero), 1.5);
        }
    }

    #[test]
    fn myopic_optimum_is_rowwise_argmax() {
        let m = validate_model(identity_spec(2, 3, 3, 0.0)).unwrap();
        let g = build_simplex_grid(9, 2).unwrap();
        let sol = solve_team_finite(&m, 2, &g, &OptOptions::default()).unwrap();
        for stage in &sol.policies {
            for p in stage {
                // R(x, a) = x - a/2 -> action 0 everywhere
                assert_eq!(p.as_pure(), Some(vec![0, 0, 0]));
            }
        }
    }

    #[test]
    fn all_zero_reward_picks_first_pure() {
        let m = constant_reward(uniform_spec(1, 2, 3, 0.5), 0.0);
        let g = build_simplex_grid(2, 4).unwrap();
        let (p, v, _) = optimize_prescription(&m, g.node(2), &TeamContinuation::Zero, &OptOptions::default());
        assert_eq!(v, 0.0);
        assert_eq!(p.as_pure(), Some(vec![0, 0]));
        let vals = vec![0.0; g.len()];
        let next = TeamContinuation::Table { grid: &g, values: &vals };
        let (p, _, _) = optimize_prescription(&m, g.node(2), &next, &OptOptions::default());
        assert_eq!(p.as_pure(), Some(vec![0, 0]));
    }

    #[test]
    fn geometric_sum_for_constant_reward() {
        let c = 2.0;
        let delta: f64 = 0.8;
        let m = constant_reward(uniform_spec(2, 2, 2, delta), c);
        let g = build_simplex_grid(4, 4).unwrap();
        let t = 4;
        let sol = solve_team_finite(&m, t, &g, &OptOptions::default()).unwrap();
        let want = c * (1.0 - delta.powi(t as i32)) / (1.0 - delta);
        for v in &sol.values[0] {
            assert!((v - want).abs() < 1e-12);
        }
        assert!(sol.values[t].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn myopic_horizon_value() {
        let m = validate_model(identity_spec(1, 2, 2, 0.9)).unwrap();
        let g = build_simplex_grid(2, 5).unwrap();
        let sol = solve_team_finite(&m, 1, &g, &OptOptions::default()).unwrap();
        for (z, v) in g.nodes().iter().zip(&sol.values[0]) {
            let marg = m.marginal(z);
            // max_a R(x, a) = x
            let want = marg[1];
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn value_iteration_constant_reward() {
        let m = constant_reward(uniform_spec(1, 2, 2, 0.7), 1.0).with_horizon(crate::Horizon::Infinite).unwrap();
        let g = build_simplex_grid(2, 4).unwrap();
        let sol = solve_team_infinite(&m, &g, 1e-10, 500, &OptOptions::default()).unwrap();
        for v in &sol.values[0] {
            assert!((v - 1.0 / 0.3).abs() < 1e-9);
        }
        let tr = &sol.residual_trace;
        for w in tr.windows(2).skip(1) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn not_converged_reports_residual() {
        let m = constant_reward(uniform_spec(1, 2, 2, 0.99), 1.0).with_horizon(crate::Horizon::Infinite).unwrap();
        let g = build_simplex_grid(2, 2).unwrap();
        match solve_team_infinite(&m, &g, 1e-12, 5, &OptOptions::default()) {
            Err(Error::NotConverged { iterations: 5, residual }) => assert!(residual > 0.9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_kernel_policy_value() {
        let delta: f64 = 0.5;
        let m = validate_model(identity_spec(1, 2, 2, delta)).unwrap();
        let z = MeanField::new(vec![0.25, 0.75]).unwrap();
        let seq = vec![Prescription::pure(&[0, 0], 2); 3];
        let v = team_value_of_policy(&m, &z, &PrescriptionSource::Fixed(&seq), 3).unwrap();
        let want = (1.0 + delta + delta * delta) * 0.75;
        assert!((v - want).abs() < 1e-15);
    }
}
