//! Mean-field equilibria through per-stage fixed points.
//!
//! At a mean field `z` the stage prescription `g` must be a best response,
//! type by type, to action values `q[x][a]` whose continuation is evaluated
//! at `phi(z, g)`. The prescription therefore appears on both sides: it
//! drives the other agents of the focal agent's block and moves the mean
//! field seen by the continuation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Partial, Result};
use crate::meanfield::{
    interpolate_prescription, interpolate_vector, lambda_rollout, phi_update, PrescriptionSource,
    SimplexGrid, Trajectory,
};
use crate::model::{pure_prescriptions, MeanField, Prescription, ValidatedModel};
use crate::rng;

/// Continuation `V_{t+1}(z', .)` as a vector over the focal agent's next type.
#[derive(Clone, Copy)]
pub enum GameContinuation<'a> {
    Zero,
    Table { grid: &'a SimplexGrid, values: &'a [Vec<f64>] },
    Func(&'a (dyn Fn(&MeanField) -> Vec<f64> + Sync)),
}

impl GameContinuation<'_> {
    pub fn is_zero(&self) -> bool {
        matches!(self, GameContinuation::Zero)
    }

    pub fn eval(&self, z: &MeanField, n_states: usize) -> Vec<f64> {
        match self {
            GameContinuation::Zero => vec![0.0; n_states],
            GameContinuation::Table { grid, values } => interpolate_vector(grid, values, z),
            GameContinuation::Func(f) => f(z),
        }
    }
}

/// Action values `q[x][a]` of a focal agent, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QValues {
    n_actions: usize,
    q: Vec<f64>,
}

impl QValues {
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.q[x * self.n_actions + a]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.q[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.q.len() / self.n_actions
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.n_actions).map(|r| r.to_vec()).collect()
    }

    /// `max_x (max_a q[x][a] - sum_a g(a|x) q[x][a])`: the largest gain any
    /// type can get by switching to a pure best response.
    pub fn residual(&self, gamma: &Prescription) -> f64 {
        (0..self.n_states())
            .map(|x| {
                let row = self.row(x);
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let played: f64 = row.iter().zip(gamma.row(x)).map(|(q, g)| q * g).sum();
                best - played
            })
            .fold(0.0, f64::max)
    }

    /// `sum_a g(a|x) q[x][a]` for every `x`.
    pub fn played(&self, gamma: &Prescription) -> Vec<f64> {
        (0..self.n_states())
            .map(|x| self.row(x).iter().zip(gamma.row(x)).map(|(q, g)| q * g).sum())
            .collect()
    }
}

/// Transition law of a focal agent of type `x` playing `a`, averaged over the
/// other `N - 1` members of its block drawn from the others' law of `z` and
/// acting according to `gamma_env`. Indexed `[x][a][x']`.
pub(crate) fn environment_transitions(
    model: &ValidatedModel,
    z: &MeanField,
    gamma_env: &Prescription,
) -> Vec<f64> {
    let (nx, na) = (model.n_states(), model.n_actions());
    let ox = model.others_x();
    let oa = model.others_a();
    let kernel = model.kernel_at(z);
    let mut scratch = vec![0.0; model.meanfield_dim()];
    let mut law = vec![0.0; nx];
    let mut out = vec![0.0; nx * na * nx];
    for x in 0..nx {
        let others = model.others_law_for(z, x);
        for (jo, &p_o) in others.iter().enumerate() {
            if p_o == 0.0 {
                continue;
            }
            let xs = ox.digits(jo);
            for ja_o in 0..oa.size() {
                let acts = oa.digits(ja_o);
                let w: f64 = p_o * xs.iter().zip(acts).map(|(&xi, &ai)| gamma_env.prob(xi, ai)).product::<f64>();
                if w == 0.0 {
                    continue;
                }
                for a in 0..na {
                    kernel.focal_law_into(jo, x, ja_o, a, &mut scratch, &mut law);
                    let dst = &mut out[(x * na + a) * nx..(x * na + a + 1) * nx];
                    for (d, l) in dst.iter_mut().zip(&law) {
                        *d += w * l;
                    }
                }
            }
        }
    }
    out
}

/// `q[x][a] = R(x,a,z) + delta * sum_x' P(x'|x,a) V_next(z_next, x')`, with
/// `P` the environment-averaged focal transition law under `gamma_env`.
/// `z_next` must equal `phi(z, gamma_env)`.
pub fn stage_q_values(
    model: &ValidatedModel,
    z: &MeanField,
    gamma_env: &Prescription,
    next: &GameContinuation<'_>,
    z_next: &MeanField,
) -> QValues {
    let (nx, na) = (model.n_states(), model.n_actions());
    let mut q = model.reward_table(z);
    let delta = model.discount();
    if delta != 0.0 && !next.is_zero() {
        let v = next.eval(z_next, nx);
        let p = environment_transitions(model, z, gamma_env);
        for (xa, qv) in q.iter_mut().enumerate() {
            let cont: f64 = p[xa * nx..(xa + 1) * nx].iter().zip(&v).map(|(p, v)| p * v).sum();
            *qv += delta * cont;
        }
    }
    QValues { n_actions: na, q }
}

fn q_at(model: &ValidatedModel, z: &MeanField, gamma: &Prescription, next: &GameContinuation<'_>) -> QValues {
    if model.discount() == 0.0 || next.is_zero() {
        return QValues { n_actions: model.n_actions(), q: model.reward_table(z) };
    }
    let z_next = phi_update(model, z, gamma);
    stage_q_values(model, z, gamma, next, &z_next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Accept `g` once no type gains more than this by deviating.
    pub eps_consistency: f64,
    /// Initial damping of the best-response iteration, in `(0, 1]`.
    pub damping: f64,
    /// Iterations per start of the damped iteration.
    pub max_iter: usize,
    /// Random mixed starts tried after the pure and uniform starts.
    pub random_starts: usize,
    pub seed: u64,
    /// Record every self-consistent pure prescription at each node.
    pub enumerate_all_pure: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            eps_consistency: 1e-6,
            damping: 0.5,
            max_iter: 500,
            random_starts: 4,
            seed: 0,
            enumerate_all_pure: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointMethod {
    PureEnumeration,
    DampedIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointDiagnostics {
    pub method: FixedPointMethod,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistent_pure: Option<Vec<Vec<usize>>>,
}

/// Result of a stage fixed-point search; on failure `gamma` is the point
/// with the smallest residual seen.
#[derive(Debug, Clone)]
pub struct StageSolution {
    pub gamma: Prescription,
    pub q: QValues,
    pub diagnostics: FixedPointDiagnostics,
}

impl StageSolution {
    pub fn values(&self) -> Vec<f64> {
        self.q.played(&self.gamma)
    }
}

/// Searches for a prescription consistent with its own best response.
///
/// Pure prescriptions are tried first in lexicographic order and the first
/// consistent one wins. Otherwise a damped best-response iteration runs from
/// every pure start, the uniform start and a few random starts; the best
/// response mixes uniformly over the actions within `eps / 10` of the best,
/// and the damping is halved whenever the residual grows.
pub fn stage_fixed_point_search(
    model: &ValidatedModel,
    z: &MeanField,
    next: &GameContinuation<'_>,
    opts: &FixedPointOptions,
) -> StageSolution {
    let (nx, na) = (model.n_states(), model.n_actions());
    let eps = opts.eps_consistency;
    let mut evals = 0usize;
    let mut consistent = Vec::new();
    let mut first: Option<(Prescription, QValues, f64)> = None;
    let mut best: Option<(Prescription, QValues, f64)> = None;

    for acts in pure_prescriptions(nx, na) {
        let g = Prescription::pure(&acts, na);
        let q = q_at(model, z, &g, next);
        evals += 1;
        let res = q.residual(&g);
        if res <= eps {
            if first.is_none() {
                first = Some((g.clone(), q.clone(), res));
            }
            consistent.push(acts);
            if !opts.enumerate_all_pure {
                break;
            }
        } else if best.as_ref().is_none_or(|b| res < b.2) {
            best = Some((g, q, res));
        }
    }
    let consistent_pure = opts.enumerate_all_pure.then_some(consistent);
    if let Some((gamma, q, residual)) = first {
        return StageSolution {
            gamma,
            q,
            diagnostics: FixedPointDiagnostics {
                method: FixedPointMethod::PureEnumeration,
                iterations: evals,
                residual,
                converged: true,
                consistent_pure,
            },
        };
    }

    let mut starts: Vec<Prescription> =
        pure_prescriptions(nx, na).map(|a| Prescription::pure(&a, na)).collect();
    starts.insert(0, Prescription::uniform(nx, na));
    let mut rng = rng::stream(opts.seed, &[0xF1C5]);
    for _ in 0..opts.random_starts {
        let table: Vec<f64> = (0..nx * na).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        starts.push(Prescription::from_flat_normalized(table, na));
    }

    let br_tol = eps / 10.0;
    let mut best = best.expect("at least one pure prescription");
    for start in starts {
        let mut g = start;
        let mut alpha = opts.damping;
        let mut prev_res = f64::INFINITY;
        for _ in 0..opts.max_iter {
            let q = q_at(model, z, &g, next);
            evals += 1;
            let res = q.residual(&g);
            if res < best.2 {
                best = (g.clone(), q.clone(), res);
            }
            if res <= eps {
                return StageSolution {
                    gamma: g,
                    q,
                    diagnostics: FixedPointDiagnostics {
                        method: FixedPointMethod::DampedIteration,
                        iterations: evals,
                        residual: res,
                        converged: true,
                        consistent_pure,
                    },
                };
            }
            if res > prev_res {
                alpha = (alpha * 0.5).max(1e-12);
            }
            prev_res = res;
            let mut table = g.flat().to_vec();
            for x in 0..nx {
                let row = q.row(x);
                let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let support: Vec<bool> = row.iter().map(|&v| v >= top - br_tol).collect();
                let k = support.iter().filter(|&&s| s).count() as f64;
                for (a, s) in support.iter().enumerate() {
                    let br = if *s { 1.0 / k } else { 0.0 };
                    let t = &mut table[x * na + a];
                    *t = (1.0 - alpha) * *t + alpha * br;
                }
            }
            g = Prescription::from_flat_normalized(table, na);
        }
    }
    let (gamma, q, residual) = best;
    StageSolution {
        gamma,
        q,
        diagnostics: FixedPointDiagnostics {
            method: FixedPointMethod::DampedIteration,
            iterations: evals,
            residual,
            converged: false,
            consistent_pure,
        },
    }
}

/// [`stage_fixed_point_search`] as a `Result`: `NoFixedPointFound` carries
/// the best residual reached.
pub fn stage_fixed_point(
    model: &ValidatedModel,
    z: &MeanField,
    next: &GameContinuation<'_>,
    opts: &FixedPointOptions,
) -> Result<(Prescription, FixedPointDiagnostics)> {
    let sol = stage_fixed_point_search(model, z, next, opts);
    if sol.diagnostics.converged {
        Ok((sol.gamma, sol.diagnostics))
    } else {
        Err(Error::NoFixedPointFound {
            location: Location { stage: 0, node: 0 },
            residual: sol.diagnostics.residual,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    /// `values[t - 1][node][x]` for `t = 1..=T+1` (the last stage is the
    /// terminal table), or a single stationary table.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `policies[t - 1][node]`, or a single stationary table.
    pub policies: Vec<Vec<Prescription>>,
    pub diagnostics: Vec<Vec<FixedPointDiagnostics>>,
    /// Sup-norm value change per outer iteration (infinite horizon only).
    #[serde(default)]
    pub residual_trace: Vec<f64>,
}

impl GameSolution {
    pub fn is_stationary(&self) -> bool {
        self.policies.len() == 1 && self.values.len() == 1
    }

    pub fn horizon(&self) -> Option<usize> {
        (!self.is_stationary()).then_some(self.policies.len())
    }

    /// Stage-`t` value table (`t` is 1-based; ignored when stationary).
    pub fn value_table(&self, t: usize) -> &[Vec<f64>] {
        if self.is_stationary() {
            &self.values[0]
        } else {
            &self.values[t - 1]
        }
    }

    pub fn policy_table(&self, t: usize) -> &[Prescription] {
        if self.is_stationary() {
            &self.policies[0]
        } else {
            &self.policies[t - 1]
        }
    }

    /// Continuation used when solving stage `t`.
    pub fn continuation<'a>(&'a self, t: usize, grid: &'a SimplexGrid) -> GameContinuation<'a> {
        GameContinuation::Table { grid, values: if self.is_stationary() { &self.values[0] } else { &self.values[t] } }
    }
}

fn node_seed(seed: u64, stage: usize, node: usize) -> u64 {
    rng::derive_seed(seed, &[stage as u64, node as u64])
}

fn solve_nodes(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    next: GameContinuation<'_>,
    opts: &FixedPointOptions,
    stage: usize,
) -> Vec<StageSolution> {
    grid.nodes()
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let o = FixedPointOptions { seed: node_seed(opts.seed, stage, i), ..opts.clone() };
            stage_fixed_point_search(model, z, &next, &o)
        })
        .collect()
}

fn first_failure(sols: &[StageSolution], stage: usize) -> Option<Error> {
    sols.iter().enumerate().find(|(_, s)| !s.diagnostics.converged).map(|(i, s)| Error::NoFixedPointFound {
        location: Location { stage, node: i },
        residual: s.diagnostics.residual,
    })
}

fn check_grid(model: &ValidatedModel, grid: &SimplexGrid) -> Result<()> {
    if grid.dim() != model.meanfield_dim() {
        return Err(Error::BadShape(format!(
            "grid dimension {} does not match mean-field dimension {}",
            grid.dim(),
            model.meanfield_dim()
        )));
    }
    Ok(())
}

/// Backward recursion with terminal table `terminal` (zero when `None`). A
/// node without a fixed point keeps its best-residual prescription; the first
/// such failure is reported and the remaining stages are still computed.
pub fn solve_mfe_finite_partial(
    model: &ValidatedModel,
    horizon: usize,
    grid: &SimplexGrid,
    terminal: Option<&[Vec<f64>]>,
    opts: &FixedPointOptions,
) -> Result<Partial<GameSolution>> {
    check_grid(model, grid)?;
    if horizon == 0 {
        return Err(Error::HorizonMismatch { expected: 1, got: 0 });
    }
    let n = grid.len();
    let nx = model.n_states();
    let terminal_table = match terminal {
        Some(t) => {
            if t.len() != n || t.iter().any(|v| v.len() != nx) {
                return Err(Error::BadShape(format!("terminal table must be [{n}][{nx}]")));
            }
            t.to_vec()
        }
        None => vec![vec![0.0; nx]; n],
    };
    let terminal_is_zero = terminal.is_none() || terminal_table.iter().flatten().all(|&v| v == 0.0);
    let mut values = vec![Vec::new(); horizon + 1];
    values[horizon] = terminal_table;
    let mut policies = vec![Vec::new(); horizon];
    let mut diagnostics = vec![Vec::new(); horizon];
    let mut failure = None;
    for t in (1..=horizon).rev() {
        let sols = {
            let next = if t == horizon && terminal_is_zero {
                GameContinuation::Zero
            } else {
                GameContinuation::Table { grid, values: &values[t] }
            };
            solve_nodes(model, grid, next, opts, t)
        };
        if failure.is_none() {
            failure = first_failure(&sols, t);
        }
        values[t - 1] = sols.iter().map(StageSolution::values).collect();
        diagnostics[t - 1] = sols.iter().map(|s| s.diagnostics.clone()).collect();
        policies[t - 1] = sols.into_iter().map(|s| s.gamma).collect();
    }
    Ok(Partial { solution: GameSolution { values, policies, diagnostics, residual_trace: Vec::new() }, failure })
}

pub fn solve_mfe_finite(
    model: &ValidatedModel,
    horizon: usize,
    grid: &SimplexGrid,
    opts: &FixedPointOptions,
) -> Result<GameSolution> {
    solve_mfe_finite_partial(model, horizon, grid, None, opts)?.into_result()
}

/// Finite-horizon recursion started from `V_{T+1} = terminal` instead of 0.
pub fn finite_with_terminal(
    model: &ValidatedModel,
    horizon: usize,
    terminal: &[Vec<f64>],
    grid: &SimplexGrid,
    opts: &FixedPointOptions,
) -> Result<GameSolution> {
    solve_mfe_finite_partial(model, horizon, grid, Some(terminal), opts)?.into_result()
}

/// Outer value iteration on the stationary pair `(g, V)`: given `V^k`, solve
/// the stage fixed point at every node against `V^k` and set `V^{k+1}` to
/// the resulting equilibrium values. Stops when the sup-norm change is at
/// most `tol`.
pub fn solve_mfe_infinite_partial(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    tol: f64,
    max_iter: usize,
    opts: &FixedPointOptions,
) -> Result<Partial<GameSolution>> {
    check_grid(model, grid)?;
    if model.discount() >= 1.0 {
        return Err(Error::BadDiscount { discount: model.discount(), reason: "value iteration needs a discount below 1" });
    }
    let n = grid.len();
    let nx = model.n_states();
    let mut values = vec![vec![0.0; nx]; n];
    let mut policies = Vec::new();
    let mut diagnostics = Vec::new();
    let mut trace = Vec::new();
    let mut failure = None;
    for k in 1..=max_iter {
        let sols = solve_nodes(model, grid, GameContinuation::Table { grid, values: &values }, opts, k);
        let stage_failure = first_failure(&sols, k);
        let new_values: Vec<Vec<f64>> = sols.iter().map(StageSolution::values).collect();
        let residual = new_values
            .iter()
            .zip(&values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        values = new_values;
        diagnostics = sols.iter().map(|s| s.diagnostics.clone()).collect();
        policies = sols.into_iter().map(|s| s.gamma).collect();
        trace.push(residual);
        if residual <= tol {
            failure = stage_failure;
            break;
        }
        if k == max_iter {
            failure = stage_failure.or(Some(Error::NotConverged { iterations: k, residual }));
        }
    }
    let solution = GameSolution {
        values: vec![values],
        policies: vec![policies],
        diagnostics: vec![diagnostics],
        residual_trace: trace,
    };
    Ok(Partial { solution, failure })
}

pub fn solve_mfe_infinite(
    model: &ValidatedModel,
    grid: &SimplexGrid,
    tol: f64,
    max_iter: usize,
    opts: &FixedPointOptions,
) -> Result<GameSolution> {
    solve_mfe_infinite_partial(model, grid, tol, max_iter, opts)?.into_result()
}

/// `max_{node, x} |V(node, x) - sum_a g(a|x) q[x][a]|` for a stationary
/// solution, with `q` recomputed against the stored `V` at `phi(node, g)`.
pub fn bellman_residual(model: &ValidatedModel, solution: &GameSolution, grid: &SimplexGrid) -> Result<f64> {
    if !solution.is_stationary() {
        return Err(Error::WrongHorizon("stationary (infinite)"));
    }
    let values = &solution.values[0];
    let delta = model.discount();
    let nx = model.n_states();
    let ox = model.others_x();
    let oa = model.others_a();
    let mut worst = 0.0_f64;
    for (i, z) in grid.nodes().iter().enumerate() {
        let gamma = &solution.policies[0][i];
        let z_next = phi_update(model, z, gamma);
        let v_next = interpolate_vector(grid, values, &z_next);
        for x in 0..nx {
            let others = model.others_law_for(z, x);
            let mut rhs = 0.0;
            for a in 0..model.n_actions() {
                let pa = gamma.prob(x, a);
                if pa == 0.0 {
                    continue;
                }
                let mut cont = 0.0;
                for jo in 0..ox.size() {
                    for ja in 0..oa.size() {
                        let w = others[jo]
                            * ox.digits(jo).iter().zip(oa.digits(ja)).map(|(&xi, &ai)| gamma.prob(xi, ai)).product::<f64>();
                        if w == 0.0 {
                            continue;
                        }
                        let law = model.focal_next_state_law(z, ox.digits(jo), x, oa.digits(ja), a)?;
                        cont += w * law.iter().zip(&v_next).map(|(p, v)| p * v).sum::<f64>();
                    }
                }
                rhs += pa * (model.reward_eval(x, a, z)? + delta * cont);
            }
            worst = worst.max((values[i][x] - rhs).abs());
        }
    }
    Ok(worst)
}

/// How a tabulated generating function is evaluated off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaEval {
    /// Re-solve the stage fixed point at `z` against the tabulated
    /// continuation. On grid nodes the stored prescription is used.
    #[default]
    Resolve,
    /// Barycentric blend of the node prescriptions.
    Interpolate,
}

/// Equilibrium generating function `t, z -> g_t` backed by a solution table.
pub struct EquilibriumPolicy<'a> {
    pub model: &'a ValidatedModel,
    pub solution: &'a GameSolution,
    pub grid: &'a SimplexGrid,
    pub opts: FixedPointOptions,
    pub eval: ThetaEval,
}

impl EquilibriumPolicy<'_> {
    pub fn prescription(&self, t: usize, z: &MeanField) -> Result<Prescription> {
        let sol = self.solution;
        if let Some(h) = sol.horizon() {
            if t == 0 || t > h {
                return Err(Error::HorizonMismatch { expected: t, got: h });
            }
        }
        if let Some(i) = self.grid.node_index(z) {
            return Ok(sol.policy_table(t)[i].clone());
        }
        match self.eval {
            ThetaEval::Interpolate => Ok(interpolate_prescription(self.grid, sol.policy_table(t), z)),
            ThetaEval::Resolve => {
                let next = sol.continuation(t, self.grid);
                let next = match next {
                    GameContinuation::Table { values, .. } if values.iter().flatten().all(|&v| v == 0.0) => {
                        GameContinuation::Zero
                    }
                    other => other,
                };
                let o = FixedPointOptions { seed: rng::derive_seed(self.opts.seed, &[t as u64, u64::MAX]), ..self.opts.clone() };
                let s = stage_fixed_point_search(self.model, z, &next, &o);
                if !s.diagnostics.converged {
                    return Err(Error::NoFixedPointFound {
                        location: Location { stage: t, node: usize::MAX },
                        residual: s.diagnostics.residual,
                    });
                }
                Ok(s.gamma)
            }
        }
    }
}

/// Forward pass `g_t = theta_t[z_t]`, `z_{t+1} = phi(z_t, g_t)`.
pub fn assemble_equilibrium(
    policy: &EquilibriumPolicy<'_>,
    z1: &MeanField,
    horizon: usize,
) -> Result<Trajectory> {
    let rule = |t: usize, z: &MeanField| policy.prescription(t, z);
    lambda_rollout(policy.model, z1, &PrescriptionSource::Rule(&rule), horizon)
}

/// Largest gap, over `samples` seeded off-grid points and all types, between
/// the interpolated stationary value and the equilibrium value obtained by
/// solving the stage fixed point directly at the point against the same
/// table. Measures how far the tabulated `V` is from the operator it should
/// be a fixed point of, between nodes.
pub fn interpolation_error(
    model: &ValidatedModel,
    solution: &GameSolution,
    grid: &SimplexGrid,
    samples: usize,
    seed: u64,
    opts: &FixedPointOptions,
) -> Result<f64> {
    if !solution.is_stationary() {
        return Err(Error::WrongHorizon("stationary (infinite)"));
    }
    let values = &solution.values[0];
    let next = GameContinuation::Table { grid, values };
    let dim = grid.dim();
    let mut rng = rng::stream(seed, &[0x1E77]);
    let points: Vec<MeanField> = (0..samples)
        .map(|_| {
            let e: Vec<f64> = (0..dim).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            MeanField::from_update(e.into_iter().map(|v| v / s).collect())
        })
        .collect();
    let errs: Vec<f64> = points
        .par_iter()
        .map(|z| {
            let direct = stage_fixed_point_search(model, z, &next, opts).values();
            let interp = interpolate_vector(grid, values, z);
            direct.iter().zip(&interp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(errs.into_iter().fold(0.0, f64::max))
}
