//! Certificates that do not trust the solvers: consistency of a mean-field
//! path with the forward map, single-agent deviation gains against a frozen
//! path, brute-force team values and an `N = 1` reference game solver.
//!
//! The transition laws here are assembled from [`ValidatedModel::kernel_eval`]
//! by plain loops over joint indices, separately from the solver code paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};
use crate::meanfield::{interpolate_vector, node_count, phi_update, SimplexGrid};
use crate::mfe::{FixedPointDiagnostics, FixedPointMethod, GameSolution};
use crate::model::decode;
use crate::model::{MeanField, OthersLaw, Prescription, ValidatedModel};

/// `max_t TV(z_t, Lambda(gammas)_t)` with the recomputation started at
/// `zs[0]`.
pub fn check_consistency(model: &ValidatedModel, gammas: &[Prescription], zs: &[MeanField]) -> Result<f64> {
    if zs.len() != gammas.len() + 1 {
        return Err(Error::HorizonMismatch { expected: gammas.len() + 1, got: zs.len() });
    }
    for z in zs {
        model.check_meanfield(z)?;
    }
    let mut z = zs[0].clone();
    let mut worst = 0.0_f64;
    for (g, supplied) in gammas.iter().zip(&zs[1..]) {
        model.check_prescription(g)?;
        z = phi_update(model, &z, g);
        worst = worst.max(z.tv_distance(supplied));
    }
    Ok(worst)
}

/// Law of the `N - 1` others as seen by a focal agent of type `x`, computed
/// straight from the joint probabilities.
fn others_law(model: &ValidatedModel, z: &MeanField, x: usize) -> Vec<f64> {
    let nx = model.n_states();
    let p = z.probs();
    let n_others = p.len() / nx;
    let marginal: Vec<f64> = (0..n_others).map(|o| (0..nx).map(|y| p[o * nx + y]).sum()).collect();
    if model.others_law() == OthersLaw::Conditional {
        let cond: Vec<f64> = (0..n_others).map(|o| p[o * nx + x]).collect();
        let mass: f64 = cond.iter().sum();
        if mass > 0.0 {
            return cond.iter().map(|c| c / mass).collect();
        }
    }
    marginal
}

/// Focal transition law `p(x'|x, a)` at `z` with the others acting under
/// `gamma`, indexed `[x][a][x']`.
pub fn focal_transitions(model: &ValidatedModel, z: &MeanField, gamma: &Prescription) -> Result<Vec<Vec<Vec<f64>>>> {
    let (n, nx, na) = (model.n_corr(), model.n_states(), model.n_actions());
    let mut p = vec![vec![vec![0.0; nx]; na]; nx];
    let n_other_a = na.pow(n as u32 - 1);
    for (x, px) in p.iter_mut().enumerate() {
        let law = others_law(model, z, x);
        for (o, &po) in law.iter().enumerate() {
            if po == 0.0 {
                continue;
            }
            let xs = decode(o, nx, n - 1);
            for oa in 0..n_other_a {
                let acts = decode(oa, na, n - 1);
                let w = po * xs.iter().zip(&acts).map(|(&xi, &ai)| gamma.prob(xi, ai)).product::<f64>();
                if w == 0.0 {
                    continue;
                }
                for (a, pxa) in px.iter_mut().enumerate() {
                    // focal agent is the last digit
                    let next = model.kernel_eval(z, o * nx + x, oa * na + a)?;
                    for (j, q) in next.iter().enumerate() {
                        pxa[j % nx] += w * q;
                    }
                }
            }
        }
    }
    Ok(p)
}

/// Backward tables of the frozen-path focal MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationTables {
    /// `best[t][x]`: optimal reward-to-go, `t = 0..T` (0-based, `best[T]` is
    /// the terminal vector).
    pub best: Vec<Vec<f64>>,
    /// `played[t][x]`: reward-to-go of the prescribed path.
    pub played: Vec<Vec<f64>>,
    /// `argmax[t][x]`: lowest-index optimal action of the deviation MDP.
    pub argmax: Vec<Vec<usize>>,
}

impl DeviationTables {
    pub fn gain(&self, t0: usize, x0: usize) -> f64 {
        self.best[t0 - 1][x0] - self.played[t0 - 1][x0]
    }
}

/// Solves the focal agent's MDP along the frozen path `zs` with the others
/// acting under `gammas`, and evaluates the prescribed path itself.
pub fn deviation_tables(
    model: &ValidatedModel,
    zs: &[MeanField],
    gammas: &[Prescription],
    v_terminal: Option<&[f64]>,
) -> Result<DeviationTables> {
    let horizon = gammas.len();
    if zs.len() < horizon {
        return Err(Error::HorizonMismatch { expected: horizon, got: zs.len() });
    }
    let (nx, na) = (model.n_states(), model.n_actions());
    let delta = model.discount();
    let terminal = match v_terminal {
        Some(v) if v.len() != nx => return Err(Error::BadShape(format!("terminal vector must have length {nx}"))),
        Some(v) => v.to_vec(),
        None => vec![0.0; nx],
    };
    let laws: Vec<Vec<Vec<Vec<f64>>>> = zs[..horizon]
        .par_iter()
        .zip(gammas)
        .map(|(z, g)| focal_transitions(model, z, g))
        .collect::<Result<_>>()?;
    let mut best = vec![terminal.clone(); horizon + 1];
    let mut played = vec![terminal; horizon + 1];
    let mut argmax = vec![vec![0; nx]; horizon];
    for t in (0..horizon).rev() {
        let z = &zs[t];
        for x in 0..nx {
            let mut top = f64::NEG_INFINITY;
            let mut w = 0.0;
            for a in 0..na {
                let r = model.reward_eval(x, a, z)?;
                let p = &laws[t][x][a];
                let d: f64 = r + delta * p.iter().zip(&best[t + 1]).map(|(p, v)| p * v).sum::<f64>();
                let e: f64 = r + delta * p.iter().zip(&played[t + 1]).map(|(p, v)| p * v).sum::<f64>();
                if d > top {
                    top = d;
                    argmax[t][x] = a;
                }
                w += gammas[t].prob(x, a) * e;
            }
            best[t][x] = top;
            played[t][x] = w;
        }
    }
    Ok(DeviationTables { best, played, argmax })
}

/// `D_{t0}(x0) - W_{t0}(x0)`: what a single infinitesimal agent of type `x0`
/// at stage `t0` (1-based) gains by deviating optimally while everyone else
/// follows `gammas` and the population follows `zs`.
pub fn best_deviation_gain(
    model: &ValidatedModel,
    zs: &[MeanField],
    gammas: &[Prescription],
    v_terminal: Option<&[f64]>,
    t0: usize,
    x0: usize,
) -> Result<f64> {
    if t0 == 0 || t0 > gammas.len() {
        return Err(Error::IndexOutOfRange { what: "t0", index: t0, limit: gammas.len() + 1 });
    }
    if x0 >= model.n_states() {
        return Err(Error::IndexOutOfRange { what: "x0", index: x0, limit: model.n_states() });
    }
    Ok(deviation_tables(model, zs, gammas, v_terminal)?.gain(t0, x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedEps,
    Refuted,
}

/// A profitable deviation: the optimal deviation policy from `(t, x)` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub stage: usize,
    pub state: usize,
    pub gain: f64,
    /// `actions[k][x]` for stages `stage..=T`.
    pub actions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub consistency_residual: f64,
    pub max_deviation_gain: f64,
    /// `per_stage_gains[t - 1][x]`.
    pub per_stage_gains: Vec<Vec<f64>>,
    /// Added to every gain for truncated infinite-horizon paths.
    pub tail_bound: f64,
    pub eps: f64,
    pub consistency_tol: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub eps: f64,
    pub consistency_tol: f64,
    /// The path is a truncation of an infinite-horizon play.
    pub truncated: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { eps: 1e-5, consistency_tol: 1e-12, truncated: false }
    }
}

/// Checks a strategy/path pair against the equilibrium definition: the path
/// must be generated by the strategy and no single agent may gain more than
/// `eps` by deviating at any `(t, x)`.
///
/// For truncated infinite-horizon paths both the deviation value and the
/// played value can move by at most `delta^T R_max / (1 - delta)` beyond the
/// horizon, so twice that bound is added to every gain.
pub fn verify_mfe(
    model: &ValidatedModel,
    gammas: &[Prescription],
    zs: &[MeanField],
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let consistency_residual = check_consistency(model, gammas, zs)?;
    let horizon = gammas.len();
    let tables = deviation_tables(model, zs, gammas, None)?;
    let tail_bound = if opts.truncated {
        let delta = model.discount();
        2.0 * delta.powi(horizon as i32) * model.reward_bound() / (1.0 - delta)
    } else {
        0.0
    };
    let per_stage_gains: Vec<Vec<f64>> = (1..=horizon)
        .map(|t| (0..model.n_states()).map(|x| tables.gain(t, x) + tail_bound).collect())
        .collect();
    let mut max_gain = f64::NEG_INFINITY;
    let mut at = (1, 0);
    for (t, row) in per_stage_gains.iter().enumerate() {
        for (x, &g) in row.iter().enumerate() {
            if g > max_gain {
                max_gain = g;
                at = (t + 1, x);
            }
        }
    }
    let certified = consistency_residual <= opts.consistency_tol && max_gain <= opts.eps;
    let witness = (max_gain > opts.eps).then(|| Witness {
        stage: at.0,
        state: at.1,
        gain: max_gain,
        actions: tables.argmax[at.0 - 1..].to_vec(),
    });
    Ok(VerifyReport {
        consistency_residual,
        max_deviation_gain: max_gain,
        per_stage_gains,
        tail_bound,
        eps: opts.eps,
        consistency_tol: opts.consistency_tol,
        verdict: if certified { Verdict::CertifiedEps } else { Verdict::Refuted },
        witness,
    })
}

/// Default cap on the number of prescription sequences `brute_force_team`
/// may enumerate.
pub const ORACLE_CAP: u128 = 50_000_000;

fn row_candidates(n_actions: usize, resolution: usize) -> Vec<Vec<f64>> {
    let r = resolution.max(1);
    let mut out = Vec::new();
    let mut comp = vec![0usize; n_actions];
    fn rec(i: usize, left: usize, comp: &mut Vec<usize>, r: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == comp.len() {
            comp[i] = left;
            out.push(comp.iter().map(|&c| c as f64 / r as f64).collect());
            return;
        }
        for c in (0..=left).rev() {
            comp[i] = c;
            rec(i + 1, left - c, comp, r, out);
        }
    }
    rec(0, r, &mut comp, r, &mut out);
    out
}

fn prescription_candidates(nx: usize, rows: &[Vec<f64>]) -> Vec<Prescription> {
    let k = rows.len();
    let total = k.pow(nx as u32);
    (0..total)
        .map(|i| {
            let pick = decode(i, k, nx);
            Prescription::new(pick.iter().map(|&j| rows[j].clone()).collect()).expect("grid rows are distributions")
        })
        .collect()
}

fn stage_reward(model: &ValidatedModel, z: &MeanField, g: &Prescription) -> f64 {
    let nx = model.n_states();
    let block = z.len() / nx;
    let r = model.reward_table(z);
    let na = model.n_actions();
    (0..nx)
        .map(|x| {
            let m: f64 = z.probs()[x * block..(x + 1) * block].iter().sum();
            m * (0..na).map(|a| g.prob(x, a) * r[x * na + a]).sum::<f64>()
        })
        .sum()
}

/// Maximum team value from `z1` over all open-loop sequences of symmetric
/// prescriptions whose rows lie on the action-simplex grid of resolution
/// `mix_resolution` (which contains every pure row). The mean-field path is
/// deterministic, so open-loop sequences cover every Markov policy with rows
/// on that grid.
pub fn brute_force_team(
    model: &ValidatedModel,
    z1: &MeanField,
    horizon: usize,
    mix_resolution: usize,
    cap: u128,
) -> Result<f64> {
    model.check_meanfield(z1)?;
    if horizon == 0 {
        return Err(Error::HorizonMismatch { expected: 1, got: 0 });
    }
    let (nx, na) = (model.n_states(), model.n_actions());
    let per_row = node_count(na, mix_resolution.max(1));
    let per_stage = per_row.saturating_pow(nx as u32);
    let candidates = per_stage.saturating_pow(horizon as u32);
    if candidates > cap {
        return Err(Error::OracleTooLarge { candidates, cap });
    }
    let cands = prescription_candidates(nx, &row_candidates(na, mix_resolution));
    let delta = model.discount();

    fn best_from(model: &ValidatedModel, z: &MeanField, left: usize, cands: &[Prescription], delta: f64) -> f64 {
        if left == 1 {
            return cands.iter().map(|g| stage_reward(model, z, g)).fold(f64::NEG_INFINITY, f64::max);
        }
        cands
            .iter()
            .map(|g| stage_reward(model, z, g) + delta * best_from(model, &phi_update(model, z, g), left - 1, cands, delta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    if horizon == 1 {
        return Ok(best_from(model, z1, 1, &cands, delta));
    }
    Ok(cands
        .par_iter()
        .map(|g| stage_reward(model, z1, g) + delta * best_from(model, &phi_update(model, z1, g), horizon - 1, &cands, delta))
        .reduce(|| f64::NEG_INFINITY, f64::max))
}

/// Classical mean-field game solver for `N = 1`, where the mean field is the
/// type distribution itself and agents transition independently. Backward
/// recursion over the grid with the same pure-first selection rule as the
/// main solver: lexicographically first consistent pure prescription, then a
/// damped best-response iteration from the uniform and each pure start.
pub fn classical_mfg_reference(
    model: &ValidatedModel,
    horizon: usize,
    grid: &SimplexGrid,
    eps: f64,
) -> Result<GameSolution> {
    if model.n_corr() != 1 {
        return Err(Error::RequiresN1(model.n_corr()));
    }
    let (nx, na) = (model.n_states(), model.n_actions());
    if grid.dim() != nx {
        return Err(Error::BadShape(format!("grid dimension {} for {} types", grid.dim(), nx)));
    }
    let delta = model.discount();
    let mut values = vec![vec![vec![0.0; nx]; grid.len()]; horizon + 1];
    let mut policies = vec![Vec::new(); horizon];
    let mut diagnostics = vec![Vec::new(); horizon];

    for t in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        let last = t + 1 == horizon;
        let solved: Vec<(Prescription, Vec<f64>, FixedPointDiagnostics)> = grid
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(node, z)| {
                let kernel: Vec<Vec<Vec<f64>>> = (0..nx)
                    .map(|x| (0..na).map(|a| model.kernel_eval(z, x, a)).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                let reward: Vec<Vec<f64>> =
                    (0..nx).map(|x| (0..na).map(|a| model.reward_eval(x, a, z)).collect::<Result<_>>()).collect::<Result<_>>()?;
                let q_of = |g: &Prescription| -> Vec<Vec<f64>> {
                    let cont = if last || delta == 0.0 {
                        vec![0.0; nx]
                    } else {
                        let mut zn = vec![0.0; nx];
                        for x in 0..nx {
                            for a in 0..na {
                                let w = z.probs()[x] * g.prob(x, a);
                                for (y, q) in kernel[x][a].iter().enumerate() {
                                    zn[y] += w * q;
                                }
                            }
                        }
                        let zn = MeanField::from_update(zn);
                        interpolate_vector(grid, next, &zn)
                    };
                    (0..nx)
                        .map(|x| {
                            (0..na)
                                .map(|a| {
                                    reward[x][a] + delta * kernel[x][a].iter().zip(&cont).map(|(p, v)| p * v).sum::<f64>()
                                })
                                .collect()
                        })
                        .collect()
                };
                let gap = |g: &Prescription, q: &[Vec<f64>]| -> f64 {
                    q.iter()
                        .enumerate()
                        .map(|(x, row)| {
                            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            top - row.iter().enumerate().map(|(a, v)| g.prob(x, a) * v).sum::<f64>()
                        })
                        .fold(0.0, f64::max)
                };
                let value = |g: &Prescription, q: &[Vec<f64>]| -> Vec<f64> {
                    q.iter().enumerate().map(|(x, row)| row.iter().enumerate().map(|(a, v)| g.prob(x, a) * v).sum()).collect()
                };
                let pures: Vec<Prescription> = (0..na.pow(nx as u32))
                    .map(|i| Prescription::pure(&decode(i, na, nx), na))
                    .collect();
                let mut evals = 0;
                for g in &pures {
                    let q = q_of(g);
                    evals += 1;
                    let r = gap(g, &q);
                    if r <= eps {
                        let v = value(g, &q);
                        let d = FixedPointDiagnostics {
                            method: FixedPointMethod::PureEnumeration,
                            iterations: evals,
                            residual: r,
                            converged: true,
                            consistent_pure: None,
                        };
                        return Ok((g.clone(), v, d));
                    }
                }
                let mut starts = vec![Prescription::uniform(nx, na)];
                starts.extend(pures);
                for start in starts {
                    let mut g = start;
                    let mut alpha = 0.5;
                    let mut prev = f64::INFINITY;
                    for _ in 0..500 {
                        let q = q_of(&g);
                        evals += 1;
                        let r = gap(&g, &q);
                        if r <= eps {
                            let v = value(&g, &q);
                            let d = FixedPointDiagnostics {
                                method: FixedPointMethod::DampedIteration,
                                iterations: evals,
                                residual: r,
                                converged: true,
                                consistent_pure: None,
                            };
                            return Ok((g, v, d));
                        }
                        if r > prev {
                            alpha = (alpha * 0.5_f64).max(1e-12);
                        }
                        prev = r;
                        let rows: Vec<Vec<f64>> = q
                            .iter()
                            .enumerate()
                            .map(|(x, row)| {
                                let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                                let k = row.iter().filter(|&&v| v >= top - eps / 10.0).count() as f64;
                                row.iter()
                                    .enumerate()
                                    .map(|(a, &v)| {
                                        let br = if v >= top - eps / 10.0 { 1.0 / k } else { 0.0 };
                                        (1.0 - alpha) * g.prob(x, a) + alpha * br
                                    })
                                    .collect()
                            })
                            .collect();
                        let flat: Vec<f64> = rows.into_iter().flatten().collect();
                        g = Prescription::from_flat_normalized(flat, na);
                    }
                }
                Err(Error::NoFixedPointFound { location: Location { stage: t + 1, node }, residual: f64::NAN })
            })
            .collect::<Result<_>>()?;
        let stage = &mut head[t];
        for (i, (g, v, d)) in solved.into_iter().enumerate() {
            stage[i] = v;
            policies[t].push(g);
            diagnostics[t].push(d);
        }
    }
    Ok(GameSolution { values, policies, diagnostics, residual_trace: Vec::new() })
}
