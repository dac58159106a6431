//! Serializable solver reports and CSV plot data.
//!
//! Floats are written in shortest round-trip form, so a report read back
//! from disk is bit-identical to the one written.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::meanfield::{GridMeta, SimplexGrid, Trajectory};
use crate::mfe::{FixedPointOptions, GameSolution};
use crate::model::{Horizon, OthersLaw};
use crate::simulate::EmpiricalPath;
use crate::team::{OptOptions, TeamSolution};

/// Provenance of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Hex SHA-256 of the model file bytes.
    pub model_hash: String,
    pub model_path: String,
    pub config: serde_json::Value,
    pub version: String,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub horizon: Horizon,
    pub discount: f64,
    pub others_law: OthersLaw,
    pub grid: GridMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointOptions>,
    /// Human-readable failure, present on partial reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Report {
    Team {
        meta: Meta,
        run: RunInfo,
        solution: TeamSolution,
    },
    Game {
        meta: Meta,
        run: RunInfo,
        solution: GameSolution,
    },
}

impl Report {
    pub fn meta(&self) -> &Meta {
        match self {
            Report::Team { meta, .. } | Report::Game { meta, .. } => meta,
        }
    }

    pub fn run(&self) -> &RunInfo {
        match self {
            Report::Team { run, .. } | Report::Game { run, .. } => run,
        }
    }

    pub fn residual_trace(&self) -> &[f64] {
        match self {
            Report::Team { solution, .. } => &solution.residual_trace,
            Report::Game { solution, .. } => &solution.residual_trace,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn push_coords(line: &mut String, z: &[f64]) {
    for p in z {
        let _ = write!(line, ",{p}");
    }
}

/// Value per grid node and stage: `stage,node,z_0..z_{d-1},value...`. The
/// terminal zero table is omitted, so a `T`-stage report has `nodes * T`
/// rows (one stage for stationary solutions).
pub fn values_csv(report: &Report, grid: &SimplexGrid) -> String {
    let dim = grid.dim();
    let mut out = String::from("stage,node");
    for j in 0..dim {
        let _ = write!(out, ",z{j}");
    }
    match report {
        Report::Team { solution, .. } => {
            out.push_str(",value\n");
            let stages = solution.policies.len();
            for (t, table) in solution.values.iter().take(stages).enumerate() {
                for (i, v) in table.iter().enumerate() {
                    let mut line = format!("{},{i}", t + 1);
                    push_coords(&mut line, grid.node(i).probs());
                    let _ = writeln!(line, ",{v}");
                    out.push_str(&line);
                }
            }
        }
        Report::Game { solution, .. } => {
            let nx = solution.values.first().and_then(|t| t.first()).map_or(0, Vec::len);
            for x in 0..nx {
                let _ = write!(out, ",value_x{x}");
            }
            out.push('\n');
            let stages = solution.policies.len();
            for (t, table) in solution.values.iter().take(stages).enumerate() {
                for (i, v) in table.iter().enumerate() {
                    let mut line = format!("{},{i}", t + 1);
                    push_coords(&mut line, grid.node(i).probs());
                    for val in v {
                        let _ = write!(line, ",{val}");
                    }
                    line.push('\n');
                    out.push_str(&line);
                }
            }
        }
    }
    out
}

/// `t,z_0..z_{d-1}` for every mean field of the path. `dim` fixes the header
/// when the path is empty.
pub fn zpath_csv(meanfields: &[crate::model::MeanField], dim: usize) -> String {
    let mut out = String::from("t");
    for j in 0..dim {
        let _ = write!(out, ",z{j}");
    }
    out.push('\n');
    for (t, z) in meanfields.iter().enumerate() {
        let mut line = format!("{}", t + 1);
        push_coords(&mut line, z.probs());
        line.push('\n');
        out.push_str(&line);
    }
    out
}

/// `t,x,a,prob` for every prescription of the path.
pub fn prescriptions_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,a,prob\n");
    for (t, g) in traj.prescriptions.iter().enumerate() {
        for x in 0..g.n_states() {
            for a in 0..g.n_actions() {
                let _ = writeln!(out, "{},{x},{a},{}", t + 1, g.prob(x, a));
            }
        }
    }
    out
}

pub fn residual_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,residual\n");
    for (k, r) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{r}", k + 1);
    }
    out
}

/// `t,joint_index,empirical,deterministic,tv` per stage and joint type.
pub fn simulation_csv(path: &EmpiricalPath) -> String {
    let mut out = String::from("t,joint_index,empirical,deterministic,tv\n");
    for (t, (e, z)) in path.empirical.iter().zip(&path.deterministic).enumerate() {
        for (j, (pe, pz)) in e.iter().zip(z.probs()).enumerate() {
            let _ = writeln!(out, "{},{j},{pe},{pz},{}", t + 1, path.tv[t]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::build_simplex_grid;
    use crate::mfe::solve_mfe_finite;
    use crate::model::testing::uniform_spec;
    use crate::model::validate_model;
    use crate::team::solve_team_finite;

    fn meta() -> Meta {
        Meta {
            model_hash: "00".into(),
            model_path: "m.json".into(),
            config: serde_json::json!({"grid_res": 3}),
            version: "0".into(),
            wall_clock_secs: 0.125,
        }
    }

    fn run(grid: &SimplexGrid) -> RunInfo {
        RunInfo { horizon: Horizon::Finite(2), discount: 0.9, others_law: OthersLaw::Marginal, grid: grid.meta(), optimizer: None, fixed_point: Some(Default::default()), failure: None }
    }

    #[test]
    fn reports_round_trip_bit_exact() {
        let mut spec = uniform_spec(2, 2, 2, 0.9);
        spec.reward.base = vec![vec![0.1, 0.3], vec![1.0 / 3.0, 0.2]];
        let m = validate_model(spec).unwrap();
        let g = build_simplex_grid(4, 3).unwrap();
        let team = solve_team_finite(&m, 2, &g, &OptOptions::default()).unwrap();
        let game = solve_mfe_finite(&m, 2, &g, &Default::default()).unwrap();
        for rep in [
            Report::Team { meta: meta(), run: run(&g), solution: team },
            Report::Game { meta: meta(), run: run(&g), solution: game },
        ] {
            let back = Report::from_json(&rep.to_json()).unwrap();
            assert_eq!(back, rep);
            assert_eq!(values_csv(&rep, &g).lines().count(), 1 + 2 * g.len());
        }
    }

    #[test]
    fn empty_csvs_have_headers() {
        assert_eq!(zpath_csv(&[], 2), "t,z0,z1\n");
        assert_eq!(residual_csv(&[]), "iteration,residual\n");
        let t = Trajectory { meanfields: vec![], prescriptions: vec![] };
        assert_eq!(prescriptions_csv(&t), "t,x,a,prob\n");
    }
}
