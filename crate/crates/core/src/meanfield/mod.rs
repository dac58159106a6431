//! Forward dynamics of the correlated mean field and the simplex grid used
//! to tabulate functions of it.

mod grid;
mod projection;

pub use grid::{
    binomial, build_simplex_grid, default_resolution, grid_cap_from_env, interpolate_prescription,
    interpolate_value, interpolate_vector, node_count, GridMeta, SimplexGrid, Stencil,
    DEFAULT_GRID_CAP,
};
pub use projection::project_to_simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeanField, Prescription, ValidatedModel};

/// One step of the discrete-time Fokker-Planck recursion:
/// `z'(x') = sum_{x, a} z(x) Q(x' | z, x, a) prod_i gamma(a^i | x^i)`.
pub fn phi_update(model: &ValidatedModel, z: &MeanField, gamma: &Prescription) -> MeanField {
    let sx = model.meanfield_dim();
    let sa = model.joint_a().size();
    let kernel = model.kernel_at(z);
    let mut next = vec![0.0; sx];
    let mut row = vec![0.0; sx];
    for (jx, &mass) in z.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for ja in 0..sa {
            let pa = model.joint_action_prob(gamma, jx, ja);
            if pa == 0.0 {
                continue;
            }
            kernel.row_into(jx, ja, &mut row);
            let w = mass * pa;
            for (n, q) in next.iter_mut().zip(&row) {
                *n += w * q;
            }
        }
    }
    MeanField::from_update(next)
}

/// Mean-field path `z_1..z_{T+1}` together with the prescriptions
/// `gamma_1..gamma_T` that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meanfields: Vec<MeanField>,
    pub prescriptions: Vec<Prescription>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.prescriptions.len()
    }
}

/// Where the prescription for stage `t` (1-based) comes from during a
/// forward rollout.
pub enum PrescriptionSource<'a> {
    /// An open-loop sequence, one prescription per stage.
    Fixed(&'a [Prescription]),
    /// Tabulated generating function, `policies[t - 1][node]`, evaluated by
    /// barycentric interpolation.
    Table { grid: &'a SimplexGrid, policies: &'a [Vec<Prescription>] },
    /// Arbitrary rule `(t, z_t) -> gamma_t`.
    Rule(&'a (dyn Fn(usize, &MeanField) -> Result<Prescription> + Sync)),
}

impl PrescriptionSource<'_> {
    pub fn prescription(&self, t: usize, z: &MeanField) -> Result<Prescription> {
        match self {
            PrescriptionSource::Fixed(seq) => Ok(seq[t - 1].clone()),
            PrescriptionSource::Table { grid, policies } => {
                // stationary tables have a single stage
                let stage = if policies.len() == 1 { 0 } else { t - 1 };
                Ok(interpolate_prescription(grid, &policies[stage], z))
            }
            PrescriptionSource::Rule(f) => f(t, z),
        }
    }

    fn available(&self) -> Option<usize> {
        match self {
            PrescriptionSource::Fixed(seq) => Some(seq.len()),
            PrescriptionSource::Table { policies, .. } if policies.len() > 1 => Some(policies.len()),
            _ => None,
        }
    }
}

/// Iterates [`phi_update`] for `horizon` stages starting from `z1`.
pub fn lambda_rollout(
    model: &ValidatedModel,
    z1: &MeanField,
    source: &PrescriptionSource<'_>,
    horizon: usize,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::HorizonMismatch { expected: 1, got: 0 });
    }
    if let Some(n) = source.available() {
        if n < horizon {
            return Err(Error::HorizonMismatch { expected: horizon, got: n });
        }
    }
    model.check_meanfield(z1)?;
    let mut meanfields = Vec::with_capacity(horizon + 1);
    let mut prescriptions = Vec::with_capacity(horizon);
    meanfields.push(z1.clone());
    for t in 1..=horizon {
        let z = &meanfields[t - 1];
        let gamma = source.prescription(t, z)?;
        model.check_prescription(&gamma)?;
        let next = phi_update(model, z, &gamma);
        prescriptions.push(gamma);
        meanfields.push(next);
    }
    Ok(Trajectory { meanfields, prescriptions })
}
