use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries in `[-NEG_CLAMP, 0)` are treated as rounding noise and set to zero.
pub const NEG_CLAMP: f64 = 1e-15;
/// Allowed deviation of a distribution's total mass from one.
pub const SUM_TOL: f64 = 1e-12;

fn check_distribution(probs: &mut [f64], what: &str) -> Result<()> {
    let mut total = 0.0;
    for (i, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() {
            return Err(Error::BadSimplex(format!("{what}: entry {i} is not finite")));
        }
        if *p < 0.0 {
            if *p >= -NEG_CLAMP {
                *p = 0.0;
            } else {
                return Err(Error::BadSimplex(format!("{what}: entry {i} = {p} is negative")));
            }
        }
        total += *p;
    }
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::BadSimplex(format!("{what}: entries sum to {total}")));
    }
    Ok(())
}

/// Probability vector over joint types `X^N`, indexed row-major with slot 1
/// as the most significant digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MeanField {
    probs: Vec<f64>,
}

impl MeanField {
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::BadSimplex("mean field is empty".into()));
        }
        check_distribution(&mut probs, "mean field")?;
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Self {
        Self { probs: vec![1.0 / len as f64; len] }
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Wraps output of a mass-preserving update. Tiny negatives are clamped,
    /// nothing is renormalized.
    pub(crate) fn from_update(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 && *p >= -NEG_CLAMP {
                *p = 0.0;
            }
        }
        debug_assert!(
            (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "update lost mass: {}",
            probs.iter().sum::<f64>()
        );
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Total-variation distance `0.5 * sum |p - q|`.
    pub fn tv_distance(&self, other: &MeanField) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl TryFrom<Vec<f64>> for MeanField {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MeanField::new(v)
    }
}

impl From<MeanField> for Vec<f64> {
    fn from(z: MeanField) -> Self {
        z.probs
    }
}

/// A map from private type to action distribution, stored row-major
/// `[x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Prescription {
    n_actions: usize,
    table: Vec<f64>,
}

impl Prescription {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || n_actions == 0 {
            return Err(Error::BadSimplex("prescription has no rows or no actions".into()));
        }
        let mut table = Vec::with_capacity(rows.len() * n_actions);
        for (x, mut row) in rows.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::BadSimplex(format!("prescription row {x} has ragged length")));
            }
            check_distribution(&mut row, &format!("prescription row {x}"))?;
            table.extend(row);
        }
        Ok(Self { n_actions, table })
    }

    /// Deterministic prescription choosing `actions[x]` in type `x`.
    pub fn pure(actions: &[usize], n_actions: usize) -> Self {
        let mut table = vec![0.0; actions.len() * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            table[x * n_actions + a] = 1.0;
        }
        Self { n_actions, table }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            table: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Builds from a flat `[x][a]` table whose rows are already distributions
    /// up to rounding; each row is renormalized.
    pub(crate) fn from_flat_normalized(mut table: Vec<f64>, n_actions: usize) -> Self {
        for row in table.chunks_mut(n_actions) {
            for p in row.iter_mut() {
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|p| *p /= s);
            } else {
                row.iter_mut().for_each(|p| *p = 1.0 / n_actions as f64);
            }
        }
        Self { n_actions, table }
    }

    pub fn n_states(&self) -> usize {
        self.table.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub(crate) fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.table[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.table[x * self.n_actions + a]
    }

    pub fn flat(&self) -> &[f64] {
        &self.table
    }

    /// For a deterministic prescription, the chosen action per type.
    pub fn as_pure(&self) -> Option<Vec<usize>> {
        (0..self.n_states())
            .map(|x| self.row(x).iter().position(|&p| p == 1.0))
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.table.chunks(self.n_actions).map(|r| r.to_vec()).collect()
    }

    pub fn max_abs_diff(&self, other: &Prescription) -> f64 {
        self.table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Prescription {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Prescription::new(v)
    }
}

impl From<Prescription> for Vec<Vec<f64>> {
    fn from(p: Prescription) -> Self {
        p.rows()
    }
}

/// Iterates all `n_actions^n_states` deterministic prescriptions in
/// lexicographic order of `(a(0), a(1), ...)`.
pub fn pure_prescriptions(n_states: usize, n_actions: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    (0..total).map(move |mut code| {
        let mut actions = vec![0; n_states];
        for x in (0..n_states).rev() {
            actions[x] = code % n_actions;
            code /= n_actions;
        }
        actions
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_tiny_negatives() {
        let z = MeanField::new(vec![-5e-16, 1.0]).unwrap();
        assert_eq!(z.probs(), &[0.0, 1.0]);
        assert!(MeanField::new(vec![-1e-10, 1.0 + 1e-10]).is_err());
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(MeanField::new(vec![0.5, 0.4]).is_err());
        assert!(MeanField::new(vec![0.5, f64::NAN]).is_err());
        assert!(Prescription::new(vec![vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn pure_enumeration_is_lexicographic() {
        let all: Vec<_> = pure_prescriptions(2, 3).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        assert_eq!(all[8], vec![2, 2]);
    }

    #[test]
    fn pure_round_trip() {
        let p = Prescription::pure(&[1, 0, 2], 3);
        assert_eq!(p.as_pure(), Some(vec![1, 0, 2]));
        assert_eq!(Prescription::uniform(2, 2).as_pure(), None);
    }
}
