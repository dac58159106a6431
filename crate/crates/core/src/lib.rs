//! Solvers for discrete-time mean-field teams and games in which the types of
//! any `N` agents evolve jointly through a symmetric kernel.
//!
//! The population is summarized by a *correlated* mean field `z`, a
//! distribution over joint types `X^N`. All agents commonly observe `z` and
//! act through a prescription `gamma: X -> P(A)` chosen as a function of it.
//! The crate provides
//!
//! - [`model`]: model validation, the joint kernel and the reward;
//! - [`meanfield`]: the forward map `z' = phi(z, gamma)` and a simplex grid
//!   with piecewise-linear interpolation for tabulating functions of `z`;
//! - [`team`]: backward dynamic programming for team-optimal prescriptions;
//! - [`mfe`]: per-stage fixed points producing mean-field equilibria;
//! - [`verify`]: independent certificates (consistency, deviation gains,
//!   brute-force team values, an `N = 1` reference solver);
//! - [`simulate`]: Monte-Carlo populations of independent `N`-blocks;
//! - [`report`]: serializable solver reports and plot data.

pub mod error;
pub mod meanfield;
pub mod mfe;
pub mod model;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod team;
pub mod verify;

pub use error::{Error, Location, Result};
pub use meanfield::{phi_update, PrescriptionSource, SimplexGrid, Trajectory};
pub use model::{validate_model, Horizon, MeanField, ModelSpec, OthersLaw, Prescription, ValidatedModel};
