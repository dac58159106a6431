use thiserror::Error;

/// Where in a backward solve a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    /// 1-based stage, or the outer iteration count for stationary solves.
    pub stage: usize,
    pub node: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {} node {}", self.stage, self.node)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel tensor {tensor} is not symmetric under slot permutation {perm:?}: Q[{next}][{joint_x}][{joint_a}] = {lhs} but permuted entry = {rhs}")]
    AsymmetricKernel {
        tensor: usize,
        perm: Vec<usize>,
        next: usize,
        joint_x: usize,
        joint_a: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("kernel tensor {tensor} is not stochastic at (joint_x={joint_x}, joint_a={joint_a}): {reason}")]
    NonStochasticKernel {
        tensor: usize,
        joint_x: usize,
        joint_a: usize,
        reason: String,
    },

    #[error("kernel weights are invalid: {0}")]
    BadWeights(String),

    #[error("invalid distribution: {0}")]
    BadSimplex(String),

    #[error("invalid discount {discount}: {reason}")]
    BadDiscount { discount: f64, reason: &'static str },

    #[error("malformed model: {0}")]
    BadShape(String),

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("simplex grid with {nodes} nodes exceeds the cap of {cap}")]
    GridTooLarge { nodes: u128, cap: usize },

    #[error("horizon mismatch: expected {expected}, got {got}")]
    HorizonMismatch { expected: usize, got: usize },

    #[error("no per-stage fixed point found at {location}; best residual {residual:.3e}")]
    NoFixedPointFound { location: Location, residual: f64 },

    #[error("value iteration did not converge after {iterations} iterations; residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("brute-force oracle too large: {candidates} candidates exceed cap {cap}")]
    OracleTooLarge { candidates: u128, cap: u128 },

    #[error("operation requires a model with correlation order 1, got {0}")]
    RequiresN1(usize),

    #[error("operation requires a {0} horizon")]
    WrongHorizon(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

/// A solver result that keeps whatever was computed before a failure, so
/// callers can still write a diagnostic report.
#[derive(Debug)]
pub struct Partial<T> {
    pub solution: T,
    pub failure: Option<Error>,
}

impl<T> Partial<T> {
    pub fn into_result(self) -> Result<T> {
        match self.failure {
            None => Ok(self.solution),
            Some(e) => Err(e),
        }
    }
}
