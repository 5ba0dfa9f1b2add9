use alloc::string::String;

/// Errors raised by the discretization, problem setup and iterative solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid refinement: n must be at least 1, got {0}")]
    InvalidRefinement(usize),
    #[error("mesh corruption: cell {cell} has non-positive area (det = {det:e})")]
    DegenerateCell { cell: usize, det: f64 },
    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange { what: &'static str, index: usize, len: usize },
    #[error("unsupported quadrature degree {requested} (supported up to {max})")]
    UnsupportedQuadrature { requested: usize, max: usize },
    #[error("unsupported polynomial degree {requested} (supported up to {max})")]
    UnsupportedDegree { requested: usize, max: usize },
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh sizes must halve h between rows, got n = {coarse} followed by n = {fine}")]
    NonHalvingSequence { coarse: usize, fine: usize },
    #[error("need at least two rows to compute rates")]
    TooFewRows,
    #[error("solver failure: {message}")]
    SolverFailure { message: String, residual_history: alloc::vec::Vec<f64> },
}

pub type Result<T> = core::result::Result<T, Error>;
