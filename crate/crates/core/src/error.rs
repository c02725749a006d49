use thiserror::Error;

/// Errors raised by the solver, the samplers and the strategy engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported simplex dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("grid resolution {0} is too small")]
    ResolutionTooSmall(usize),
    #[error("invalid simplex point {coords:?}: {reason}")]
    InvalidPoint {
        coords: Vec<f64>,
        reason: &'static str,
    },
    #[error("point {0:?} lies outside the simplex")]
    PointOutsideSimplex(Vec<f64>),
    #[error("non-finite input value at node {0}")]
    NonFiniteInput(usize),
    #[error("value count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("second-difference stencil at node {node} leaves the simplex")]
    StencilOutOfSimplex { node: usize },
    #[error("node {0} has no admissible tangent direction inside the simplex")]
    BoundaryNode(usize),
    #[error("dual box half-width must be positive, got {0}")]
    InvalidDualBox(f64),
    #[error("unknown builtin game `{0}`")]
    UnknownGame(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("operation requires a payoff-based game")]
    NotPayoffBased,
    #[error("Isaacs scan is not applicable to a direct-Hamiltonian game")]
    NotApplicable,
    #[error("game provides no saddle control u*(t,p)")]
    MissingSaddle,
    #[error("time grid: {0}")]
    InvalidTimeGrid(String),
    #[error("horizon mismatch: game T={game}, time grid T={grid}")]
    HorizonMismatch { game: f64, grid: f64 },
    #[error("closed form unavailable for `{fixture}` at t={t}")]
    OutsideClosedFormDomain { fixture: String, t: f64 },
    #[error("no closed form for `{0}`")]
    NoClosedForm(String),
    #[error("time index {k} out of range (n = {n})")]
    TimeIndexOutOfRange { k: usize, n: usize },
    #[error("kernel has no transition rows")]
    EmptyKernel,
    #[error("value table carries no splitting rules")]
    MissingSplits,
    #[error("mixing weight must lie in [0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("state index {index} out of range for dimension {dim}")]
    InvalidState { index: usize, dim: usize },
    #[error("invalid band: lower curve exceeds upper curve at t={0}")]
    InvalidBand(f64),
    #[error("structure-equation residual requires the Azema fixture: {0}")]
    WrongFixture(String),
    #[error("sample count must be positive")]
    EmptySample,
    #[error("internal geometry failure: {0}")]
    Geometry(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
