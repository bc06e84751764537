use thiserror::Error;

/// Errors raised by the planner, its oracles and its file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gimbal lock: pitch {pitch} rad is within 1e-6 of ±π/2")]
    GimbalLock { pitch: f64 },

    #[error("singular leg configuration (|det J| = {det:e})")]
    SingularConfiguration { det: f64 },

    #[error("degenerate foot position: hip-to-foot distance {distance:e} m")]
    DegenerateFoot { distance: f64 },

    #[error("foot position unreachable: distance {distance} m outside [{min}, {max}]")]
    Unreachable { distance: f64, min: f64, max: f64 },

    #[error("knee branch flipped for leg {leg} at knot {knot}")]
    BranchFlip { leg: usize, knot: usize },

    #[error("infeasible contact schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("polytope precompute failed: {0}")]
    PolytopePrecompute(String),

    #[error("solver stopped after {iterations} iterations without converging")]
    MaxIterations { iterations: usize },

    #[error("line search failed at iteration {iteration}")]
    LineSearchFailure { iteration: usize },

    #[error("KKT factorization failed: {0}")]
    Factorization(String),

    #[error("schema error at row {row}, column {column}: {message}")]
    Schema { row: usize, column: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
