use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: |phi| = {phi} is at or beyond pi/2")]
    Domain { phi: f64 },

    #[error("trajectory became singular (phi at the sec(phi) guard band or unbounded slope) at eta = {eta}")]
    SingularTrajectory { eta: f64 },

    #[error("adaptive integrator could not meet tolerance at {at}")]
    StepFailure { at: f64 },

    #[error("requested terminal point {requested} but only {found} found before eta_max")]
    InsufficientCrossings { requested: usize, found: usize },

    #[error("no convergence for phidot_i = {phidot_i} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        phidot_i: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("singular Jacobian for phidot_i = {phidot_i}")]
    SingularJacobian { phidot_i: f64 },

    #[error("sweep failed at phidot_i = {phidot_i}: {source}")]
    Sweep {
        phidot_i: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the nonlinear solve itself, as opposed to bad
    /// input or I/O.
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::SingularJacobian { .. }
            | Error::InsufficientCrossings { .. }
            | Error::SingularTrajectory { .. }
            | Error::StepFailure { .. } => true,
            Error::Sweep { source, .. } => source.is_convergence_failure(),
            _ => false,
        }
    }
}
