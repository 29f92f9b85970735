use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: density has {expected} dimension(s), got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error {error} after {evaluations} evaluations")]
    QuadratureNotConverged {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("integrand is not finite at theta = {theta}")]
    NonFiniteIntegrand { theta: f64 },

    #[error("functional diverges: {0}")]
    Divergent(String),

    #[error("inadmissible parameter: {0}")]
    InadmissibleParameter(String),

    #[error("inadmissible proposal: q(theta) = 0 at theta = {theta:?}")]
    InadmissibleProposal { theta: Vec<f64> },

    #[error("degenerate population: effective sample size {ess:.3} is below {required}")]
    DegeneratePopulation { ess: f64, required: f64 },

    #[error("stalled at epsilon = {epsilon}{}: no acceptances in {proposals} proposals", iteration.map(|i| format!(" (iteration {i})")).unwrap_or_default())]
    Stall {
        epsilon: f64,
        proposals: usize,
        iteration: Option<usize>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit status used by the CLI: 2 for caller mistakes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::DimensionMismatch { .. } | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
