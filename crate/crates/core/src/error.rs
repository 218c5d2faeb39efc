use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where the quantity is defined,
    /// e.g. evaluating curvature at the puncture itself.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A user-supplied evaluator returned a non-finite value.
    #[error("evaluation produced a non-finite value at {what}")]
    Evaluation { what: String },

    #[error("non-finite integrand at node (r = {r}, theta = {theta})")]
    NonFiniteIntegrand { r: f64, theta: f64 },

    #[error("quadrature did not converge: estimate {value:e} with error {err_est:e}")]
    Quadrature { value: f64, err_est: f64 },

    #[error("ill-conditioned input: {0}")]
    Conditioning(String),

    #[error("distance model rejected: {0}")]
    Model(String),

    #[error("rejection sampler acceptance rate {rate:e} is below {min:e}")]
    ProposalMismatch { rate: f64, min: f64 },

    #[error("truncation exponent {eta} outside the admissible range {range}")]
    TruncationExponent { eta: f64, range: &'static str },

    #[error("unsupported dimension {0}; only d = 2 geometries are registered")]
    UnsupportedDimension(usize),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Quadrature { .. }
            | Error::NonFiniteIntegrand { .. }
            | Error::Evaluation { .. }
            | Error::Conditioning(_)
            | Error::ProposalMismatch { .. } => 3,
            _ => 2,
        }
    }
}
