use crate::types::ProfileEvaluation;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dataset is not the {expected} variant")]
    ModelMismatch { expected: &'static str },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("ICM did not converge after {iterations} iterations (residual {residual:.3e})")]
    IcmNotConverged {
        iterations: usize,
        residual: f64,
        best: Box<ProfileEvaluation>,
    },

    #[error("Newton solver did not converge after {iterations} iterations")]
    NewtonNotConverged {
        iterations: usize,
        best: Box<ProfileEvaluation>,
    },

    #[error("sieve constraint unsatisfiable: {0}")]
    SieveInfeasible(String),

    #[error("no finite evaluation inside the search bracket")]
    Bracketing,

    #[error("chain initialization: log target is not finite at the initial point")]
    BadInit,

    #[error("chain diagnostics need at least {min} samples, got {got}")]
    ChainTooShort { min: usize, got: usize },

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("information estimate failed at {point}: non-finite profile evaluation")]
    InfoEvaluation { point: String },

    #[error("nonpositive information diagonal entry {index}: {value}")]
    NonpositiveInformation { index: usize, value: f64 },

    #[error("stale MLE: chain log profile likelihood exceeds the supplied maximum by {excess:.3e}")]
    StaleMle { excess: f64 },

    #[error("profile likelihood ratio interval unbounded on the {side} side after {doublings} bracket doublings")]
    UnboundedInterval { side: &'static str, doublings: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
