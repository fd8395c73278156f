use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid penalty weights: {0}")]
    InvalidLambda(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("inconsistent block partition: {0}")]
    InconsistentPartition(String),

    #[error("semismooth Newton stagnated after {iters} iterations (gradient norm {grad_norm:.3e})")]
    Stagnation { iters: usize, grad_norm: f64 },

    #[error("numerical breakdown at outer iteration {iter}: {detail}")]
    Breakdown { iter: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
