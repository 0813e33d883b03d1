use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate spectral range (ΔE = {0})")]
    DegenerateSpectrum(f64),

    #[error("Chebychev series not converged within {n_terms} terms (last |a_n| = {last:e})")]
    Truncation { n_terms: usize, last: f64 },

    #[error("grid kind not supported by this operation: {0}")]
    UnsupportedGrid(&'static str),

    #[error("derivative order {0} not supported")]
    UnsupportedOrder(usize),

    #[error("operation requires a dense Hamiltonian")]
    RequiresDense,

    #[error("query time {t} outside [0, {total}]")]
    OutOfRange { t: f64, total: f64 },

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("quadrature did not converge after {0} doublings")]
    Quadrature(usize),

    #[error("propagation failed at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. }
                | Error::DegenerateSpectrum(_)
                | Error::Eigen
                | Error::Quadrature(_)
                | Error::Step { .. }
        )
    }
}
