use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain parameter: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative defect {defect:.3e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("conjugate gradient stopped after {iterations} iterations with relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rank-one mode is zero")]
    ZeroMode,

    #[error("residual vanishes identically")]
    ZeroResidual,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dense reference limited to {limit} unknowns, got {unknowns}")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("greedy step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
