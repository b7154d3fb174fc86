//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by the library. Validation errors describe bad input;
/// numerical errors describe a computation that could not be completed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: String,
        got: String,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("singular factorization{}: {detail}", freq_suffix(*.freq))]
    Singular { freq: Option<usize>, detail: String },
    #[error("matrix exponential out of range: norm {norm:.3e} exceeds {limit:.1e}")]
    ExpmRange { norm: f64, limit: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("covariance is not positive semidefinite: most negative eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("container format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn freq_suffix(freq: Option<usize>) -> String {
    match freq {
        Some(k) => format!(" at frequency index {k}"),
        None => String::new(),
    }
}

impl Error {
    pub fn dim(context: &str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context: context.to_string(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Wrap an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Dimension { .. }
            | Error::Invalid(_)
            | Error::SizeGuard(_)
            | Error::Format(_)
            | Error::Config(_)
            | Error::Io(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach a stage tag to the error of a result.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
