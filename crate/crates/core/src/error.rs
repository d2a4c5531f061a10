use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expression `{text}`: {source}")]
    Parse { text: String, source: ParseError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("integrator step underflow at t = {t} (step {h:e}) while integrating over [{from}, {to}]")]
    StepUnderflow { t: f64, h: f64, from: f64, to: f64 },
    #[error("integrator exceeded {steps} steps at t = {t} while integrating over [{from}, {to}]")]
    TooManySteps { steps: usize, t: f64, from: f64, to: f64 },
    #[error("time {t} outside domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("system `{system}` has no {matrix} matrix")]
    MissingMatrix { system: String, matrix: &'static str },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("hypothesis `{name}` violated (margin {margin:e})")]
    Hypothesis { name: String, margin: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::Invalid(msg.into())
    }
}
