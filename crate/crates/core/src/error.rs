use std::fmt;

use thiserror::Error;

/// Constraint families of the synthesis program, used to explain infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintFamily {
    StateSafety,
    InputSafety,
    FirClosure,
    Mask,
    Integral,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintFamily::StateSafety => "state-safety",
            ConstraintFamily::InputSafety => "input-safety",
            ConstraintFamily::FirClosure => "fir-closure",
            ConstraintFamily::Mask => "mask",
            ConstraintFamily::Integral => "integral",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{family} infeasible (largest violation {violation:.3e})")]
    Infeasible { family: ConstraintFamily, violation: f64 },

    #[error("solver hit the iteration limit after {iterations} iterations (primal {prim_res:.3e}, dual {dual_res:.3e})")]
    MaxIter { iterations: usize, prim_res: f64, dual_res: f64 },

    #[error("synthesized CLM failed validation: residual {0:.3e}")]
    Unvalidated(f64),

    #[error("mask violation: {0}")]
    Mask(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("problem too large for the oracle: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(msg()))
    }
}
