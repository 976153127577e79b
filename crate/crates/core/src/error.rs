use thiserror::Error;

/// Errors produced by the numerical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cutoff {cutoff} too small for |alpha| = {alpha}: discarded tail {tail:e} exceeds {tol:e}")]
    Truncation {
        alpha: f64,
        cutoff: usize,
        tail: f64,
        tol: f64,
    },
    #[error("loss unraveling tail {tail:e} exceeds tolerance {tol:e} at k_max = {k_max}")]
    LossTail { tail: f64, tol: f64, k_max: usize },
    #[error("invalid value for {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("states are parallel; unambiguous discrimination impossible")]
    Indistinguishable,
    #[error("{0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no surviving node on the {0} side")]
    NoSurvivor(&'static str),
    #[error("no sign change of the objective difference in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("empty feasible set: {0}")]
    EmptyFeasibleSet(String),
    #[error("unknown parameter axis `{0}`")]
    UnknownAxis(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::InvalidParameter {
            name,
            value: p,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must be positive and finite",
        })
    }
}
