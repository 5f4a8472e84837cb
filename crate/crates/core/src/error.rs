use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("inconsistent extremal coefficients: {0}")]
    InconsistentInput(String),

    #[error("tail index must be positive (got {0})")]
    InvalidXi(f64),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension {d} exceeds the configured cap of {cap}")]
    DimensionTooLarge { d: usize, cap: usize },

    #[error("constraints admit no spectral measure; run the consistency check or calibrate first")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),

    #[error("no exceedances of the reference asset above the threshold")]
    NoExceedances,

    #[error("degenerate sample: all values are equal")]
    DegenerateSample,

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("quantile level {q} lies below the fitted threshold level {threshold}")]
    QuantileBelowThreshold { q: f64, threshold: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidXi(xi))
    }
}

/// Balanced-portfolio results require `0 < xi <= 1`.
pub(crate) fn check_xi_unit(xi: f64) -> Result<()> {
    check_xi(xi)?;
    if xi > 1.0 {
        return Err(Error::OutOfRange {
            what: "xi",
            value: xi,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}
