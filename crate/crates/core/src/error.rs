use thiserror::Error;

/// Errors produced by the width toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (unknown vertex, bad file line, ...).
    #[error("input error: {0}")]
    Input(String),

    /// An argument lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested instance is too large for the chosen representation.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A numerical routine failed to converge or bracket its target.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The (p, q) pair is outside the regime handled by the operation.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// Exact operator norms are only available at a few (p, q) corners.
    #[error("unsupported corner (p={p}, q={q}): exact norms need p=q=2, p=1 or q=inf")]
    UnsupportedCorner { p: f64, q: f64 },

    /// Structural requirement on a tiling or partition failed.
    #[error("structure error: {0}")]
    Structure(String),

    /// Two points of a metric tree are not comparable in the tree order.
    #[error("order error: {0}")]
    Order(String),

    /// Parameters violate the standing inequalities of an exponent regime.
    #[error("regime error: {0}")]
    Regime(String),

    /// Decay fitting could not be carried out.
    #[error("fit error: {0}")]
    Fit(String),

    /// Too few grid cells to reach the requested precision.
    #[error("precision error: {0}")]
    Precision(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
