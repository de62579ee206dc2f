//! Error type shared across the crate.

/// Errors produced by model validation, solvers, and serialization.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration or argument failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A training set with zero samples was requested or supplied.
    #[error("empty training set")]
    EmptyTrainingSet,

    /// Mismatched lengths between related inputs.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested operation is undefined for the given model.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A root search could not establish a sign change.
    #[error("no sign change bracketing {what} on [{lo:.6e}, {hi:.6e}]")]
    BracketFailure { what: &'static str, lo: f64, hi: f64 },

    /// The closed-form decision boundary has a vertical asymptote and the
    /// queried interference gain lies at or beyond it.
    #[error("decision boundary undefined: g0={g0:.6} at or beyond asymptote {asymptote:.6}")]
    AsymptoteExceeded { g0: f64, asymptote: f64 },

    /// Both dual variables are zero, so no finite water level exists.
    #[error("water level undefined: lambda and mu are both zero")]
    UndefinedWaterLevel,

    /// An iterative solve hit its iteration budget without meeting tolerance.
    #[error("{what}: no convergence within {iters} iterations")]
    NonConvergence { what: String, iters: usize },

    /// The approximate ladder ran out of usable levels before reaching the
    /// requested codebook size.
    #[error("codebook exhausted: built {built} of {requested} levels")]
    CodebookExhausted { built: usize, requested: usize },

    /// A relative loss was requested against a zero reference capacity.
    #[error("reference capacity is zero; relative loss undefined")]
    ZeroReference,

    /// Filesystem failure surfaced by the CLI paths.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
