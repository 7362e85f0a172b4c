use thiserror::Error;

/// Errors surfaced by the solvers, builders and metrics.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (shape, symmetry, range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A user-facing parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value left the domain of the inner loss (e.g. log of a non-positive
    /// similarity under the KL loss).
    #[error("loss domain error: {0}")]
    Domain(String),

    /// An iterative routine hit its iteration cap before reaching tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The Sinkhorn scaling problem admits no solution (zero pattern).
    #[error("infeasible scaling problem: {0}")]
    Infeasible(String),

    /// A graph cannot be spectrally clustered (e.g. a zero-degree node).
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    /// The silhouette score is undefined: every prototype shares one label.
    #[error("undefined nearest cluster: all prototypes share a single label")]
    UndefinedNearestCluster,

    /// An invalid (loss, C_X, C_Z) combination or other configuration error.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
