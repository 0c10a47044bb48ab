use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The modular never drops to 1 for any finite scale.
    #[error("Luxembourg norm is infinite")]
    NormInfinite,

    #[error("bracket exhausted while inverting: target {target} not reached below {limit}")]
    BracketExhausted { target: f64, limit: f64 },

    #[error("matrix at node {node} is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { node: usize, eigenvalue: f64 },

    #[error("stencil error at node {node}: mask too thin for a difference quotient")]
    Stencil { node: usize },

    /// Discrete bilinear form is not coercive; carries the smallest Ritz value seen.
    #[error("bilinear form is not coercive (smallest Ritz value {ritz:e})")]
    NonCoercive { ritz: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistency(String),

    /// Right-hand side of a Sobolev-type inequality vanishes while the left does not.
    #[error("inequality fails: lhs {lhs:e} with vanishing rhs")]
    InequalityFails { lhs: f64 },

    #[error("singular point at x = {x}")]
    SingularPoint { x: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
