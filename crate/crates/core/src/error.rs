use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid tree window: {0}")]
    InvalidWindow(String),

    #[error("vertex count overflows u64")]
    Overflow,

    /// A request exceeded a configured cost guard.
    #[error("cost guard `{guard}` exceeded: requested {requested}, limit {limit}")]
    CostGuard {
        guard: &'static str,
        requested: u64,
        limit: u64,
    },

    /// A grid function left the admissible domain of the integral transform.
    #[error("grid function outside the transform domain at index {index}: {reason}")]
    Domain { index: usize, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("invalid coupling schedule: {0}")]
    Schedule(String),

    #[error("malformed grid file: {0}")]
    Parse(String),
}
