use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const COST_GUARD: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const VERIFY_FAILED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] treedyn::Error),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use treedyn::Error as E;
        match self {
            Self::Io(_) => exit::IO,
            Self::Config(_) => exit::CONFIG,
            Self::VerifyFailed(_) => exit::VERIFY_FAILED,
            Self::Core(e) => match e {
                E::CostGuard { .. } | E::Overflow => exit::COST_GUARD,
                E::Numerical(_) | E::Divergence(_) | E::Domain { .. } => exit::NUMERICAL,
                E::InvalidArgument(_) | E::InvalidWindow(_) | E::Schedule(_) | E::Parse(_) => {
                    exit::CONFIG
                }
            },
        }
    }
}
