use qbdc_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("inconsistent result: {0}")]
    Conflict(String),
}

impl AppError {
    /// 2 config, 3 numerical budget, 4 no invariant state, 5 conflict.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Conflict(_) => 5,
            AppError::Io(_) | AppError::Csv(_) => 1,
            AppError::Core(e) => match e {
                CoreError::QuadratureBudget { .. }
                | CoreError::NonConvergence { .. }
                | CoreError::Singular(_)
                | CoreError::NotPositive(_) => 3,
                CoreError::NoInvariantState { .. } => 4,
                _ => 2,
            },
        }
    }
}
