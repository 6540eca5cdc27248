use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] dpda::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for step-size violations, 4 for
    /// numerical failures; 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use dpda::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Solver(E::StepSize(_)) => 3,
            Self::Solver(
                E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::NoSlaterPoint(_) | E::EmptyInterior,
            ) => 2,
            Self::Solver(E::Numerical(_) | E::NonConvergence { .. } | E::InconsistentCertificate { .. }) | Self::Numerical(_) => 4,
            Self::Io { .. } | Self::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}
