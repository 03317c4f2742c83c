use cpte_core::CpteError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, CSV header or cell.
    #[error("{0}")]
    Schema(String),
    /// Data that cannot support the request, e.g. an empty arm.
    #[error("{0}")]
    Degenerate(String),
    #[error("estimator failure: {0}")]
    Estimator(String),
    #[error("policy search failure: {0}")]
    Policy(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Where in the pipeline a core error surfaced.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Data,
    Estimation,
    Policy,
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Schema(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Estimator(_) => 4,
            CliError::Policy(_) => 5,
        }
    }

    pub fn from_core(e: CpteError, stage: Stage) -> Self {
        match e {
            CpteError::EmptyArm { .. } | CpteError::EmptyFold { .. } | CpteError::DegenerateAssignment { .. } => {
                CliError::Degenerate(e.to_string())
            }
            CpteError::DegenerateScores => CliError::Policy(e.to_string()),
            _ => match stage {
                Stage::Data => CliError::Schema(e.to_string()),
                Stage::Estimation => CliError::Estimator(e.to_string()),
                Stage::Policy => CliError::Policy(e.to_string()),
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Schema(format!("csv: {e}"))
    }
}
