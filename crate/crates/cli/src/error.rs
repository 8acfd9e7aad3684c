use thiserror::Error;
use tte_estimand::data::Violation;
use tte_estimand::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("validation failed:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid data: {0}")]
    Data(CoreError),

    #[error(transparent)]
    Core(CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Validation(_) | CliError::Data(_) => 3,
            _ => 1,
        }
    }

    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Validation(v) => CliError::Validation(v),
            e @ (CoreError::Parse { .. }
            | CoreError::UnknownColumn(_)
            | CoreError::InvalidDataset(_)
            | CoreError::ConventionConflict { .. }) => CliError::Data(e),
            e => CliError::Core(e),
        }
    }
}
