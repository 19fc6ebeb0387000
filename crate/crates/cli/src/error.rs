use partgrasp_core::eval::EvalError;
use partgrasp_core::io::IoError;
use partgrasp_core::pipeline::{ConfigError, PipelineError};
use partgrasp_core::registry::RegistryError;
use partgrasp_core::sim::SimError;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const PIPELINE: u8 = 2;
pub const IO: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("error: {0}")]
    Usage(String),
    /// Printed as the attribution line.
    #[error("FAIL stage={}: {}", .0.stage(), .0.attribution().detail)]
    Pipeline(PipelineError),
    #[error("error: {0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => USAGE,
            CliError::Pipeline(_) => PIPELINE,
            CliError::Io(_) => IO,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(io) => io.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Sim(s) => s.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}
