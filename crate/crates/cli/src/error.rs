use pvwind::econ::EconError;
use pvwind::sim::SimError;
use pvwind::tuning::TuneError;
use pvwind::weather::WeatherError;
use std::path::Path;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Fault(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Config(_) => 2,
            Self::Fault(_) => 3,
            Self::Io(_) => 4,
        })
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io(format!("I/O error on {}: {e}", path.display()))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Fault { .. } => Self::Fault(e.to_string()),
            SimError::Io { .. } => Self::Io(e.to_string()),
            SimError::Weather(w) => w.into(),
            SimError::Config(_) | SimError::Alignment(_) | SimError::Format(_) => Self::Config(e.to_string()),
        }
    }
}

impl From<WeatherError> for CliError {
    fn from(e: WeatherError) -> Self {
        match &e {
            WeatherError::Io { .. } => Self::Io(e.to_string()),
            WeatherError::Csv(c) if c.is_io_error() => Self::Io(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        Self::Config(e.to_string())
    }
}
