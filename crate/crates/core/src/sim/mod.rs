//! Time stepping, scenario runners, outputs and coverage analysis.

pub mod coverage;
pub mod integrate;
pub mod output;
pub mod run;
pub mod scenario;

pub use coverage::{coverage_analysis, CoverageReport, CoverageRow, CoverageSummary};
pub use output::{Channel, OutputFormat, SimOutput};
pub use run::{annual_energy, monthly_energy, run_dynamic, run_quasi_static, run_quasi_static_from, run_quasi_static_with};
pub use scenario::{DynamicConfig, Mode, PlantConfig, Profile, Scenario, SimClock, WeatherSource};

use crate::weather::WeatherError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation fault at t = {t} s: {reason}")]
    Fault { t: f64, reason: String },
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("series misaligned: {0}")]
    Alignment(String),
    #[error("malformed output: {0}")]
    Format(String),
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(source) => Self::io("<csv>", source),
                _ => unreachable!("checked is_io_error"),
            }
        } else {
            Self::Format(e.to_string())
        }
    }
}

impl SimError {
    pub fn io(path: impl std::fmt::Display, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_string(),
            source,
        }
    }

    pub fn fault(t: f64, reason: impl std::fmt::Display) -> Self {
        Self::Fault {
            t,
            reason: reason.to_string(),
        }
    }

    /// Attaches a file path to writer-level I/O errors.
    pub fn with_path(self, path: &std::path::Path) -> Self {
        match self {
            Self::Io { source, .. } => Self::io(path.display(), source),
            other => other,
        }
    }
}
