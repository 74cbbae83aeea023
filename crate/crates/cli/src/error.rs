//! Error classes, exit codes and the JSON error record.

use epgrav::backaction::BackactionError;
use epgrav::dynamics::DynamicsError;
use epgrav::gravity::GravityError;
use epgrav::harness::HarnessError;
use epgrav::spectra::SpectraError;
use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigError;
use crate::units::UnitError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Command-line syntax error reported by the argument parser.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Gravity(#[from] GravityError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Backaction(#[from] BackactionError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub class: &'static str,
    pub kind: String,
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self.class() {
            "config" => EXIT_CONFIG,
            "io" => EXIT_IO,
            _ => EXIT_NUMERIC,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Usage(_) => "config",
            CliError::Harness(HarnessError::Io(_) | HarnessError::Json(_))
            | CliError::Dynamics(DynamicsError::Io(_))
            | CliError::Io { .. }
            | CliError::Json(_) => "io",
            _ => "numeric",
        }
    }

    /// Variant name of the underlying error, e.g. `GridMiss`.
    pub fn kind(&self) -> String {
        let kind = match self {
            CliError::Config(e) => match e {
                ConfigError::Read { .. } => "Read",
                ConfigError::Parse { .. } => "ParseError",
                ConfigError::Unit(u) => match u {
                    UnitError::NotANumber { .. } => "ParseError",
                    _ => "UnitError",
                },
                ConfigError::Invariant { .. } => "InvariantViolation",
                ConfigError::Missing { .. } => "MissingField",
            },
            CliError::Usage(_) => "Usage",
            CliError::Harness(e) => match e {
                HarnessError::GridMiss { .. } => "GridMiss",
                HarnessError::InvalidInput { .. } => "InvalidInput",
                HarnessError::Invariant(_) => "Invariant",
                HarnessError::Spectra(_) => "Spectra",
                HarnessError::Gravity(_) => "Gravity",
                HarnessError::Io(_) => "Io",
                HarnessError::Json(_) => "Json",
            },
            CliError::Spectra(_) => "Spectra",
            CliError::Gravity(e) => match e {
                GravityError::NoBracket { .. } => "NoBracket",
                GravityError::NonMonotone { .. } => "NonMonotone",
                _ => "Gravity",
            },
            CliError::Dynamics(e) => match e {
                DynamicsError::Blowup { .. } => "Blowup",
                DynamicsError::StiffnessFailure { .. } => "StiffnessFailure",
                DynamicsError::StepLimit { .. } => "StepLimit",
                DynamicsError::Io(_) => "Io",
                _ => "Dynamics",
            },
            CliError::Backaction(_) => "Backaction",
            CliError::Io { .. } => "Io",
            CliError::Json(_) => "Json",
        };
        kind.to_string()
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            class: self.class(),
            kind: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }

    /// One-line JSON object `{"error": {...}}` for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.record() }).to_string()
    }
}
