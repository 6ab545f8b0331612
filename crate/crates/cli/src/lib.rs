//! Command-line front end: scenario files in, CSV trajectories and reports out.

pub mod commands;
pub mod config;
pub mod output;

use geofeas_core::GeoError;
use thiserror::Error;

pub use config::ScenarioConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const SINGULAR: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: String, message: String },

    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Geo(e) => match e {
                GeoError::AtStep { .. } => exit::SINGULAR,
                GeoError::Infeasible { .. }
                | GeoError::InfeasibleInitialState(_)
                | GeoError::SingularConstraint { .. } => exit::INFEASIBLE,
                _ => exit::INPUT,
            },
            _ => exit::INPUT,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
