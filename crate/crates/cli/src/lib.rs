//! Configuration-driven front end: reads a run configuration, dispatches to
//! the solver pipeline and writes `run_report.json`, field and history CSVs.

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::run;
pub use config::{Command, RunConfig};
pub use report::{RunReport, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
/// Output could not be written.
pub const EXIT_OUTPUT: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] nodal_core::Error),

    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nodal_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Output { .. } => EXIT_OUTPUT,
            CliError::Core(e) => match e {
                E::Config(_)
                | E::Parse(_)
                | E::Io(_)
                | E::GridMismatch { .. }
                | E::Precondition(_)
                | E::Degenerate(_) => EXIT_CONFIG,
                E::Hypothesis { .. } => EXIT_HYPOTHESIS,
                E::NotConverged { .. } | E::SpectralDeficiency(_) | E::Internal(_) => EXIT_SOLVER,
            },
        }
    }

    pub(crate) fn output(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}
