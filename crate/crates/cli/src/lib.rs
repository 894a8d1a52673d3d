//! Batch harness for the spingarn solvers: JSON experiment configs, CSV
//! traces with documented columns, reports with bound audits, and the
//! builtin demonstrations.

pub mod config;
pub mod demo;
pub mod experiment;
pub mod reference;
pub mod report;
pub mod trace;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Outcome};
pub use report::{emit_bound_table, RunReport};
pub use trace::Trace;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "SPINGARN_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("solver failure: {0}")]
    Solver(#[from] spingarn::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for bad input, 3 for failures while running or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Trace(_) => 2,
            Self::Solver(_) | Self::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

/// Output directory: `$SPINGARN_OUT_DIR` when set, else the working directory.
pub fn out_dir() -> std::path::PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(Into::into).unwrap_or_else(|| ".".into())
}
