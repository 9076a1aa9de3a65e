//! Experiment orchestration for the `mfl` command-line tool: config loading,
//! the `run`, `anneal-compare`, `oracle`, `fixed-point` and `diag`
//! subcommands, and their on-disk artifacts.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Command, Outcome};
pub use config::{load_config, parse_config, ExperimentConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_DIAGNOSTIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("seed {seed} (index {index}): {source}")]
    Seed {
        index: usize,
        seed: u64,
        #[source]
        source: mfl_core::Error,
    },

    #[error(transparent)]
    Core(#[from] mfl_core::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 2 config, 3 diverged run, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Seed {
                source: mfl_core::Error::Diverged { .. },
                ..
            }
            | CliError::Core(mfl_core::Error::Diverged { .. }) => EXIT_DIVERGED,
            _ => 1,
        }
    }
}
