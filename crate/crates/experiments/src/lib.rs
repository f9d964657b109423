//! Experiment harness around `sirl-core`: configuration, seeded pipelines,
//! result tables and CSV heatmaps. The `sirl` binary is a thin wrapper.

use std::io;
use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod grid;
pub mod pipeline;
pub mod results;

pub use config::{Axis, ExperimentConfig, FeatureVariant, Method};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: sirl_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(sirl_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 configuration or input problem, 2 numerical failure, 3 a solver ran out of sweeps.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core { source, .. } => core_exit_code(source),
        }
    }
}

fn core_exit_code(e: &sirl_core::Error) -> i32 {
    use sirl_core::Error;
    match e {
        Error::Iteration { source, .. } => core_exit_code(source),
        Error::Divergence { .. } => 3,
        Error::Numerical { .. } | Error::DegenerateDensity { .. } => 2,
        _ => 1,
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Seed derivation from the master seed. Each consumer gets its own tag so
/// changing one stage never shifts the random stream of another.
pub mod seeds {
    use sirl_core::mix_seed;

    pub const WORLD: u64 = 0x01;
    pub const DEMOS: u64 = 0x02;
    pub const MCEM: u64 = 0x03;
    pub const MAXENT: u64 = 0x04;
    pub const RANDOM: u64 = 0x05;
    pub const ROBUSTNESS: u64 = 0x06;

    pub fn derive(master: u64, tag: u64) -> u64 {
        mix_seed(master, tag)
    }

    /// Seed for replication `r` of a stream.
    pub fn replica(seed: u64, r: usize) -> u64 {
        mix_seed(seed, 0x5245_5000 + r as u64)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(CliError::io(path))
}

pub(crate) fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

pub(crate) fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(CliError::io(path))
}
