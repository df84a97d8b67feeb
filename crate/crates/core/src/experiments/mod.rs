//! Length sweeps, tabular output and Monte Carlo validation runs.

mod output;
mod sweep;
mod validation;

pub use output::{read_csv, write_csv, write_json, OutputFormat, CSV_COLUMNS};
pub use sweep::{
    sweep_optimal_intensity, sweep_qber_curves, AttackSet, LengthRange, SweepRow, SweepSpec,
};
pub use validation::{run_montecarlo_validation, Check, CheckStatus, ValidationConfig, ValidationReport};

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved configuration, defaults included.
    pub config: serde_json::Value,
}

impl RunMetadata {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)
            .map_err(|e| Error::InvalidSpec(format!("unserializable configuration: {e}")))?;
        Ok(RunMetadata {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
        })
    }
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidSpec("worker count must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidSpec(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
