//! Batch front end for `qdist-core`: configuration files, result tables and
//! the `encode`, `count`, `train` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub use commands::{run_command, AppError, CommandOutput};
pub use config::{CommandKind, ConfigError, ExperimentConfig};

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs `kind` and writes its tables plus `record.txt` into `out`.
pub fn execute(kind: CommandKind, cfg: &ExperimentConfig, out: &Path) -> Result<CommandOutput, AppError> {
    if let Some(declared) = cfg.command {
        if declared != kind {
            return Err(ConfigError::new(format!(
                "config declares command '{}' but '{}' was requested",
                declared.name(),
                kind.name()
            ))
            .into());
        }
    }
    let started = unix_now();
    let mut output = run_command(kind, cfg, out)?;
    let record = output::record_text(cfg, &output.files, started, unix_now());
    let path = out.join("record.txt");
    output::write_atomic(&path, record.as_bytes())?;
    output.files.push(path);
    Ok(output)
}
