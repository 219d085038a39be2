//! Configuration, command dispatch and file output for the `repcascade`
//! binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

pub use commands::{run_command, Command};
pub use config::{parse_config, Format, RunConfig};
pub use error::CliError;

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(out) = &overrides.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.sim.seed = seed;
    }
    if let Some(format) = overrides.format {
        cfg.output.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}
