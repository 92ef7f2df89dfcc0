//! Flat `key = value` configuration files for experiments.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;

/// Applies each `key = value` line of `text` to `config`. Blank lines and
/// lines starting with `#` are skipped.
pub fn apply_config_text(config: &mut ExperimentConfig, text: &str) -> Result<()> {
    for (number, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", number + 1)))?;
        config
            .set(key.trim(), value.trim())
            .map_err(|e| Error::Config(format!("line {}: {e}", number + 1)))?;
    }
    Ok(())
}

pub fn apply_config_file(config: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    apply_config_text(config, &text)
}
