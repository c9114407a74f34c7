//! Command-line front end for the boost converter laboratory.

pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod svg;

use std::path::Path;

use config::ExperimentConfig;
use error::CliError;

/// Reads a config file holding one experiment object or an array of them.
pub fn load_configs(path: &Path) -> Result<Vec<ExperimentConfig>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_configs(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let cfgs: Vec<ExperimentConfig> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?
    } else {
        vec![serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?]
    };
    if cfgs.is_empty() {
        return Err(CliError::Config("config holds no experiment".into()));
    }
    for c in &cfgs {
        c.resolve()?;
    }
    Ok(cfgs)
}

/// Inverse of [`parse_configs`]: a single object, or an array when there are several.
pub fn dump_configs(cfgs: &[ExperimentConfig]) -> String {
    let mut text = if cfgs.len() == 1 {
        serde_json::to_string_pretty(&cfgs[0])
    } else {
        serde_json::to_string_pretty(cfgs)
    }
    .expect("config serialises");
    text.push('\n');
    text
}
