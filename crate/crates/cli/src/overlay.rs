//! Config-file overlay: defaults < config file < command-line flags.
//!
//! The config file is a flat JSON object whose keys are the snake_case
//! field names of the command's effective configuration. Because every
//! run writes its effective configuration in exactly that shape, a
//! previous run's snapshot can be fed back via `--config` to reproduce it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::CliError;

pub struct Overlay {
    source: Option<(PathBuf, serde_json::Map<String, serde_json::Value>)>,
}

impl Overlay {
    pub fn load(path: Option<&Path>) -> Result<Overlay, CliError> {
        let Some(path) = path else {
            return Ok(Overlay { source: None });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?;
        match value {
            serde_json::Value::Object(map) => Ok(Overlay {
                source: Some((path.to_path_buf(), map)),
            }),
            _ => Err(CliError::Config(format!(
                "config {} must be a JSON object",
                path.display()
            ))),
        }
    }

    fn lookup<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        let Some((path, map)) = &self.source else {
            return Ok(None);
        };
        match map.get(key) {
            None => Ok(None),
            Some(value) => serde_json::from_value(value.clone()).map(Some).map_err(|e| {
                CliError::Config(format!(
                    "config {}: key `{key}`: {e}",
                    path.display()
                ))
            }),
        }
    }

    /// Flag value if given, else config-file value, else the default.
    pub fn get<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.lookup(key)?.unwrap_or(default)),
        }
    }

    /// Flag value if given, else config-file value, else a config error.
    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self.lookup(key)?.ok_or_else(|| {
                CliError::Config(format!(
                    "missing required value `{key}` (flag or config file)"
                ))
            }),
        }
    }

    /// Boolean switch: a set flag wins; otherwise the config file decides.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        Ok(self.lookup(key)?.unwrap_or(false))
    }
}

/// Writes the effective configuration snapshot next to an output. For a
/// file output this is `<output>.config.json`; directory outputs use
/// `<dir>/effective-config.json`.
pub fn write_effective_config<T: serde::Serialize>(
    target: EffectiveConfigTarget<'_>,
    command: &str,
    config: &T,
) -> Result<PathBuf, CliError> {
    let path = match target {
        EffectiveConfigTarget::File(output) => {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".config.json");
            output.with_file_name(name)
        }
        EffectiveConfigTarget::Dir(dir) => dir.join("effective-config.json"),
    };
    let mut value = serde_json::to_value(config)
        .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert(
            "command".to_string(),
            serde_json::Value::String(command.to_string()),
        );
    }
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub enum EffectiveConfigTarget<'a> {
    File(&'a Path),
    Dir(&'a Path),
}
