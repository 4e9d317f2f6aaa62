//! Optional `key = value` config file: values act as defaults for any
//! command flag of the same name, and explicit flags win.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config {}:{}: expected `key = value`, got {trimmed:?}",
                    path.display(),
                    idx + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    /// Typed lookup; parse failures are usage errors.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key} has unparseable value {raw:?}"))
            }),
        }
    }
}

/// Flag value, falling back to the config, then to a default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &Config,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(flag.or(config.get(key)?).unwrap_or(default))
}

/// Flag value, falling back to the config; missing is a usage error.
pub fn resolve_required<T: FromStr>(
    flag: Option<T>,
    config: &Config,
    key: &str,
) -> Result<T, CliError> {
    flag.or(config.get(key)?)
        .ok_or_else(|| CliError::Usage(format!("missing required --{key} (flag or config entry)")))
}
