//! Plain-text `key=value` configuration files. Flags win on conflict:
//! every option is parsed as `Option` from the command line, then filled
//! from the config map, then from its default.

use std::collections::HashMap;
use std::path::Path;

use ipwmed_core::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    values: HashMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<ConfigMap> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Invalid(format!(
                        "config line {}: expected key=value, got `{line}`",
                        lineno + 1
                    ))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigMap { values })
    }

    /// Flag value if present, else config value, else the default.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Invalid(format!("config key `{key}`: cannot parse `{raw}`"))),
            None => Ok(default),
        }
    }

    /// Flag value if present, else config value, else `None`.
    pub fn resolve_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Invalid(format!("config key `{key}`: cannot parse `{raw}`"))),
            None => Ok(None),
        }
    }
}
