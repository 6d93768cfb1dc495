//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are matched
//! case-insensitively with `_` and `-` treated alike, so `tau_bar` and
//! `tau-bar` both name the `--tau-bar` flag.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("config line {}: expected `key = value`", lineno + 1));
            };
            let key = normalize(key);
            if key.is_empty() {
                return Err(format!("config line {}: empty key", lineno + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("config line {}: duplicate key `{key}`", lineno + 1));
            }
        }
        Ok(Self { values })
    }

    /// Fails on keys the current subcommand does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), String> {
        let unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(format!("unknown config keys: {}", unknown.join(", ")))
        }
    }

    /// The flag value if given, else the parsed file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| format!("config key `{key}`: {e}")),
        }
    }

    pub fn pick_vec(&self, flag: Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>, String> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|raw| parse_vector(raw).map_err(|e| format!("config key `{key}`: {e}")))
            .transpose()
    }

    pub fn pick_flag(&self, flag: bool, key: &str) -> Result<bool, String> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Reals separated by commas and/or whitespace.
pub fn parse_vector(raw: &str) -> Result<Vec<f64>, String> {
    let values: Result<Vec<f64>, _> = raw
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect();
    let values = values?;
    if values.is_empty() {
        return Err("empty vector".into());
    }
    Ok(values)
}
