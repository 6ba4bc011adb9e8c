//! Flat `key=value` configuration files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Keys understood by at least one subcommand.
pub const KNOWN_KEYS: &[&str] = &[
    "prices",
    "factor",
    "factors",
    "managers",
    "seed",
    "resample",
    "min_history",
    "min_price",
    "span",
    "start",
    "end",
    "output_dir",
    "threads",
    "instances",
    "max_assets",
    "max_periods",
    "assets",
    "days",
    "model",
    "output",
    "inject_beta",
];

/// Prefix of keys that describe a run rather than configure one. They are
/// written to manifests and skipped on load.
pub const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key=value, got '{line}'", i + 1)));
            };
            let key = key.trim();
            if key.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}' (known: {})",
                    i + 1,
                    KNOWN_KEYS.join(", ")
                )));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        // an empty value means "unset", which lets manifests record absent options
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parsed<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("config key {key}: {e}"))))
            .transpose()
    }

    /// The flag if given, else the config value, else `None`.
    pub fn opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parsed(key),
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn required<T>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.opt(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("--{} is required (flag or config key {key})", key.replace('_', "-"))))
    }
}

/// Writes `key=value` lines in the given order.
pub fn render(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}
