//! `key = value` settings files.
//!
//! Keys are the long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored. A flag given on the command line
//! always wins over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "m",
    "stride",
    "p",
    "s",
    "k",
    "n",
    "metric",
    "q",
    "r-low",
    "r-high",
    "seed",
    "jobs",
    "baseline-cmd",
    "samples-per-file",
    "tokenizer",
    "reps",
    "warmup",
    "queries",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    origin: String,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        ConfigFile::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<ConfigFile> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key = value", idx + 1))?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{origin}:{}: unknown key {key:?}", idx + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile {
            values,
            origin: origin.to_string(),
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| anyhow!("{}: bad value {raw:?} for {key}: {e}", self.origin))
            })
            .transpose()
    }

    /// Flag value, else file value, else `default`.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Flag value, else file value, else nothing.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}
