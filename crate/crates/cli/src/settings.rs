//! Resolution of run settings: built-in defaults, then the seed environment
//! variable, then a flat `key=value` config file, then command-line flags.
//! The resolved map is what the manifest records and what a replay re-runs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub const SEED_ENV: &str = "WF_INTERTWINE_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
    /// Where the seed came from, when the command takes one.
    pub seed_source: Option<String>,
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        map.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(map)
}

impl Settings {
    /// Resolves settings for a command whose known keys and defaults are `defaults`.
    pub fn resolve(
        defaults: &[(&str, &str)],
        config: Option<&Path>,
        flags: Vec<(&str, Option<String>)>,
        uses_seed: bool,
    ) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, String> = defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut seed_source = None;
        if uses_seed {
            seed_source = Some("default".to_owned());
            map.insert("seed".into(), DEFAULT_SEED.to_string());
            if let Ok(v) = std::env::var(SEED_ENV) {
                map.insert("seed".into(), v);
                seed_source = Some(format!("env {SEED_ENV}"));
            }
        }
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config(&text)? {
                if !map.contains_key(&k) {
                    return Err(CliError::Usage(format!("unknown config key {k:?}")));
                }
                if k == "seed" {
                    seed_source = Some("config".into());
                }
                map.insert(k, v);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                if k == "seed" {
                    seed_source = Some("flag".into());
                }
                map.insert(k.to_owned(), v);
            }
        }
        Ok(Settings { map, seed_source })
    }

    /// Settings taken verbatim from a manifest.
    pub fn from_map(map: BTreeMap<String, String>) -> Self {
        let seed_source = map.contains_key("seed").then(|| "manifest".to_owned());
        Settings { map, seed_source }
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    pub fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.map.get(key).map(String::as_str).ok_or_else(|| CliError::Usage(format!("missing setting {key:?}")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| CliError::Usage(format!("setting {key}={raw:?}: {e}")))
    }

    /// An optional setting; the empty string means unset.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(key)? {
            "" => Ok(None),
            _ => self.get(key).map(Some),
        }
    }

    /// Comma-separated list; the empty string is the empty list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::Usage(format!("setting {key}: {s:?}: {e}"))))
            .collect()
    }
}
