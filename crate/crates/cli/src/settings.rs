//! Flat `key = value` config files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "GRNKAN_SEED";

/// Keys a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "workers",
    "epochs",
    "learning_rate",
    "clip_norm",
    "split_ratio",
    "gap_threshold",
    "gap_patience",
    "restore_best",
    "grid_size",
    "spline_order",
    "z_threshold",
    "cells",
    "t_max",
    "dt",
    "hill_n",
    "hill_k",
    "production",
    "degradation",
    "noise",
    "init_scale",
    "toy_noise",
    "eps",
    "min_points",
    "trees",
    "runs",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected key = value, got {raw:?}",
                    n + 1
                )));
            };
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag if given, else the file's value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| {
                CliError::Usage(format!("config value for {key} is not valid: {s:?}"))
            }),
        }
    }

    pub fn pick_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Seed precedence: flag, config file, `GRNKAN_SEED`, then 0.
    pub fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(s) = self.pick(flag, "seed")? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} is not an integer: {s:?}"))),
            Err(_) => Ok(0),
        }
    }
}
