//! Plain-text `key=value` configuration files.
//!
//! Keys use the long option names (`codebook-size=128`). Values from the
//! file act as defaults; flags given on the command line win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

#[derive(Debug, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), i + 1))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("config key {key}={raw}: {e}")),
        }
    }

    /// Flag value if given, else config value, else the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Like `resolve`, for settings without a default.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
    }

    /// Boolean switches: true if the flag was passed or the config says so.
    pub fn resolve_switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\ncodebook-size=128\nppk=true\ntau = 4\n").unwrap();
        let cfg = ConfigMap::load(Some(&path)).unwrap();
        assert_eq!(cfg.resolve(None, "codebook-size", 64usize).unwrap(), 128);
        assert_eq!(cfg.resolve(Some(32usize), "codebook-size", 64).unwrap(), 32);
        assert_eq!(cfg.resolve(None, "tau", 1usize).unwrap(), 4);
        assert!(cfg.resolve_switch(false, "ppk").unwrap());
        assert!(!cfg.resolve_switch(false, "pca").unwrap());
    }

    #[test]
    fn rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "not a pair\n").unwrap();
        assert!(ConfigMap::load(Some(&path)).is_err());
    }

    #[test]
    fn missing_file_is_an_error_but_none_is_fine() {
        assert!(ConfigMap::load(Some(Path::new("/nonexistent.conf"))).is_err());
        assert!(ConfigMap::load(None).is_ok());
    }
}
