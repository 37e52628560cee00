//! Flat `key = value` config files and the flag > file > default precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use fbmlab_core::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "d", "hurst", "T", "eps", "gamma", "seed", "threads", "format", "output", "n", "paths", "method", "batches",
    "g", "center", "path_index", "rel_tol", "max_cells", "softening", "boundary_margin", "ladder", "margin",
    "levels", "check", "samples",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", no + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("config line {}: unknown key '{key}'", no + 1)));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// The flag value if given, else the file value.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("config key '{key}' = '{v}': {e}"))))
            .transpose()
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let flag_name = key.replace('_', "-");
        self.get(flag, key)?.ok_or_else(|| Error::Config(format!("missing required option --{flag_name}")))
    }

    /// Comma-separated list; flags arrive already split.
    pub fn list(&self, flag: &[f64], key: &str) -> Result<Option<Vec<f64>>> {
        if !flag.is_empty() {
            return Ok(Some(flag.to_vec()));
        }
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Config(format!("config key '{key}' entry '{x}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        self.or(None, key, false)
    }
}

/// `FBMLAB_SEED` beats `--seed`, which beats the config file.
pub fn resolve_seed(env: Option<&str>, flag: Option<u64>, file: &ConfigFile, default: u64) -> Result<u64> {
    if let Some(v) = env {
        return v.trim().parse().map_err(|e| Error::Config(format!("FBMLAB_SEED = '{v}': {e}")));
    }
    file.or(flag, "seed", default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_hyphens() {
        let c = ConfigFile::parse("# run\nd = 2\nrel-tol=1e-5  # tight\n\n").unwrap();
        assert_eq!(c.require::<usize>(None, "d").unwrap(), 2);
        assert_eq!(c.or::<f64>(None, "rel_tol", 0.0).unwrap(), 1e-5);
    }

    #[test]
    fn flag_beats_file() {
        let c = ConfigFile::parse("hurst = 0.4").unwrap();
        assert_eq!(c.require(Some(0.3), "hurst").unwrap(), 0.3);
        assert_eq!(c.require::<f64>(None, "hurst").unwrap(), 0.4);
    }

    #[test]
    fn rejects_garbage() {
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("just words").is_err());
        let c = ConfigFile::parse("d = two").unwrap();
        assert!(c.require::<usize>(None, "d").unwrap_err().to_string().contains("'d'"));
        assert!(c.require::<f64>(None, "eps").unwrap_err().to_string().contains("--eps"));
    }

    #[test]
    fn lists() {
        let c = ConfigFile::parse("g = 0, 1,5").unwrap();
        assert_eq!(c.list(&[], "g").unwrap(), Some(vec![0.0, 1.0, 5.0]));
        assert_eq!(c.list(&[2.0], "g").unwrap(), Some(vec![2.0]));
    }

    #[test]
    fn seed_precedence() {
        let c = ConfigFile::parse("seed = 3").unwrap();
        assert_eq!(resolve_seed(Some("9"), Some(5), &c, 1).unwrap(), 9);
        assert_eq!(resolve_seed(None, Some(5), &c, 1).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, &c, 1).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, &ConfigFile::default(), 1).unwrap(), 1);
        assert!(resolve_seed(Some("x"), None, &c, 1).is_err());
    }
}
