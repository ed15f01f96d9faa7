//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Parsed configuration. Relative paths resolve against the directory of the
/// config file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped, repeated keys are an error.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: repeated key {k}", n + 1)));
            }
        }
        Ok(RunConfig {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key {key}")))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("bad value {v:?} for {key}")))
            })
            .transpose()
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key {key}")))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// An existing file named by `key`.
    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let p = self.base_dir.join(self.require(key)?);
        if !p.is_file() {
            return Err(CliError::Config(format!("{key}: no such file {}", p.display())));
        }
        Ok(p)
    }

    /// The run seed, from `mcmc.seed` or `seed`.
    pub fn seed(&self) -> Result<u64> {
        match (self.parsed("mcmc.seed")?, self.parsed("seed")?) {
            (Some(s), _) | (None, Some(s)) => Ok(s),
            (None, None) => Err(CliError::Config("a seed is required (mcmc.seed or --seed)".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# run\npopulation_size = 120\n\ngp.omega=5 # variance\nmcmc.seed = 3\n";
        let mut c = RunConfig::parse(text, ".").unwrap();
        assert_eq!(c.required::<usize>("population_size").unwrap(), 120);
        assert_eq!(c.or("gp.omega", 1.0).unwrap(), 5.0);
        assert_eq!(c.or("gp.length_scale", 14.0).unwrap(), 14.0);
        c.set_override("gp.omega=8").unwrap();
        assert_eq!(c.required::<f64>("gp.omega").unwrap(), 8.0);
        assert_eq!(c.seed().unwrap(), 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("a = 1\na = 2", ".").is_err());
        assert!(RunConfig::parse("no equals sign", ".").is_err());
        let c = RunConfig::parse("x = abc", ".").unwrap();
        assert!(matches!(c.required::<f64>("x"), Err(CliError::Config(_))));
        assert!(c.seed().is_err());
        assert!(c.path("x").is_err());
    }
}
