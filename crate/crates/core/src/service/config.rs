use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const ENV_PORT: &str = "ECOGRADE_PORT";
pub const ENV_DATA_DIR: &str = "ECOGRADE_DATA_DIR";

/// Service settings. Precedence, lowest first: defaults, config file,
/// environment, command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Store directory.
    pub data_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
        }
    }
}

impl ServiceConfig {
    /// Parse TOML. Relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, Error> {
        let mut c: ServiceConfig = toml::from_str(text).map_err(|e| Error::Config(format!("service config: {e}")))?;
        if let Some(base) = base_dir {
            if c.data_dir.is_relative() {
                c.data_dir = base.join(&c.data_dir);
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path.parent())
    }

    /// Apply `ECOGRADE_PORT` / `ECOGRADE_DATA_DIR` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), Error> {
        if let Some(p) = lookup(ENV_PORT) {
            self.port = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_PORT}={p:?} is not a port number")))?;
        }
        if let Some(d) = lookup(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(d);
        }
        Ok(())
    }
}
