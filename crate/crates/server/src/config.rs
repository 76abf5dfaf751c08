use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use kcat_core::linker::DEFAULT_K_MAX;
use serde::Deserialize;

/// Environment variable that replaces `data_dir` from the config file.
pub const DATA_DIR_ENV: &str = "KCAT_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key} = {} does not exist", path.display())]
    MissingPath { key: &'static str, path: PathBuf },
    #[error("k_max must be at least 1")]
    ZeroKMax,
}

/// Project settings, read from `kcat.toml`. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub kb_dir: PathBuf,
    pub corpus_file: PathBuf,
    #[serde(default)]
    pub predictions_file: Option<PathBuf>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_listen_addr")]
    pub listen_addr: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

fn default_listen_addr() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("kcat-data")
}

impl ProjectConfig {
    /// Reads and validates a config file, honouring [`DATA_DIR_ENV`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let config = Self::from_toml_str(&text, base)?
            .with_data_dir_override(std::env::var_os(DATA_DIR_ENV));
        config.validate()?;
        Ok(config)
    }

    /// Parses without touching the environment or checking paths.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: ProjectConfig = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.kb_dir);
        resolve(&mut config.corpus_file);
        if let Some(p) = config.predictions_file.as_mut() {
            resolve(p);
        }
        resolve(&mut config.data_dir);
        Ok(config)
    }

    pub fn with_data_dir_override(mut self, dir: Option<OsString>) -> Self {
        if let Some(dir) = dir.filter(|d| !d.is_empty()) {
            self.data_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_max == 0 {
            return Err(ConfigError::ZeroKMax);
        }
        let mut required = vec![("kb_dir", &self.kb_dir), ("corpus_file", &self.corpus_file)];
        if let Some(p) = &self.predictions_file {
            required.push(("predictions_file", p));
        }
        for (key, path) in required {
            if !path.exists() {
                return Err(ConfigError::MissingPath {
                    key,
                    path: path.clone(),
                });
            }
        }
        Ok(())
    }
}
