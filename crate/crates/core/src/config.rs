//! TOML or JSON configuration files, chosen by extension.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::PromptTemplates;
use crate::policy::EndpointConfig;
use crate::sim::{SimParams, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: unsupported extension (use .toml or .json)")]
    Extension { path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let parse_err = |message: String| ConfigError::Parse { path: path.to_path_buf(), message };
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("toml") => toml::from_str(&text).map_err(|e| parse_err(e.to_string())),
        Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string())),
        _ => Err(ConfigError::Extension { path: path.to_path_buf() }),
    }
}

/// Settings shared by single-trial runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    /// Directory with prompt template overrides.
    #[serde(default)]
    pub prompt_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Loads and validates; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = load_file(path)?;
        if let (Some(dir), Some(base)) = (cfg.prompt_dir.as_mut(), path.parent()) {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn templates(&self) -> Result<PromptTemplates, ConfigError> {
        match &self.prompt_dir {
            None => Ok(PromptTemplates::default()),
            Some(dir) => PromptTemplates::from_dir(dir).map_err(|source| ConfigError::Io { path: dir.clone(), source }),
        }
    }
}
