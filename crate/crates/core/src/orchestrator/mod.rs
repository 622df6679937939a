//! End-to-end runs, persisted artifacts, elicitation sessions and the HTTP API.

pub mod api;
mod pipeline;
pub mod session;

pub use pipeline::{derive_preferences, evaluate, run_pipeline, write_mps_file, Counts, RunManifest, Stage, StageTiming};

use crate::attributes::{AttributeCatalog, CatalogError};
use crate::esm::{EsmError, SystemModel};
use crate::mavt::{MavtError, Perturbation, PreferenceSet};
use crate::mga::{MgaConfig, MgaError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Esm(#[from] EsmError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Mga(#[from] MgaError),
    #[error(transparent)]
    Mavt(#[from] MavtError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, RunError> {
    std::fs::read(path).map_err(|source| RunError::Io { path: path.into(), source })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    serde_json::from_slice(&read(path)?).map_err(|source| RunError::Json { path: path.into(), source })
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn default_top() -> f64 {
    0.1
}
fn default_presence() -> f64 {
    0.001
}

/// Contents of `run.json`. Paths are relative to the file itself.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub system: PathBuf,
    pub catalog: PathBuf,
    #[serde(default)]
    pub mga: Option<PathBuf>,
    #[serde(default)]
    pub preferences: Option<PathBuf>,
    /// Share of best-ranked alternatives used by the value-focused analyses.
    #[serde(default = "default_top")]
    pub top_fraction: f64,
    /// Generation share of sector demand above which a technology is present.
    #[serde(default = "default_presence")]
    pub presence_threshold: f64,
    #[serde(default)]
    pub sensitivity: Perturbation,
}

/// A validated set of run inputs together with the raw bytes they came from.
#[derive(Clone, Debug)]
pub struct Inputs {
    pub config: RunConfig,
    pub model: SystemModel,
    pub catalog: AttributeCatalog,
    pub mga: MgaConfig,
    pub preferences: PreferenceSet,
    /// File name in the run directory's `inputs/` folder and its content.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Inputs {
    pub fn load(config_path: &Path) -> Result<Self, RunError> {
        let raw = read(config_path)?;
        let config: RunConfig =
            serde_json::from_slice(&raw).map_err(|source| RunError::Json { path: config_path.into(), source })?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        let mut files = vec![("run.json".to_string(), raw)];

        let system = read(&base.join(&config.system))?;
        let model = SystemModel::from_json(&String::from_utf8_lossy(&system))?;
        files.push(("system.json".into(), system));
        let catalog_raw = read(&base.join(&config.catalog))?;
        let catalog = AttributeCatalog::from_json(&String::from_utf8_lossy(&catalog_raw))?;
        files.push(("catalog.json".into(), catalog_raw));

        let mga = match &config.mga {
            Some(p) => {
                let path = base.join(p);
                let raw = read(&path)?;
                let cfg = serde_json::from_slice(&raw).map_err(|source| RunError::Json { path, source })?;
                files.push(("mga-config.json".into(), raw));
                cfg
            }
            None => MgaConfig::default(),
        };
        let preferences = match &config.preferences {
            Some(p) => {
                let path = base.join(p);
                let raw = read(&path)?;
                let set = serde_json::from_slice(&raw).map_err(|source| RunError::Json { path, source })?;
                files.push(("preferences.json".into(), raw));
                set
            }
            None => PreferenceSet::default(),
        };
        let inputs = Self {
            config,
            model,
            catalog,
            mga,
            preferences,
            files,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let c = &self.config;
        if !(c.top_fraction > 0.0 && c.top_fraction <= 1.0) {
            return Err(RunError::Config(format!("top_fraction {} not in (0, 1]", c.top_fraction)));
        }
        if !(c.presence_threshold >= 0.0) {
            return Err(RunError::Config(format!("presence_threshold {} is negative", c.presence_threshold)));
        }
        self.model.validate()?;
        self.catalog.validate()?;
        Ok(())
    }
}
