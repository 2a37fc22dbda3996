//! The `--config` JSON document and its merge with command-line flags.

use std::path::Path;

use cantm::corpus::FilterPolicy;
use cantm::model::{EncoderKind, Variant};
use cantm::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

/// Encoder width used for bag-of-words input when none is configured.
pub const DEFAULT_BOW_HIDDEN: usize = 100;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub encoder: Option<EncoderKind>,
    pub variant: Option<Variant>,
    pub d_h: Option<usize>,
    pub d_z: Option<usize>,
    pub d_zs: Option<usize>,
    pub d_t: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSection,
    pub train: TrainConfig,
    pub vocab_size: Option<usize>,
    pub folds: Option<usize>,
    pub filter: FilterPolicy,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| cantm::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.train.validate()?;
        cfg.filter.validate()?;
        Ok(cfg)
    }
}
