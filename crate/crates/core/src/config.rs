//! Run configuration: every tunable, loaded from TOML with unknown keys
//! rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fragmenter::FragmentConfig;
use crate::model::{ModelConfig, TrainConfig};
use crate::pocket::PocketConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturizeConfig {
    /// Pocket atoms closer than this (Å) are joined by an edge.
    pub pocket_edge_threshold: f64,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        Self { pocket_edge_threshold: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Preprocessing fails when more than this fraction of rows is dropped.
    pub max_drop_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { max_drop_fraction: 0.1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub fragment: FragmentConfig,
    pub pocket: PocketConfig,
    pub featurize: FeaturizeConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub preprocess: PreprocessConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.fragment.max_blocks == 0 || self.fragment.max_fragments == 0 {
            return Err(ConfigError::Invalid("fragment.max_blocks and fragment.max_fragments must be positive".into()));
        }
        self.pocket.validate().map_err(|e| invalid(&e))?;
        if !(self.featurize.pocket_edge_threshold > 0.0) {
            return Err(ConfigError::Invalid("featurize.pocket_edge_threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.preprocess.max_drop_fraction) {
            return Err(ConfigError::Invalid("preprocess.max_drop_fraction must be in [0, 1]".into()));
        }
        self.model.validate().map_err(|e| invalid(&e))?;
        self.train.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    /// SHA-256 over the sections that determine cached samples.
    pub fn preprocess_hash(&self) -> String {
        let key = serde_json::json!({
            "fragment": self.fragment,
            "pocket": self.pocket,
            "featurize": self.featurize,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[model]\nlatent_rows = 4\n").is_err());
        assert!(RunConfig::from_toml("[nope]\n").is_err());
    }

    #[test]
    fn hash_ignores_training_sections() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.train.epochs += 1;
        b.model.heads = 2;
        assert_eq!(a.preprocess_hash(), b.preprocess_hash());
        b.pocket.grid = 0.5;
        assert_ne!(a.preprocess_hash(), b.preprocess_hash());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[model]\nembed_dim = 30\nheads = 4\n").is_err());
        assert!(RunConfig::from_toml("[pocket]\ngrid = 0.0\n").is_err());
    }
}
