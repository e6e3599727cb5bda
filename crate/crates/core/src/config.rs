//! JSON run configuration shared by every CLI subcommand.
//!
//! ```json
//! {
//!   "renderer":    { "master_seed": 0, "num_classes": 10, ... },
//!   "split":       { "train_count": 5000, "unseen_classes": [8, 9], ... },
//!   "train":       { "epochs": 15, "batch_size": 32, "optimizer": { "learning_rate": 1e-4 }, ... },
//!   "augment":     { "flip_probability": 0.5, ... },
//!   "contrastive": { "tau": 0.5, "weight_mode": "linear" },
//!   "eval":        { "strict_acc30": false }
//! }
//! ```
//!
//! Every section and field is optional. Unknown keys are rejected with the
//! JSON path of the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::{AngleLossConfig, ContrastiveConfig, TotalLossConfig};
use crate::nn::{Architecture, OptimizerConfig};
use crate::pipeline::{EvalOptions, TrainConfig};
use crate::synthdata::{AugmentationConfig, RendererConfig, SplitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub angle: AngleLossConfig,
    pub total: TotalLossConfig,
    pub arch: Architecture,
    pub finetune_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            optimizer: t.optimizer,
            angle: t.angle,
            total: t.total,
            arch: t.arch,
            finetune_epochs: t.finetune_epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub renderer: RendererConfig,
    pub split: SplitSpec,
    pub train: TrainSection,
    pub augment: AugmentationConfig,
    pub contrastive: ContrastiveConfig,
    pub eval: EvalOptions,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidConfig(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Loads `path`, or returns the defaults when no file is given.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Overrides every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.renderer.master_seed = seed;
        self.train.seed = seed;
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            optimizer: t.optimizer,
            angle: t.angle,
            contrastive: self.contrastive,
            total: t.total,
            augment: self.augment,
            arch: t.arch.clone(),
            finetune_epochs: t.finetune_epochs,
        }
    }

    /// Checks every section and returns dataset warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.renderer.validate()?;
        let warnings = self.split.validate(&self.renderer)?;
        self.train_config().validate()?;
        if self.train.arch.input_dim != self.renderer.input_dim {
            return Err(Error::InvalidConfig(format!(
                "train.arch.input_dim {} differs from renderer.input_dim {}",
                self.train.arch.input_dim, self.renderer.input_dim
            )));
        }
        Ok(warnings)
    }

    /// [`config_hash`] of the fully resolved configuration.
    pub fn hash(&self) -> String {
        config_hash(&serde_json::to_value(self).expect("config serializes"))
    }
}

/// First 16 hex digits of the SHA-256 of `value` in canonical JSON (object
/// keys sorted).
pub fn config_hash(value: &serde_json::Value) -> String {
    let json = serde_json::to_vec(value).expect("json value serializes");
    Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::WeightMode;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfigFile::parse("{}").unwrap();
        assert_eq!(c, RunConfigFile::default());
        assert_eq!(c.train_config(), TrainConfig::default());
        assert!(c.validate().unwrap().is_empty());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c = RunConfigFile::parse(
            r#"{"train": {"epochs": 3, "optimizer": {"learning_rate": 0.001}},
                "contrastive": {"weight_mode": "sqrt"}}"#,
        )
        .unwrap();
        let t = c.train_config();
        assert_eq!(t.epochs, 3);
        assert_eq!(t.batch_size, 32);
        assert_eq!(t.optimizer.learning_rate, 0.001);
        assert_eq!(t.optimizer.beta1, 0.9);
        assert_eq!(t.contrastive.weight_mode, WeightMode::Sqrt);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = RunConfigFile::parse(r#"{"train": {"optimizer": {"lr": 0.1}}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train.optimizer"), "{msg}");
        assert!(msg.contains("lr"), "{msg}");
        let err = RunConfigFile::parse(r#"{"model": {}}"#).unwrap_err();
        assert!(err.to_string().contains("model"));
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = RunConfigFile::parse(r#"{"renderer": {"num_classes": "ten"}}"#).unwrap_err();
        assert!(err.to_string().contains("renderer.num_classes"), "{err}");
    }

    #[test]
    fn invalid_values_fail_validation() {
        let c = RunConfigFile::parse(r#"{"train": {"epochs": 0}}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfigFile::parse(r#"{"renderer": {"input_dim": 32}}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfigFile::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        b.set_seed(5);
        assert_ne!(a.hash(), b.hash());
    }
}
