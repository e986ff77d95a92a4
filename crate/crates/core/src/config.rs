//! Experiment configuration, mirrored field-for-field by the TOML config
//! file (`[model]` and `[train]` tables).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Qcae,
    Cae,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Qcae => write!(f, "qcae"),
            ModelKind::Cae => write!(f, "cae"),
        }
    }
}

/// Architecture hyperparameters. `encoder_maps` are the per-layer feature-map
/// counts of the encoder in the model's own units: quaternion channels for a
/// QCAE, real channels for a CAE. The decoder mirrors the encoder back down
/// to the input channel count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub encoder_maps: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Qcae,
            encoder_maps: vec![8, 16],
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
        }
    }
}

impl ModelConfig {
    /// The matched real-valued baseline: same topology with channel widths
    /// four times the quaternion widths.
    pub fn real_counterpart(&self) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Cae,
            encoder_maps: self.encoder_maps.iter().map(|&m| 4 * m).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_maps.is_empty() || self.encoder_maps.contains(&0) {
            return Err(Error::Config(
                "encoder_maps must be a non-empty list of positive widths".into(),
            ));
        }
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::Config("kernel and stride must be positive".into()));
        }
        if self.output_padding >= self.stride {
            return Err(Error::Config(format!(
                "output_padding {} must be smaller than stride {}",
                self.output_padding, self.stride
            )));
        }
        Ok(())
    }
}

/// Optimization and data settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub train_image: PathBuf,
    pub test_images: Vec<PathBuf>,
    /// Integer downscale factor: images are center-cropped to
    /// `(H/scale, W/scale)` of the training image (rounded down so both
    /// dimensions stay divisible by the total encoder stride).
    pub scale: usize,
    pub output_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            lr: 5e-4,
            seed: 0,
            train_image: PathBuf::new(),
            test_images: Vec::new(),
            scale: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.scale == 0 {
            return Err(Error::Config("scale must be at least 1".into()));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.train_image.as_os_str().is_empty() {
            return Err(Error::Config("train_image path is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.train_image = PathBuf::from("kodak/kodim19.png");
        cfg.train.test_images = vec![PathBuf::from("kodak/kodim23.png")];
        cfg.train.seed = 42;
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn defaults_follow_reference_topology() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.encoder_maps, vec![8, 16]);
        assert_eq!((cfg.kernel, cfg.stride, cfg.padding, cfg.output_padding), (3, 2, 1, 1));
        let cae = cfg.real_counterpart();
        assert_eq!(cae.encoder_maps, vec![32, 64]);
        assert_eq!(cae.kind, ModelKind::Cae);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.train_image = PathBuf::from("x.png");
        cfg.validate().unwrap();

        cfg.model.encoder_maps = vec![];
        assert!(cfg.validate().is_err());
        cfg.model.encoder_maps = vec![8, 16];
        cfg.train.epochs = 0;
        assert!(cfg.validate().is_err());
    }
}
