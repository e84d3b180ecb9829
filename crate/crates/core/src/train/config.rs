use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossWeights;
use crate::error::{Error, Result};
use crate::net::{AblationMode, Profile};

/// A built-in profile by name, or a full inline definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Inline(Profile),
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<Profile> {
        let p = match self {
            ProfileSpec::Named(name) => Profile::named(name)?,
            ProfileSpec::Inline(p) => p.clone(),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Training hyperparameters. Every field has a default, so a config file
/// only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_r: f64,
    pub lambda_d: f64,
    pub lambda_c: f64,
    /// Distance scale of the diversity kernel.
    pub alpha_d: f64,
    pub lr0: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub k_samples: usize,
    pub profile: ProfileSpec,
    pub seed: u64,
    pub ablation_mode: AblationMode,
    /// Fraction of source sequences held out for evaluation.
    pub heldout_fraction: f64,
    /// Write an intermediate checkpoint every this many epochs (0: never).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_r: 1.0,
            lambda_d: 0.1,
            lambda_c: 0.05,
            alpha_d: 100.0,
            lr0: 0.001,
            epochs: 500,
            batch_size: 16,
            k_samples: 50,
            profile: ProfileSpec::Named("standard".into()),
            seed: 0,
            ablation_mode: AblationMode::Full,
            heldout_fraction: 0.1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_slice(&bytes)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_r", self.lambda_r),
            ("lambda_d", self.lambda_d),
            ("lambda_c", self.lambda_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for (name, v) in [("alpha_d", self.alpha_d), ("lr0", self.lr0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if self.k_samples < 2 {
            return Err(Error::Config(format!("k_samples must be at least 2, got {}", self.k_samples)));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "heldout_fraction must lie in (0, 1), got {}",
                self.heldout_fraction
            )));
        }
        self.profile.resolve()?;
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_r: self.lambda_r,
            lambda_d: self.lambda_d,
            lambda_c: self.lambda_c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = TrainConfig::from_json_slice(b"{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!((cfg.lambda_r, cfg.lambda_d, cfg.lambda_c, cfg.alpha_d), (1.0, 0.1, 0.05, 100.0));
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.k_samples), (500, 16, 50));
    }

    #[test]
    fn json_round_trip() {
        let cfg = TrainConfig {
            profile: ProfileSpec::Inline(Profile::micro()),
            ablation_mode: AblationMode::MqSld,
            ..TrainConfig::default()
        };
        let back = TrainConfig::from_json_slice(cfg.to_json_string().as_bytes()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            r#"{"lambda_d": -1}"#,
            r#"{"epochs": 0}"#,
            r#"{"batch_size": 0}"#,
            r#"{"k_samples": 1}"#,
            r#"{"alpha_d": 0}"#,
            r#"{"profile": "huge"}"#,
            r#"{"ablation_mode": "SLD"}"#,
            r#"{"unknown": 1}"#,
        ] {
            assert!(matches!(TrainConfig::from_json_slice(bad.as_bytes()), Err(Error::Config(_))), "{bad}");
        }
    }
}
