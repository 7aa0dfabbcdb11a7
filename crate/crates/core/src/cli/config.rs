//! Run configuration shared by every command.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generative::NoiseModel;
use crate::inference::FilterConfig;
use crate::lightweight::LwConfig;
use crate::model::{CategoryTable, Theta};
use crate::simulator::{LwDatasetParams, Synth3dParams};

/// Version stamped into every file the commands write.
pub const FORMAT_VERSION: u32 = 1;

/// Detector count of the full-scale robustness study.
pub const FULL_SCALE_DETECTORS: usize = 40_000;

/// Settings of the spatial-free study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LwSection {
    pub detectors: usize,
    pub dataset: LwDatasetParams,
    pub filter: LwConfig,
}

impl Default for LwSection {
    fn default() -> Self {
        LwSection {
            detectors: 1000,
            dataset: LwDatasetParams::default(),
            filter: LwConfig::default(),
        }
    }
}

/// Settings of the 3D closed loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullSection {
    pub scenes: usize,
    /// Rates of the simulated detector.
    pub theta_true: Theta,
    pub synth: Synth3dParams,
    pub filter: FilterConfig,
    /// The model's noise and matching radius.
    pub noise: NoiseModel,
    /// Fraction of scenes used for learning; the rest are held out.
    pub train_fraction: f64,
    /// How many of the four counterbalanced training orders to run.
    pub orders: usize,
    pub bootstrap_resamples: usize,
}

impl Default for FullSection {
    fn default() -> Self {
        FullSection {
            scenes: 100,
            theta_true: Theta {
                hallucination: vec![0.1, 0.2, 0.05, 0.3, 0.15],
                detection: vec![0.7, 0.6, 0.8, 0.5, 0.75],
            },
            synth: Synth3dParams::default(),
            filter: FilterConfig::default(),
            noise: NoiseModel::default(),
            train_fraction: 0.5,
            orders: 4,
            bootstrap_resamples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub categories: CategoryTable,
    pub lw: LwSection,
    pub full: FullSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            categories: CategoryTable::default_five(),
            lw: LwSection::default(),
            full: FullSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.categories.len();
        if self.lw.detectors == 0 {
            return Err(Error::config("detector count must be positive"));
        }
        if self.lw.dataset.num_categories != n {
            return Err(Error::config("lw.dataset.num_categories must match the category table"));
        }
        self.lw.dataset.validate()?;
        self.lw.filter.validate(n)?;
        let f = &self.full;
        if f.scenes == 0 {
            return Err(Error::config("scene count must be positive"));
        }
        if f.synth.scene.num_categories != n || f.theta_true.num_categories() != n {
            return Err(Error::config("3D settings must match the category table"));
        }
        f.theta_true.validate()?;
        f.synth.scene.validate()?;
        f.synth.intrinsics.validate()?;
        f.synth.detector_noise.validate()?;
        f.filter.validate()?;
        f.noise.validate()?;
        if !(f.train_fraction > 0.0 && f.train_fraction < 1.0) {
            return Err(Error::config("train_fraction must lie in (0, 1)"));
        }
        if !(1..=4).contains(&f.orders) {
            return Err(Error::config("orders must be between 1 and 4"));
        }
        if f.bootstrap_resamples == 0 {
            return Err(Error::config("bootstrap_resamples must be positive"));
        }
        Ok(())
    }

    /// Short SHA-256 digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Set the particle count of both filters.
    pub fn set_particles(&mut self, n: usize) {
        self.lw.filter.num_particles = n;
        self.full.filter.num_particles = n;
    }

    /// Set the rejuvenation sweep count of both filters.
    pub fn set_sweeps(&mut self, n: usize) {
        self.lw.filter.rejuvenation_sweeps = n;
        self.full.filter.rejuvenation_sweeps = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"seed": 1, "sed": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"lw": {"detectors": 3, "extra": true}}"#).is_err());
        assert_eq!(RunConfig::from_json(r#"{"seed": 4}"#).unwrap().seed, 4);
    }
}
