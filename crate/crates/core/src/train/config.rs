use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Skip-gram with negative sampling over every ordered entity pair.
    #[default]
    Sgns,
    /// Predict each entity from the mean of its co-followed entities.
    Cbow,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sgns => "sgns",
            Mode::Cbow => "cbow",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgns" | "skipgram" | "skip-gram" => Ok(Mode::Sgns),
            "cbow" => Ok(Mode::Cbow),
            other => Err(Error::Config(format!("unknown training mode {other:?}"))),
        }
    }
}

/// Hyper-parameters of the embedding trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    pub initial_lr: f64,
    /// Floor of the linear learning-rate decay.
    pub min_lr: f64,
    /// Frequency threshold `t` of the keep probability `sqrt(t / f)`;
    /// `None` disables downsampling.
    pub downsample: Option<f64>,
    pub epochs: usize,
    pub mode: Mode,
    /// Exponent applied to follower counts in the noise distribution.
    pub sampling_power: f64,
    pub seed: u64,
    pub workers: usize,
    /// Maximum distance between paired positions of a shuffled context;
    /// `None` pairs every entity with every other.
    pub window: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            negatives: 20,
            initial_lr: 0.03,
            min_lr: 0.0007,
            downsample: Some(1e-5),
            epochs: 5,
            mode: Mode::Sgns,
            sampling_power: 0.75,
            seed: 1,
            workers: 1,
            window: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return fail("dim must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if self.workers == 0 {
            return fail("workers must be positive".into());
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr && self.initial_lr.is_finite()) {
            return fail(format!(
                "need 0 < min_lr <= initial_lr, got min_lr={} initial_lr={}",
                self.min_lr, self.initial_lr
            ));
        }
        if let Some(t) = self.downsample {
            if !(t > 0.0 && t.is_finite()) {
                return fail(format!("downsample threshold must be positive, got {t}"));
            }
        }
        if !(self.sampling_power >= 0.0 && self.sampling_power.is_finite()) {
            return fail(format!("sampling_power must be >= 0, got {}", self.sampling_power));
        }
        if self.window == Some(0) {
            return fail("window must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.dim, cfg.negatives), (100, 20));
        assert_eq!((cfg.initial_lr, cfg.min_lr), (0.03, 0.0007));
        assert_eq!(cfg.downsample, Some(1e-5));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            TrainConfig { dim: 0, ..Default::default() },
            TrainConfig { min_lr: 0.1, ..Default::default() },
            TrainConfig { min_lr: 0.0, ..Default::default() },
            TrainConfig { workers: 0, ..Default::default() },
            TrainConfig { downsample: Some(-1.0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn mode_parses() {
        assert_eq!("CBOW".parse::<Mode>().unwrap(), Mode::Cbow);
        assert_eq!("sgns".parse::<Mode>().unwrap(), Mode::Sgns);
        assert!("hs".parse::<Mode>().is_err());
    }
}
