use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class clip length distribution: a normal rounded to integers and
/// clamped to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthDist {
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
}

impl LengthDist {
    pub fn new(mean: f64, std: f64, min: usize, max: usize) -> Self {
        Self { mean, std, min, max }
    }
}

/// The `bias` section of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasSettings {
    pub classes: Vec<LengthDist>,
    /// Content signal strength; 0 leaves class information only in length.
    pub signal: f64,
    /// Mean level of non-blank frames (blank frames are zero).
    pub frame_level: f64,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    /// Fixed `N_max` for the constant strategy; the training maximum if unset.
    pub n_max: Option<usize>,
    pub n_min: Option<usize>,
    pub strategies: Vec<String>,
    pub epochs: usize,
    /// Independent sampling plans drawn per training clip.
    pub train_draws: usize,
    pub mi_draws: usize,
    /// Z-score features over time before the head.
    pub normalize: bool,
}

impl Default for BiasSettings {
    fn default() -> Self {
        Self {
            classes: vec![LengthDist::new(80.0, 10.0, 33, 225), LengthDist::new(120.0, 10.0, 33, 225)],
            signal: 0.0,
            frame_level: 2.0,
            samples_per_class: 200,
            test_per_class: 100,
            n_max: None,
            n_min: None,
            strategies: ["constant", "delta", "length_adjusted", "variable"]
                .map(String::from)
                .to_vec(),
            epochs: 10,
            train_draws: 1,
            mi_draws: 5000,
            normalize: false,
        }
    }
}

fn range(key: &str, message: String) -> Error {
    Error::ConfigRange {
        key: format!("bias.{key}"),
        message,
    }
}

impl BiasSettings {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(range("classes", "need at least two classes".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if c.min < 1 || c.max > 1000 || c.min > c.max {
                return Err(range("classes", format!("class {i}: need 1 <= min <= max <= 1000")));
            }
            if !(c.std >= 0.0) || !c.mean.is_finite() {
                return Err(range("classes", format!("class {i}: std must be >= 0")));
            }
        }
        if !(self.signal >= 0.0) {
            return Err(range("signal", "must be >= 0".into()));
        }
        if !self.frame_level.is_finite() {
            return Err(range("frame_level", "must be finite".into()));
        }
        if self.samples_per_class == 0 || self.test_per_class == 0 {
            return Err(range("samples_per_class", "sample counts must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(range("epochs", "must be >= 1".into()));
        }
        if self.train_draws == 0 {
            return Err(range("train_draws", "must be >= 1".into()));
        }
        if self.mi_draws < 2 {
            return Err(range("mi_draws", "must be >= 2".into()));
        }
        if self.strategies.is_empty() {
            return Err(range("strategies", "must name at least one strategy".into()));
        }
        Ok(())
    }
}
