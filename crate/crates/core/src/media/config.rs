use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bias::BiasSettings;
use crate::error::{Error, Result};

/// Run configuration. Loaded from a JSON object; absent keys take the
/// defaults below and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub t_frames: usize,
    pub beta: f64,
    pub gamma_max: f64,
    pub alpha: f64,
    pub w_spa: f64,
    pub w_col: f64,
    pub w_tv: f64,
    pub exposure_e: f64,
    pub curve_iters: usize,
    pub enhance_steps: usize,
    pub enhance_lr: f64,
    pub head_dim: usize,
    pub head_heads: usize,
    pub head_layers: usize,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub seed: u64,
    /// Temporal positions the head sees after pooling sampled frames.
    pub head_tlen: usize,
    pub head_lr: f64,
    pub head_epochs: usize,
    pub tta_count: usize,
    /// Descriptor grid side for `featurize`.
    pub grid: usize,
    pub bias: BiasSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            t_frames: 64,
            beta: 0.0,
            gamma_max: 1.5,
            alpha: 4.0,
            w_spa: 10.0,
            w_col: 5.0,
            w_tv: 200.0,
            exposure_e: 0.6,
            curve_iters: 8,
            enhance_steps: 200,
            enhance_lr: 0.01,
            head_dim: 32,
            head_heads: 4,
            head_layers: 1,
            focal_gamma: 2.0,
            focal_alpha: 1.0,
            seed: 0,
            head_tlen: 8,
            head_lr: 3e-3,
            head_epochs: 30,
            tta_count: 5,
            grid: 4,
            bias: BiasSettings::default(),
        }
    }
}

fn range(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigRange {
        key: key.to_string(),
        message: message.into(),
    }
}

fn check(ok: bool, key: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(range(key, message))
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        check(self.t_frames >= 1, "t_frames", "must be >= 1")?;
        check(self.beta >= 0.0, "beta", "must be >= 0")?;
        check(self.gamma_max >= self.beta, "gamma_max", "must be >= beta")?;
        check(self.alpha >= 1.0, "alpha", "must be >= 1")?;
        check(self.w_spa >= 0.0, "w_spa", "must be >= 0")?;
        check(self.w_col >= 0.0, "w_col", "must be >= 0")?;
        check(self.w_tv >= 0.0, "w_tv", "must be >= 0")?;
        check(
            self.exposure_e > 0.0 && self.exposure_e < 1.0,
            "exposure_e",
            "must lie in (0, 1)",
        )?;
        check(self.curve_iters >= 1, "curve_iters", "must be >= 1")?;
        check(self.enhance_steps >= 1, "enhance_steps", "must be >= 1")?;
        check(self.enhance_lr > 0.0, "enhance_lr", "must be > 0")?;
        check(self.head_heads >= 1, "head_heads", "must be >= 1")?;
        check(
            self.head_dim >= 1 && self.head_dim % self.head_heads == 0,
            "head_dim",
            "must be a positive multiple of head_heads",
        )?;
        check(self.head_layers == 1, "head_layers", "only a single layer is supported")?;
        check(self.focal_gamma >= 0.0, "focal_gamma", "must be >= 0")?;
        check(self.focal_alpha >= 0.0, "focal_alpha", "must be >= 0")?;
        check(self.head_tlen >= 1, "head_tlen", "must be >= 1")?;
        check(self.head_lr > 0.0, "head_lr", "must be > 0")?;
        check(self.head_epochs >= 1, "head_epochs", "must be >= 1")?;
        check(self.tta_count >= 1, "tta_count", "must be >= 1")?;
        check(self.grid >= 1, "grid", "must be >= 1")?;
        self.bias.validate()
    }

    pub fn sampling(&self) -> crate::sampling::SamplingParams {
        crate::sampling::SamplingParams {
            t_frames: self.t_frames,
            beta: self.beta,
            gamma_max: self.gamma_max,
            alpha: self.alpha,
        }
    }

    pub fn loss_weights(&self) -> crate::enhance::LossWeights {
        crate::enhance::LossWeights {
            w_spa: self.w_spa,
            w_col: self.w_col,
            w_tv: self.w_tv,
            exposure_e: self.exposure_e,
        }
    }
}

pub fn parse_config(text: &str) -> Result<Config> {
    let config: Config = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
