//! Frame selection: turn an `N`-frame video into exactly `T` input slots.
//!
//! Every strategy reduces to choosing a sampling rate `S`. From `S` the
//! shared machinery picks `M = floor(N / S)` source frames at
//! `floor(k * S)` and pads the remaining `T - M` slots with blank frames,
//! `P1` in front and `P2` behind.

mod strategy;
mod tta;

pub use strategy::{
    ConstantRate, DeltaSampling, LengthAdjusted, SamplingStrategy, StrategyRegistry, VariableRate,
};
pub use tta::{tta_param_sets, TtaDraw};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Image, VideoClip};
use crate::rng::Rng;

/// Absorbs representation error when `N / S` or `k * S` is integral.
const INDEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub t_frames: usize,
    pub beta: f64,
    pub gamma_max: f64,
    pub alpha: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            t_frames: 64,
            beta: 0.0,
            gamma_max: 1.5,
            alpha: 4.0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_frames == 0 {
            return Err(Error::Param("T must be >= 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta <= self.gamma_max) {
            return Err(Error::Param(format!(
                "need 0 <= beta <= gamma_max, got beta={} gamma_max={}",
                self.beta, self.gamma_max
            )));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Param(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Shortest and longest clip of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_min: usize,
    pub n_max: usize,
}

impl DatasetStats {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Option<Self> {
        lengths.into_iter().fold(None, |acc, n| {
            Some(match acc {
                None => DatasetStats { n_min: n, n_max: n },
                Some(s) => DatasetStats {
                    n_min: s.n_min.min(n),
                    n_max: s.n_max.max(n),
                },
            })
        })
    }
}

/// Which source frames fill which slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub strategy: String,
    pub n_frames: usize,
    pub t_frames: usize,
    /// Rate jitter; only the delta strategy draws one.
    pub delta: Option<f64>,
    pub rate: f64,
    pub indices: Vec<usize>,
    pub p1: usize,
    pub p2: usize,
}

impl SamplePlan {
    /// Number of non-blank slots.
    pub fn observed_length(&self) -> usize {
        self.indices.len()
    }

    /// `true` at blank slots.
    pub fn blank_mask(&self) -> Vec<bool> {
        let m = self.indices.len();
        (0..self.t_frames).map(|i| i < self.p1 || i >= self.p1 + m).collect()
    }

    /// Source frame index per slot, `None` for blanks.
    pub fn slots(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        std::iter::repeat(None)
            .take(self.p1)
            .chain(self.indices.iter().map(|&i| Some(i)))
            .chain(std::iter::repeat(None).take(self.p2))
    }
}

/// `T` frames with blank padding.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledClip {
    pub frames: Vec<Image>,
    pub blank_mask: Vec<bool>,
}

pub fn draw_delta(rng: &mut Rng, beta: f64, gamma_max: f64) -> Result<f64> {
    if beta > gamma_max {
        return Err(Error::Param(format!("beta {beta} exceeds gamma_max {gamma_max}")));
    }
    Ok(beta + rng.next_uniform() * (gamma_max - beta))
}

/// `min((N + T * delta) / T, alpha)`.
pub fn compute_sampling_rate(n_frames: usize, t_frames: usize, delta: f64, alpha: f64) -> f64 {
    let t = t_frames as f64;
    ((n_frames as f64 + t * delta) / t).min(alpha)
}

/// `M = floor(N / rate)` indices `floor(k * rate)`.
///
/// Rates below 1 repeat frames, so indices are strictly increasing only
/// for `rate >= 1`; they are always non-decreasing and `< N`.
pub fn sample_indices(n_frames: usize, rate: f64) -> Result<Vec<usize>> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Param(format!("sampling rate must be positive, got {rate}")));
    }
    let m = (n_frames as f64 / rate + INDEX_EPS).floor() as usize;
    if m == 0 {
        return Err(Error::DegenerateVideo(format!(
            "{n_frames} frames at rate {rate} yield no samples"
        )));
    }
    Ok((0..m)
        .map(|k| ((k as f64 * rate + INDEX_EPS).floor() as usize).min(n_frames - 1))
        .collect())
}

/// Keeps the central `t` indices when more than `t` were sampled.
pub fn truncate_central(mut indices: Vec<usize>, t: usize) -> Vec<usize> {
    if indices.len() > t {
        let start = (indices.len() - t) / 2;
        indices.drain(..start);
        indices.truncate(t);
    }
    indices
}

/// Blank counts around `m` sampled frames. `P1` is uniform over
/// `{0, .., T - M - 1}`, so `P2 >= 1` whenever padding exists.
pub fn pad_plan(m: usize, t: usize, rng: &mut Rng) -> Result<(usize, usize)> {
    if m > t {
        return Err(Error::Param(format!("{m} sampled frames exceed {t} slots")));
    }
    if m == t {
        return Ok((0, 0));
    }
    let free = t - m;
    let p1 = rng.below(free);
    Ok((p1, free - p1))
}

/// Shared tail of every strategy: indices, truncation and padding.
pub(crate) fn plan_from_rate(
    strategy: &str,
    n_frames: usize,
    t_frames: usize,
    delta: Option<f64>,
    rate: f64,
    rng: &mut Rng,
) -> Result<SamplePlan> {
    let indices = truncate_central(sample_indices(n_frames, rate)?, t_frames);
    let (p1, p2) = pad_plan(indices.len(), t_frames, rng)?;
    Ok(SamplePlan {
        strategy: strategy.to_string(),
        n_frames,
        t_frames,
        delta,
        rate,
        indices,
        p1,
        p2,
    })
}

/// Materializes a plan; blank slots are all-zero frames.
pub fn realize_plan(video: &VideoClip, plan: &SamplePlan) -> Result<SampledClip> {
    if plan.n_frames != video.n_frames() {
        return Err(Error::DimMismatch(format!(
            "plan is for {} frames, video has {}",
            plan.n_frames,
            video.n_frames()
        )));
    }
    let (h, w) = video.dims();
    let frames = plan
        .slots()
        .map(|slot| match slot {
            Some(i) => video.frames()[i].clone(),
            None => Image::zeros(h, w),
        })
        .collect();
    Ok(SampledClip {
        frames,
        blank_mask: plan.blank_mask(),
    })
}

pub fn sample_clip(
    video: &VideoClip,
    strategy: &dyn SamplingStrategy,
    params: &SamplingParams,
    stats: Option<&DatasetStats>,
    rng: &mut Rng,
) -> Result<(SampledClip, SamplePlan)> {
    let plan = strategy.plan(video.n_frames(), params, stats, rng)?;
    Ok((realize_plan(video, &plan)?, plan))
}
