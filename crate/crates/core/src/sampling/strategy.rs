use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{compute_sampling_rate, draw_delta, plan_from_rate, DatasetStats, SamplePlan, SamplingParams};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A way of choosing the sampling rate for one video.
pub trait SamplingStrategy: Send + Sync + fmt::Debug {
    /// Registry key, also used on the command line and in configs.
    fn name(&self) -> &'static str;

    /// Plans `params.t_frames` slots for an `n_frames` video.
    fn plan(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        stats: Option<&DatasetStats>,
        rng: &mut Rng,
    ) -> Result<SamplePlan>;
}

fn require_stats<'a>(name: &str, stats: Option<&'a DatasetStats>) -> Result<&'a DatasetStats> {
    stats.ok_or_else(|| Error::Param(format!("strategy `{name}` needs dataset N_min/N_max")))
}

/// Base rate `N / T` jittered by `delta ~ U[beta, gamma_max)` and capped at
/// `alpha`, with random two-sided padding.
#[derive(Debug, Default, Clone, Copy)]
pub struct DeltaSampling;

impl DeltaSampling {
    /// Plan for a fixed `delta`, drawing only `P1`.
    pub fn plan_with_delta(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        delta: f64,
        rng: &mut Rng,
    ) -> Result<SamplePlan> {
        let rate = compute_sampling_rate(n_frames, params.t_frames, delta, params.alpha);
        plan_from_rate(self.name(), n_frames, params.t_frames, Some(delta), rate, rng)
    }
}

impl SamplingStrategy for DeltaSampling {
    fn name(&self) -> &'static str {
        "delta"
    }

    fn plan(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        _stats: Option<&DatasetStats>,
        rng: &mut Rng,
    ) -> Result<SamplePlan> {
        params.validate()?;
        let delta = draw_delta(rng, params.beta, params.gamma_max)?;
        self.plan_with_delta(n_frames, params, delta, rng)
    }
}

/// One rate `N_max / T` for every video.
#[derive(Debug, Default, Clone, Copy)]
pub struct ConstantRate;

impl SamplingStrategy for ConstantRate {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn plan(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        stats: Option<&DatasetStats>,
        rng: &mut Rng,
    ) -> Result<SamplePlan> {
        params.validate()?;
        let stats = require_stats(self.name(), stats)?;
        let rate = stats.n_max as f64 / params.t_frames as f64;
        plan_from_rate(self.name(), n_frames, params.t_frames, None, rate, rng)
    }
}

/// Rate `N / T`: the video always fills every slot.
#[derive(Debug, Default, Clone, Copy)]
pub struct LengthAdjusted;

impl SamplingStrategy for LengthAdjusted {
    fn name(&self) -> &'static str {
        "length_adjusted"
    }

    fn plan(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        _stats: Option<&DatasetStats>,
        rng: &mut Rng,
    ) -> Result<SamplePlan> {
        params.validate()?;
        let rate = n_frames as f64 / params.t_frames as f64;
        plan_from_rate(self.name(), n_frames, params.t_frames, None, rate, rng)
    }
}

/// Rate uniform in `[N_min / T, N_max / T]`, independent of the video.
#[derive(Debug, Default, Clone, Copy)]
pub struct VariableRate;

impl SamplingStrategy for VariableRate {
    fn name(&self) -> &'static str {
        "variable"
    }

    fn plan(
        &self,
        n_frames: usize,
        params: &SamplingParams,
        stats: Option<&DatasetStats>,
        rng: &mut Rng,
    ) -> Result<SamplePlan> {
        params.validate()?;
        let stats = require_stats(self.name(), stats)?;
        let t = params.t_frames as f64;
        let rate = rng.uniform_range(stats.n_min as f64 / t, stats.n_max as f64 / t);
        plan_from_rate(self.name(), n_frames, params.t_frames, None, rate, rng)
    }
}

/// Strategies by name.
#[derive(Debug, Clone, Default)]
pub struct StrategyRegistry {
    entries: BTreeMap<&'static str, Arc<dyn SamplingStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `delta`, `constant`, `length_adjusted` and `variable`.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(DeltaSampling));
        registry.register(Arc::new(ConstantRate));
        registry.register(Arc::new(LengthAdjusted));
        registry.register(Arc::new(VariableRate));
        registry
    }

    /// Adds or replaces the entry under `strategy.name()`.
    pub fn register(&mut self, strategy: Arc<dyn SamplingStrategy>) {
        self.entries.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SamplingStrategy>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::Param(format!(
                "unknown sampling strategy `{name}`, expected one of: {}",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATS: DatasetStats = DatasetStats { n_min: 33, n_max: 160 };

    fn params() -> SamplingParams {
        SamplingParams::default()
    }

    #[test]
    fn registry_resolves_builtin_names() {
        let reg = StrategyRegistry::builtin();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, vec!["constant", "delta", "length_adjusted", "variable"]);
        for name in names {
            assert_eq!(reg.get(name).unwrap().name(), name);
        }
        let err = reg.get("slowfast").unwrap_err().to_string();
        assert!(err.contains("delta"), "{err}");
    }

    #[test]
    fn length_adjusted_never_pads() {
        let mut rng = Rng::new(0);
        for n in [33, 64, 65, 100, 225] {
            let plan = LengthAdjusted.plan(n, &params(), None, &mut rng).unwrap();
            assert_eq!((plan.indices.len(), plan.p1, plan.p2), (64, 0, 0), "n={n}");
        }
    }

    #[test]
    fn constant_rate_examples() {
        let mut rng = Rng::new(0);
        let plan = ConstantRate.plan(160, &params(), Some(&STATS), &mut rng).unwrap();
        assert_eq!((plan.indices.len(), plan.p1, plan.p2), (64, 0, 0));
        let plan = ConstantRate.plan(80, &params(), Some(&STATS), &mut rng).unwrap();
        assert_eq!(plan.rate, 2.5);
        assert_eq!(plan.indices.len(), 32);
        assert_eq!(plan.p1 + plan.p2, 32);
    }

    #[test]
    fn stats_required_for_dataset_strategies() {
        let mut rng = Rng::new(0);
        assert!(ConstantRate.plan(80, &params(), None, &mut rng).is_err());
        assert!(VariableRate.plan(80, &params(), None, &mut rng).is_err());
    }

    #[test]
    fn variable_rate_in_range() {
        let mut rng = Rng::new(2);
        for _ in 0..500 {
            let plan = VariableRate.plan(120, &params(), Some(&STATS), &mut rng).unwrap();
            assert!(plan.rate >= 33.0 / 64.0 && plan.rate <= 160.0 / 64.0);
            assert_eq!(plan.p1 + plan.indices.len() + plan.p2, 64);
        }
    }

    #[test]
    fn delta_keeps_first_frame() {
        let mut rng = Rng::new(4);
        for n in 33..=225 {
            let plan = DeltaSampling.plan(n, &params(), None, &mut rng).unwrap();
            assert_eq!(plan.indices[0], 0);
            assert!(plan.rate <= 4.0);
        }
    }
}
