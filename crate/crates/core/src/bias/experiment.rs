use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mi::mutual_information;
use super::synthetic::{class_signals, generate_dataset, SyntheticClip, SyntheticSpec};
use crate::error::Result;
use crate::head::{argmax, predict, sequence_from_plan, train_head, FeatureSequence, FocalConfig, HeadConfig, TrainSettings};
use crate::media::Config;
use crate::rng::Rng;
use crate::sampling::{DatasetStats, SamplingParams, SamplingStrategy, StrategyRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub train_accuracy: f64,
    /// Accuracy on held-out clips with the training length distributions.
    pub in_accuracy: f64,
    /// Accuracy on clips whose length distributions are swapped between
    /// classes.
    pub shifted_accuracy: f64,
    pub degradation: f64,
    /// `MI(M; label)` in bits.
    pub mi_bits: f64,
    pub mean_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub seed: u64,
    pub train_clips: usize,
    pub test_clips: usize,
    pub shifted_clips: usize,
    pub mi_draws: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub strategies: Vec<StrategyReport>,
}

impl BiasReport {
    pub fn get(&self, strategy: &str) -> Option<&StrategyReport> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    /// Aligned plain-text table, one row per strategy.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "strategy", "train", "in-dist", "shifted", "drop", "MI bits", "mean M"
        );
        for s in &self.strategies {
            let _ = writeln!(
                out,
                "{:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.4} {:>8.2}",
                s.strategy,
                s.train_accuracy,
                s.in_accuracy,
                s.shifted_accuracy,
                s.degradation,
                s.mi_bits,
                s.mean_observed
            );
        }
        let _ = writeln!(
            out,
            "train {} / test {} / shifted {} clips, {} MI draws, N in [{}, {}], seed {}",
            self.train_clips, self.test_clips, self.shifted_clips, self.mi_draws, self.n_min, self.n_max, self.seed
        );
        out
    }
}

struct Splits {
    train: Vec<SyntheticClip>,
    test: Vec<SyntheticClip>,
    shifted: Vec<SyntheticClip>,
}

fn make_splits(config: &Config) -> Splits {
    let b = &config.bias;
    let mut rng = Rng::derive(config.seed, 0);
    let signals = class_signals(b.classes.len(), config.head_dim, &mut rng);
    let mut spec = SyntheticSpec {
        lengths: b.classes.clone(),
        dim: config.head_dim,
        signal: b.signal,
        frame_level: b.frame_level,
        per_class: b.samples_per_class,
    };
    let train = generate_dataset(&spec, &signals, &mut rng);
    spec.per_class = b.test_per_class;
    let test = generate_dataset(&spec, &signals, &mut rng);
    spec.lengths.rotate_left(1);
    let shifted = generate_dataset(&spec, &signals, &mut rng);
    Splits { train, test, shifted }
}

fn sample_all(
    clips: &[SyntheticClip],
    strategy: &dyn SamplingStrategy,
    params: &SamplingParams,
    stats: &DatasetStats,
    t_len: usize,
    normalize: bool,
    rng: &mut Rng,
) -> Result<Vec<(FeatureSequence, usize)>> {
    clips
        .iter()
        .map(|clip| {
            let plan = strategy.plan(clip.len(), params, Some(stats), rng)?;
            Ok((sequence_from_plan(clip.frames.view(), &plan, t_len, normalize)?, clip.label))
        })
        .collect()
}

fn run_strategy(
    config: &Config,
    splits: &Splits,
    strategy: &dyn SamplingStrategy,
    stats: &DatasetStats,
    index: u64,
) -> Result<StrategyReport> {
    let b = &config.bias;
    let params = config.sampling();
    let head = HeadConfig::new(config.head_dim, config.head_heads, b.classes.len(), config.head_tlen)?;
    let focal = FocalConfig::uniform(head.classes, config.focal_gamma, config.focal_alpha)?;
    let mut rng = Rng::derive(config.seed, index);

    let mut train = Vec::with_capacity(splits.train.len() * b.train_draws);
    for _ in 0..b.train_draws {
        train.extend(sample_all(&splits.train, strategy, &params, stats, head.t_len, b.normalize, &mut rng)?);
    }
    let settings = TrainSettings {
        epochs: b.epochs,
        lr_max: config.head_lr,
    };
    let (weights, history) = train_head(&train, &head, &focal, &settings, &mut rng)?;

    let mut accuracy = |clips: &[SyntheticClip]| -> Result<f64> {
        let seqs = sample_all(clips, strategy, &params, stats, head.t_len, b.normalize, &mut rng)?;
        let mut correct = 0;
        for (seq, label) in &seqs {
            correct += usize::from(argmax(&predict(seq, &weights, &head)?) == *label);
        }
        Ok(correct as f64 / seqs.len().max(1) as f64)
    };
    let in_accuracy = accuracy(&splits.test)?;
    let shifted_accuracy = accuracy(&splits.shifted)?;

    // Leakage of the strategy under the length distributions: every draw
    // takes a fresh length as well as a fresh plan.
    let classes = b.classes.len();
    let mut pairs = Vec::with_capacity(b.mi_draws);
    for d in 0..b.mi_draws {
        let label = d % classes;
        let n = b.classes[label].draw(&mut rng);
        let plan = strategy.plan(n, &params, Some(stats), &mut rng)?;
        pairs.push((plan.observed_length(), label));
    }
    let mean_observed = pairs.iter().map(|p| p.0 as f64).sum::<f64>() / pairs.len() as f64;

    Ok(StrategyReport {
        strategy: strategy.name().to_string(),
        train_accuracy: history.last().map_or(0.0, |h| h.accuracy),
        in_accuracy,
        shifted_accuracy,
        degradation: in_accuracy - shifted_accuracy,
        mi_bits: mutual_information(&pairs),
        mean_observed,
    })
}

/// Train and probe the head on synthetic clips whose class is carried only
/// by their length (when the content signal is zero), once per sampling
/// strategy. Strategies run in parallel on independent derived streams.
pub fn run_bias_experiment(config: &Config, registry: &StrategyRegistry) -> Result<BiasReport> {
    config.validate()?;
    let b = &config.bias;
    let strategies = b
        .strategies
        .iter()
        .map(|name| registry.get(name))
        .collect::<Result<Vec<_>>>()?;
    let splits = make_splits(config);
    let observed = DatasetStats::from_lengths(splits.train.iter().map(|c| c.len())).expect("non-empty training split");
    let stats = DatasetStats {
        n_min: b.n_min.unwrap_or(observed.n_min),
        n_max: b.n_max.unwrap_or(observed.n_max),
    };

    let reports = strategies
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_strategy(config, &splits, s.as_ref(), &stats, i as u64 + 1))
        .collect::<Result<Vec<_>>>()?;

    Ok(BiasReport {
        seed: config.seed,
        train_clips: splits.train.len(),
        test_clips: splits.test.len(),
        shifted_clips: splits.shifted.len(),
        mi_draws: b.mi_draws,
        n_min: stats.n_min,
        n_max: stats.n_max,
        strategies: reports,
    })
}
