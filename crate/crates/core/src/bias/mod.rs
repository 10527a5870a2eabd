//! Synthetic check of clip-length leakage through frame sampling.

mod experiment;
mod mi;
mod settings;
mod synthetic;

pub use experiment::{run_bias_experiment, BiasReport, StrategyReport};
pub use mi::{mutual_information, observed_length};
pub use settings::{BiasSettings, LengthDist};
pub use synthetic::{class_signals, generate_dataset, separable_dataset, SyntheticClip, SyntheticSpec};
