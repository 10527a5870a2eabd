use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Low-light action recognition toolkit.
#[derive(Debug, Parser)]
#[command(name = "lowlight", version)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Zero-reference curve enhancement of every frame.
    Enhance(EnhanceArgs),
    /// Gamma correction baseline.
    Gamma(GammaArgs),
    /// Resample a clip to a fixed number of frames.
    Sample(SampleArgs),
    /// Per-frame grid descriptors as an `[N, D]` tensor.
    Featurize(FeaturizeArgs),
    /// Train the temporal head on featurized clips.
    TrainHead(TrainHeadArgs),
    /// Classify a clip with test-time augmentation.
    Predict(PredictArgs),
    /// Clip-length leakage experiment over sampling strategies.
    BiasExperiment(BiasArgs),
    /// Analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    w_spa: Option<f64>,
    #[arg(long)]
    w_col: Option<f64>,
    #[arg(long)]
    w_tv: Option<f64>,
    /// Target exposure level.
    #[arg(long = "e")]
    exposure: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GammaArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    g: f64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "delta")]
    strategy: String,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Dataset maximum length (defaults to this clip's length).
    #[arg(long)]
    nmax: Option<usize>,
    /// Dataset minimum length (defaults to this clip's length).
    #[arg(long)]
    nmin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainHeadArgs {
    /// Directory with `labels.json` mapping feature files to class indices.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    tta: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BiasArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol_enhance: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_head: f64,
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::CheckFailed) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA })
        }
    }
}
