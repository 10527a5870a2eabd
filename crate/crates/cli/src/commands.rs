use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lowlight::bias::run_bias_experiment;
use lowlight::enhance::{enhance_clip, gamma_correct, EnhanceSettings, LossBreakdown};
use lowlight::gradcheck::{check_enhancement, check_head, GradcheckReport};
use lowlight::head::{
    clip_descriptors, load_model, predict_tta, save_model, sequence_from_plan, train_head, FeatureSequence,
    FocalConfig, HeadConfig, HeadModel, TrainSettings,
};
use lowlight::media::{decode_tensor, encode_tensor, load_config, load_video, save_frames, TensorFile};
use lowlight::sampling::{sample_clip, tta_param_sets, DatasetStats, StrategyRegistry};
use lowlight::{Config, Error, Result, Rng};
use ndarray::Array2;
use serde::Serialize;

use crate::{BiasArgs, Cli, Command, EnhanceArgs, FeaturizeArgs, GammaArgs, GradcheckArgs, PredictArgs, SampleArgs, TrainHeadArgs};

pub enum Outcome {
    Success,
    /// A verification suite ran but did not meet its tolerance.
    CheckFailed,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => Config::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Param(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Enhance(a) => enhance(a, config),
        Command::Gamma(a) => gamma(a),
        Command::Sample(a) => sample(a, config),
        Command::Featurize(a) => featurize(a, config),
        Command::TrainHead(a) => train(a, config),
        Command::Predict(a) => predict(a, config),
        Command::BiasExperiment(a) => bias(a, config),
        Command::Gradcheck(a) => gradcheck(a, config),
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct FrameLosses {
    frame: usize,
    initial: LossBreakdown,
    #[serde(rename = "final")]
    last: LossBreakdown,
}

fn enhance(a: EnhanceArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.enhance_steps, a.steps);
    set(&mut config.enhance_lr, a.lr);
    set(&mut config.w_spa, a.w_spa);
    set(&mut config.w_col, a.w_col);
    set(&mut config.w_tv, a.w_tv);
    set(&mut config.exposure_e, a.exposure);
    set(&mut config.seed, a.seed);
    config.validate()?;
    let video = load_video(&a.input)?;
    let settings = EnhanceSettings {
        weights: config.loss_weights(),
        iters: config.curve_iters,
        steps: config.enhance_steps,
        lr: config.enhance_lr,
    };
    let results = enhance_clip(&video, &settings)?;
    let frames: Vec<_> = results.iter().map(|r| r.enhanced.clone()).collect();
    save_frames(&a.out, &frames)?;
    let losses: Vec<_> = results
        .iter()
        .enumerate()
        .map(|(i, r)| FrameLosses {
            frame: i + 1,
            initial: *r.initial(),
            last: *r.last(),
        })
        .collect();
    write_json(&a.out.join("losses.json"), &losses)?;
    println!("enhanced {} frames into {}", frames.len(), a.out.display());
    Ok(Outcome::Success)
}

fn gamma(a: GammaArgs) -> Result<Outcome> {
    let video = load_video(&a.input)?;
    let frames = video
        .frames()
        .iter()
        .map(|f| gamma_correct(f, a.g))
        .collect::<Result<Vec<_>>>()?;
    save_frames(&a.out, &frames)?;
    println!("gamma {} applied to {} frames", a.g, frames.len());
    Ok(Outcome::Success)
}

fn sample(a: SampleArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.t_frames, a.t);
    set(&mut config.beta, a.beta);
    set(&mut config.gamma_max, a.gamma_max);
    set(&mut config.alpha, a.alpha);
    set(&mut config.seed, a.seed);
    config.validate()?;
    let strategy = StrategyRegistry::builtin().get(&a.strategy)?;
    let video = load_video(&a.input)?;
    let n = video.n_frames();
    let stats = DatasetStats {
        n_min: a.nmin.unwrap_or(n),
        n_max: a.nmax.unwrap_or(n),
    };
    let mut rng = Rng::new(config.seed);
    let (clip, plan) = sample_clip(&video, strategy.as_ref(), &config.sampling(), Some(&stats), &mut rng)?;
    save_frames(&a.out, &clip.frames)?;
    write_json(&a.out.join("plan.json"), &plan)?;
    println!(
        "{} frames ({} from the clip, p1 {}, p2 {}) into {}",
        clip.frames.len(),
        plan.observed_length(),
        plan.p1,
        plan.p2,
        a.out.display()
    );
    Ok(Outcome::Success)
}

fn featurize(a: FeaturizeArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.grid, a.grid);
    config.validate()?;
    let video = load_video(&a.input)?;
    let features = clip_descriptors(video.frames(), config.grid)?;
    write_features(&a.out, &features)?;
    println!("{} x {} features into {}", features.nrows(), features.ncols(), a.out.display());
    Ok(Outcome::Success)
}

fn write_features(path: &Path, features: &Array2<f64>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let tensor = TensorFile::f64(vec![features.nrows(), features.ncols()], features.iter().copied().collect())?;
    fs::write(path, encode_tensor(&tensor)).map_err(|e| Error::io(path, e))
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let tensor = decode_tensor(&bytes)?;
    match tensor.dims[..] {
        [n, d] if n > 0 && d > 0 => Array2::from_shape_vec((n, d), tensor.to_f64())
            .map_err(|e| Error::DimMismatch(format!("{}: {e}", path.display()))),
        _ => Err(Error::DimMismatch(format!(
            "{}: expected a non-empty [N, D] tensor, got {:?}",
            path.display(),
            tensor.dims
        ))),
    }
}

/// Grid side whose descriptor width is `dim`.
fn grid_for(dim: usize) -> Result<usize> {
    let g = ((dim / 3) as f64).sqrt().round() as usize;
    if g >= 1 && 3 * g * g == dim {
        Ok(g)
    } else {
        Err(Error::DimMismatch(format!("feature width {dim} is not 3 * grid^2")))
    }
}

fn train(a: TrainHeadArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.head_epochs, a.epochs);
    set(&mut config.seed, a.seed);
    config.validate()?;
    let labels_path = a.data.join("labels.json");
    let text = fs::read_to_string(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let labels: BTreeMap<String, usize> = serde_json::from_str(&text)?;
    if labels.is_empty() {
        return Err(Error::Ingest("labels.json lists no clips".into()));
    }
    let clips = labels
        .iter()
        .map(|(file, &label)| Ok((read_features(&a.data.join(file))?, label)))
        .collect::<Result<Vec<_>>>()?;
    let dim = clips[0].0.ncols();
    if let Some((f, _)) = clips.iter().find(|(f, _)| f.ncols() != dim) {
        return Err(Error::DimMismatch(format!("feature widths {dim} and {} differ", f.ncols())));
    }
    let grid = grid_for(dim)?;
    let classes = labels.values().max().map_or(0, |m| m + 1).max(2);
    let head = HeadConfig::new(dim, config.head_heads, classes, config.head_tlen)?;
    let focal = FocalConfig::uniform(classes, config.focal_gamma, config.focal_alpha)?;

    // Each clip contributes several delta-sampling draws.
    let mut rng = Rng::new(config.seed);
    let sampling = config.sampling();
    let mut data: Vec<(FeatureSequence, usize)> = Vec::new();
    for (features, label) in &clips {
        for (_, plan) in tta_param_sets(features.nrows(), &sampling, &mut rng, config.tta_count)? {
            data.push((sequence_from_plan(features.view(), &plan, head.t_len, true)?, *label));
        }
    }
    let settings = TrainSettings {
        epochs: config.head_epochs,
        lr_max: config.head_lr,
    };
    let (params, history) = train_head(&data, &head, &focal, &settings, &mut rng)?;
    let model = HeadModel {
        config: head,
        grid,
        normalize: true,
        params,
    };
    save_model(&a.out, &model)?;
    write_json(&a.out.join("history.json"), &history)?;
    if let Some(last) = history.last() {
        println!(
            "trained on {} clips ({} sequences): loss {:.6}, accuracy {:.3}",
            clips.len(),
            data.len(),
            last.loss,
            last.accuracy
        );
    }
    Ok(Outcome::Success)
}

fn predict(a: PredictArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.tta_count, a.tta);
    set(&mut config.seed, a.seed);
    config.validate()?;
    let model = load_model(&a.model)?;
    let video = load_video(&a.input)?;
    let features = clip_descriptors(video.frames(), model.grid)?;
    let prediction = predict_tta(
        features.view(),
        &model.params,
        &model.config,
        &config.sampling(),
        model.normalize,
        &mut Rng::new(config.seed),
        config.tta_count,
    )?;
    println!("{}", serde_json::to_string(&prediction)?);
    Ok(Outcome::Success)
}

fn bias(a: BiasArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.seed, a.seed);
    let report = run_bias_experiment(&config, &StrategyRegistry::builtin())?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(&a.out, &report)?;
    print!("{}", report.table());
    Ok(Outcome::Success)
}

fn gradcheck(a: GradcheckArgs, mut config: Config) -> Result<Outcome> {
    set(&mut config.seed, a.seed);
    if a.trials == 0 {
        return Err(Error::Param("--trials must be >= 1".into()));
    }
    let reports: Vec<GradcheckReport> = vec![
        check_enhancement(a.trials, config.seed, a.tol_enhance)?,
        check_head(a.trials, config.seed, a.tol_head)?,
    ];
    for r in &reports {
        println!(
            "{:<12} {} trials, {} gradients, max relative error {:.3e} (tolerance {:.0e}): {}",
            r.suite,
            r.trials,
            r.checked,
            r.max_rel_error,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    Ok(if reports.iter().all(|r| r.passed) {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}
