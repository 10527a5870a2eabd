use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::features::{sequence_from_plan, FeatureSequence};
use super::loss::{focal_loss, softmax, FocalConfig};
use super::model::{head_backward, head_forward, HeadConfig, HeadParams};
use super::optim::{one_cycle_lr, ranger_step, Ranger, RangerSettings};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampling::{tta_param_sets, SamplingParams};

pub const BATCH_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr_max: f64,
}

/// Loss and accuracy over the whole training set after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn argmax(v: &Array1<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

/// Mean focal loss and accuracy of `params` on `data`.
pub fn evaluate(
    data: &[(FeatureSequence, usize)],
    params: &HeadParams,
    cfg: &HeadConfig,
    focal: &FocalConfig,
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0;
    for (seq, label) in data {
        let (logits, _) = head_forward(seq, params, cfg)?;
        loss += focal_loss(logits.view(), *label, focal)?.0;
        correct += usize::from(argmax(&logits) == *label);
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch training with Ranger and the one-cycle schedule. Parameters are
/// initialised and the data shuffled every epoch from `rng`.
pub fn train_head(
    data: &[(FeatureSequence, usize)],
    cfg: &HeadConfig,
    focal: &FocalConfig,
    settings: &TrainSettings,
    rng: &mut Rng,
) -> Result<(HeadParams, Vec<EpochStats>)> {
    if data.is_empty() {
        return Err(Error::Param("training set is empty".into()));
    }
    if let Some((_, label)) = data.iter().find(|(_, l)| *l >= cfg.classes) {
        return Err(Error::Param(format!("label {label} out of range for {} classes", cfg.classes)));
    }
    let mut params = HeadParams::init(cfg, rng);
    let mut opt = Ranger::new(RangerSettings::default(), &params.tensors());
    let per_epoch = data.len().div_ceil(BATCH_SIZE);
    let total = settings.epochs * per_epoch;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(settings.epochs);
    let mut step = 0;
    for epoch in 1..=settings.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(BATCH_SIZE) {
            let mut grads = HeadParams::zeros(cfg);
            let mut loss = 0.0;
            for &i in batch {
                let (seq, label) = &data[i];
                let (logits, cache) = head_forward(seq, &params, cfg)?;
                let (l, dlogits) = focal_loss(logits.view(), *label, focal)?;
                loss += l;
                let g = head_backward(&cache, &params, dlogits.view());
                for (mut acc, part) in grads.tensors_mut().into_iter().zip(g.tensors()) {
                    acc += &part;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            if !(loss * scale).is_finite() {
                return Err(Error::Numerical {
                    step,
                    message: "non-finite training loss".into(),
                });
            }
            for mut t in grads.tensors_mut() {
                t *= scale;
            }
            ranger_step(&mut params, &grads, &mut opt, one_cycle_lr(step, total, settings.lr_max));
            step += 1;
        }
        let (loss, accuracy) = evaluate(data, &params, cfg, focal)?;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Numerical {
                step,
                message: "training diverged".into(),
            });
        }
        history.push(EpochStats { epoch, loss, accuracy });
    }
    Ok((params, history))
}

/// Class probabilities for one sequence.
pub fn predict(seq: &FeatureSequence, params: &HeadParams, cfg: &HeadConfig) -> Result<Array1<f64>> {
    let (logits, _) = head_forward(seq, params, cfg)?;
    Ok(softmax(logits.view()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

/// Average of the class probabilities over `count` delta-sampling draws of
/// a clip given as per-frame features `[N, D]`.
pub fn predict_tta(
    frames: ArrayView2<f64>,
    params: &HeadParams,
    cfg: &HeadConfig,
    sampling: &SamplingParams,
    normalize: bool,
    rng: &mut Rng,
    count: usize,
) -> Result<Prediction> {
    if count == 0 {
        return Err(Error::Param("need at least one test-time draw".into()));
    }
    let mut sum = Array1::zeros(cfg.classes);
    for (_, plan) in tta_param_sets(frames.nrows(), sampling, rng, count)? {
        let seq = sequence_from_plan(frames, &plan, cfg.t_len, normalize)?;
        sum += &predict(&seq, params, cfg)?;
    }
    let avg = sum / count as f64;
    Ok(Prediction {
        class: argmax(&avg),
        probabilities: avg.to_vec(),
    })
}
