use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_curves, grad_total, CurveParamMap, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::media::{Image, VideoClip};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceSettings {
    pub weights: LossWeights,
    pub iters: usize,
    pub steps: usize,
    pub lr: f64,
}

impl Default for EnhanceSettings {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            iters: 8,
            steps: 200,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnhanceResult {
    pub enhanced: Image,
    pub curves: CurveParamMap,
    /// Loss before the first update and after each of the `steps` updates.
    pub trace: Vec<LossBreakdown>,
}

impl EnhanceResult {
    pub fn initial(&self) -> &LossBreakdown {
        &self.trace[0]
    }

    pub fn last(&self) -> &LossBreakdown {
        self.trace.last().expect("trace is never empty")
    }
}

/// Fits curve parameters to one image with Adam, starting from the
/// identity curve and clamping to `[-1, 1]` after every step.
pub fn enhance_image(img: &Image, settings: &EnhanceSettings) -> Result<EnhanceResult> {
    if settings.steps == 0 {
        return Err(Error::Param("enhancement needs at least one step".into()));
    }
    let (h, w) = img.dims();
    let mut curves = CurveParamMap::zeros(settings.iters, h, w);
    let mut m = vec![0.0; curves.values().len()];
    let mut v = vec![0.0; curves.values().len()];
    let mut trace = Vec::with_capacity(settings.steps + 1);

    for step in 0..=settings.steps {
        let (parts, grad) = grad_total(img, &curves, &settings.weights)?;
        if !parts.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical {
                step,
                message: format!("non-finite loss {:?}", parts.total),
            });
        }
        trace.push(parts);
        if step == settings.steps {
            break;
        }
        let t = (step + 1) as i32;
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);
        curves.update_clamped(|i, a| {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            a - settings.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + EPS)
        });
    }

    let enhanced = apply_curves(img, &curves)?;
    Ok(EnhanceResult {
        enhanced,
        curves,
        trace,
    })
}

/// Enhances every frame independently; results keep frame order and do not
/// depend on the rayon pool size.
pub fn enhance_clip(video: &VideoClip, settings: &EnhanceSettings) -> Result<Vec<EnhanceResult>> {
    video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, frame)| {
            enhance_image(frame, settings).map_err(|e| Error::Frame {
                index: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(steps: usize) -> EnhanceSettings {
        EnhanceSettings {
            steps,
            ..EnhanceSettings::default()
        }
    }

    #[test]
    fn well_exposed_gray_stays_put() {
        let img = Image::filled(16, 16, 0.6);
        let out = enhance_image(&img, &short(20)).unwrap();
        assert_eq!(out.trace.len(), 21);
        assert!(out.last().total <= out.initial().total);
        assert!(out.initial().total < 1e-12);
    }

    #[test]
    fn dark_image_gets_brighter() {
        let img = Image::filled(16, 16, 0.1);
        let out = enhance_image(&img, &short(60)).unwrap();
        assert!(out.last().exp < out.initial().exp);
        assert!(out.enhanced.mean_luminance() > 0.1);
    }

    #[test]
    fn deterministic() {
        let img = Image::from_fn(8, 8, |y, x, c| ((y * 8 + x + c) % 13) as f64 / 40.0).unwrap();
        let a = enhance_image(&img, &short(15)).unwrap();
        let b = enhance_image(&img, &short(15)).unwrap();
        assert_eq!(a.enhanced, b.enhanced);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn clip_matches_per_frame() {
        let frames = vec![Image::filled(8, 8, 0.1), Image::filled(8, 8, 0.3)];
        let clip = VideoClip::new(frames.clone()).unwrap();
        let out = enhance_clip(&clip, &short(10)).unwrap();
        assert_eq!(out.len(), 2);
        for (r, f) in out.iter().zip(&frames) {
            assert_eq!(r.enhanced, enhance_image(f, &short(10)).unwrap().enhanced);
        }
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(enhance_image(&Image::zeros(2, 2), &short(0)).is_err());
    }
}
