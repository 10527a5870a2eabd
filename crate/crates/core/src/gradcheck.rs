//! Analytic gradients against central finite differences.
//!
//! The oracle side only ever evaluates loss values; it never touches the
//! backward code it is checking.

use rayon::prelude::*;
use serde::Serialize;

use crate::enhance::{self, LossWeights};
use crate::head::{self, FeatureSequence, FocalConfig, HeadConfig, HeadParams};
use crate::error::Result;
use crate::rng::Rng;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

/// Image side used by the enhancement check.
pub const ENHANCE_SIDE: usize = 16;
pub const ENHANCE_ITERS: usize = 8;

/// Minimum distance from any `|.|` kink accepted in a random instance.
const KINK_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub suite: String,
    pub trials: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradcheckReport {
    fn new(suite: &str, trials: usize, checked: usize, max_rel_error: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            trials,
            checked,
            max_rel_error,
            tolerance,
            passed: max_rel_error < tolerance,
        }
    }
}

/// `|a - b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of `f` around `x`, one coordinate at a time.
pub fn central_differences(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = f(&probe);
            probe[i] = orig - step;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// A random image and curve map kept away from every non-differentiable
/// point of the loss.
#[derive(Debug, Clone)]
pub struct EnhanceInstance {
    pub image: Vec<f64>,
    pub curves: Vec<f64>,
    pub side: usize,
    pub iters: usize,
}

fn region_luminance_means(data: &[f64], side: usize, region: usize) -> Vec<f64> {
    let cells = side.div_ceil(region);
    let mut out = vec![0.0; cells * cells];
    let mut counts = vec![0usize; cells * cells];
    for y in 0..side {
        for x in 0..side {
            let i = (y / region) * cells + x / region;
            let p = (y * side + x) * 3;
            out[i] += (data[p] + data[p + 1] + data[p + 2]) / 3.0;
            counts[i] += 1;
        }
    }
    out.iter().zip(counts).map(|(s, c)| s / c as f64).collect()
}

fn near_kink(instance: &EnhanceInstance, weights: &LossWeights) -> bool {
    let (side, iters) = (instance.side, instance.iters);
    let per_map = side * side * 3;
    for n in 0..iters {
        for y in 0..side {
            for x in 0..side {
                for c in 0..3 {
                    let at = |yy: usize, xx: usize| instance.curves[n * per_map + (yy * side + xx) * 3 + c];
                    if x + 1 < side && (at(y, x + 1) - at(y, x)).abs() < KINK_MARGIN {
                        return true;
                    }
                    if y + 1 < side && (at(y + 1, x) - at(y, x)).abs() < KINK_MARGIN {
                        return true;
                    }
                }
            }
        }
    }
    let mut enhanced = instance.image.clone();
    for a in instance.curves.chunks_exact(per_map) {
        for (v, a) in enhanced.iter_mut().zip(a) {
            *v += a * *v * (1.0 - *v);
        }
    }
    let exposure = region_luminance_means(&enhanced, side, enhance::EXPOSURE_REGION);
    if exposure.iter().any(|m| (m - weights.exposure_e).abs() < KINK_MARGIN) {
        return true;
    }
    let cells = side.div_ceil(enhance::SPATIAL_REGION);
    for means in [
        region_luminance_means(&instance.image, side, enhance::SPATIAL_REGION),
        region_luminance_means(&enhanced, side, enhance::SPATIAL_REGION),
    ] {
        for i in 0..means.len() {
            let (gy, gx) = (i / cells, i % cells);
            if gx + 1 < cells && (means[i + 1] - means[i]).abs() < KINK_MARGIN {
                return true;
            }
            if gy + 1 < cells && (means[i + cells] - means[i]).abs() < KINK_MARGIN {
                return true;
            }
        }
    }
    false
}

/// Double-double accumulator: `hi + lo` carries about 106 bits.
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add(self, x: f64) -> Self {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        Self { hi: s, lo: self.lo + err }.renorm()
    }

    fn add_dd(self, other: Dd) -> Self {
        let s = self.add(other.hi);
        Self { hi: s.hi, lo: s.lo + other.lo }.renorm()
    }

    fn scale(self, k: f64) -> Self {
        let p = self.hi * k;
        let e = self.hi.mul_add(k, -p);
        Self { hi: p, lo: e + self.lo * k }.renorm()
    }

    fn div(self, k: f64) -> Self {
        let q = self.hi / k;
        let r = (-q).mul_add(k, self.hi);
        Self { hi: q, lo: (r + self.lo) / k }.renorm()
    }

    fn renorm(self) -> Self {
        let s = self.hi + self.lo;
        Self { hi: s, lo: self.lo - (s - self.hi) }
    }

    fn sum(values: impl IntoIterator<Item = f64>) -> Self {
        values.into_iter().fold(Dd::default(), Dd::add)
    }
}

/// Straightforward re-statement of the total loss, accumulated in
/// double-double so that terms untouched by a perturbation cancel exactly
/// in a finite difference.
fn reference_loss(image: &[f64], curves: &[f64], iters: usize, side: usize, weights: &LossWeights) -> Dd {
    let n = side * side * 3;
    let mut y = image.to_vec();
    for k in 0..iters {
        for i in 0..n {
            let v = y[i];
            y[i] = v + curves[k * n + i] * (v * (1.0 - v));
        }
    }
    let lum = |data: &[f64], yy: usize, xx: usize| {
        let p = (yy * side + xx) * 3;
        (data[p] + data[p + 1] + data[p + 2]) / 3.0
    };

    // Spatial consistency; `side` is a multiple of the region so no padding.
    let r = enhance::SPATIAL_REGION;
    let cells = side / r;
    let region_mean = |data: &[f64], gy: usize, gx: usize| {
        Dd::sum((0..r * r).map(|k| lum(data, gy * r + k / r, gx * r + k % r))).div((r * r) as f64)
    };
    let mut mean_in = Vec::new();
    let mut mean_out = Vec::new();
    for gy in 0..cells {
        for gx in 0..cells {
            mean_in.push(region_mean(image, gy, gx));
            mean_out.push(region_mean(&y, gy, gx));
        }
    }
    let mut spa = Dd::default();
    for gy in 0..cells as isize {
        for gx in 0..cells as isize {
            let i = (gy * cells as isize + gx) as usize;
            for (dy, dx) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (ny, nx) = (gy + dy, gx + dx);
                if ny < 0 || nx < 0 || ny >= cells as isize || nx >= cells as isize {
                    continue;
                }
                let j = (ny * cells as isize + nx) as usize;
                let dout = mean_out[i].add_dd(mean_out[j].scale(-1.0));
                let din = mean_in[i].add_dd(mean_in[j].scale(-1.0));
                let d = dout.hi.abs() - din.hi.abs() + (dout.lo * dout.hi.signum() - din.lo * din.hi.signum());
                spa = spa.add(d * d);
            }
        }
    }
    let spa = spa.div((cells * cells) as f64);

    // Exposure over full-size regions.
    let er = enhance::EXPOSURE_REGION;
    let ecells = side.div_ceil(er);
    let mut exp = Dd::default();
    for gy in 0..ecells {
        for gx in 0..ecells {
            let (y1, x1) = (((gy + 1) * er).min(side), ((gx + 1) * er).min(side));
            let count = (y1 - gy * er) * (x1 - gx * er);
            let mut s = Dd::default();
            for yy in gy * er..y1 {
                for xx in gx * er..x1 {
                    s = s.add(lum(&y, yy, xx));
                }
            }
            let m = s.div(count as f64).add(-weights.exposure_e);
            exp = exp.add_dd(if m.hi < 0.0 { m.scale(-1.0) } else { m });
        }
    }
    let exp = exp.div((ecells * ecells) as f64);

    // Color constancy.
    let means: Vec<Dd> = (0..3)
        .map(|c| Dd::sum((0..side * side).map(|p| y[p * 3 + c])).div((side * side) as f64))
        .collect();
    let mut col = Dd::default();
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let d = means[p].add_dd(means[q].scale(-1.0));
        col = col.add(d.hi * d.hi).add(2.0 * d.hi * d.lo);
    }

    // Illumination smoothness.
    let mut tv = Dd::default();
    for k in 0..iters {
        for yy in 0..side {
            for xx in 0..side {
                for c in 0..3 {
                    let at = |a: usize, b: usize| curves[k * n + (a * side + b) * 3 + c];
                    let gx = if xx + 1 < side { at(yy, xx + 1) - at(yy, xx) } else { 0.0 };
                    let gy = if yy + 1 < side { at(yy + 1, xx) - at(yy, xx) } else { 0.0 };
                    let s = gx.abs() + gy.abs();
                    tv = tv.add(s * s);
                }
            }
        }
    }
    let tv = tv.div((iters * side * side) as f64);

    spa.scale(weights.w_spa)
        .add_dd(exp)
        .add_dd(col.scale(weights.w_col))
        .add_dd(tv.scale(weights.w_tv))
}

impl EnhanceInstance {
    pub fn random(rng: &mut Rng, weights: &LossWeights) -> Self {
        let side = ENHANCE_SIDE;
        let iters = ENHANCE_ITERS;
        loop {
            let image = (0..side * side * 3).map(|_| rng.uniform_range(0.02, 0.98)).collect();
            let curves = (0..iters * side * side * 3).map(|_| rng.uniform_range(-0.9, 0.9)).collect();
            let instance = Self {
                image,
                curves,
                side,
                iters,
            };
            if !near_kink(&instance, weights) {
                return instance;
            }
        }
    }

    /// Total loss from the independent reference evaluation.
    pub fn loss(&self, curves: &[f64], weights: &LossWeights) -> f64 {
        let dd = reference_loss(&self.image, curves, self.iters, self.side, weights);
        dd.hi + dd.lo
    }

    pub fn numeric_gradient(&self, weights: &LossWeights) -> Vec<f64> {
        let mut probe = self.curves.clone();
        (0..probe.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + FD_STEP;
                let up = reference_loss(&self.image, &probe, self.iters, self.side, weights);
                probe[i] = orig - FD_STEP;
                let down = reference_loss(&self.image, &probe, self.iters, self.side, weights);
                probe[i] = orig;
                ((up.hi - down.hi) + (up.lo - down.lo)) / (2.0 * FD_STEP)
            })
            .collect()
    }
}

fn max_error(analytic: impl IntoIterator<Item = f64>, numeric: &[f64]) -> f64 {
    analytic
        .into_iter()
        .zip(numeric)
        .map(|(a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Enhancement-loss gradient at 64-bit precision over `trials` random
/// 16x16 instances.
pub fn check_enhancement(trials: usize, seed: u64, tolerance: f64) -> Result<GradcheckReport> {
    let weights = LossWeights::default();
    let instances = draw_instances(trials, seed, &weights);
    let errors = instances
        .par_iter()
        .map(|inst| {
            let img = crate::Image::new(inst.side, inst.side, inst.image.clone())?;
            let curves = enhance::CurveParamMap::new(inst.iters, inst.side, inst.side, inst.curves.clone())?;
            let (_, analytic) = enhance::grad_total(&img, &curves, &weights)?;
            let numeric = inst.numeric_gradient(&weights);
            Ok((max_error(analytic, &numeric), numeric.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize("enhance-f64", trials, &errors, tolerance))
}

/// Single-precision analytic gradient against the 64-bit finite-difference
/// oracle, both evaluated at the same single-precision inputs.
pub fn check_enhancement_f32(trials: usize, seed: u64, tolerance: f64) -> Result<GradcheckReport> {
    let weights = LossWeights::default();
    let instances = draw_instances(trials, seed, &weights);
    let errors: Vec<_> = instances
        .into_par_iter()
        .map(|mut inst| {
            let image: Vec<f32> = inst.image.iter().map(|&v| v as f32).collect();
            let curves: Vec<f32> = inst.curves.iter().map(|&v| v as f32).collect();
            inst.image = image.iter().map(|&v| v as f64).collect();
            inst.curves = curves.iter().map(|&v| v as f64).collect();
            let (_, analytic) = enhance::grad_total_f32(&image, &curves, inst.iters, inst.side, inst.side, &weights);
            let numeric = inst.numeric_gradient(&weights);
            (max_error(analytic.iter().map(|&g| g as f64), &numeric), numeric.len())
        })
        .collect();
    Ok(summarize("enhance-f32", trials, &errors, tolerance))
}

fn draw_instances(trials: usize, seed: u64, weights: &LossWeights) -> Vec<EnhanceInstance> {
    let mut rng = Rng::new(seed);
    (0..trials).map(|_| EnhanceInstance::random(&mut rng, weights)).collect()
}

fn summarize(suite: &str, trials: usize, errors: &[(f64, usize)], tolerance: f64) -> GradcheckReport {
    let worst = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let checked = errors.iter().map(|e| e.1).sum();
    GradcheckReport::new(suite, trials, checked, worst, tolerance)
}

/// Full-parameter check of the temporal head under the focal loss at
/// `T'=4, D=8, h=2, C=3`.
pub fn check_head(trials: usize, seed: u64, tolerance: f64) -> Result<GradcheckReport> {
    let cfg = HeadConfig::new(8, 2, 3, 4)?;
    let focal = FocalConfig::new(2.0, vec![1.0, 0.5, 2.0])?;
    let mut rng = Rng::new(seed);
    let mut errors = Vec::with_capacity(trials);
    for _ in 0..trials {
        let params = HeadParams::uniform(&cfg, 0.5, &mut rng);
        let values = ndarray::Array2::from_shape_fn((cfg.t_len, cfg.dim), |_| rng.uniform_range(-1.0, 1.0));
        let seq = FeatureSequence::dense(values)?;
        let label = rng.below(cfg.classes);

        let (logits, cache) = head::head_forward(&seq, &params, &cfg)?;
        let (_, dlogits) = head::focal_loss(logits.view(), label, &focal)?;
        let grads = head::head_backward(&cache, &params, dlogits.view());

        let loss = |p: &HeadParams| -> Result<f64> {
            let (z, _) = head::head_forward(&seq, p, &cfg)?;
            Ok(head::focal_loss(z.view(), label, &focal)?.0)
        };
        let mut probe = params.clone();
        let mut worst = 0.0f64;
        let mut checked = 0;
        for (t, analytic) in grads.tensors().iter().enumerate() {
            for (i, &a) in analytic.iter().enumerate() {
                let orig = params.tensors()[t].iter().nth(i).copied().unwrap_or_default();
                let set = |p: &mut HeadParams, v: f64| {
                    if let Some(x) = p.tensors_mut()[t].iter_mut().nth(i) {
                        *x = v;
                    }
                };
                set(&mut probe, orig + FD_STEP);
                let up = loss(&probe)?;
                set(&mut probe, orig - FD_STEP);
                let down = loss(&probe)?;
                set(&mut probe, orig);
                worst = worst.max(relative_error(a, (up - down) / (2.0 * FD_STEP)));
                checked += 1;
            }
        }
        errors.push((worst, checked));
    }
    Ok(summarize("head-f64", trials, &errors, tolerance))
}
