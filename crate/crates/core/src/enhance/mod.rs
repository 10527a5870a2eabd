//! Zero-reference low-light enhancement.
//!
//! An image is brightened by iterating the quadratic curve
//! `x <- x + a * x * (1 - x)` with a separate `a` per iteration, pixel and
//! channel. The curve parameters are fitted per image by gradient descent on
//! a weighted sum of four self-supervised losses: spatial consistency,
//! exposure control, color constancy and smoothness of the parameter maps.

mod curve;
mod gamma;
mod kernel;
mod optimize;

pub use curve::{apply_curves, CurveParamMap};
pub use gamma::gamma_correct;
pub use kernel::{EXPOSURE_REGION, SPATIAL_REGION};
pub use optimize::{enhance_clip, enhance_image, EnhanceResult, EnhanceSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_spa: f64,
    pub w_col: f64,
    pub w_tv: f64,
    /// Target regional luminance.
    pub exposure_e: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_spa: 10.0,
            w_col: 5.0,
            w_tv: 200.0,
            exposure_e: 0.6,
        }
    }
}

/// The four loss terms and their weighted total. The exposure term enters
/// the total unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub spa: f64,
    pub exp: f64,
    pub col: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn combine(weights: &LossWeights, spa: f64, exp: f64, col: f64, tv: f64) -> Self {
        Self {
            spa,
            exp,
            col,
            tv,
            total: weights.w_spa * spa + exp + weights.w_col * col + weights.w_tv * tv,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.spa, self.exp, self.col, self.tv, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch(format!(
            "images are {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Spatial consistency between input `input` and enhanced `enhanced`, over
/// 4x4 regions of channel-mean luminance.
pub fn loss_spatial(input: &Image, enhanced: &Image) -> Result<f64> {
    loss_spatial_with_region(input, enhanced, SPATIAL_REGION)
}

pub fn loss_spatial_with_region(input: &Image, enhanced: &Image, region: usize) -> Result<f64> {
    same_dims(input, enhanced)?;
    let (h, w) = input.dims();
    Ok(kernel::spatial(input.data(), enhanced.data(), h, w, region))
}

/// Mean distance of 16x16 regional luminance from `e`.
pub fn loss_exposure(enhanced: &Image, e: f64) -> f64 {
    loss_exposure_with_region(enhanced, e, EXPOSURE_REGION)
}

pub fn loss_exposure_with_region(enhanced: &Image, e: f64, region: usize) -> f64 {
    let (h, w) = enhanced.dims();
    kernel::exposure(enhanced.data(), h, w, e, region)
}

/// Squared pairwise differences of the whole-image channel means.
pub fn loss_color(enhanced: &Image) -> f64 {
    let (h, w) = enhanced.dims();
    kernel::color(enhanced.data(), h, w)
}

/// Illumination smoothness of the curve parameters.
pub fn loss_tv(curves: &CurveParamMap) -> f64 {
    kernel::tv(curves.values(), curves.iters(), curves.height(), curves.width())
}

pub fn loss_total(input: &Image, curves: &CurveParamMap, weights: &LossWeights) -> Result<LossBreakdown> {
    let enhanced = apply_curves(input, curves)?;
    Ok(LossBreakdown::combine(
        weights,
        loss_spatial(input, &enhanced)?,
        loss_exposure(&enhanced, weights.exposure_e),
        loss_color(&enhanced),
        loss_tv(curves),
    ))
}

/// Gradient of the total loss with respect to every curve parameter,
/// laid out like [`CurveParamMap::values`].
pub fn grad_total(
    input: &Image,
    curves: &CurveParamMap,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    curves.check_matches(input)?;
    let (h, w) = input.dims();
    let (parts, grad) = kernel::total_and_grad(input.data(), curves.values(), curves.iters(), h, w, weights);
    Ok((parts.to_breakdown(weights), grad))
}

/// Single-precision version of [`grad_total`] for precision comparisons.
pub fn grad_total_f32(
    input: &[f32],
    curves: &[f32],
    iters: usize,
    height: usize,
    width: usize,
    weights: &LossWeights,
) -> (f32, Vec<f32>) {
    let (parts, grad) = kernel::total_and_grad(input, curves, iters, height, width, weights);
    (parts.total(weights), grad)
}

/// Total loss in any float width, without the gradient.
pub fn loss_total_raw<F: num_traits::Float>(
    input: &[F],
    curves: &[F],
    iters: usize,
    height: usize,
    width: usize,
    weights: &LossWeights,
) -> F {
    kernel::total(input, curves, iters, height, width, weights).total(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(h: usize, w: usize, v: f64) -> Image {
        Image::filled(h, w, v)
    }

    #[test]
    fn spatial_identities() {
        let img = Image::from_fn(8, 8, |y, x, c| ((y * 3 + x * 5 + c) % 7) as f64 / 7.0).unwrap();
        assert_eq!(loss_spatial(&img, &img).unwrap(), 0.0);
        let shifted = Image::from_fn(8, 8, |y, x, c| img.get(y, x, c) * 0.5 + 0.25).unwrap();
        let base = Image::from_fn(8, 8, |y, x, c| img.get(y, x, c) * 0.5).unwrap();
        assert!(loss_spatial(&base, &shifted).unwrap() < 1e-28);
    }

    #[test]
    fn spatial_hand_computed() {
        // 4x8 image: one row of two 4x4 regions.
        let input = Image::from_fn(4, 8, |_, x, _| if x < 4 { 0.2 } else { 0.4 }).unwrap();
        let enhanced = Image::from_fn(4, 8, |_, x, _| if x < 4 { 0.3 } else { 0.6 }).unwrap();
        let l = loss_spatial(&input, &enhanced).unwrap();
        assert!((l - 0.01).abs() < 1e-15, "{l}");
    }

    #[test]
    fn spatial_edge_replication() {
        // 5x5 pads to 8x8: the replicated column/row keep regions uniform.
        let input = Image::from_fn(5, 5, |_, x, _| if x < 4 { 0.2 } else { 0.4 }).unwrap();
        let enhanced = Image::from_fn(5, 5, |_, x, _| if x < 4 { 0.3 } else { 0.6 }).unwrap();
        let l = loss_spatial(&input, &enhanced).unwrap();
        // Regions (0,0),(1,0) at 0.2/0.3 and (0,1),(1,1) at 0.4/0.6. Only
        // horizontal pairs differ: 4 ordered pairs of 0.01 over K = 4.
        assert!((l - 0.01).abs() < 1e-15, "{l}");
        assert!(loss_spatial(&input, &uniform(4, 4, 0.1)).is_err());
    }

    #[test]
    fn exposure_examples() {
        assert!(loss_exposure(&uniform(16, 16, 0.6), 0.6) < 1e-12);
        assert!((loss_exposure(&uniform(16, 16, 0.7), 0.6) - 0.1).abs() < 1e-12);
        assert!((loss_exposure(&uniform(20, 20, 0.0), 0.6) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn exposure_partial_regions_use_true_counts() {
        // 16x20: a full 16x16 region at 0.2 and a 16x4 strip at 1.0.
        let img = Image::from_fn(16, 20, |_, x, _| if x < 16 { 0.2 } else { 1.0 }).unwrap();
        let l = loss_exposure(&img, 0.6);
        assert!((l - (0.4 + 0.4) / 2.0).abs() < 1e-15, "{l}");
    }

    #[test]
    fn color_examples() {
        assert_eq!(loss_color(&uniform(3, 3, 0.3)), 0.0);
        let img = Image::from_fn(2, 2, |_, _, c| [0.5, 0.5, 0.6][c]).unwrap();
        assert!((loss_color(&img) - 0.02).abs() < 1e-15);
        let red = Image::from_fn(2, 2, |_, _, c| [1.0, 0.0, 0.0][c]).unwrap();
        assert_eq!(loss_color(&red), 2.0);
    }

    #[test]
    fn tv_examples() {
        let constant = CurveParamMap::filled(3, 4, 4, 0.3).unwrap();
        assert_eq!(loss_tv(&constant), 0.0);
        // One iteration, one non-zero channel, 1x2 map [0, 1].
        let map = CurveParamMap::new(1, 1, 2, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(loss_tv(&map), 0.5);
    }

    #[test]
    fn tv_checkerboard_exceeds_smoothed() {
        let a = 0.4;
        let checker = CurveParamMap::from_fn(1, 6, 6, |_, y, x, _| if (x + y) % 2 == 0 { a } else { -a });
        // 3x3 box blur with edge replication.
        let smooth = CurveParamMap::from_fn(1, 6, 6, |_, y, x, c| {
            let mut s = 0.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let yy = (y as i64 + dy).clamp(0, 5) as usize;
                    let xx = (x as i64 + dx).clamp(0, 5) as usize;
                    s += checker.get(0, yy, xx, c);
                }
            }
            s / 9.0
        });
        assert!(loss_tv(&checker) > loss_tv(&smooth));
    }

    #[test]
    fn total_vanishes_at_well_exposed_gray() {
        let img = uniform(16, 16, 0.6);
        let curves = CurveParamMap::zeros(8, 16, 16);
        let parts = loss_total(&img, &curves, &LossWeights::default()).unwrap();
        assert!(parts.total < 1e-12, "{parts:?}");
        assert_eq!((parts.spa, parts.col, parts.tv), (0.0, 0.0, 0.0));
    }

    #[test]
    fn total_is_weighted_recombination() {
        let img = Image::from_fn(12, 10, |y, x, c| ((y * 7 + x * 3 + c * 5) % 11) as f64 / 11.0).unwrap();
        let curves = CurveParamMap::from_fn(2, 12, 10, |n, y, x, c| {
            (((n + 2 * y + 3 * x + c) % 9) as f64 - 4.0) / 5.0
        });
        let weights = LossWeights::default();
        let parts = loss_total(&img, &curves, &weights).unwrap();
        let enhanced = apply_curves(&img, &curves).unwrap();
        let spa = loss_spatial(&img, &enhanced).unwrap();
        let exp = loss_exposure(&enhanced, 0.6);
        let col = loss_color(&enhanced);
        let tv = loss_tv(&curves);
        assert_eq!((parts.spa, parts.exp, parts.col, parts.tv), (spa, exp, col, tv));
        assert_eq!(parts.total, 10.0 * spa + exp + 5.0 * col + 200.0 * tv);
        let (from_grad, _) = grad_total(&img, &curves, &weights).unwrap();
        assert!((from_grad.total - parts.total).abs() <= 1e-12 * parts.total.abs());
    }

    #[test]
    fn grad_vanishes_on_black_image_with_constant_map() {
        let img = uniform(8, 8, 0.0);
        let curves = CurveParamMap::filled(8, 8, 8, 0.5).unwrap();
        let (_, g) = grad_total(&img, &curves, &LossWeights::default()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
