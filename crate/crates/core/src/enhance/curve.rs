use crate::error::{Error, Result};
use crate::media::Image;

use super::kernel;

/// Per-iteration, per-pixel, per-channel curve parameters in `[-1, 1]`,
/// stored `[iteration][row][column][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveParamMap {
    iters: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl CurveParamMap {
    pub fn new(iters: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if iters == 0 || height == 0 || width == 0 {
            return Err(Error::Param("curve map dimensions must be positive".into()));
        }
        if values.len() != iters * height * width * 3 {
            return Err(Error::DimMismatch(format!(
                "{iters}x{height}x{width}x3 curve map needs {} values, got {}",
                iters * height * width * 3,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Param(format!("curve parameter {v} outside [-1, 1]")));
        }
        Ok(Self {
            iters,
            height,
            width,
            values,
        })
    }

    pub fn zeros(iters: usize, height: usize, width: usize) -> Self {
        Self::filled(iters, height, width, 0.0).expect("zero map is valid")
    }

    pub fn filled(iters: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(iters, height, width, vec![value; iters * height * width * 3])
    }

    /// Values are clamped into `[-1, 1]`.
    pub fn from_fn(
        iters: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(iters * height * width * 3);
        for n in 0..iters {
            for y in 0..height {
                for x in 0..width {
                    for c in 0..3 {
                        values.push(f(n, y, x, c).clamp(-1.0, 1.0));
                    }
                }
            }
        }
        Self {
            iters,
            height,
            width,
            values,
        }
    }

    pub fn iters(&self) -> usize {
        self.iters
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize, y: usize, x: usize, c: usize) -> f64 {
        self.values[((n * self.height + y) * self.width + x) * 3 + c]
    }

    /// Applies `update` to every value, then clamps back into `[-1, 1]`.
    pub(crate) fn update_clamped(&mut self, mut update: impl FnMut(usize, f64) -> f64) {
        for (i, v) in self.values.iter_mut().enumerate() {
            *v = update(i, *v).clamp(-1.0, 1.0);
        }
    }

    pub(crate) fn check_matches(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.height, self.width) {
            return Err(Error::DimMismatch(format!(
                "curve map is {}x{}, image is {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}

/// `LE_0 = I`, `LE_n = LE_{n-1} + A_n * LE_{n-1} * (1 - LE_{n-1})`.
pub fn apply_curves(img: &Image, curves: &CurveParamMap) -> Result<Image> {
    curves.check_matches(img)?;
    let out = kernel::apply(img.data(), curves.values(), curves.iters());
    Ok(Image::from_raw(img.height(), img.width(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_map_is_identity() {
        let img = Image::from_fn(3, 4, |y, x, c| ((y + x + c) % 5) as f64 / 4.0).unwrap();
        let out = apply_curves(&img, &CurveParamMap::zeros(8, 3, 4)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn single_step() {
        let img = Image::filled(1, 1, 0.5);
        let out = apply_curves(&img, &CurveParamMap::filled(1, 1, 1, 1.0).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.75; 3]);
    }

    #[test]
    fn unit_map_iterates_closed_form() {
        let img = Image::from_fn(1, 4, |_, x, c| (x * 3 + c) as f64 / 12.0).unwrap();
        let out = apply_curves(&img, &CurveParamMap::filled(8, 1, 4, 1.0).unwrap()).unwrap();
        for (v, &x0) in out.data().iter().zip(img.data()) {
            let mut x = x0;
            for _ in 0..8 {
                let next = 1.0 - (1.0 - x) * (1.0 - x);
                assert!(next >= x);
                x = next;
            }
            assert!((v - x).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_mismatch_and_out_of_range() {
        let img = Image::zeros(2, 2);
        assert!(apply_curves(&img, &CurveParamMap::zeros(1, 2, 3)).is_err());
        assert!(CurveParamMap::new(1, 1, 1, vec![0.0, 1.5, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn output_stays_in_unit_range(seed in any::<u64>(), iters in 1usize..9) {
            let mut rng = crate::Rng::new(seed);
            let img = Image::from_fn(3, 3, |_, _, _| rng.next_uniform()).unwrap();
            let curves = CurveParamMap::from_fn(iters, 3, 3, |_, _, _, _| rng.uniform_range(-1.0, 1.0));
            let out = apply_curves(&img, &curves).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
