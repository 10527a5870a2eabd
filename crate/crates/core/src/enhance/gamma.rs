use crate::error::{Error, Result};
use crate::media::Image;

/// Blanket gamma correction `v -> v^(1/g)`.
pub fn gamma_correct(img: &Image, g: f64) -> Result<Image> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Param(format!("gamma must be positive, got {g}")));
    }
    let inv = 1.0 / g;
    let data = img.data().iter().map(|&v| v.powf(inv)).collect();
    Ok(Image::from_raw(img.height(), img.width(), data))
}
