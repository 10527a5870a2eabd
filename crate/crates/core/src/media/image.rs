use crate::error::{Error, Result};

/// Row-major RGB image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Param(format!("image must be non-empty, got {height}x{width}")));
        }
        if data.len() != height * width * 3 {
            return Err(Error::DimMismatch(format!(
                "{height}x{width}x3 image needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Param(format!("value {} at {i} outside [0, 1]", data[i])));
        }
        Ok(Self { height, width, data })
    }

    /// Caller guarantees the invariants; used on values produced by
    /// range-preserving maps.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && (0.0..=1.0).contains(&value));
        Self::from_raw(height, width, vec![value; height * width * 3])
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Unweighted mean of the three channels at one pixel.
    pub fn luminance(&self, y: usize, x: usize) -> f64 {
        let i = (y * self.width + x) * 3;
        (self.data[i] + self.data[i + 1] + self.data[i + 2]) / 3.0
    }

    pub fn mean_luminance(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += px[c];
            }
        }
        let n = (self.height * self.width) as f64;
        sums.map(|s| s / n)
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// Ordered frames of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Image>,
}

impl VideoClip {
    pub fn new(frames: Vec<Image>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Ingest("video has no frames".into()))?
            .dims();
        if let Some(i) = frames.iter().position(|f| f.dims() != first) {
            let (h, w) = frames[i].dims();
            return Err(Error::Ingest(format!(
                "frame {} is {h}x{w}, expected {}x{}",
                i + 1,
                first.0,
                first.1
            )));
        }
        Ok(Self { frames })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(Image::new(1, 1, vec![0.0, 1.0, 1.5]).is_err());
        assert!(Image::new(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(Image::new(1, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn channel_means_and_luminance() {
        let img = Image::new(1, 2, vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0]).unwrap();
        assert_eq!(img.channel_means(), [0.5, 0.5, 0.5]);
        assert_eq!(img.luminance(0, 0), 0.5);
        assert_eq!(img.mean_luminance(), 0.5);
    }

    #[test]
    fn clip_rejects_mixed_dims() {
        let err = VideoClip::new(vec![Image::zeros(2, 2), Image::zeros(2, 3)]).unwrap_err();
        assert!(err.to_string().contains("frame 2"), "{err}");
        assert!(VideoClip::new(vec![]).is_err());
    }
}
