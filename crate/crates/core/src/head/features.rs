use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::media::Image;
use crate::sampling::SamplePlan;

/// `T'` temporal positions of `D`-wide features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    values: Array2<f64>,
    blank_mask: Vec<bool>,
}

impl FeatureSequence {
    pub fn new(values: Array2<f64>, blank_mask: Vec<bool>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::DimMismatch("feature sequence must be non-empty".into()));
        }
        if blank_mask.len() != values.nrows() {
            return Err(Error::DimMismatch(format!(
                "blank mask has {} entries for {} positions",
                blank_mask.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Param("feature sequence contains non-finite values".into()));
        }
        Ok(Self { values, blank_mask })
    }

    /// A sequence with no blank positions.
    pub fn dense(values: Array2<f64>) -> Result<Self> {
        let mask = vec![false; values.nrows()];
        Self::new(values, mask)
    }

    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn blank_mask(&self) -> &[bool] {
        &self.blank_mask
    }
}

/// Bounds of part `i` of `n` when splitting `len` items; never empty.
fn part(i: usize, n: usize, len: usize) -> (usize, usize) {
    let lo = (i * len / n).min(len - 1);
    let hi = ((i + 1) * len / n).max(lo + 1);
    (lo, hi)
}

/// Channel means over a `grid x grid` partition, laid out `[gy][gx][c]`.
/// With `prev`, the luminance means of `img - prev` over the same grid are
/// appended.
pub fn frame_descriptor(img: &Image, grid: usize, prev: Option<&Image>) -> Result<Array1<f64>> {
    if grid == 0 {
        return Err(Error::Param("grid must be >= 1".into()));
    }
    if let Some(p) = prev {
        if p.dims() != img.dims() {
            return Err(Error::DimMismatch(format!(
                "previous frame is {:?}, frame is {:?}",
                p.dims(),
                img.dims()
            )));
        }
    }
    let (h, w) = img.dims();
    let extra = if prev.is_some() { grid * grid } else { 0 };
    let mut out = Vec::with_capacity(grid * grid * 3 + extra);
    let mut diffs = Vec::with_capacity(extra);
    for gy in 0..grid {
        let (y0, y1) = part(gy, grid, h);
        for gx in 0..grid {
            let (x0, x1) = part(gx, grid, w);
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            let mut sums = [0.0; 3];
            let mut diff = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    for (c, s) in sums.iter_mut().enumerate() {
                        *s += img.get(y, x, c);
                    }
                    if let Some(p) = prev {
                        diff += img.luminance(y, x) - p.luminance(y, x);
                    }
                }
            }
            out.extend(sums.iter().map(|s| s / count));
            diffs.push(diff / count);
        }
    }
    if prev.is_some() {
        out.extend(diffs);
    }
    Ok(Array1::from(out))
}

/// Descriptors of every frame stacked as `[N, D]`.
pub fn clip_descriptors(frames: &[Image], grid: usize) -> Result<Array2<f64>> {
    let rows = frames
        .iter()
        .map(|f| frame_descriptor(f, grid, None))
        .collect::<Result<Vec<_>>>()?;
    let dim = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), dim));
    for (mut dst, src) in out.rows_mut().into_iter().zip(&rows) {
        dst.assign(src);
    }
    Ok(out)
}

/// Z-score every feature channel over time. Sequences of length 1 are
/// returned unchanged.
pub fn normalize_time(seq: &FeatureSequence) -> FeatureSequence {
    if seq.t_len() < 2 {
        return seq.clone();
    }
    let mut values = seq.values.clone();
    for mut col in values.columns_mut() {
        let mean = col.mean().unwrap_or(0.0);
        let std = col.mapv(|v| (v - mean) * (v - mean)).mean().unwrap_or(0.0).sqrt();
        col.mapv_inplace(|v| (v - mean) / (std + 1e-6));
    }
    FeatureSequence {
        values,
        blank_mask: seq.blank_mask.clone(),
    }
}

/// Average `T` slots down to `t_len` positions in contiguous groups. A
/// position is blank when every slot in its group is.
pub fn pool_time(values: ArrayView2<f64>, blank: &[bool], t_len: usize) -> Result<FeatureSequence> {
    let t = values.nrows();
    if t_len == 0 || t_len > t {
        return Err(Error::Param(format!("cannot pool {t} slots to {t_len} positions")));
    }
    let mut out = Array2::zeros((t_len, values.ncols()));
    let mut mask = Vec::with_capacity(t_len);
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let (lo, hi) = part(i, t_len, t);
        row.assign(&values.slice(s![lo..hi, ..]).mean_axis(Axis(0)).expect("non-empty group"));
        mask.push(blank[lo..hi].iter().all(|&b| b));
    }
    FeatureSequence::new(out, mask)
}

/// Lay out per-frame features along a sampling plan (blank slots are zero,
/// the descriptor of a blank frame), pool to `t_len` and optionally
/// normalize.
pub fn sequence_from_plan(
    frames: ArrayView2<f64>,
    plan: &SamplePlan,
    t_len: usize,
    normalize: bool,
) -> Result<FeatureSequence> {
    if plan.n_frames != frames.nrows() {
        return Err(Error::DimMismatch(format!(
            "plan is for {} frames, got {}",
            plan.n_frames,
            frames.nrows()
        )));
    }
    let mut slots = Array2::zeros((plan.t_frames, frames.ncols()));
    for (mut row, src) in slots.rows_mut().into_iter().zip(plan.slots()) {
        if let Some(i) = src {
            row.assign(&frames.row(i));
        }
    }
    let seq = pool_time(slots.view(), &plan.blank_mask(), t_len)?;
    Ok(if normalize { normalize_time(&seq) } else { seq })
}
