//! Loss terms and their reverse-mode gradients over raw buffers, generic in
//! the float width. Images are `[row][column][channel]`, curve maps
//! `[iteration][row][column][channel]`. All reductions run in a fixed
//! row-major order.

use num_traits::Float;

use super::{LossBreakdown, LossWeights};

/// Side of the square regions compared by the spatial consistency loss.
pub const SPATIAL_REGION: usize = 4;
/// Side of the regions averaged by the exposure loss.
pub const EXPOSURE_REGION: usize = 16;

fn lit<F: Float>(x: f64) -> F {
    F::from(x).expect("literal representable")
}

/// Subgradient of `|x|` with 0 at 0.
fn sign<F: Float>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// Like [`sign`], but treats `|x|` within accumulated rounding error of 0 as
/// exactly 0. Region means of a uniform image land a few ulps off the
/// target, and a +-1 subgradient there would push the optimizer off the
/// minimum.
fn sign_settled<F: Float>(x: F) -> F {
    if x.abs() <= F::epsilon() * lit(1e3) {
        F::zero()
    } else {
        sign(x)
    }
}

fn to_f64<F: Float>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn apply<F: Float>(input: &[F], curves: &[F], iters: usize) -> Vec<F> {
    let n = input.len();
    let mut out = input.to_vec();
    for a in curves.chunks_exact(n).take(iters) {
        for (x, &a) in out.iter_mut().zip(a) {
            *x = *x + a * (*x * (F::one() - *x));
        }
    }
    out
}

fn luminance<F: Float>(data: &[F]) -> Vec<F> {
    let third = lit::<F>(3.0);
    data.chunks_exact(3).map(|p| (p[0] + p[1] + p[2]) / third).collect()
}

/// Spreads a per-pixel luminance gradient over the three channels.
fn scatter_luminance<F: Float>(grad_lum: &[F], grad: &mut [F]) {
    let third = lit::<F>(3.0);
    for (g, px) in grad_lum.iter().zip(grad.chunks_exact_mut(3)) {
        let share = *g / third;
        for v in px {
            *v = *v + share;
        }
    }
}

/// Region grid for the spatial loss; images are edge-replicated up to the
/// next multiple of `region`.
struct SpatialGrid {
    h: usize,
    w: usize,
    region: usize,
    rows: usize,
    cols: usize,
}

impl SpatialGrid {
    fn new(h: usize, w: usize, region: usize) -> Self {
        Self {
            h,
            w,
            region,
            rows: h.div_ceil(region),
            cols: w.div_ceil(region),
        }
    }

    fn count(&self) -> usize {
        self.rows * self.cols
    }

    /// Source pixel of every padded position in region `(gy, gx)`.
    fn pixels(&self, gy: usize, gx: usize) -> impl Iterator<Item = usize> + '_ {
        let r = self.region;
        (0..r).flat_map(move |dy| {
            let y = (gy * r + dy).min(self.h - 1);
            (0..r).map(move |dx| y * self.w + (gx * r + dx).min(self.w - 1))
        })
    }

    fn means<F: Float>(&self, lum: &[F]) -> Vec<F> {
        let area = lit::<F>((self.region * self.region) as f64);
        let mut out = Vec::with_capacity(self.count());
        for gy in 0..self.rows {
            for gx in 0..self.cols {
                let s = self.pixels(gy, gx).fold(F::zero(), |acc, p| acc + lum[p]);
                out.push(s / area);
            }
        }
        out
    }

    /// Ordered pairs `(i, j)` with `j` the top, bottom, left and right
    /// neighbor of `i` when it exists.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for gy in 0..self.rows {
            for gx in 0..self.cols {
                let i = gy * self.cols + gx;
                if gy > 0 {
                    out.push((i, i - self.cols));
                }
                if gy + 1 < self.rows {
                    out.push((i, i + self.cols));
                }
                if gx > 0 {
                    out.push((i, i - 1));
                }
                if gx + 1 < self.cols {
                    out.push((i, i + 1));
                }
            }
        }
        out
    }
}

pub(crate) fn spatial<F: Float>(input: &[F], enhanced: &[F], h: usize, w: usize, region: usize) -> F {
    let grid = SpatialGrid::new(h, w, region);
    let mi = grid.means(&luminance(input));
    let my = grid.means(&luminance(enhanced));
    let sum = grid.pairs().into_iter().fold(F::zero(), |acc, (i, j)| {
        let d = (my[i] - my[j]).abs() - (mi[i] - mi[j]).abs();
        acc + d * d
    });
    sum / lit(grid.count() as f64)
}

fn spatial_backward<F: Float>(
    input: &[F],
    enhanced: &[F],
    h: usize,
    w: usize,
    region: usize,
    scale: F,
    grad: &mut [F],
) {
    let grid = SpatialGrid::new(h, w, region);
    let mi = grid.means(&luminance(input));
    let my = grid.means(&luminance(enhanced));
    let two = lit::<F>(2.0);
    let k = lit::<F>(grid.count() as f64);
    let mut d_means = vec![F::zero(); grid.count()];
    for (i, j) in grid.pairs() {
        let dy = my[i] - my[j];
        let d = dy.abs() - (mi[i] - mi[j]).abs();
        let g = scale * two * d * sign(dy) / k;
        d_means[i] = d_means[i] + g;
        d_means[j] = d_means[j] - g;
    }
    let area = lit::<F>((region * region) as f64);
    let mut d_lum = vec![F::zero(); h * w];
    for gy in 0..grid.rows {
        for gx in 0..grid.cols {
            let g = d_means[gy * grid.cols + gx] / area;
            for p in grid.pixels(gy, gx) {
                d_lum[p] = d_lum[p] + g;
            }
        }
    }
    scatter_luminance(&d_lum, grad);
}

/// Non-overlapping regions; edge regions keep their true pixel counts.
fn exposure_regions(h: usize, w: usize, region: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    let rows = h.div_ceil(region);
    let cols = w.div_ceil(region);
    (0..rows).flat_map(move |ry| {
        (0..cols).map(move |rx| {
            (
                ry * region,
                ((ry + 1) * region).min(h),
                rx * region,
                ((rx + 1) * region).min(w),
            )
        })
    })
}

fn region_mean<F: Float>(lum: &[F], w: usize, (y0, y1, x0, x1): (usize, usize, usize, usize)) -> F {
    let mut s = F::zero();
    for y in y0..y1 {
        for x in x0..x1 {
            s = s + lum[y * w + x];
        }
    }
    s / lit(((y1 - y0) * (x1 - x0)) as f64)
}

pub(crate) fn exposure<F: Float>(enhanced: &[F], h: usize, w: usize, e: f64, region: usize) -> F {
    let lum = luminance(enhanced);
    let e = lit::<F>(e);
    let mut sum = F::zero();
    let mut count = 0usize;
    for r in exposure_regions(h, w, region) {
        sum = sum + (region_mean(&lum, w, r) - e).abs();
        count += 1;
    }
    sum / lit(count as f64)
}

fn exposure_backward<F: Float>(enhanced: &[F], h: usize, w: usize, e: f64, region: usize, scale: F, grad: &mut [F]) {
    let lum = luminance(enhanced);
    let e = lit::<F>(e);
    let m = lit::<F>(exposure_regions(h, w, region).count() as f64);
    let mut d_lum = vec![F::zero(); h * w];
    for r @ (y0, y1, x0, x1) in exposure_regions(h, w, region) {
        let g = scale * sign_settled(region_mean(&lum, w, r) - e) / m / lit(((y1 - y0) * (x1 - x0)) as f64);
        for y in y0..y1 {
            for x in x0..x1 {
                d_lum[y * w + x] = d_lum[y * w + x] + g;
            }
        }
    }
    scatter_luminance(&d_lum, grad);
}

fn channel_means<F: Float>(data: &[F], h: usize, w: usize) -> [F; 3] {
    let mut sums = [F::zero(); 3];
    for px in data.chunks_exact(3) {
        for c in 0..3 {
            sums[c] = sums[c] + px[c];
        }
    }
    let n = lit::<F>((h * w) as f64);
    sums.map(|s| s / n)
}

pub(crate) fn color<F: Float>(enhanced: &[F], h: usize, w: usize) -> F {
    let [r, g, b] = channel_means(enhanced, h, w);
    (r - g) * (r - g) + (r - b) * (r - b) + (g - b) * (g - b)
}

fn color_backward<F: Float>(enhanced: &[F], h: usize, w: usize, scale: F, grad: &mut [F]) {
    let [r, g, b] = channel_means(enhanced, h, w);
    let two = lit::<F>(2.0);
    let n = lit::<F>((h * w) as f64);
    let d = [
        two * ((r - g) + (r - b)),
        two * (-(r - g) + (g - b)),
        two * (-(r - b) - (g - b)),
    ]
    .map(|v| scale * v / n);
    for px in grad.chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = px[c] + d[c];
        }
    }
}

/// Forward differences `A[y][x+1] - A[y][x]` and `A[y+1][x] - A[y][x]`,
/// zero on the last column and row respectively.
fn tv_diffs<F: Float>(curves: &[F], h: usize, w: usize, base: usize, y: usize, x: usize, c: usize) -> (F, F) {
    let at = |yy: usize, xx: usize| curves[base + (yy * w + xx) * 3 + c];
    let here = at(y, x);
    let gx = if x + 1 < w { at(y, x + 1) - here } else { F::zero() };
    let gy = if y + 1 < h { at(y + 1, x) - here } else { F::zero() };
    (gx, gy)
}

pub(crate) fn tv<F: Float>(curves: &[F], iters: usize, h: usize, w: usize) -> F {
    let mut sum = F::zero();
    for n in 0..iters {
        let base = n * h * w * 3;
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let (gx, gy) = tv_diffs(curves, h, w, base, y, x, c);
                    let s = gx.abs() + gy.abs();
                    sum = sum + s * s;
                }
            }
        }
    }
    sum / lit((iters * h * w) as f64)
}

fn tv_backward<F: Float>(curves: &[F], iters: usize, h: usize, w: usize, scale: F, grad: &mut [F]) {
    let k = scale * lit::<F>(2.0) / lit((iters * h * w) as f64);
    for n in 0..iters {
        let base = n * h * w * 3;
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let (gx, gy) = tv_diffs(curves, h, w, base, y, x, c);
                    let s = k * (gx.abs() + gy.abs());
                    let here = base + (y * w + x) * 3 + c;
                    if x + 1 < w {
                        let g = s * sign(gx);
                        grad[here + 3] = grad[here + 3] + g;
                        grad[here] = grad[here] - g;
                    }
                    if y + 1 < h {
                        let g = s * sign(gy);
                        grad[here + w * 3] = grad[here + w * 3] + g;
                        grad[here] = grad[here] - g;
                    }
                }
            }
        }
    }
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Parts<F> {
    pub spa: F,
    pub exp: F,
    pub col: F,
    pub tv: F,
}

impl<F: Float> Parts<F> {
    pub fn total(&self, weights: &LossWeights) -> F {
        lit::<F>(weights.w_spa) * self.spa + self.exp + lit::<F>(weights.w_col) * self.col + lit::<F>(weights.w_tv) * self.tv
    }

    pub fn to_breakdown(&self, weights: &LossWeights) -> LossBreakdown {
        LossBreakdown {
            spa: to_f64(self.spa),
            exp: to_f64(self.exp),
            col: to_f64(self.col),
            tv: to_f64(self.tv),
            total: to_f64(self.total(weights)),
        }
    }
}

fn parts_of<F: Float>(input: &[F], enhanced: &[F], curves: &[F], iters: usize, h: usize, w: usize, weights: &LossWeights) -> Parts<F> {
    Parts {
        spa: spatial(input, enhanced, h, w, SPATIAL_REGION),
        exp: exposure(enhanced, h, w, weights.exposure_e, EXPOSURE_REGION),
        col: color(enhanced, h, w),
        tv: tv(curves, iters, h, w),
    }
}

pub(crate) fn total<F: Float>(input: &[F], curves: &[F], iters: usize, h: usize, w: usize, weights: &LossWeights) -> Parts<F> {
    let enhanced = apply(input, curves, iters);
    parts_of(input, &enhanced, curves, iters, h, w, weights)
}

/// Loss terms and the gradient of the weighted total with respect to
/// `curves`, by reverse accumulation through the curve iterations.
pub(crate) fn total_and_grad<F: Float>(
    input: &[F],
    curves: &[F],
    iters: usize,
    h: usize,
    w: usize,
    weights: &LossWeights,
) -> (Parts<F>, Vec<F>) {
    let n = input.len();
    debug_assert_eq!(curves.len(), n * iters);

    // levels[k] is the input to iteration k.
    let mut levels = Vec::with_capacity(iters);
    let mut x = input.to_vec();
    for a in curves.chunks_exact(n) {
        let next: Vec<F> = x
            .iter()
            .zip(a)
            .map(|(&v, &a)| v + a * (v * (F::one() - v)))
            .collect();
        levels.push(std::mem::replace(&mut x, next));
    }
    let enhanced = x;
    let parts = parts_of(input, &enhanced, curves, iters, h, w, weights);

    let mut grad_y = vec![F::zero(); n];
    spatial_backward(input, &enhanced, h, w, SPATIAL_REGION, lit(weights.w_spa), &mut grad_y);
    exposure_backward(&enhanced, h, w, weights.exposure_e, EXPOSURE_REGION, F::one(), &mut grad_y);
    color_backward(&enhanced, h, w, lit(weights.w_col), &mut grad_y);

    let mut grad_a = vec![F::zero(); curves.len()];
    tv_backward(curves, iters, h, w, lit(weights.w_tv), &mut grad_a);

    let two = lit::<F>(2.0);
    for k in (0..iters).rev() {
        let level = &levels[k];
        let a = &curves[k * n..(k + 1) * n];
        let ga = &mut grad_a[k * n..(k + 1) * n];
        for i in 0..n {
            let l = level[i];
            ga[i] = ga[i] + grad_y[i] * (l * (F::one() - l));
            grad_y[i] = grad_y[i] * (F::one() + a[i] * (F::one() - two * l));
        }
    }
    (parts, grad_a)
}
