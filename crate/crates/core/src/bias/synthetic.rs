use ndarray::{Array1, Array2};

use super::settings::LengthDist;
use crate::error::Result;
use crate::head::FeatureSequence;
use crate::rng::Rng;

/// A clip reduced to its per-frame feature vectors `[N, D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClip {
    pub label: usize,
    pub frames: Array2<f64>,
}

impl SyntheticClip {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }
}

/// Generation parameters shared by every split.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Length distribution per class.
    pub lengths: Vec<LengthDist>,
    pub dim: usize,
    /// Content signal strength.
    pub signal: f64,
    /// Offset added to every non-blank frame.
    pub frame_level: f64,
    pub per_class: usize,
}

impl LengthDist {
    /// A normal draw rounded to the nearest integer and clamped.
    pub fn draw(&self, rng: &mut Rng) -> usize {
        let v = (self.mean + self.std * rng.next_gaussian()).round();
        (v.max(0.0) as usize).clamp(self.min, self.max)
    }
}

/// Unit-RMS class signature vectors.
pub fn class_signals(classes: usize, dim: usize, rng: &mut Rng) -> Vec<Array1<f64>> {
    (0..classes)
        .map(|_| {
            let v = Array1::from_shape_fn(dim, |_| rng.next_gaussian());
            let rms = (v.mapv(|x| x * x).sum() / dim as f64).sqrt();
            v / rms.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// `per_class` clips for every class, class by class. Frame `t` of a class
/// `c` clip is `frame_level + signal * s_c + noise` with unit Gaussian noise.
pub fn generate_dataset(spec: &SyntheticSpec, signals: &[Array1<f64>], rng: &mut Rng) -> Vec<SyntheticClip> {
    let mut out = Vec::with_capacity(spec.lengths.len() * spec.per_class);
    for (label, dist) in spec.lengths.iter().enumerate() {
        for _ in 0..spec.per_class {
            let n = dist.draw(rng);
            let frames = Array2::from_shape_fn((n, spec.dim), |(_, d)| {
                spec.frame_level + spec.signal * signals[label][d] + rng.next_gaussian()
            });
            out.push(SyntheticClip { label, frames });
        }
    }
    out
}

/// Two classes of `t_len x dim` sequences separated by the mean of all their
/// entries, which is exactly `-0.5` for class 0 and `+0.5` for class 1.
pub fn separable_dataset(per_class: usize, t_len: usize, dim: usize, rng: &mut Rng) -> Result<Vec<(FeatureSequence, usize)>> {
    let mut out = Vec::with_capacity(2 * per_class);
    for label in 0..2 {
        let shift = if label == 0 { -0.5 } else { 0.5 };
        for _ in 0..per_class {
            let noise = Array2::from_shape_fn((t_len, dim), |_| rng.uniform_range(-1.0, 1.0));
            let mean = noise.mean().unwrap_or(0.0);
            out.push((FeatureSequence::dense(noise.mapv(|v| v - mean + shift))?, label));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(means: [f64; 2], std: f64) -> SyntheticSpec {
        SyntheticSpec {
            lengths: means.iter().map(|&m| LengthDist::new(m, std, 33, 225)).collect(),
            dim: 4,
            signal: 0.0,
            frame_level: 1.0,
            per_class: 100,
        }
    }

    #[test]
    fn zero_spread_gives_exact_means() {
        let s = spec([60.0, 120.0], 0.0);
        let data = generate_dataset(&s, &class_signals(2, 4, &mut Rng::new(0)), &mut Rng::new(0));
        assert!(data.iter().all(|c| c.len() == if c.label == 0 { 60 } else { 120 }));
    }

    #[test]
    fn lengths_are_reproducible_and_clamped() {
        let s = spec([60.0, 120.0], 40.0);
        let signals = class_signals(2, 4, &mut Rng::new(1));
        let lens = |seed| -> Vec<usize> {
            generate_dataset(&s, &signals, &mut Rng::new(seed)).iter().map(|c| c.len()).collect()
        };
        let a = lens(0);
        assert_eq!(a, lens(0));
        assert_ne!(a, lens(1));
        assert!(a.iter().all(|&n| (33..=225).contains(&n)));
    }

    #[test]
    fn length_multiset_matches_reference() {
        // Values from an independent re-implementation of the generator.
        let mut s = spec([60.0, 120.0], 10.0);
        s.dim = 1;
        let data = generate_dataset(&s, &class_signals(2, 1, &mut Rng::new(9)), &mut Rng::new(0));
        let lens: Vec<usize> = data.iter().map(|c| c.len()).collect();
        assert_eq!(&lens[..5], &[41, 51, 63, 74, 66]);
        assert_eq!(&lens[100..105], &[120, 114, 103, 107, 117]);
        assert_eq!(lens[..100].iter().sum::<usize>(), 6060);
        assert_eq!(lens[100..].iter().sum::<usize>(), 11953);
    }

    #[test]
    fn separable_means() {
        let data = separable_dataset(5, 3, 4, &mut Rng::new(0)).unwrap();
        for (seq, label) in &data {
            let m = seq.values().mean().unwrap();
            assert!((m - if *label == 0 { -0.5 } else { 0.5 }).abs() < 1e-12);
        }
    }
}
