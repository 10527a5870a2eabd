use std::collections::BTreeMap;

use crate::sampling::SamplePlan;

/// Number of non-blank slots of a plan.
pub fn observed_length(plan: &SamplePlan) -> usize {
    plan.observed_length()
}

/// Plug-in mutual information in bits between the two coordinates of
/// `samples`, from their empirical joint histogram.
pub fn mutual_information(samples: &[(usize, usize)]) -> f64 {
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut left: BTreeMap<usize, u64> = BTreeMap::new();
    let mut right: BTreeMap<usize, u64> = BTreeMap::new();
    for &(a, b) in samples {
        *joint.entry((a, b)).or_default() += 1;
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
    }
    let n = n as u64;
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let ratio = (c as u128 * n as u128) as f64 / (left[&a] as u128 * right[&b] as u128) as f64;
            c as f64 / n as f64 * ratio.log2()
        })
        .sum();
    mi.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn constant_variable_has_no_information() {
        let samples: Vec<_> = (0..100).map(|i| (7, i % 2)).collect();
        assert_eq!(mutual_information(&samples), 0.0);
    }

    #[test]
    fn deterministic_channel_is_one_bit() {
        let samples: Vec<_> = (0..100).map(|i| (i % 2 * 10 + i % 3, i % 2)).collect();
        assert!((mutual_information(&samples) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_draws_are_near_zero() {
        let mut rng = Rng::new(4);
        let samples: Vec<_> = (0..10_000).map(|_| (rng.below(20), rng.below(2))).collect();
        let mi = mutual_information(&samples);
        assert!((0.0..=0.05).contains(&mi), "{mi}");
    }

    #[test]
    fn bounded_by_label_entropy() {
        let mut rng = Rng::new(8);
        let samples: Vec<_> = (0..500).map(|_| (rng.below(50), rng.below(3))).collect();
        assert!(mutual_information(&samples) <= 3f64.log2() + 1e-12);
    }
}
