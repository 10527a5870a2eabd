use serde::{Deserialize, Serialize};

use super::{DeltaSampling, SamplePlan, SamplingParams, SamplingStrategy};
use crate::error::Result;
use crate::rng::Rng;

/// One test-time draw of `(delta, P1, P2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtaDraw {
    pub delta: f64,
    pub p1: usize,
    pub p2: usize,
}

/// `count` independent delta-strategy plans for an `n_frames` video. The
/// draws consume the stream exactly as `count` calls to the delta strategy
/// would.
pub fn tta_param_sets(
    n_frames: usize,
    params: &SamplingParams,
    rng: &mut Rng,
    count: usize,
) -> Result<Vec<(TtaDraw, SamplePlan)>> {
    (0..count)
        .map(|_| {
            let plan = DeltaSampling.plan(n_frames, params, None, rng)?;
            let draw = TtaDraw {
                delta: plan.delta.unwrap_or_default(),
                p1: plan.p1,
                p2: plan.p2,
            };
            Ok((draw, plan))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_draw_matches_delta_strategy() {
        let params = SamplingParams::default();
        let sets = tta_param_sets(150, &params, &mut Rng::new(11), 1).unwrap();
        let plan = DeltaSampling.plan(150, &params, None, &mut Rng::new(11)).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].1, plan);
        assert_eq!(sets[0].0.delta, plan.delta.unwrap());
    }

    #[test]
    fn five_draws_are_reproducible_and_valid() {
        let params = SamplingParams::default();
        let a = tta_param_sets(97, &params, &mut Rng::new(3), 5).unwrap();
        let b = tta_param_sets(97, &params, &mut Rng::new(3), 5).unwrap();
        assert_eq!(a, b);
        for (draw, plan) in &a {
            assert_eq!(draw.p1 + plan.indices.len() + draw.p2, 64);
            assert!((0.0..1.5).contains(&draw.delta));
        }
        let deltas: Vec<f64> = a.iter().map(|(d, _)| d.delta).collect();
        assert!(deltas.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn zero_delta_full_video_has_no_padding() {
        let params = SamplingParams {
            beta: 0.0,
            gamma_max: 0.0,
            ..SamplingParams::default()
        };
        for (draw, _) in tta_param_sets(128, &params, &mut Rng::new(0), 5).unwrap() {
            assert_eq!((draw.delta, draw.p1, draw.p2), (0.0, 0, 0));
        }
    }
}
