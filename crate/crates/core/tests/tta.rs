use lowlight::head::{predict, predict_tta, sequence_from_plan, HeadConfig, HeadParams};
use lowlight::sampling::{DeltaSampling, SamplingParams, SamplingStrategy};
use lowlight::Rng;
use ndarray::Array2;

fn setup() -> (HeadConfig, HeadParams, Array2<f64>) {
    let cfg = HeadConfig::new(8, 2, 3, 8).unwrap();
    let mut rng = Rng::new(21);
    let params = HeadParams::uniform(&cfg, 0.6, &mut rng);
    let frames = Array2::from_shape_fn((97, 8), |_| rng.uniform_range(0.0, 1.0));
    (cfg, params, frames)
}

#[test]
fn averaged_probabilities_lie_on_the_simplex() {
    let (cfg, params, frames) = setup();
    let sampling = SamplingParams::default();
    for seed in 0..20 {
        let p = predict_tta(frames.view(), &params, &cfg, &sampling, true, &mut Rng::new(seed), 5).unwrap();
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.probabilities.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn single_draw_equals_single_prediction() {
    let (cfg, params, frames) = setup();
    let sampling = SamplingParams::default();
    for seed in 0..10 {
        let tta = predict_tta(frames.view(), &params, &cfg, &sampling, true, &mut Rng::new(seed), 1).unwrap();
        let plan = DeltaSampling.plan(97, &sampling, None, &mut Rng::new(seed)).unwrap();
        let seq = sequence_from_plan(frames.view(), &plan, cfg.t_len, true).unwrap();
        let single = predict(&seq, &params, &cfg).unwrap();
        assert_eq!(tta.probabilities, single.to_vec());
    }
}

#[test]
fn prediction_is_reproducible() {
    let (cfg, params, frames) = setup();
    let sampling = SamplingParams::default();
    let a = predict_tta(frames.view(), &params, &cfg, &sampling, true, &mut Rng::new(3), 5).unwrap();
    let b = predict_tta(frames.view(), &params, &cfg, &sampling, true, &mut Rng::new(3), 5).unwrap();
    assert_eq!(a, b);
}
