use lowlight::bias::{mutual_information, run_bias_experiment, LengthDist};
use lowlight::sampling::{ConstantRate, DatasetStats, DeltaSampling, SamplingParams, SamplingStrategy, StrategyRegistry};
use lowlight::{Config, Rng};

fn small_config(classes: Vec<LengthDist>, strategies: &[&str]) -> Config {
    let mut c = Config::default();
    c.bias.classes = classes;
    c.bias.samples_per_class = 40;
    c.bias.test_per_class = 20;
    c.bias.epochs = 6;
    c.bias.mi_draws = 2000;
    c.bias.n_max = Some(160);
    c.bias.strategies = strategies.iter().map(|s| s.to_string()).collect();
    c
}

#[test]
fn length_adjusted_leaks_nothing() {
    let c = small_config(
        vec![LengthDist::new(80.0, 10.0, 33, 225), LengthDist::new(120.0, 10.0, 33, 225)],
        &["length_adjusted"],
    );
    let report = run_bias_experiment(&c, &StrategyRegistry::builtin()).unwrap();
    let s = report.get("length_adjusted").unwrap();
    assert_eq!(s.mi_bits, 0.0);
    assert_eq!(s.mean_observed, 64.0);
}

#[test]
fn disjoint_lengths_are_fully_recoverable_under_constant_rate() {
    let c = small_config(
        vec![LengthDist::new(60.0, 5.0, 40, 80), LengthDist::new(130.0, 5.0, 110, 150)],
        &["constant", "delta"],
    );
    let report = run_bias_experiment(&c, &StrategyRegistry::builtin()).unwrap();
    let constant = report.get("constant").unwrap();
    assert!((constant.mi_bits - 1.0).abs() < 1e-12);
    assert!(constant.in_accuracy >= 0.95, "{constant:?}");
    assert!(constant.shifted_accuracy <= 0.05, "{constant:?}");
    assert!(report.get("delta").unwrap().mi_bits < constant.mi_bits);
}

#[test]
fn report_is_deterministic() {
    let c = small_config(
        vec![LengthDist::new(80.0, 10.0, 33, 225), LengthDist::new(120.0, 10.0, 33, 225)],
        &["delta", "variable"],
    );
    let a = run_bias_experiment(&c, &StrategyRegistry::builtin()).unwrap();
    let b = run_bias_experiment(&c, &StrategyRegistry::builtin()).unwrap();
    assert_eq!(a, b);
    assert!(a.table().lines().count() == 4);
    for s in &a.strategies {
        assert!((0.0..=1.0).contains(&s.in_accuracy) && s.mi_bits >= 0.0 && s.mi_bits <= 1.0);
    }
}

#[test]
fn delta_randomises_observed_length_but_constant_does_not() {
    let params = SamplingParams::default();
    let stats = DatasetStats { n_min: 33, n_max: 225 };
    let mut rng = Rng::new(12);
    for n in [33, 80, 150, 225] {
        let draws = |s: &dyn SamplingStrategy, rng: &mut Rng| -> Vec<usize> {
            (0..200).map(|_| s.plan(n, &params, Some(&stats), rng).unwrap().observed_length()).collect()
        };
        let c = draws(&ConstantRate, &mut rng);
        assert!(c.iter().all(|&m| m == c[0]));
        let d = draws(&DeltaSampling, &mut rng);
        if d.iter().any(|&m| m < 64) {
            assert!(d.iter().any(|&m| m != d[0]), "N = {n}");
        }
    }
}

#[test]
fn constant_rate_example() {
    let params = SamplingParams::default();
    let stats = DatasetStats { n_min: 33, n_max: 160 };
    let plan = ConstantRate.plan(80, &params, Some(&stats), &mut Rng::new(0)).unwrap();
    assert_eq!(plan.observed_length(), 32);
    let full = ConstantRate.plan(160, &params, Some(&stats), &mut Rng::new(0)).unwrap();
    assert_eq!(full.observed_length(), 64);
    assert_eq!(mutual_information(&[(1, 0), (1, 1)]), 0.0);
}
