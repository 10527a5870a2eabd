use lowlight::bias::separable_dataset;
use lowlight::head::{train_head, FocalConfig, HeadConfig, TrainSettings};
use lowlight::Rng;

#[test]
fn separable_set_is_learned_deterministically() {
    let data = separable_dataset(50, 8, 32, &mut Rng::new(100)).unwrap();
    let cfg = HeadConfig::new(32, 4, 2, 8).unwrap();
    let focal = FocalConfig::uniform(2, 2.0, 1.0).unwrap();
    let settings = TrainSettings { epochs: 50, lr_max: 3e-3 };
    let (params, history) = train_head(&data, &cfg, &focal, &settings, &mut Rng::new(0)).unwrap();
    let first = history.first().unwrap();
    let last = history.last().unwrap();
    println!("{first:?} {last:?}");
    assert_eq!(history.len(), 50);
    assert!(history.iter().any(|h| h.accuracy >= 0.95));
    assert!(last.loss < first.loss);
    let (again, _) = train_head(&data, &cfg, &focal, &settings, &mut Rng::new(0)).unwrap();
    assert_eq!(params, again);
}
