use skelgest::ingest::{generate_synthetic, SynthConfig};
use skelgest::metrics::{render_report, ReportFormat};
use skelgest::nn::TrainConfig;
use skelgest::pipeline::{
    cross_validate, load_model_set, save_model_set, train_protocol, NetKind, NetworkLearner, Protocol, RunConfig,
    WindowPlan,
};
use skelgest::preprocess::NormMethod;

fn tiny(protocol: Protocol, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(protocol, NormMethod::M3, WindowPlan::Single { window: 32 }, seed);
    cfg.net = NetKind::Lstm { hidden: 6 };
    cfg.train = TrainConfig {
        epochs: 2,
        batch_size: 32,
        ..TrainConfig::new(seed)
    };
    cfg.fold_boundaries = (2, 4);
    cfg
}

#[test]
fn cross_validation_is_bit_reproducible() {
    let ds = generate_synthetic(&SynthConfig::new(6, 8)).unwrap();
    let cfg = tiny(Protocol::MultiClass, 21);
    let a = render_report(&cross_validate(&ds, &cfg).unwrap(), ReportFormat::Json);
    let b = render_report(&cross_validate(&ds, &cfg).unwrap(), ReportFormat::Json);
    assert_eq!(a, b);
}

#[test]
fn saved_models_predict_like_the_originals() {
    let ds = generate_synthetic(&SynthConfig::new(2, 8)).unwrap();
    let cfg = tiny(Protocol::MultiClassBinary, 4);
    let train: Vec<_> = ds.sequences.iter().collect();
    let set = train_protocol(&train, &ds.joint_map, &cfg, &NetworkLearner::from_config(&cfg), cfg.seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(save_model_set(&set, &cfg, dir.path()).unwrap().len(), 29);
    let back = load_model_set(dir.path(), &cfg, &ds.joint_map).unwrap();
    for seq in &ds.sequences {
        assert_eq!(set.predict(seq).unwrap(), back.predict(seq).unwrap());
    }
    let other = tiny(Protocol::MultiClassBinary, 5);
    assert!(load_model_set(dir.path(), &other, &ds.joint_map).is_err());
}
