use super::*;
use crate::synth::SynthSpec;

fn small_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(SynthSpec { n_stays: 600, ..SynthSpec::default() });
    cfg.fingerprint.width = 256;
    cfg.learner.gbdt.n_trees = 20;
    cfg.learner.gbdt.max_depth = 3;
    cfg.resolver.parallelism = 1;
    cfg.set_seed(seed);
    cfg
}

#[test]
fn report_is_deterministic_and_arms_share_intermediates() {
    let cfg = small_config(5);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment::<f64>(&cfg, a.path()).unwrap();
    let rb = run_experiment::<f64>(&cfg, b.path()).unwrap();
    assert_eq!(ra, rb);
    for f in [REPORT_TEXT_FILE, REPORT_JSON_FILE] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    assert!(ra.hashes.symmetric());
    assert_eq!(ra.multimodal.n_features, ra.baseline.n_features + 256);
    assert_eq!(ra.funnel.last().unwrap().stage, RESOLUTION_STAGE);
    assert!(ra.to_text().contains(FINGERPRINT_NOTE));
}

#[test]
fn staged_files_reproduce_the_run() {
    let cfg = small_config(6);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let report = run_experiment::<f64>(&cfg, out).unwrap();

    let imputed = read_imputed::<f64>(out).unwrap();
    let (drugs, _) = read_drugs(out).unwrap();
    let split = Split::read_csv(&imputed.row_ids, &out.join(SPLIT_FILE)).unwrap();
    for (arm, expected) in [(Arm::Baseline, &report.baseline), (Arm::Multimodal, &report.multimodal)] {
        let data = arm_dataset(arm, &imputed, &drugs).unwrap();
        let model = load_model::<f64>(arm, out).unwrap();
        assert_eq!(&arm_report(&cfg, arm, &data, &model, &split).unwrap(), expected);
        let retrained = train_model(&data.subset(&split.train), &cfg.learner.params()).unwrap();
        assert_eq!(retrained.to_bytes(), model.to_bytes());
    }
    let (fm, _) = read_features::<f64>(out).unwrap();
    let again = drop_and_impute(&fm, &cfg.impute).unwrap();
    assert_eq!(again.values, imputed.values);
}

#[test]
fn split_is_stratified_and_seeded() {
    let ids: Vec<String> = (0..100).map(|i| i.to_string()).collect();
    let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 4 == 0)).collect();
    let cfg = SplitConfig::default();
    let s = stratified_split(&ids, &labels, &cfg).unwrap();
    assert_eq!(s.train.len(), 80);
    assert_eq!(s.train.iter().filter(|&&i| labels[i] == 1).count(), 20);
    assert_eq!(s, stratified_split(&ids, &labels, &cfg).unwrap());
    let other = stratified_split(&ids, &labels, &SplitConfig { seed: 1, ..cfg.clone() }).unwrap();
    assert_ne!(s, other);
    let one_class = vec![0u8; 100];
    assert!(matches!(stratified_split(&ids, &one_class, &cfg), Err(ExperimentError::Data(_))));
}

#[test]
fn config_errors_are_classified() {
    let cfg = ExperimentConfig::default();
    let err = run_experiment::<f64>(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert!(err.is_config());
}
