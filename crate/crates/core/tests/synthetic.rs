use std::collections::BTreeMap;
use std::path::Path;

use nephrofp_core::synth::{generate_cohort, generate_synthetic, GroundTruth, SynthSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

fn spec(seed: u64, effect_odds: f64) -> SynthSpec {
    SynthSpec { seed, effect_odds, ..SynthSpec::default() }
}

/// Pearson chi-square p-value for independence of label and exposure.
fn independence_p_value(truth: &GroundTruth) -> f64 {
    let mut table = [[0.0f64; 2]; 2];
    for (id, &y) in &truth.labels {
        table[usize::from(truth.motif_exposed[id])][usize::from(y)] += 1.0;
    }
    let n: f64 = table.iter().flatten().sum();
    let mut stat = 0.0;
    for row in &table {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row.iter().sum::<f64>() * (table[0][j] + table[1][j]) / n;
            stat += (observed - expected).powi(2) / expected;
        }
    }
    1.0 - ChiSquared::new(1.0).unwrap().cdf(stat)
}

#[test]
fn prevalence_lands_on_target() {
    for seed in SEEDS {
        let truth = generate_cohort(&spec(seed, 3.0)).unwrap().truth;
        assert!((truth.realized_prevalence - 0.25).abs() <= 0.03, "seed {seed}: {}", truth.realized_prevalence);
        assert!(truth.motif_exposure > 0.3 && truth.motif_exposure < 0.7, "seed {seed}: {}", truth.motif_exposure);
    }
}

#[test]
fn null_effect_leaves_label_independent_of_exposure() {
    for seed in SEEDS {
        let truth = generate_cohort(&spec(seed, 1.0)).unwrap().truth;
        let p = independence_p_value(&truth);
        assert!(p > 0.01, "seed {seed}: p = {p}");
        assert!((truth.oracle_auroc_full - truth.oracle_auroc_cohort_only).abs() < 1e-12);
    }
}

#[test]
fn planted_effect_is_detectable() {
    let truth = generate_cohort(&spec(42, 3.0)).unwrap().truth;
    assert!(independence_p_value(&truth) < 1e-6);
    assert!(truth.oracle_auroc_full > truth.oracle_auroc_cohort_only + 0.03);
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn bundle_is_byte_identical_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let small = SynthSpec { n_stays: 600, ..spec(42, 3.0) };
    generate_synthetic(&small, a.path()).unwrap();
    generate_synthetic(&small, b.path()).unwrap();
    generate_synthetic(&SynthSpec { seed: 43, ..small }, c.path()).unwrap();
    let (fa, fb, fc) = (read_dir(a.path()), read_dir(b.path()), read_dir(c.path()));
    assert!(fa.len() >= 4, "{:?}", fa.keys());
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
}
