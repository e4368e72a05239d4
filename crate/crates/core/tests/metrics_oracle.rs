mod common;

use common::pairwise_auroc;
use nephrofp_core::metrics::{auprc, auroc, f1, EvalReport, MetricError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Threshold sweep over every distinct score: recall and precision of
/// `score >= t`, summed as `delta recall * precision`.
fn sweep_average_precision(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let total = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 1).count() as f64;
        let called = scores.iter().filter(|s| **s >= t).count() as f64;
        let recall = tp / total;
        ap += (recall - prev_recall) * (tp / called);
        prev_recall = recall;
    }
    ap
}

fn brute_f1(scores: &[f64], labels: &[u8], t: f64) -> f64 {
    let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 1).count() as f64;
    let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == 0).count() as f64;
    let fn_ = scores.iter().zip(labels).filter(|(s, l)| **s < t && **l == 1).count() as f64;
    if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) }
}

/// Random instance with both classes; scores drawn from a small grid so
/// ties are common.
fn instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    loop {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

#[test]
fn auroc_matches_pairwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (s, l) = instance(&mut rng);
        let got = auroc(&s, &l).unwrap();
        assert!((got - pairwise_auroc(&s, &l)).abs() <= 1e-12, "{s:?} {l:?}");
    }
}

#[test]
fn auprc_matches_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (s, l) = instance(&mut rng);
        let got = auprc(&s, &l).unwrap();
        assert!((got - sweep_average_precision(&s, &l)).abs() <= 1e-12, "{s:?} {l:?}");
        let t = rng.random_range(0.0..1.0);
        assert!((f1(&s, &l, t).unwrap() - brute_f1(&s, &l, t)).abs() <= 1e-12);
    }
}

#[test]
fn worked_examples() {
    let labels = [1, 0, 1, 0];
    let scores = [0.9, 0.8, 0.7, 0.1];
    assert!((auroc(&scores, &labels).unwrap() - 0.75).abs() < 1e-15);
    assert!((auprc(&scores, &labels).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    // threshold 0.75 calls two, one correct: precision 1/2, recall 1/2
    assert!((f1(&scores, &labels, 0.75).unwrap() - 0.5).abs() < 1e-15);
    // constant scores carry no ranking information
    assert_eq!(auroc(&[0.3; 4], &labels).unwrap(), 0.5);
    assert_eq!(auprc(&[0.3; 4], &labels).unwrap(), 0.5);
}

#[test]
fn invariant_under_monotone_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (s, l) = instance(&mut rng);
        let t: Vec<f64> = s.iter().map(|x| (3.0 * x - 1.0).exp()).collect();
        assert_eq!(auroc(&s, &l).unwrap(), auroc(&t, &l).unwrap());
        assert_eq!(auprc(&s, &l).unwrap(), auprc(&t, &l).unwrap());
        // reversing the ranking mirrors AUROC
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert!((auroc(&neg, &l).unwrap() - (1.0 - auroc(&s, &l).unwrap())).abs() < 1e-12);
        // swapping classes and reversing scores leaves AUROC unchanged
        let flipped: Vec<u8> = l.iter().map(|x| 1 - x).collect();
        assert!((auroc(&neg, &flipped).unwrap() - auroc(&s, &l).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn single_precision_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let (s, l) = instance(&mut rng);
        let s32: Vec<f32> = s.iter().map(|&x| x as f32).collect();
        assert_eq!(auroc(&s, &l).unwrap(), auroc(&s32, &l).unwrap());
        assert_eq!(auprc(&s, &l).unwrap(), auprc(&s32, &l).unwrap());
    }
}

#[test]
fn degenerate_inputs_are_errors() {
    assert_eq!(auroc(&[0.1, 0.2], &[1, 1]), Err(MetricError::SingleClass));
    assert_eq!(auprc(&[0.1, 0.2], &[0, 0]), Err(MetricError::NoPositives));
    assert!(matches!(auroc(&[0.1], &[1, 0]), Err(MetricError::LengthMismatch { .. })));
    assert_eq!(auroc(&[0.1, f64::NAN], &[1, 0]), Err(MetricError::NonFinite(1)));
}

#[test]
fn report_round_trips() {
    let r = EvalReport::compute(&[0.9, 0.8, 0.7, 0.1], &[1, 0, 1, 0], 0.5).unwrap();
    assert_eq!(EvalReport::from_key_value(&r.to_key_value()).unwrap(), r);
}
