//! Threshold-free ranking metrics and F1 for binary outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUROC needs both classes")]
    SingleClass,
    #[error("AUPRC needs at least one positive")]
    NoPositives,
    #[error("score at position {0} is not finite")]
    NonFinite(usize),
}

fn check<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    Ok(())
}

/// Groups of tied scores, descending, as (positives, negatives) per group.
fn tie_groups<T: Scalar>(scores: &[T], labels: &[u8]) -> Vec<(u64, u64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last: Option<T> = None;
    for i in idx {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().unwrap();
        if labels[i] != 0 {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l != 0).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass);
    }
    // walk ascending so `neg_below` counts negatives strictly lower
    let mut twice_wins: u64 = 0;
    let mut neg_below: u64 = 0;
    for (p, n) in tie_groups(scores, labels).into_iter().rev() {
        twice_wins += 2 * p * neg_below + p * n;
        neg_below += n;
    }
    Ok(twice_wins as f64 / (2 * pos * neg) as f64)
}

/// Average precision: sum over descending distinct thresholds of
/// `delta recall * precision`. Tied scores form a single step.
pub fn auprc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let total_pos = labels.iter().filter(|&&l| l != 0).count() as u64;
    if total_pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for (p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        if p > 0 {
            ap += (p as f64 / total_pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// F1 of `score >= threshold` predictions; 0 when precision + recall is 0.
pub fn f1<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auroc: f64,
    pub auprc: f64,
    pub f1: f64,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl EvalReport {
    pub fn compute<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> Result<Self, MetricError> {
        let n_pos = labels.iter().filter(|&&l| l != 0).count();
        Ok(EvalReport {
            auroc: auroc(scores, labels)?,
            auprc: auprc(scores, labels)?,
            f1: f1(scores, labels, threshold)?,
            threshold: threshold.f64(),
            n_pos,
            n_neg: labels.len() - n_pos,
        })
    }

    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        format!(
            "auroc={}\nauprc={}\nf1={}\nthreshold={}\nn_pos={}\nn_neg={}\n",
            self.auroc, self.auprc, self.f1, self.threshold, self.n_pos, self.n_neg
        )
    }

    pub fn from_key_value(text: &str) -> Result<Self, String> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| format!("bad line {line:?}"))?;
            map.insert(k.trim(), v.trim());
        }
        let get = |k: &str| map.get(k).copied().ok_or_else(|| format!("missing key {k}"));
        let num = |k: &str| get(k)?.parse::<f64>().map_err(|e| format!("{k}: {e}"));
        let count = |k: &str| get(k)?.parse::<usize>().map_err(|e| format!("{k}: {e}"));
        Ok(EvalReport {
            auroc: num("auroc")?,
            auprc: num("auprc")?,
            f1: num("f1")?,
            threshold: num("threshold")?,
            n_pos: count("n_pos")?,
            n_neg: count("n_neg")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5f32; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.2], &[1, 1]), Err(MetricError::SingleClass));
        assert_eq!(auroc(&[f64::NAN, 0.2], &[0, 1]), Err(MetricError::NonFinite(0)));
    }

    #[test]
    fn auprc_examples() {
        let ap = auprc(&[0.9, 0.8, 0.7, 0.1], &[1, 0, 1, 0]).unwrap();
        assert!((ap - (0.5 + 2.0 / 3.0 * 0.5)).abs() < 1e-15);
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // constant scores: one step, precision equals prevalence
        assert_eq!(auprc(&[0.3; 8], &[1, 0, 0, 0, 1, 0, 0, 0]).unwrap(), 0.25);
        assert_eq!(auprc(&[0.3, 0.2], &[0, 0]), Err(MetricError::NoPositives));
    }

    #[test]
    fn f1_examples() {
        let v = f1(&[1.0, 0.0, 0.0], &[1, 1, 0], 0.5).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&[0.1, 0.2], &[1, 0], 0.5).unwrap(), 0.0);
        // P = R = 0.5
        assert_eq!(f1(&[0.9, 0.9, 0.1, 0.1], &[1, 0, 1, 0], 0.5).unwrap(), 0.5);
        // the threshold itself counts as positive
        assert_eq!(f1(&[0.5], &[1], 0.5).unwrap(), 1.0);
    }

    #[test]
    fn report_key_value_round_trip() {
        let r = EvalReport::compute(&[0.9, 0.2, 0.7, 0.4], &[1, 0, 0, 1], 0.5).unwrap();
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
        assert_eq!(EvalReport::from_key_value(&r.to_key_value()).unwrap(), r);
    }
}
