//! Fixture loaders and small data generators shared by the integration
//! tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nephrofp_core::model::Dataset;
use nephrofp_core::molgraph::MolError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Non-comment, non-empty lines split on tabs.
pub fn tsv_rows(name: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

pub struct CorpusEntry {
    pub name: String,
    pub smiles: String,
    pub atoms: usize,
    pub bonds: usize,
    pub implicit_h: u32,
    pub total_h: u32,
}

pub fn drug_corpus() -> Vec<CorpusEntry> {
    tsv_rows("drug_corpus.tsv")
        .into_iter()
        .map(|r| CorpusEntry {
            name: r[0].clone(),
            smiles: r[1].clone(),
            atoms: r[2].parse().unwrap(),
            bonds: r[3].parse().unwrap(),
            implicit_h: r[4].parse().unwrap(),
            total_h: r[5].parse().unwrap(),
        })
        .collect()
}

/// `(smiles, expected error kind)`; the first row is the empty string.
pub fn malformed_corpus() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixture("malformed_smiles.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && l.contains('\t'))
        .map(|l| {
            let (s, k) = l.split_once('\t').unwrap();
            (s.to_string(), k.to_string())
        })
        .collect()
}

pub fn permuted_pairs() -> Vec<(String, String)> {
    tsv_rows("permuted_pairs.tsv").into_iter().map(|r| (r[0].clone(), r[1].clone())).collect()
}

/// Two uniform features on [-1, 1); label is `a + b/2 > 0`.
pub fn toy(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        x.extend([a, b]);
        y.push(u8::from(a + 0.5 * b > 0.0));
    }
    Dataset::new(x, y, vec!["a".into(), "b".into()]).unwrap()
}

/// Explicit pairwise count: wins plus half ties over positive-negative pairs.
pub fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                den += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Second-order gain of splitting rows into `left` and the rest.
pub fn partition_gain(grad: &[f64], hess: &[f64], left: &[bool]) -> f64 {
    const LAMBDA: f64 = 1.0;
    let (mut gl, mut hl, mut g, mut h) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..grad.len() {
        g += grad[i];
        h += hess[i];
        if left[i] {
            gl += grad[i];
            hl += hess[i];
        }
    }
    let score = |g: f64, h: f64| g * g / (h + LAMBDA);
    0.5 * (score(gl, hl) + score(g - gl, h - hl) - score(g, h))
}

pub fn error_kind(e: &MolError) -> &'static str {
    match e {
        MolError::Syntax { .. } => "syntax",
        MolError::RingClosure { .. } => "ring_closure",
        MolError::Valence { .. } => "valence",
        MolError::Index { .. } => "index",
    }
}
