mod common;

use common::{drug_corpus, fixture, permuted_pairs};
use nephrofp_core::fingerprint::golden::parse_golden;
use nephrofp_core::fingerprint::{ecfp, surviving_features, DEFAULT_RADIUS, DEFAULT_WIDTH};
use nephrofp_core::molgraph::parse_smiles;

#[test]
fn golden_bits_match_oracle() {
    let golden = parse_golden(&std::fs::read_to_string(fixture("golden_ecfp.tsv")).unwrap()).unwrap();
    assert_eq!(golden.len(), 120);
    for g in golden {
        let fp = ecfp(&parse_smiles(&g.smiles).unwrap(), g.radius, g.width).unwrap();
        assert_eq!(fp.ones().collect::<Vec<_>>(), g.bits, "{} r{} w{}", g.smiles, g.radius, g.width);
    }
}

#[test]
fn permuted_pairs_give_identical_fingerprints() {
    let pairs = permuted_pairs();
    assert_eq!(pairs.len(), 50);
    for (a, b) in pairs {
        for (r, w) in [(0, 1024), (1, 1024), (2, 1024), (2, 256), (3, 2048)] {
            let fa = ecfp(&parse_smiles(&a).unwrap(), r, w).unwrap();
            let fb = ecfp(&parse_smiles(&b).unwrap(), r, w).unwrap();
            assert_eq!(fa, fb, "{a} vs {b} at r{r} w{w}");
        }
    }
}

#[test]
fn bits_accumulate_with_radius() {
    for e in drug_corpus() {
        let m = parse_smiles(&e.smiles).unwrap();
        for r in 0..3 {
            let small = ecfp(&m, r, DEFAULT_WIDTH).unwrap();
            let large = ecfp(&m, r + 1, DEFAULT_WIDTH).unwrap();
            assert!(small.is_subset_of(&large).unwrap(), "{} r{r}", e.name);
        }
    }
}

#[test]
fn every_bit_comes_from_a_surviving_identifier() {
    for e in drug_corpus() {
        let m = parse_smiles(&e.smiles).unwrap();
        let survivors = surviving_features(&m, DEFAULT_RADIUS);
        let fp = ecfp(&m, DEFAULT_RADIUS, DEFAULT_WIDTH).unwrap();
        let mut folded: Vec<usize> = survivors.iter().map(|f| f.value as usize % DEFAULT_WIDTH).collect();
        folded.sort_unstable();
        folded.dedup();
        assert_eq!(fp.ones().collect::<Vec<_>>(), folded, "{}", e.name);
        assert!(fp.count_ones() >= 1 && fp.count_ones() <= survivors.len());
    }
}
