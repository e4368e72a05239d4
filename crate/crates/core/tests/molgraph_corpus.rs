mod common;

use common::{drug_corpus, error_kind, malformed_corpus, permuted_pairs};
use nephrofp_core::molgraph::{parse_smiles, Molecule};

#[test]
fn drug_corpus_counts_match_oracle() {
    let corpus = drug_corpus();
    assert_eq!(corpus.len(), 30);
    for e in corpus {
        let m = parse_smiles(&e.smiles).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        let implicit: u32 = m.implicit_h().iter().map(|&h| h as u32).sum();
        let total: u32 = (0..m.atom_count()).map(|i| m.total_h(i).unwrap()).sum();
        assert_eq!(
            (m.atom_count(), m.bonds().len(), implicit, total),
            (e.atoms, e.bonds, e.implicit_h, e.total_h),
            "{}",
            e.name
        );
    }
}

#[test]
fn malformed_corpus_raises_documented_errors() {
    let cases = malformed_corpus();
    assert_eq!(cases.len(), 12);
    for (smiles, kind) in cases {
        match parse_smiles(&smiles) {
            Ok(_) => panic!("{smiles:?} parsed"),
            Err(e) => assert_eq!(error_kind(&e), kind, "{smiles:?}: {e}"),
        }
    }
}

/// Sorted atom and bond descriptors; equal for isomorphic graphs.
fn invariant_multiset(m: &Molecule) -> (Vec<(u8, i8, usize, u8, bool)>, Vec<u32>) {
    let mut atoms: Vec<_> = (0..m.atom_count())
        .map(|i| {
            let a = &m.atoms()[i];
            (a.element, a.formal_charge, m.heavy_degree(i).unwrap(), m.implicit_h()[i], m.ring_member()[i])
        })
        .collect();
    atoms.sort_unstable();
    let mut bonds: Vec<u32> = m.bonds().iter().map(|b| b.order.code()).collect();
    bonds.sort_unstable();
    (atoms, bonds)
}

#[test]
fn permuted_spellings_give_isomorphic_graphs() {
    for (a, b) in permuted_pairs() {
        let (ma, mb) = (parse_smiles(&a).unwrap(), parse_smiles(&b).unwrap());
        assert_eq!(invariant_multiset(&ma), invariant_multiset(&mb), "{a} vs {b}");
    }
}

#[test]
fn salts_keep_the_largest_fragment() {
    let m = parse_smiles("[Na+].[O-]C(=O)c1ccccc1").unwrap();
    assert_eq!(m.atom_count(), 9);
    // equal sizes: the first fragment wins
    let m = parse_smiles("[Na+].[Cl-]").unwrap();
    assert_eq!(m.atoms()[0].symbol(), "Na");
}
