//! Extended-connectivity fingerprints.
//!
//! Every heavy atom starts from a hash of its local invariants. Each round
//! rehashes an atom together with its neighbors' previous identifiers, so
//! after `r` rounds an identifier describes the circular neighborhood of
//! radius `r`. Identifiers covering the same set of bonds are collapsed to
//! one, and the survivors are folded into a fixed-width bit vector.

pub mod golden;
mod hash;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::molgraph::Molecule;

pub use hash::{hash32, murmur3_32};

pub const DEFAULT_WIDTH: usize = 1024;
pub const DEFAULT_RADIUS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint width {0} is not a power of two >= 2")]
    InvalidWidth(usize),
    #[error("fingerprint widths differ: {expected} vs {found}")]
    WidthMismatch { expected: usize, found: usize },
}

/// A hashed circular substructure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureId {
    pub value: u32,
    pub iteration: u32,
    /// Sorted bond indices covered by the neighborhood.
    pub bond_set: Vec<usize>,
    /// Atom the neighborhood is centred on.
    pub center: usize,
}

/// Fixed-width bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: u32,
}

fn check_width(width: usize) -> Result<(), FingerprintError> {
    if width >= 2 && width.is_power_of_two() {
        Ok(())
    } else {
        Err(FingerprintError::InvalidWidth(width))
    }
}

impl Fingerprint {
    pub fn zeros(width: usize, radius: u32) -> Result<Self, FingerprintError> {
        check_width(width)?;
        Ok(Fingerprint {
            words: vec![0; width.div_ceil(64)],
            width,
            radius,
        })
    }

    pub fn from_indices(
        width: usize,
        radius: u32,
        bits: impl IntoIterator<Item = usize>,
    ) -> Result<Self, FingerprintError> {
        let mut fp = Self::zeros(width, radius)?;
        for b in bits {
            fp.set(b % width);
        }
        Ok(fp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width, "bit {bit} outside width {}", self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.width && self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set bit indices in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|&b| self.get(b))
    }

    fn check_same_width(&self, other: &Fingerprint) -> Result<(), FingerprintError> {
        if self.width == other.width {
            Ok(())
        } else {
            Err(FingerprintError::WidthMismatch {
                expected: self.width,
                found: other.width,
            })
        }
    }

    pub fn is_subset_of(&self, other: &Fingerprint) -> Result<bool, FingerprintError> {
        self.check_same_width(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }
}

/// Per-atom invariant tuple: heavy degree, heavy valence, atomic number,
/// isotope (0 when unspecified), formal charge, attached hydrogens, ring flag.
fn atom_invariants(mol: &Molecule, atom: usize) -> [u32; 7] {
    let a = &mol.atoms()[atom];
    [
        mol.heavy_degree(atom).unwrap() as u32,
        mol.heavy_valence(atom).unwrap(),
        a.element as u32,
        a.isotope.unwrap_or(0) as u32,
        a.formal_charge as i32 as u32,
        mol.total_h(atom).unwrap(),
        mol.ring_member()[atom] as u32,
    ]
}

/// Atoms that receive identifiers: heavy atoms, or every atom for a
/// hydrogen-only molecule.
fn fingerprint_atoms(mol: &Molecule) -> Vec<bool> {
    if mol.heavy_atom_count() == 0 {
        vec![true; mol.atom_count()]
    } else {
        mol.atoms().iter().map(|a| a.is_heavy()).collect()
    }
}

/// Round-0 identifiers, one per fingerprinted atom in atom order.
pub fn initial_identifiers(mol: &Molecule) -> Vec<FeatureId> {
    fingerprint_atoms(mol)
        .iter()
        .enumerate()
        .filter(|(_, &keep)| keep)
        .map(|(i, _)| FeatureId {
            value: hash32(&atom_invariants(mol, i)),
            iteration: 0,
            bond_set: Vec::new(),
            center: i,
        })
        .collect()
}

/// All identifiers from rounds `0..=radius` before deduplication.
pub fn all_features(mol: &Molecule, radius: u32) -> Vec<FeatureId> {
    let active = fingerprint_atoms(mol);
    let mut current: Vec<Option<FeatureId>> = vec![None; mol.atom_count()];
    for f in initial_identifiers(mol) {
        let c = f.center;
        current[c] = Some(f);
    }
    let mut features: Vec<FeatureId> = current.iter().flatten().cloned().collect();

    for iteration in 1..=radius {
        let mut next = vec![None; mol.atom_count()];
        for (i, slot) in current.iter().enumerate() {
            let Some(me) = slot else { continue };
            let mut neighbors: Vec<(u32, u32)> = Vec::new();
            let mut bond_set = me.bond_set.clone();
            for &(n, b) in mol.neighbors(i) {
                if !active[n] {
                    continue;
                }
                let other = current[n].as_ref().unwrap();
                neighbors.push((mol.bonds()[b].order.code(), other.value));
                bond_set.push(b);
                bond_set.extend_from_slice(&other.bond_set);
            }
            neighbors.sort_unstable();
            bond_set.sort_unstable();
            bond_set.dedup();

            let mut words = Vec::with_capacity(2 + 2 * neighbors.len());
            words.push(iteration);
            words.push(me.value);
            for (code, id) in neighbors {
                words.push(code);
                words.push(id);
            }
            next[i] = Some(FeatureId {
                value: hash32(&words),
                iteration,
                bond_set,
                center: i,
            });
        }
        features.extend(next.iter().flatten().cloned());
        current = next;
    }
    features
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum StructureKey {
    Atom(usize),
    Bonds(Vec<usize>),
}

/// Identifiers that survive structural deduplication, ordered by
/// `(iteration, value)`.
///
/// Two identifiers describe the same structure when they cover the same bond
/// set; with an empty bond set the structure is the lone centre atom. Of
/// each group the one with the lowest iteration survives, then the lowest
/// value.
pub fn surviving_features(mol: &Molecule, radius: u32) -> Vec<FeatureId> {
    let mut best: BTreeMap<StructureKey, FeatureId> = BTreeMap::new();
    for f in all_features(mol, radius) {
        let key = if f.bond_set.is_empty() {
            StructureKey::Atom(f.center)
        } else {
            StructureKey::Bonds(f.bond_set.clone())
        };
        match best.get(&key) {
            Some(kept) if (kept.iteration, kept.value) <= (f.iteration, f.value) => {}
            _ => {
                best.insert(key, f);
            }
        }
    }
    let mut out: Vec<FeatureId> = best.into_values().collect();
    out.sort_by_key(|f| (f.iteration, f.value, f.center));
    out
}

/// Extended-connectivity fingerprint of `mol` folded to `width` bits.
pub fn ecfp(mol: &Molecule, radius: u32, width: usize) -> Result<Fingerprint, FingerprintError> {
    check_width(width)?;
    let features = surviving_features(mol, radius);
    Fingerprint::from_indices(
        width,
        radius,
        features.iter().map(|f| f.value as usize % width),
    )
}

/// Bitwise OR over the drugs of one stay. An empty list gives all zeros.
pub fn aggregate_stay_fingerprint(
    fps: &[Fingerprint],
    width: usize,
) -> Result<Fingerprint, FingerprintError> {
    let radius = fps.first().map_or(DEFAULT_RADIUS, |f| f.radius);
    let mut out = Fingerprint::zeros(width, radius)?;
    for fp in fps {
        out.check_same_width(fp)?;
        for (o, w) in out.words.iter_mut().zip(&fp.words) {
            *o |= w;
        }
    }
    Ok(out)
}

/// How a stay's drug fingerprints become feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum Aggregation {
    /// Presence of a bit in any drug (values 0/1).
    #[default]
    Or,
    /// Number of drugs setting a bit, clipped at `cap`.
    SumClipped { cap: u8 },
}


impl Aggregation {
    pub fn columns(&self, fps: &[Fingerprint], width: usize) -> Result<Vec<u8>, FingerprintError> {
        match *self {
            Aggregation::Or => {
                let fp = aggregate_stay_fingerprint(fps, width)?;
                Ok((0..width).map(|b| fp.get(b) as u8).collect())
            }
            Aggregation::SumClipped { cap } => {
                check_width(width)?;
                let mut counts = vec![0u8; width];
                for fp in fps {
                    if fp.width != width {
                        return Err(FingerprintError::WidthMismatch {
                            expected: width,
                            found: fp.width,
                        });
                    }
                    for b in fp.ones() {
                        counts[b] = counts[b].saturating_add(1).min(cap);
                    }
                }
                Ok(counts)
            }
        }
    }
}

/// `|a & b| / |a | b|`, defined as 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    a.check_same_width(b)?;
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn fp(s: &str, r: u32, w: usize) -> Fingerprint {
        ecfp(&parse_smiles(s).unwrap(), r, w).unwrap()
    }

    #[test]
    fn lone_atom_sets_one_bit() {
        assert_eq!(fp("C", 2, 1024).count_ones(), 1);
        assert_eq!(surviving_features(&parse_smiles("C").unwrap(), 2).len(), 1);
    }

    #[test]
    fn equivalent_atoms_share_initial_identifiers() {
        let ids = initial_identifiers(&parse_smiles("CC(C)O").unwrap());
        assert_eq!(ids[0].value, ids[2].value);
        assert_ne!(ids[0].value, ids[1].value);
        let ids = initial_identifiers(&parse_smiles("CCO").unwrap());
        let c = initial_identifiers(&parse_smiles("C").unwrap());
        let o = initial_identifiers(&parse_smiles("O").unwrap());
        assert_ne!(c[0].value, o[0].value);
        assert_ne!(ids[0].value, ids[2].value);
    }

    #[test]
    fn spelling_does_not_matter() {
        for r in 0..=2 {
            for w in [256, 1024] {
                assert_eq!(fp("CCO", r, w), fp("OCC", r, w));
            }
        }
        assert_eq!(fp("c1ccccc1O", 2, 1024), fp("Oc1ccccc1", 2, 1024));
    }

    #[test]
    fn ethane_deduplicates_the_shared_bond() {
        // round 0: one identifier per atom (both equal), round 1: both cover bond 0
        let feats = surviving_features(&parse_smiles("CC").unwrap(), 2);
        assert_eq!(feats.len(), 3);
        assert_eq!(feats.iter().filter(|f| f.iteration == 1).count(), 1);
    }

    #[test]
    fn rounds_accumulate() {
        let m = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        for r in 0..4 {
            let lo = ecfp(&m, r, 1024).unwrap();
            let hi = ecfp(&m, r + 1, 1024).unwrap();
            assert!(lo.is_subset_of(&hi).unwrap());
        }
    }

    #[test]
    fn fold_matches_surviving_ids() {
        let m = parse_smiles("CN1C=NC2=C1C(=O)N(C(=O)N2C)C").unwrap();
        let f = ecfp(&m, 2, 64).unwrap();
        let surviving = surviving_features(&m, 2);
        assert!(f.count_ones() <= surviving.len());
        for b in f.ones() {
            assert!(surviving.iter().any(|s| s.value as usize % 64 == b));
        }
    }

    #[test]
    fn width_validation() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(ecfp(&m, 2, 1000), Err(FingerprintError::InvalidWidth(1000)));
        assert_eq!(ecfp(&m, 2, 1), Err(FingerprintError::InvalidWidth(1)));
        assert!(ecfp(&m, 2, 2).is_ok());
    }

    #[test]
    fn aggregation() {
        let a = Fingerprint::from_indices(4, 2, [0, 1]).unwrap();
        let b = Fingerprint::from_indices(4, 2, [0, 2]).unwrap();
        let or = aggregate_stay_fingerprint(&[a.clone(), b.clone()], 4).unwrap();
        assert_eq!(or.ones().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(aggregate_stay_fingerprint(std::slice::from_ref(&a), 4).unwrap(), a);
        let empty = aggregate_stay_fingerprint(&[], 1024).unwrap();
        assert_eq!((empty.width(), empty.count_ones()), (1024, 0));
        let wide = Fingerprint::zeros(8, 2).unwrap();
        assert_eq!(
            aggregate_stay_fingerprint(&[a.clone(), wide], 4),
            Err(FingerprintError::WidthMismatch { expected: 4, found: 8 })
        );
        assert_eq!(Aggregation::Or.columns(&[a.clone(), b.clone()], 4).unwrap(), vec![1, 1, 1, 0]);
        assert_eq!(
            Aggregation::SumClipped { cap: 4 }.columns(&[a.clone(), b.clone()], 4).unwrap(),
            vec![2, 1, 1, 0]
        );
        assert_eq!(
            Aggregation::SumClipped { cap: 1 }.columns(&[a, b], 4).unwrap(),
            vec![1, 1, 1, 0]
        );
    }

    #[test]
    fn tanimoto_examples() {
        let a = Fingerprint::from_indices(4, 2, [2, 3]).unwrap();
        let b = Fingerprint::from_indices(4, 2, [1, 2]).unwrap();
        assert!((tanimoto(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = Fingerprint::from_indices(4, 2, [0]).unwrap();
        assert_eq!(tanimoto(&b, &c).unwrap(), 0.0);
        let z = Fingerprint::zeros(4, 2).unwrap();
        assert_eq!(tanimoto(&z, &z).unwrap(), 1.0);
        let w = Fingerprint::zeros(8, 2).unwrap();
        assert!(tanimoto(&z, &w).is_err());
    }
}
