//! Molecular graphs parsed from SMILES.
//!
//! [`parse_smiles`] accepts the organic subset, bracket atoms (isotope,
//! charge, hydrogen count), explicit bonds, branches, ring closures (`0-9`
//! and `%nn`) and `.`-separated fragments. Stereo markers are read and
//! dropped. Only the fragment with the most heavy atoms is kept.

pub mod elements;
mod parse;
mod substructure;

use thiserror::Error;

pub use parse::parse_smiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MolError {
    #[error("SMILES syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("ring-closure label {label} opened but never closed")]
    RingClosure { label: u8 },
    #[error("atom {atom} ({symbol}) has bond-order sum {connections}, above its maximum valence {max}")]
    Valence {
        atom: usize,
        symbol: &'static str,
        connections: u32,
        max: u32,
    },
    #[error("atom index {index} out of range for a molecule with {len} atoms")]
    Index { index: usize, len: usize },
}

impl MolError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        MolError::Syntax {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable numeric code: single=1, double=2, triple=3, aromatic=4.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to the bond-order sum of an atom. Aromatic bonds count as
    /// one; the extra pi contribution is added per atom.
    pub(crate) fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    /// Atomic number.
    pub element: u8,
    pub formal_charge: i8,
    /// Hydrogen count written inside brackets. `None` for organic-subset
    /// atoms, `Some(0)` for bracket atoms without an `H`.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    pub aromatic: bool,
    pub index: usize,
}

impl Atom {
    pub fn symbol(&self) -> &'static str {
        elements::symbol(self.element)
    }

    pub fn is_heavy(&self) -> bool {
        self.element != elements::HYDROGEN
    }

    /// True when the atom was written in brackets.
    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.endpoints.0 == atom {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// An immutable, connected molecular graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    implicit_h: Vec<u8>,
    ring_member: Vec<bool>,
    // neighbor atom, bond index
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>, implicit_h: Vec<u8>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            adjacency[b.endpoints.0].push((b.endpoints.1, i));
            adjacency[b.endpoints.1].push((b.endpoints.0, i));
        }
        let ring_bonds = ring_bonds(atoms.len(), &bonds, &adjacency);
        let mut ring_member = vec![false; atoms.len()];
        for (b, &in_ring) in bonds.iter().zip(&ring_bonds) {
            if in_ring {
                ring_member[b.endpoints.0] = true;
                ring_member[b.endpoints.1] = true;
            }
        }
        Molecule {
            atoms,
            bonds,
            implicit_h,
            ring_member,
            adjacency,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_heavy()).count()
    }

    pub fn implicit_h(&self) -> &[u8] {
        &self.implicit_h
    }

    pub fn ring_member(&self) -> &[bool] {
        &self.ring_member
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    fn check_index(&self, atom: usize) -> Result<(), MolError> {
        if atom < self.atoms.len() {
            Ok(())
        } else {
            Err(MolError::Index {
                index: atom,
                len: self.atoms.len(),
            })
        }
    }

    /// Number of non-hydrogen neighbors.
    pub fn heavy_degree(&self, atom: usize) -> Result<usize, MolError> {
        self.check_index(atom)?;
        Ok(self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].is_heavy())
            .count())
    }

    /// Implicit, bracket and explicit-atom hydrogens attached to `atom`.
    pub fn total_h(&self, atom: usize) -> Result<u32, MolError> {
        self.check_index(atom)?;
        let h_atoms = self.adjacency[atom]
            .iter()
            .filter(|(n, _)| !self.atoms[*n].is_heavy())
            .count() as u32;
        let a = &self.atoms[atom];
        Ok(self.implicit_h[atom] as u32 + a.explicit_h.unwrap_or(0) as u32 + h_atoms)
    }

    /// Bond-order sum over heavy neighbors, with one extra unit for aromatic
    /// atoms that contribute a pi bond (B, C, N, P).
    pub fn heavy_valence(&self, atom: usize) -> Result<u32, MolError> {
        self.check_index(atom)?;
        let sum: u32 = self.adjacency[atom]
            .iter()
            .filter(|(n, _)| self.atoms[*n].is_heavy())
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum();
        Ok(sum + pi_reserve(&self.atoms[atom]))
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, i)| &self.bonds[i])
    }

    /// True when `pattern` maps injectively onto this molecule with equal
    /// elements, aromaticity and bond orders. Hydrogen counts are ignored.
    pub fn contains_substructure(&self, pattern: &Molecule) -> bool {
        substructure::contains(self, pattern)
    }
}

pub(crate) fn pi_reserve(atom: &Atom) -> u32 {
    use elements::*;
    u32::from(atom.aromatic && matches!(atom.element, BORON | CARBON | NITROGEN | PHOSPHORUS))
}

/// A bond lies on a ring iff its endpoints stay connected without it.
fn ring_bonds(n_atoms: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut seen = vec![false; n_atoms];
    let mut stack = Vec::new();
    bonds
        .iter()
        .enumerate()
        .map(|(skip, bond)| {
            seen.iter_mut().for_each(|s| *s = false);
            stack.clear();
            let (start, goal) = bond.endpoints;
            seen[start] = true;
            stack.push(start);
            while let Some(a) = stack.pop() {
                if a == goal {
                    return true;
                }
                for &(n, b) in &adjacency[a] {
                    if b != skip && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            false
        })
        .collect()
}
