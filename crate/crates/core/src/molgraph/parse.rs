use super::elements::{self, default_valences};
use super::{pi_reserve, Atom, Bond, BondOrder, MolError, Molecule};

const MAX_OPEN_RING_CLOSURES: usize = 100;
const BRACKET_MAX_VALENCE: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Order(BondOrder),
    // `/` and `\`: single bonds with discarded stereo
    Directional,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Order(o) => o,
            BondSymbol::Directional => BondOrder::Single,
        }
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSymbol>,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    rings: Vec<Option<OpenRing>>,
}

/// Parses a SMILES string into a [`Molecule`].
///
/// Implicit hydrogens follow the default valences B 3, C 4, N 3, O 2,
/// P 3/5, S 2/4/6 and halogens 1. Aromatic B, C, N and P reserve one unit
/// for the ring pi bond, so a ring `c` with two ring neighbors carries one H
/// and a pyridine-type `n` carries none.
pub fn parse_smiles(text: &str) -> Result<Molecule, MolError> {
    if text.is_empty() {
        return Err(MolError::syntax(0, "empty SMILES"));
    }
    if let Some(p) = text.bytes().position(|b| !b.is_ascii() || b.is_ascii_control()) {
        return Err(MolError::syntax(p, "non-ASCII or control character"));
    }
    let mut parser = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        rings: (0..MAX_OPEN_RING_CLOSURES).map(|_| None).collect(),
    };
    parser.run()?;
    let implicit_h = implicit_hydrogens(&parser.atoms, &parser.bonds)?;
    Ok(select_largest_fragment(parser.atoms, parser.bonds, implicit_h))
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn err(&self, message: impl Into<String>) -> MolError {
        MolError::syntax(self.pos, message)
    }

    fn run(&mut self) -> Result<(), MolError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<BondSymbol> = None;
        let mut branches: Vec<usize> = Vec::new();
        // the previous token opened a branch or separated a fragment
        let mut after_open = false;
        let mut after_dot = false;

        while let Some(c) = self.peek() {
            match c {
                b'[' | b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c'
                | b'n' | b'o' | b'p' | b's' => {
                    let start = self.pos;
                    let atom = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.organic_atom()?
                    };
                    let idx = self.atoms.len();
                    self.atoms.push(Atom { index: idx, ..atom });
                    match prev {
                        Some(p) => self.add_bond(p, idx, pending.take(), start)?,
                        None if pending.is_some() => {
                            return Err(MolError::syntax(start, "bond without a preceding atom"))
                        }
                        None => {}
                    }
                    prev = Some(idx);
                    after_open = false;
                    after_dot = false;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() {
                        return Err(self.err("bond without a preceding atom"));
                    }
                    if pending.is_some() {
                        return Err(self.err("consecutive bond symbols"));
                    }
                    pending = Some(match c {
                        b'-' => BondSymbol::Order(BondOrder::Single),
                        b'=' => BondSymbol::Order(BondOrder::Double),
                        b'#' => BondSymbol::Order(BondOrder::Triple),
                        b':' => BondSymbol::Order(BondOrder::Aromatic),
                        _ => BondSymbol::Directional,
                    });
                    self.pos += 1;
                }
                b'(' => {
                    let Some(p) = prev else {
                        return Err(self.err("branch without a preceding atom"));
                    };
                    if pending.is_some() {
                        return Err(self.err("bond symbol before a branch"));
                    }
                    branches.push(p);
                    after_open = true;
                    self.pos += 1;
                }
                b')' => {
                    let Some(p) = branches.pop() else {
                        return Err(self.err("unbalanced ')'"));
                    };
                    if after_open {
                        return Err(self.err("empty branch"));
                    }
                    if pending.is_some() || after_dot {
                        return Err(self.err("branch ends with a dangling bond"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let start = self.pos;
                    let label = self.ring_label()?;
                    let Some(p) = prev else {
                        return Err(MolError::syntax(start, "ring closure without a preceding atom"));
                    };
                    self.ring_closure(p, label, pending.take(), start)?;
                }
                b'.' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.err("empty fragment"));
                    }
                    prev = None;
                    after_dot = true;
                    self.pos += 1;
                }
                _ => {
                    return Err(self.err(format!("unexpected character '{}'", c as char)));
                }
            }
        }

        if !branches.is_empty() {
            return Err(self.err("unbalanced '('"));
        }
        if pending.is_some() {
            return Err(self.err("SMILES ends with a bond symbol"));
        }
        if after_dot {
            return Err(self.err("empty fragment"));
        }
        if let Some(label) = self.rings.iter().position(Option::is_some) {
            return Err(MolError::RingClosure { label: label as u8 });
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, MolError> {
        let c = self.text[self.pos];
        let next = self.text.get(self.pos + 1).copied();
        let (symbol, len, aromatic) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", 2, false),
            (b'B', Some(b'r')) => ("Br", 2, false),
            (b'b', _) => ("B", 1, true),
            (b'c', _) => ("C", 1, true),
            (b'n', _) => ("N", 1, true),
            (b'o', _) => ("O", 1, true),
            (b'p', _) => ("P", 1, true),
            (b's', _) => ("S", 1, true),
            _ => (std::str::from_utf8(&self.text[self.pos..self.pos + 1]).unwrap(), 1, false),
        };
        self.pos += len;
        Ok(Atom {
            element: elements::atomic_number(symbol).expect("organic subset symbol"),
            formal_charge: 0,
            explicit_h: None,
            isotope: None,
            aromatic,
            index: 0,
        })
    }

    fn digits(&mut self, max_len: usize) -> Option<u32> {
        let start = self.pos;
        while self.pos - start < max_len && self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            std::str::from_utf8(&self.text[start..self.pos])
                .unwrap()
                .parse()
                .unwrap()
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, MolError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = match self.digits(4) {
            Some(m) if m == 0 => return Err(self.err("isotope mass must be positive")),
            Some(m) => Some(m as u16),
            None => None,
        };

        let (element, aromatic) = self.bracket_symbol()?;

        // chirality: @, @@, @TH1, @SP2, @TB10, @OH25 ...
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.peek().is_some_and(|c| c.is_ascii_uppercase())
                && self.text.get(self.pos + 1).is_some_and(|c| c.is_ascii_uppercase())
            {
                let class = &self.text[self.pos..self.pos + 2];
                if !matches!(class, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    return Err(self.err("unknown chirality class"));
                }
                self.pos += 2;
                if self.digits(2).is_none() {
                    return Err(self.err("chirality class without a number"));
                }
            }
        }

        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = self.digits(1).unwrap_or(1) as u8;
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.digits(2) {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
            if charge.abs() > 15 {
                return Err(self.err("formal charge out of range"));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits(8).is_none() {
                return Err(self.err("atom class without a number"));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(_) => return Err(self.err("unexpected character in bracket atom")),
            None => return Err(MolError::syntax(open, "unclosed '['")),
        }

        Ok(Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: Some(explicit_h),
            isotope,
            aromatic,
            index: 0,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(u8, bool), MolError> {
        let Some(first) = self.peek() else {
            return Err(self.err("unclosed '['"));
        };
        if first.is_ascii_lowercase() {
            let z = match first {
                b'b' => elements::BORON,
                b'c' => elements::CARBON,
                b'n' => elements::NITROGEN,
                b'o' => elements::OXYGEN,
                b'p' => elements::PHOSPHORUS,
                b's' => elements::SULFUR,
                _ => return Err(self.err("unsupported aromatic symbol")),
            };
            if self.text.get(self.pos + 1).is_some_and(|c| c.is_ascii_lowercase()) {
                return Err(self.err("unsupported aromatic symbol"));
            }
            self.pos += 1;
            return Ok((z, true));
        }
        if !first.is_ascii_uppercase() {
            return Err(self.err("expected an element symbol"));
        }
        if let Some(second) = self.text.get(self.pos + 1).filter(|c| c.is_ascii_lowercase()) {
            let two = [first, *second];
            if let Some(z) = elements::atomic_number(std::str::from_utf8(&two).unwrap()) {
                self.pos += 2;
                return Ok((z, false));
            }
        }
        let one = [first];
        match elements::atomic_number(std::str::from_utf8(&one).unwrap()) {
            Some(z) => {
                self.pos += 1;
                Ok((z, false))
            }
            None => Err(self.err("unknown element symbol")),
        }
    }

    fn ring_label(&mut self) -> Result<u8, MolError> {
        if self.peek() == Some(b'%') {
            self.pos += 1;
            let start = self.pos;
            match self.digits(2) {
                Some(n) if self.pos - start == 2 => Ok(n as u8),
                _ => Err(self.err("'%' must be followed by two digits")),
            }
        } else {
            let d = self.text[self.pos] - b'0';
            self.pos += 1;
            Ok(d)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        label: u8,
        bond: Option<BondSymbol>,
        at: usize,
    ) -> Result<(), MolError> {
        match self.rings[label as usize].take() {
            Some(open) => {
                let symbol = match (open.bond, bond) {
                    (Some(a), Some(b)) if a.order() != b.order() => {
                        return Err(MolError::syntax(at, "conflicting ring-closure bond symbols"))
                    }
                    (a, b) => a.or(b),
                };
                if open.atom == atom {
                    return Err(MolError::syntax(at, "ring closure bonds an atom to itself"));
                }
                self.add_bond(open.atom, atom, symbol, at)
            }
            None => {
                let open = self.rings.iter().filter(|r| r.is_some()).count();
                if open >= MAX_OPEN_RING_CLOSURES {
                    return Err(MolError::syntax(at, "too many open ring closures"));
                }
                self.rings[label as usize] = Some(OpenRing { atom, bond });
                Ok(())
            }
        }
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        symbol: Option<BondSymbol>,
        at: usize,
    ) -> Result<(), MolError> {
        let exists = self.bonds.iter().any(|bond| {
            bond.endpoints == (a, b) || bond.endpoints == (b, a)
        });
        if exists {
            return Err(MolError::syntax(at, "duplicate bond between the same atoms"));
        }
        let order = match symbol {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push(Bond {
            endpoints: (a, b),
            order,
        });
        Ok(())
    }
}

fn implicit_hydrogens(atoms: &[Atom], bonds: &[Bond]) -> Result<Vec<u8>, MolError> {
    let mut sums = vec![0u32; atoms.len()];
    for b in bonds {
        sums[b.endpoints.0] += b.order.valence();
        sums[b.endpoints.1] += b.order.valence();
    }
    atoms
        .iter()
        .zip(&sums)
        .map(|(atom, &sum)| {
            let valence_error = |max: u32| MolError::Valence {
                atom: atom.index,
                symbol: atom.symbol(),
                connections: sum,
                max,
            };
            if let Some(h) = atom.explicit_h {
                let max = default_valences(atom.element)
                    .map(|v| *v.last().unwrap() as u32 + atom.formal_charge.unsigned_abs() as u32)
                    .unwrap_or(BRACKET_MAX_VALENCE);
                if sum + h as u32 > max {
                    return Err(valence_error(max));
                }
                return Ok(0);
            }
            let valences = default_valences(atom.element).expect("organic subset atom");
            let max = *valences.last().unwrap() as u32;
            if sum > max {
                return Err(valence_error(max));
            }
            let used = sum + pi_reserve(atom);
            Ok(valences
                .iter()
                .map(|&v| v as u32)
                .find(|&v| v >= used)
                .map_or(0, |v| (v - used) as u8))
        })
        .collect()
}

fn select_largest_fragment(atoms: Vec<Atom>, bonds: Vec<Bond>, implicit_h: Vec<u8>) -> Molecule {
    let n = atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for b in &bonds {
        let (ra, rb) = (find(&mut parent, b.endpoints.0), find(&mut parent, b.endpoints.1));
        if ra != rb {
            // keep the smaller index as root so roots identify first appearance
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut heavy = vec![0usize; n];
    for (atom, &r) in atoms.iter().zip(&roots) {
        if atom.is_heavy() {
            heavy[r] += 1;
        }
    }
    // roots are the first atom of their fragment; strict '>' keeps the earliest on ties
    let mut best = roots[0];
    for r in 0..n {
        if roots[r] == r && heavy[r] > heavy[best] {
            best = r;
        }
    }
    if roots.iter().all(|&r| r == best) {
        return Molecule::from_parts(atoms, bonds, implicit_h);
    }

    let mut remap = vec![usize::MAX; n];
    let mut kept_atoms = Vec::new();
    let mut kept_h = Vec::new();
    for (i, atom) in atoms.into_iter().enumerate() {
        if roots[i] == best {
            remap[i] = kept_atoms.len();
            kept_h.push(implicit_h[i]);
            kept_atoms.push(Atom {
                index: remap[i],
                ..atom
            });
        }
    }
    let kept_bonds = bonds
        .into_iter()
        .filter(|b| roots[b.endpoints.0] == best)
        .map(|b| Bond {
            endpoints: (remap[b.endpoints.0], remap[b.endpoints.1]),
            order: b.order,
        })
        .collect();
    Molecule::from_parts(kept_atoms, kept_bonds, kept_h)
}
