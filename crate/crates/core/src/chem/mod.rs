//! Molecular graphs parsed from a SMILES subset.
//!
//! The supported subset covers the organic-subset atoms, bracket atoms with
//! explicit hydrogens and charges, ring closures (`1`-`9`, `%nn`), branches,
//! the bond symbols `- = # :` and `.`-separated fragments. Stereo marks and
//! isotopes are rejected with [`ParseError::UnsupportedFeature`].
//!
//! Aromaticity is purely syntactic: lowercase atoms are aromatic, and an
//! implicit bond between two aromatic atoms is aromatic when it lies on a ring.

mod rings;
mod smiles;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use rings::perceive_sssr;
pub use smiles::parse_smiles;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unsupported SMILES feature at {position}: {feature}")]
    UnsupportedFeature { position: usize, feature: String },
    #[error("unbalanced ring closure {label}")]
    UnbalancedRingClosure { label: u32 },
    #[error("unbalanced parenthesis at {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("unknown element `{symbol}` at {position}")]
    UnknownElement { position: usize, symbol: String },
    #[error("valence violation on atom {atom}")]
    ValenceViolation { atom: usize },
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    /// Position in [`Element::ALL`], used for one-hot featurization.
    pub fn ordinal(self) -> usize {
        Element::ALL.iter().position(|&e| e == self).unwrap()
    }

    /// Default valence used for implicit hydrogen counting.
    pub fn default_valence(self) -> u8 {
        self.allowed_valences()[0]
    }

    /// Allowed neutral valences, smallest first.
    pub(crate) fn allowed_valences(self) -> &'static [u8] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    pub implicit_h_count: u8,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const ALL: [BondOrder; 4] = [
        BondOrder::Single,
        BondOrder::Double,
        BondOrder::Triple,
        BondOrder::Aromatic,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Contribution to the valence of each endpoint. Aromatic bonds count as
    /// one; the aromatic atom's extra electron is accounted for separately.
    pub(crate) fn valence_contribution(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// A ring of the smallest set of smallest rings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ring {
    /// Sorted atom indices.
    pub atoms: Vec<usize>,
    /// Sorted bond indices.
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: usize) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }
}

/// An immutable molecular graph with perceived rings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// `(neighbor, bond index)` per atom, sorted by neighbor.
    neighbors: Vec<Vec<(usize, usize)>>,
    rings: Vec<Ring>,
}

impl MolecularGraph {
    /// Assembles a graph from atoms and bonds and perceives its rings.
    ///
    /// Atom `index` fields are rewritten to match positions. Bonds must have
    /// distinct endpoints and at most one bond may join any atom pair.
    pub fn from_parts(mut atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, ParseError> {
        for (i, atom) in atoms.iter_mut().enumerate() {
            atom.index = i;
        }
        let mut neighbors = vec![Vec::new(); atoms.len()];
        for (b, bond) in bonds.iter().enumerate() {
            if bond.begin == bond.end || bond.begin >= atoms.len() || bond.end >= atoms.len() {
                return Err(ParseError::Syntax {
                    position: 0,
                    message: format!("invalid bond endpoints ({}, {})", bond.begin, bond.end),
                });
            }
            if neighbors[bond.begin]
                .iter()
                .any(|&(n, _)| n == bond.end)
            {
                return Err(ParseError::Syntax {
                    position: 0,
                    message: format!("duplicate bond between {} and {}", bond.begin, bond.end),
                });
            }
            neighbors[bond.begin].push((bond.end, b));
            neighbors[bond.end].push((bond.begin, b));
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let pairs: Vec<(usize, usize)> = bonds.iter().map(|b| (b.begin, b.end)).collect();
        let rings = rings::minimum_cycle_basis(atoms.len(), &pairs);
        Ok(MolecularGraph {
            atoms,
            bonds,
            neighbors,
            rings,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.neighbors[atom].len()
    }

    /// `(neighbor atom, bond index)` pairs sorted by neighbor index.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.neighbors[atom]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbors[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bond)| bond)
    }

    /// Dense symmetric adjacency matrix with zero diagonal.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.atoms.len();
        let mut a = vec![vec![false; n]; n];
        for bond in &self.bonds {
            a[bond.begin][bond.end] = true;
            a[bond.end][bond.begin] = true;
        }
        a
    }

    /// Connected-component label per atom, labels assigned in atom order.
    pub fn components(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(v) = stack.pop() {
                for &(u, _) in &self.neighbors[v] {
                    if label[u] == usize::MAX {
                        label[u] = next;
                        stack.push(u);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// `|E| - |V| + components`.
    pub fn cycle_rank(&self) -> usize {
        self.bonds.len() + self.n_components() - self.atoms.len()
    }

    pub fn atom_in_ring(&self, atom: usize) -> bool {
        self.rings.iter().any(|r| r.contains(atom))
    }

    /// Number of SSSR rings containing `atom`.
    pub fn ring_count_of(&self, atom: usize) -> usize {
        self.rings.iter().filter(|r| r.contains(atom)).count()
    }

    pub fn bond_in_ring(&self, bond: usize) -> bool {
        self.rings.iter().any(|r| r.bonds.binary_search(&bond).is_ok())
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ParseError> {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = self.atoms.clone();
        for (old, atom) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = atom.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: perm[b.begin],
                end: perm[b.end],
                order: b.order,
            })
            .collect();
        MolecularGraph::from_parts(atoms, bonds)
    }
}
