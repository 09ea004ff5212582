use std::collections::BTreeMap;

use super::{Atom, Bond, BondOrder, Element, MolecularGraph, ParseError};

#[derive(Debug, Clone)]
struct RawAtom {
    element: Element,
    aromatic: bool,
    charge: i8,
    /// Hydrogen count written inside brackets; `None` for organic-subset atoms.
    bracket_h: Option<u8>,
}

#[derive(Debug, Clone, Copy)]
struct RawBond {
    begin: usize,
    end: usize,
    explicit: Option<BondOrder>,
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    atoms: Vec<RawAtom>,
    bonds: Vec<RawBond>,
    _text: &'a str,
}

/// Parses a SMILES string into a [`MolecularGraph`].
///
/// Atom order equals token order. Ring closures are paired, rings are
/// perceived and implicit hydrogens are assigned from the default valence
/// table (with the higher valences of P and S allowed).
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser {
        chars: text.trim().chars().collect(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        _text: text,
    };
    parser.run()?;
    parser.finish()
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn unsupported(&self, feature: &str) -> ParseError {
        ParseError::UnsupportedFeature {
            position: self.pos,
            feature: feature.to_string(),
        }
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<BondOrder> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut open_rings: BTreeMap<u32, (usize, Option<BondOrder>)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            match c {
                '(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.syntax("branch without a preceding atom"));
                    }
                    branches.push((prev, self.pos));
                    self.pos += 1;
                }
                ')' => {
                    let Some((atom, _)) = branches.pop() else {
                        return Err(ParseError::UnbalancedParenthesis { position: self.pos });
                    };
                    if pending.is_some() {
                        return Err(self.syntax("bond symbol before `)`"));
                    }
                    prev = atom;
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.syntax("misplaced bond symbol"));
                    }
                    pending = Some(match c {
                        '-' => BondOrder::Single,
                        '=' => BondOrder::Double,
                        '#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    });
                    self.pos += 1;
                }
                '/' | '\\' => return Err(self.unsupported("directional (stereo) bond")),
                '$' => return Err(self.unsupported("quadruple bond")),
                '@' => return Err(self.unsupported("chirality")),
                '.' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.syntax("misplaced `.`"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => {
                    let Some(atom) = prev else {
                        return Err(self.syntax("ring closure without a preceding atom"));
                    };
                    let label = self.ring_label()?;
                    match open_rings.remove(&label) {
                        Some((opener, opener_bond)) => {
                            let explicit = match (opener_bond, pending) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(self.syntax("conflicting ring-closure bond orders"))
                                }
                                (a, b) => a.or(b),
                            };
                            self.add_bond(opener, atom, explicit)?;
                        }
                        None => {
                            open_rings.insert(label, (atom, pending));
                        }
                    }
                    pending = None;
                }
                '[' => {
                    let raw = self.bracket_atom()?;
                    prev = Some(self.push_atom(raw, prev, pending.take())?);
                }
                _ => {
                    let raw = self.organic_atom()?;
                    prev = Some(self.push_atom(raw, prev, pending.take())?);
                }
            }
        }
        if let Some((_, position)) = branches.pop() {
            return Err(ParseError::UnbalancedParenthesis { position });
        }
        if let Some((&label, _)) = open_rings.iter().next() {
            return Err(ParseError::UnbalancedRingClosure { label });
        }
        if pending.is_some() {
            return Err(self.syntax("trailing bond symbol"));
        }
        if prev.is_none() {
            return Err(self.syntax("trailing `.`"));
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32, ParseError> {
        let c = self.chars[self.pos];
        if c == '%' {
            let digits: String = self
                .chars
                .get(self.pos + 1..self.pos + 3)
                .map(|s| s.iter().collect())
                .unwrap_or_default();
            if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                return Err(self.syntax("`%` must be followed by two digits"));
            }
            self.pos += 3;
            Ok(digits.parse().unwrap())
        } else {
            let label = c.to_digit(10).unwrap();
            if label == 0 {
                return Err(self.syntax("ring-closure digit 0 is not supported"));
            }
            self.pos += 1;
            Ok(label)
        }
    }

    fn push_atom(
        &mut self,
        raw: RawAtom,
        prev: Option<usize>,
        bond: Option<BondOrder>,
    ) -> Result<usize, ParseError> {
        let idx = self.atoms.len();
        self.atoms.push(raw);
        if let Some(p) = prev {
            self.add_bond(p, idx, bond)?;
        } else if bond.is_some() {
            return Err(self.syntax("bond symbol without a preceding atom"));
        }
        Ok(idx)
    }

    fn add_bond(&mut self, a: usize, b: usize, explicit: Option<BondOrder>) -> Result<(), ParseError> {
        if a == b {
            return Err(self.syntax("ring closure onto the same atom"));
        }
        let duplicate = self
            .bonds
            .iter()
            .any(|x| (x.begin == a && x.end == b) || (x.begin == b && x.end == a));
        if duplicate {
            return Err(self.syntax("duplicate bond between the same atom pair"));
        }
        self.bonds.push(RawBond {
            begin: a,
            end: b,
            explicit,
        });
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<RawAtom, ParseError> {
        let start = self.pos;
        let c = self.chars[self.pos];
        let next = self.chars.get(self.pos + 1).copied();
        let (element, aromatic, width) = match (c, next) {
            ('C', Some('l')) => (Element::Cl, false, 2),
            ('B', Some('r')) => (Element::Br, false, 2),
            ('B', _) => (Element::B, false, 1),
            ('C', _) => (Element::C, false, 1),
            ('N', _) => (Element::N, false, 1),
            ('O', _) => (Element::O, false, 1),
            ('P', _) => (Element::P, false, 1),
            ('S', _) => (Element::S, false, 1),
            ('F', _) => (Element::F, false, 1),
            ('I', _) => (Element::I, false, 1),
            ('b', _) => (Element::B, true, 1),
            ('c', _) => (Element::C, true, 1),
            ('n', _) => (Element::N, true, 1),
            ('o', _) => (Element::O, true, 1),
            ('p', _) => (Element::P, true, 1),
            ('s', _) => (Element::S, true, 1),
            _ => {
                return Err(ParseError::UnknownElement {
                    position: start,
                    symbol: c.to_string(),
                })
            }
        };
        self.pos += width;
        Ok(RawAtom {
            element,
            aromatic,
            charge: 0,
            bracket_h: None,
        })
    }

    fn bracket_atom(&mut self) -> Result<RawAtom, ParseError> {
        let open = self.pos;
        self.pos += 1;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(self.unsupported("isotope"));
        }
        let mut symbol = String::new();
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => {
                symbol.push(c);
                self.pos += 1;
            }
            _ => return Err(self.syntax("expected element symbol in bracket atom")),
        }
        if symbol.chars().next().unwrap().is_ascii_uppercase() {
            if let Some(c) = self.peek() {
                if c.is_ascii_lowercase() {
                    symbol.push(c);
                    self.pos += 1;
                }
            }
        }
        let aromatic = symbol.chars().next().unwrap().is_ascii_lowercase();
        let lookup = if aromatic {
            let mut s = symbol.clone();
            s[..1].make_ascii_uppercase();
            s
        } else {
            symbol.clone()
        };
        let element = Element::from_symbol(&lookup)
            .filter(|e| {
                !aromatic
                    || matches!(
                        e,
                        Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
                    )
            })
            .ok_or(ParseError::UnknownElement {
                position: open + 1,
                symbol,
            })?;

        if self.peek() == Some('@') {
            return Err(self.unsupported("chirality"));
        }
        let mut hydrogens = 0u8;
        if self.peek() == Some('H') {
            self.pos += 1;
            hydrogens = 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                hydrogens = d as u8;
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        while let Some(c @ ('+' | '-')) = self.peek() {
            let sign = if c == '+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                charge += sign * d as i32;
                self.pos += 1;
            } else {
                charge += sign;
            }
        }
        if !(-2..=2).contains(&charge) {
            return Err(self.unsupported("formal charge outside [-2, 2]"));
        }
        match self.peek() {
            Some(']') => self.pos += 1,
            Some(':') => return Err(self.unsupported("atom class")),
            Some('@') => return Err(self.unsupported("chirality")),
            Some(_) => return Err(self.syntax("unexpected character in bracket atom")),
            None => return Err(self.syntax("unterminated bracket atom")),
        }
        Ok(RawAtom {
            element,
            aromatic,
            charge: charge as i8,
            bracket_h: Some(hydrogens),
        })
    }

    fn finish(self) -> Result<MolecularGraph, ParseError> {
        let n = self.atoms.len();
        let ring_bond = cyclic_edges(n, &self.bonds);
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .enumerate()
            .map(|(i, rb)| {
                let order = rb.explicit.unwrap_or_else(|| {
                    if self.atoms[rb.begin].aromatic && self.atoms[rb.end].aromatic && ring_bond[i] {
                        BondOrder::Aromatic
                    } else {
                        BondOrder::Single
                    }
                });
                Bond {
                    begin: rb.begin,
                    end: rb.end,
                    order,
                }
            })
            .collect();

        let mut bond_sum = vec![0u8; n];
        for b in &bonds {
            bond_sum[b.begin] += b.order.valence_contribution();
            bond_sum[b.end] += b.order.valence_contribution();
        }
        let mut atoms = Vec::with_capacity(n);
        for (i, raw) in self.atoms.iter().enumerate() {
            let valences: Vec<i32> = raw
                .element
                .allowed_valences()
                .iter()
                .map(|&v| charge_adjusted(raw.element, v, raw.charge))
                .collect();
            let max_valence = *valences.iter().max().unwrap();
            let used = bond_sum[i] as i32;
            let implicit_h_count = match raw.bracket_h {
                Some(h) => {
                    if used + h as i32 > max_valence {
                        return Err(ParseError::ValenceViolation { atom: i });
                    }
                    h
                }
                None => {
                    let target = valences
                        .iter()
                        .copied()
                        .find(|&v| v >= used)
                        .ok_or(ParseError::ValenceViolation { atom: i })?;
                    let mut free = target - used;
                    // An aromatic atom with a free valence contributes one
                    // electron to the pi system instead of carrying a hydrogen.
                    if raw.aromatic && free > 0 {
                        free -= 1;
                    }
                    free as u8
                }
            };
            atoms.push(Atom {
                element: raw.element,
                formal_charge: raw.charge,
                aromatic: raw.aromatic,
                implicit_h_count,
                index: i,
            });
        }
        MolecularGraph::from_parts(atoms, bonds)
    }
}

fn charge_adjusted(element: Element, valence: u8, charge: i8) -> i32 {
    let v = valence as i32;
    let q = charge as i32;
    let adjusted = match element {
        Element::B | Element::C => v - q.abs(),
        _ => v + q,
    };
    adjusted.max(0)
}

/// Marks bonds that lie on a cycle (non-bridges).
fn cyclic_edges(n: usize, bonds: &[RawBond]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (i, b) in bonds.iter().enumerate() {
        adj[b.begin].push((b.end, i));
        adj[b.end].push((b.begin, i));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut cyclic = vec![true; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (vertex, parent edge, next neighbor position).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (v, parent_edge) = (top.0, top.1);
            if top.2 < adj[v].len() {
                let (u, e) = adj[v][top.2];
                top.2 += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, e, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        cyclic[parent_edge] = false;
                    }
                }
            }
        }
    }
    cyclic
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degrees(g: &MolecularGraph) -> Vec<usize> {
        let mut d: Vec<usize> = (0..g.n_atoms()).map(|i| g.degree(i)).collect();
        d.sort_unstable();
        d
    }

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.n_atoms(), 1);
        assert_eq!(g.n_bonds(), 0);
        assert_eq!(g.atoms()[0].implicit_h_count, 4);
        assert_eq!(g.atoms()[0].element, Element::C);
    }

    #[test]
    fn three_hydroxypyridine() {
        let g = parse_smiles("Oc1cnccc1").unwrap();
        assert_eq!(g.n_atoms(), 7);
        assert_eq!(g.n_bonds(), 7);
        let o = g.atoms().iter().filter(|a| a.element == Element::O).count();
        let c = g
            .atoms()
            .iter()
            .filter(|a| a.element == Element::C && a.aromatic)
            .count();
        let n = g
            .atoms()
            .iter()
            .filter(|a| a.element == Element::N && a.aromatic)
            .count();
        assert_eq!((o, c, n), (1, 5, 1));
        assert_eq!(g.rings().len(), 1);
        assert_eq!(g.rings()[0].len(), 6);
        assert_eq!(g.atoms()[0].implicit_h_count, 1);
        assert_eq!(g.atoms()[1].implicit_h_count, 0);
        assert_eq!(g.atoms()[3].implicit_h_count, 0);
        assert_eq!(g.bonds()[0].order, BondOrder::Single);
        let aromatic = g
            .bonds()
            .iter()
            .filter(|b| b.order == BondOrder::Aromatic)
            .count();
        assert_eq!(aromatic, 6);
    }

    #[test]
    fn decalin_and_bicyclopentyl_share_degree_multiset() {
        let decalin = parse_smiles("C1CCC2CCCCC2C1").unwrap();
        let bicyclopentyl = parse_smiles("C1CCC(C1)C1CCCC1").unwrap();
        for g in [&decalin, &bicyclopentyl] {
            assert_eq!(g.n_atoms(), 10);
            assert_eq!(g.n_bonds(), 11);
            let mut expected = vec![2; 8];
            expected.extend([3, 3]);
            assert_eq!(degrees(g), expected);
        }
    }

    #[test]
    fn decalin_bond_list() {
        let g = parse_smiles("C1CCC2CCCCC2C1").unwrap();
        let mut pairs: Vec<(usize, usize)> = g
            .bonds()
            .iter()
            .map(|b| (b.begin.min(b.end), b.begin.max(b.end)))
            .collect();
        pairs.sort_unstable();
        let expected = vec![
            (0, 1),
            (0, 9),
            (1, 2),
            (2, 3),
            (3, 4),
            (3, 8),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 9),
        ];
        assert_eq!(pairs, expected);
    }

    #[test]
    fn implicit_hydrogens_follow_valence_table() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let h: Vec<u8> = g.atoms().iter().map(|a| a.implicit_h_count).collect();
        assert_eq!(h, vec![3, 0, 0, 1]);
        let g = parse_smiles("C#N").unwrap();
        assert_eq!(g.atoms()[0].implicit_h_count, 1);
        assert_eq!(g.atoms()[1].implicit_h_count, 0);
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.atoms()[1].implicit_h_count, 0);
        let g = parse_smiles("C[N+](C)(C)C").unwrap();
        assert_eq!(g.atoms()[1].formal_charge, 1);
        let g = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(g.atoms()[3].formal_charge, -1);
        assert_eq!(g.atoms()[3].implicit_h_count, 0);
    }

    #[test]
    fn aromatic_heteroatoms() {
        let furan = parse_smiles("o1cccc1").unwrap();
        assert_eq!(furan.atoms()[0].implicit_h_count, 0);
        assert_eq!(furan.atoms()[1].implicit_h_count, 1);
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(pyrrole.atoms()[3].implicit_h_count, 1);
        let naphthalene = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(naphthalene.atoms()[3].implicit_h_count, 0);
        assert_eq!(naphthalene.atoms()[0].implicit_h_count, 1);
    }

    #[test]
    fn biphenyl_linker_is_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let linker = g.bond_between(5, 6).unwrap();
        assert_eq!(g.bonds()[linker].order, BondOrder::Single);
        assert_eq!(g.rings().len(), 2);
    }

    #[test]
    fn percent_ring_labels_and_fragments() {
        let g = parse_smiles("C%10CC%10.CCO").unwrap();
        assert_eq!(g.n_atoms(), 6);
        assert_eq!(g.n_components(), 2);
        assert_eq!(g.rings().len(), 1);
    }

    #[test]
    fn rejects_unsupported_input() {
        assert!(matches!(parse_smiles(""), Err(ParseError::Empty)));
        assert!(matches!(
            parse_smiles("F/C=C/F"),
            Err(ParseError::UnsupportedFeature { .. })
        ));
        assert!(matches!(
            parse_smiles("N[C@@H](C)C(=O)O"),
            Err(ParseError::UnsupportedFeature { .. })
        ));
        assert!(matches!(
            parse_smiles("[13CH4]"),
            Err(ParseError::UnsupportedFeature { .. })
        ));
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(ParseError::UnbalancedRingClosure { label: 1 })
        ));
        assert!(matches!(
            parse_smiles("CC(C"),
            Err(ParseError::UnbalancedParenthesis { .. })
        ));
        assert!(matches!(
            parse_smiles("CC)C"),
            Err(ParseError::UnbalancedParenthesis { .. })
        ));
        assert!(matches!(
            parse_smiles("[Xe]"),
            Err(ParseError::UnknownElement { .. })
        ));
        assert!(matches!(
            parse_smiles("C*"),
            Err(ParseError::UnknownElement { .. })
        ));
        assert!(matches!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(ParseError::ValenceViolation { atom: 0 })
        ));
        assert!(matches!(
            parse_smiles("FF(F)"),
            Err(ParseError::ValenceViolation { .. })
        ));
        assert!(matches!(
            parse_smiles("C="),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn degree_sum_is_twice_bond_count() {
        for s in ["CC(C)(C)O", "c1ccc2ccccc2c1", "C1CC2CCC1CC2", "OC(=O)CN"] {
            let g = parse_smiles(s).unwrap();
            let total: usize = (0..g.n_atoms()).map(|i| g.degree(i)).sum();
            assert_eq!(total, 2 * g.n_bonds(), "{s}");
        }
    }
}
