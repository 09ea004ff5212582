use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::chem::{BondOrder, Element, MolecularGraph};

use super::{normalize_edges, Correspondence, ReducedGraph, ReducedKind, ReducedNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErgFeature {
    Donor,
    Acceptor,
    Positive,
    Negative,
    Hydrophobic,
    Aromatic,
    FlipFlop,
    RingAromatic,
    RingAliphatic,
}

impl ErgFeature {
    pub const ALL: [ErgFeature; 9] = [
        ErgFeature::Donor,
        ErgFeature::Acceptor,
        ErgFeature::Positive,
        ErgFeature::Negative,
        ErgFeature::Hydrophobic,
        ErgFeature::Aromatic,
        ErgFeature::FlipFlop,
        ErgFeature::RingAromatic,
        ErgFeature::RingAliphatic,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }
}

/// Feature flags of one ErG node, indexed by [`ErgFeature::ordinal`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ErgFeatures(pub [bool; 9]);

impl ErgFeatures {
    pub fn with(mut self, f: ErgFeature) -> Self {
        self.0[f.ordinal()] = true;
        self
    }

    pub fn has(&self, f: ErgFeature) -> bool {
        self.0[f.ordinal()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn as_vector(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Per-atom charge state after protonation at physiological pH.
struct Charged {
    charge: Vec<i8>,
    h: Vec<u8>,
}

fn has_multiple_bond(g: &MolecularGraph, atom: usize) -> bool {
    g.neighbors(atom)
        .iter()
        .any(|&(_, b)| matches!(g.bonds()[b].order, BondOrder::Double | BondOrder::Triple))
}

fn double_bonded_to(g: &MolecularGraph, atom: usize, element: Element) -> bool {
    g.neighbors(atom).iter().any(|&(n, b)| {
        g.bonds()[b].order == BondOrder::Double && g.atoms()[n].element == element
    })
}

fn apply_charges(g: &MolecularGraph) -> Charged {
    let atoms = g.atoms();
    let mut charge: Vec<i8> = atoms.iter().map(|a| a.formal_charge).collect();
    let mut h: Vec<u8> = atoms.iter().map(|a| a.implicit_h_count).collect();

    for (i, atom) in atoms.iter().enumerate() {
        match atom.element {
            // Carboxylic acid: deprotonate the hydroxyl oxygen.
            Element::O
                if atom.formal_charge == 0 && h[i] == 1 && g.degree(i) == 1 && !atom.aromatic =>
            {
                let (c, b) = g.neighbors(i)[0];
                let carbon = &atoms[c];
                if carbon.element == Element::C
                    && !carbon.aromatic
                    && g.bonds()[b].order == BondOrder::Single
                    && double_bonded_to(g, c, Element::O)
                {
                    charge[i] = -1;
                    h[i] = 0;
                }
            }
            // Aliphatic amine: protonate.
            Element::N if atom.formal_charge == 0 && !atom.aromatic => {
                let aliphatic = g.neighbors(i).iter().all(|&(n, b)| {
                    g.bonds()[b].order == BondOrder::Single
                        && atoms[n].element == Element::C
                        && !atoms[n].aromatic
                        && !has_multiple_bond(g, n)
                });
                if aliphatic {
                    charge[i] = 1;
                    h[i] += 1;
                }
            }
            _ => {}
        }
    }
    Charged { charge, h }
}

fn polar_features(g: &MolecularGraph, charged: &Charged, atom: usize) -> ErgFeatures {
    let a = &g.atoms()[atom];
    let (q, h) = (charged.charge[atom], charged.h[atom]);
    let mut f = ErgFeatures::default();
    if q > 0 {
        f = f.with(ErgFeature::Positive);
    } else if q < 0 {
        f = f.with(ErgFeature::Negative);
    }
    let donor = matches!(a.element, Element::N | Element::O) && h > 0;
    let acceptor = match a.element {
        Element::O => q <= 0,
        Element::N if q <= 0 => {
            if a.aromatic {
                h == 0 && g.degree(atom) == 2
            } else {
                // Amide and aniline nitrogens donate their lone pair.
                !g.neighbors(atom).iter().any(|&(n, _)| {
                    g.atoms()[n].aromatic
                        || (matches!(g.atoms()[n].element, Element::C | Element::S)
                            && double_bonded_to(g, n, Element::O))
                })
            }
        }
        _ => false,
    };
    match (donor, acceptor) {
        (true, true) => f.with(ErgFeature::FlipFlop),
        (true, false) => f.with(ErgFeature::Donor),
        (false, true) => f.with(ErgFeature::Acceptor),
        (false, false) => f,
    }
}

fn is_thioether(g: &MolecularGraph, charged: &Charged, atom: usize) -> bool {
    let a = &g.atoms()[atom];
    a.element == Element::S
        && !a.aromatic
        && charged.charge[atom] == 0
        && charged.h[atom] == 0
        && g.degree(atom) == 2
        && g.neighbors(atom).iter().all(|&(n, b)| {
            g.atoms()[n].element == Element::C && g.bonds()[b].order == BondOrder::Single
        })
}

/// Atoms reachable from `start` without crossing `blocked`, or `None` when
/// more than `limit` are found.
fn side_of(g: &MolecularGraph, start: usize, blocked: usize, limit: usize) -> Option<Vec<usize>> {
    let mut seen = vec![start];
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &(n, _) in g.neighbors(v) {
            if n == blocked || seen.contains(&n) {
                continue;
            }
            if seen.len() == limit {
                return None;
            }
            seen.push(n);
            queue.push_back(n);
        }
    }
    seen.sort_unstable();
    Some(seen)
}

/// Terminal hydrophobic branches of at most three carbon or thioether atoms
/// attached to a larger or featured remainder, chosen largest first.
fn endcap_groups(g: &MolecularGraph, charged: &Charged, featured: &[bool]) -> Vec<Vec<usize>> {
    let comp = g.components();
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut comp_size = vec![0usize; n_comp];
    let mut comp_anchor = vec![false; n_comp];
    for atom in 0..g.n_atoms() {
        comp_size[comp[atom]] += 1;
        comp_anchor[comp[atom]] |= g.atom_in_ring(atom) || featured[atom];
    }

    let eligible = |a: usize| {
        !g.atom_in_ring(a)
            && !featured[a]
            && (g.atoms()[a].element == Element::C || is_thioether(g, charged, a))
    };

    let mut candidates = Vec::new();
    for (idx, bond) in g.bonds().iter().enumerate() {
        if g.bond_in_ring(idx) {
            continue;
        }
        for (u, v) in [(bond.begin, bond.end), (bond.end, bond.begin)] {
            let Some(side) = side_of(g, u, v, 3) else {
                continue;
            };
            let c = comp[u];
            let rest_substantive = comp_size[c] - side.len() > 3 || comp_anchor[c];
            if rest_substantive && side.iter().all(|&a| eligible(a)) {
                candidates.push(side);
            }
        }
    }
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])).then(a.cmp(b)));
    candidates.dedup();

    let mut taken = vec![false; g.n_atoms()];
    let mut groups = Vec::new();
    for side in candidates {
        if side.iter().any(|&a| taken[a]) {
            continue;
        }
        side.iter().for_each(|&a| taken[a] = true);
        groups.push(side);
    }
    groups.sort();
    groups
}

/// Extended reduced graph with pharmacophore features and ring centroids.
///
/// Nodes are ordered as retained atoms and endcap groups (by lowest atom
/// index) followed by one centroid per ring.
pub fn build_erg(g: &MolecularGraph) -> (ReducedGraph, Correspondence) {
    let n = g.n_atoms();
    let charged = apply_charges(g);
    let polar: Vec<ErgFeatures> = (0..n).map(|a| polar_features(g, &charged, a)).collect();
    let featured: Vec<bool> = polar.iter().map(|f| !f.is_empty()).collect();

    let groups = endcap_groups(g, &charged, &featured);
    let mut group_of = vec![None; n];
    for (k, grp) in groups.iter().enumerate() {
        for &a in grp {
            group_of[a] = Some(k);
        }
    }

    let retained_ring_atom = |a: usize| {
        featured[a]
            || g.ring_count_of(a) >= 2
            || g.neighbors(a).iter().any(|&(_, b)| !g.bond_in_ring(b))
    };

    let mut nodes = Vec::new();
    let mut atom_sets = Vec::new();
    let mut node_of = vec![None; n];
    for atom in 0..n {
        if let Some(k) = group_of[atom] {
            if groups[k][0] == atom {
                for &a in &groups[k] {
                    node_of[a] = Some(nodes.len());
                }
                nodes.push(ErgFeatures::default().with(ErgFeature::Hydrophobic));
                atom_sets.push(groups[k].clone());
            }
            continue;
        }
        if g.atom_in_ring(atom) && !retained_ring_atom(atom) {
            continue;
        }
        let mut f = polar[atom];
        if !g.atom_in_ring(atom) && is_thioether(g, &charged, atom) {
            f = f.with(ErgFeature::Hydrophobic);
        }
        node_of[atom] = Some(nodes.len());
        nodes.push(f);
        atom_sets.push(vec![atom]);
    }

    let mut edges: Vec<(usize, usize)> = g
        .bonds()
        .iter()
        .filter_map(|b| Some((node_of[b.begin]?, node_of[b.end]?)))
        .collect();
    for ring in g.rings() {
        let aromatic = ring.atoms.iter().all(|&a| g.atoms()[a].aromatic);
        let f = if aromatic {
            ErgFeatures::default()
                .with(ErgFeature::Aromatic)
                .with(ErgFeature::RingAromatic)
        } else {
            ErgFeatures::default()
                .with(ErgFeature::Hydrophobic)
                .with(ErgFeature::RingAliphatic)
        };
        let centroid = nodes.len();
        nodes.push(f);
        atom_sets.push(ring.atoms.clone());
        edges.extend(ring.atoms.iter().filter_map(|&a| Some((centroid, node_of[a]?))));
    }

    let erg = ReducedGraph {
        kind: ReducedKind::Erg,
        nodes: nodes.into_iter().map(ReducedNode::erg).collect(),
        edges: normalize_edges(edges),
        atom_sets,
    };
    let corr = erg.correspondence(n);
    (erg, corr)
}
