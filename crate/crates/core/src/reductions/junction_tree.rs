use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chem::MolecularGraph;

use super::{normalize_edges, Correspondence, ReducedGraph, ReducedKind, ReducedNode, ReductionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JtCategory {
    Singleton,
    Bond,
    Ring,
    Bridged,
}

impl JtCategory {
    pub const ALL: [JtCategory; 4] = [
        JtCategory::Singleton,
        JtCategory::Bond,
        JtCategory::Ring,
        JtCategory::Bridged,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    fn is_ring_like(self) -> bool {
        matches!(self, JtCategory::Ring | JtCategory::Bridged)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Tree decomposition into ring, bond and singleton clusters.
///
/// Rings sharing more than two atoms are fused into one bridged cluster.
/// Atoms where three or more clusters meet become singleton clusters, and a
/// maximum-weight spanning forest over the weighted cluster graph removes
/// any remaining cycles.
pub fn build_junction_tree(g: &MolecularGraph) -> (ReducedGraph, Correspondence) {
    let mut clusters: Vec<(Vec<usize>, JtCategory)> = g
        .rings()
        .iter()
        .map(|r| (r.atoms.clone(), JtCategory::Ring))
        .collect();

    'merge: loop {
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if intersection_size(&clusters[i].0, &clusters[j].0) > 2 {
                    let (other, _) = clusters.remove(j);
                    clusters[i].0 = union_sorted(&clusters[i].0, &other);
                    clusters[i].1 = JtCategory::Bridged;
                    continue 'merge;
                }
            }
        }
        break;
    }

    for (idx, bond) in g.bonds().iter().enumerate() {
        if !g.bond_in_ring(idx) {
            let (a, b) = (bond.begin.min(bond.end), bond.begin.max(bond.end));
            clusters.push((vec![a, b], JtCategory::Bond));
        }
    }
    for atom in 0..g.n_atoms() {
        if g.degree(atom) == 0 {
            clusters.push((vec![atom], JtCategory::Singleton));
        }
    }

    let mut atom_clusters = vec![Vec::new(); g.n_atoms()];
    for (c, (atoms, _)) in clusters.iter().enumerate() {
        for &a in atoms {
            atom_clusters[a].push(c);
        }
    }

    let mut weights: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (atom, cs) in atom_clusters.iter().enumerate() {
        if cs.len() <= 1 {
            continue;
        }
        let n_bonds = cs.iter().filter(|&&c| clusters[c].1 == JtCategory::Bond).count();
        let n_rings = cs.iter().filter(|&&c| clusters[c].1.is_ring_like()).count();
        let bond_hub = n_bonds > 2 || (n_bonds == 2 && cs.len() > 2);
        if bond_hub || n_rings > 2 {
            let weight = if bond_hub { 1 } else { 99 };
            clusters.push((vec![atom], JtCategory::Singleton));
            let s = clusters.len() - 1;
            for &c in cs {
                weights.insert((c, s), weight);
            }
        } else {
            for (i, &c1) in cs.iter().enumerate() {
                for &c2 in &cs[i + 1..] {
                    let count = intersection_size(&clusters[c1].0, &clusters[c2].0);
                    let key = (c1.min(c2), c1.max(c2));
                    let slot = weights.entry(key).or_insert(count);
                    *slot = (*slot).min(count);
                }
            }
        }
    }

    let mut candidates: Vec<((usize, usize), usize)> = weights.into_iter().collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut uf = UnionFind::new(clusters.len());
    let edges = normalize_edges(
        candidates
            .into_iter()
            .filter(|&((a, b), _)| uf.union(a, b))
            .map(|(e, _)| e),
    );

    let (atom_sets, categories): (Vec<_>, Vec<_>) = clusters.into_iter().unzip();
    let tree = ReducedGraph {
        kind: ReducedKind::JunctionTree,
        nodes: categories.into_iter().map(ReducedNode::junction).collect(),
        edges,
        atom_sets,
    };
    let corr = tree.correspondence(g.n_atoms());
    (tree, corr)
}

/// Coarsens a junction tree by `resolution - 1` contraction rounds.
///
/// In each round, nodes are visited in index order; an unmatched bond or
/// singleton node merges into its lowest-index unmatched neighbor, and both
/// are then matched for the rest of the round. The merged node keeps the
/// absorbing neighbor's category and position.
pub fn coarsen_junction_tree(
    t: &ReducedGraph,
    c: &Correspondence,
    resolution: u32,
) -> Result<(ReducedGraph, Correspondence), ReductionError> {
    if !(1..=3).contains(&resolution) {
        return Err(ReductionError::InvalidResolution(resolution));
    }
    if t.kind != ReducedKind::JunctionTree {
        return Err(ReductionError::WrongKind(t.kind));
    }
    let mut tree = t.clone();
    for _ in 1..resolution {
        tree = contract_round(&tree);
    }
    let corr = tree.correspondence(c.n_atoms());
    Ok((tree, corr))
}

fn contract_round(t: &ReducedGraph) -> ReducedGraph {
    let n = t.n_nodes();
    let adj = t.neighbors();
    let mut matched = vec![false; n];
    let mut target: Vec<usize> = (0..n).collect();
    for v in 0..n {
        let category = t.nodes[v].jt_category.expect("junction-tree node");
        if matched[v] || category.is_ring_like() {
            continue;
        }
        if let Some(&u) = adj[v].iter().find(|&&u| !matched[u]) {
            target[v] = u;
            matched[v] = true;
            matched[u] = true;
        }
    }

    let roots: Vec<usize> = (0..n).filter(|&v| target[v] == v).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &r) in roots.iter().enumerate() {
        new_index[r] = k;
    }
    let mut atom_sets: Vec<Vec<usize>> = roots.iter().map(|&r| t.atom_sets[r].clone()).collect();
    for v in 0..n {
        if target[v] != v {
            let k = new_index[target[v]];
            atom_sets[k] = union_sorted(&atom_sets[k], &t.atom_sets[v]);
        }
    }
    let map = |v: usize| new_index[target[v]];
    ReducedGraph {
        kind: ReducedKind::JunctionTree,
        nodes: roots.iter().map(|&r| t.nodes[r].clone()).collect(),
        edges: normalize_edges(t.edges.iter().map(|&(a, b)| (map(a), map(b)))),
        atom_sets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn jt(smiles: &str) -> (ReducedGraph, Correspondence) {
        build_junction_tree(&parse_smiles(smiles).unwrap())
    }

    fn categories(t: &ReducedGraph) -> Vec<JtCategory> {
        t.nodes.iter().map(|n| n.jt_category.unwrap()).collect()
    }

    fn degree_sequence(t: &ReducedGraph) -> Vec<usize> {
        let mut d: Vec<usize> = t.neighbors().iter().map(Vec::len).collect();
        d.sort_unstable();
        d
    }

    #[test]
    fn benzene_is_one_ring_node() {
        let (t, c) = jt("c1ccccc1");
        assert_eq!(categories(&t), vec![JtCategory::Ring]);
        assert!(t.edges.is_empty());
        for a in 0..6 {
            assert_eq!(c.memberships(a), vec![0]);
        }
    }

    #[test]
    fn methane_is_one_singleton() {
        let (t, c) = jt("C");
        assert_eq!(categories(&t), vec![JtCategory::Singleton]);
        assert!(c.is_left_total());
    }

    #[test]
    fn chain_ring_chain_is_a_path_through_the_ring() {
        let (t, _) = jt("CCc1ccc(CC)cc1");
        assert_eq!(t.n_nodes(), 5);
        assert_eq!(degree_sequence(&t), vec![1, 1, 2, 2, 2]);
        let ring = categories(&t).iter().position(|&c| c == JtCategory::Ring).unwrap();
        assert_eq!(t.neighbors()[ring].len(), 2);
        assert!(t.is_forest() && t.n_components() == 1);
    }

    #[test]
    fn decalin_and_bicyclopentyl_differ() {
        let (d, _) = jt("C1CCC2CCCCC2C1");
        assert_eq!(categories(&d), vec![JtCategory::Ring, JtCategory::Ring]);
        assert_eq!(d.edges, vec![(0, 1)]);

        let (b, _) = jt("C1CCC(C1)C1CCCC1");
        assert_eq!(
            categories(&b),
            vec![JtCategory::Ring, JtCategory::Ring, JtCategory::Bond]
        );
        assert_eq!(b.edges, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn branching_atom_becomes_singleton() {
        // Neopentane: the central carbon joins four bond clusters.
        let (t, c) = jt("CC(C)(C)C");
        assert_eq!(t.n_nodes(), 5);
        assert_eq!(categories(&t)[4], JtCategory::Singleton);
        assert_eq!(t.atom_sets[4], vec![1]);
        assert_eq!(degree_sequence(&t), vec![1, 1, 1, 1, 4]);
        assert!(c.is_left_total());
    }

    #[test]
    fn bridged_rings_merge() {
        // Norbornane: two SSSR rings share three atoms.
        let (t, _) = jt("C1CC2CCC1C2");
        assert_eq!(categories(&t), vec![JtCategory::Bridged]);
        assert_eq!(t.atom_sets[0], (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn fused_three_ring_junction_stays_a_tree() {
        for smiles in ["c1ccc2cc3ccccc3cc2c1", "C1CC2CCC3CCCC4CCC1C2C34", "C12C3C4C1C5C2C3C45"] {
            let (t, c) = jt(smiles);
            assert!(t.is_forest(), "{smiles}");
            assert_eq!(t.n_components(), 1, "{smiles}");
            assert!(c.is_left_total());
        }
    }

    #[test]
    fn fragments_give_one_tree_per_component() {
        let (t, _) = jt("CCO.c1ccccc1.[Cl-]");
        assert!(t.is_forest());
        assert_eq!(t.n_components(), 3);
    }

    #[test]
    fn resolution_one_is_identity() {
        let (t, c) = jt("CC(C)c1ccccc1CCO");
        let (t1, c1) = coarsen_junction_tree(&t, &c, 1).unwrap();
        assert_eq!(t1, t);
        assert_eq!(c1, c);
    }

    #[test]
    fn bicyclopentyl_bond_is_absorbed() {
        let (t, c) = jt("C1CCC(C1)C1CCCC1");
        let (t2, c2) = coarsen_junction_tree(&t, &c, 2).unwrap();
        assert_eq!(t2.n_nodes(), 2);
        assert_eq!(t2.edges, vec![(0, 1)]);
        assert_eq!(t2.atom_sets[0], vec![0, 1, 2, 3, 4, 5]);
        assert!(c2.is_left_total());
    }

    #[test]
    fn hexane_contracts_five_three_two() {
        let (t, c) = jt("CCCCCC");
        assert_eq!(t.n_nodes(), 5);
        let (t2, _) = coarsen_junction_tree(&t, &c, 2).unwrap();
        assert_eq!(t2.atom_sets, vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 5]]);
        let (t3, c3) = coarsen_junction_tree(&t, &c, 3).unwrap();
        assert_eq!(t3.atom_sets, vec![vec![0, 1, 2, 3, 4], vec![4, 5]]);
        assert!(t3.is_forest() && t3.n_components() == 1);
        assert!(c3.is_left_total());
    }

    #[test]
    fn invalid_resolution() {
        let (t, c) = jt("CC");
        assert_eq!(
            coarsen_junction_tree(&t, &c, 0),
            Err(ReductionError::InvalidResolution(0))
        );
        assert_eq!(
            coarsen_junction_tree(&t, &c, 4),
            Err(ReductionError::InvalidResolution(4))
        );
    }
}
