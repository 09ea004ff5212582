//! Smallest set of smallest rings, realized as a minimum cycle basis.
//!
//! Candidate cycles are the Horton set (for every vertex `w` and edge
//! `(x, y)`, the BFS path `w..x`, the edge, and the BFS path `y..w`) plus the
//! shortest cycle through every edge. Candidates are ordered by size, then by
//! the sorted atom-index tuple, and accepted greedily while they are linearly
//! independent over GF(2) in edge space.

use std::collections::{HashSet, VecDeque};

use super::{MolecularGraph, Ring};

/// SSSR atom sets of `g`, in basis order.
pub fn perceive_sssr(g: &MolecularGraph) -> Vec<Vec<usize>> {
    g.rings().iter().map(|r| r.atoms.clone()).collect()
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct EdgeSet(Vec<u64>);

impl EdgeSet {
    fn new(n_edges: usize) -> Self {
        EdgeSet(vec![0; n_edges.div_ceil(64)])
    }

    fn set(&mut self, e: usize) {
        self.0[e / 64] |= 1 << (e % 64);
    }

    fn get(&self, e: usize) -> bool {
        self.0[e / 64] >> (e % 64) & 1 == 1
    }

    fn xor_assign(&mut self, other: &EdgeSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn indices(&self, n_edges: usize) -> Vec<usize> {
        (0..n_edges).filter(|&e| self.get(e)).collect()
    }
}

struct Candidate {
    atoms: Vec<usize>,
    edges: EdgeSet,
}

struct Bfs {
    dist: Vec<usize>,
    /// `(parent vertex, edge to parent)`.
    parent: Vec<Option<(usize, usize)>>,
}

fn bfs(adj: &[Vec<(usize, usize)>], root: usize) -> Bfs {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    let mut queue = VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        for &(u, e) in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                parent[u] = Some((v, e));
                queue.push_back(u);
            }
        }
    }
    Bfs { dist, parent }
}

/// Vertices and edges on the BFS-tree path from `v` back to the root.
fn tree_path(tree: &Bfs, mut v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut vertices = vec![v];
    let mut edges = Vec::new();
    while let Some((p, e)) = tree.parent[v] {
        edges.push(e);
        vertices.push(p);
        v = p;
    }
    (vertices, edges)
}

pub(crate) fn minimum_cycle_basis(n_atoms: usize, bonds: &[(usize, usize)]) -> Vec<Ring> {
    let n_edges = bonds.len();
    let rank = cycle_rank(n_atoms, bonds);
    if rank == 0 {
        return Vec::new();
    }
    let mut adj = vec![Vec::new(); n_atoms];
    for (e, &(a, b)) in bonds.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    // Only vertices of degree >= 2 after pruning trees can lie on cycles.
    let cyclic = two_core(&adj);

    let mut seen: HashSet<EdgeSet> = HashSet::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut push = |atoms: Vec<usize>, edge_list: &[usize]| {
        let mut edges = EdgeSet::new(n_edges);
        for &e in edge_list {
            edges.set(e);
        }
        if seen.insert(edges.clone()) {
            let mut atoms = atoms;
            atoms.sort_unstable();
            candidates.push(Candidate { atoms, edges });
        }
    };

    for w in (0..n_atoms).filter(|&v| cyclic[v]) {
        let tree = bfs(&adj, w);
        for (e, &(x, y)) in bonds.iter().enumerate() {
            if !cyclic[x] || !cyclic[y] {
                continue;
            }
            if tree.dist[x] == usize::MAX || tree.dist[y] == usize::MAX {
                continue;
            }
            if tree.parent[x].map(|p| p.1) == Some(e) || tree.parent[y].map(|p| p.1) == Some(e) {
                continue;
            }
            let (vx, ex) = tree_path(&tree, x);
            let (vy, ey) = tree_path(&tree, y);
            // The two root paths may only meet at the root.
            let sx: HashSet<usize> = vx.iter().copied().collect();
            if vy.iter().filter(|v| sx.contains(v)).count() != 1 {
                continue;
            }
            let mut atoms = vx;
            atoms.extend(vy.into_iter().filter(|&v| v != w));
            let mut edges = ex;
            edges.extend(ey);
            edges.push(e);
            push(atoms, &edges);
        }
    }

    // Shortest cycle through each cyclic edge.
    for (e, &(x, y)) in bonds.iter().enumerate() {
        if !cyclic[x] || !cyclic[y] {
            continue;
        }
        let mut without = adj.clone();
        without[x].retain(|&(_, f)| f != e);
        without[y].retain(|&(_, f)| f != e);
        let tree = bfs(&without, x);
        if tree.dist[y] == usize::MAX {
            continue;
        }
        let (atoms, mut edges) = tree_path(&tree, y);
        edges.push(e);
        push(atoms, &edges);
    }

    candidates.sort_by(|a, b| {
        (a.atoms.len(), &a.atoms, &a.edges.0).cmp(&(b.atoms.len(), &b.atoms, &b.edges.0))
    });

    // Greedy GF(2) elimination with pivot = lowest set edge.
    let mut pivots: Vec<(usize, EdgeSet)> = Vec::new();
    let mut basis = Vec::with_capacity(rank);
    for cand in candidates {
        let mut reduced = cand.edges.clone();
        loop {
            let Some(low) = reduced.lowest() else { break };
            match pivots.iter().find(|(p, _)| *p == low) {
                Some((_, row)) => reduced.xor_assign(row),
                None => break,
            }
        }
        if let Some(low) = reduced.lowest() {
            pivots.push((low, reduced));
            basis.push(Ring {
                atoms: cand.atoms,
                bonds: cand.edges.indices(n_edges),
            });
            if basis.len() == rank {
                break;
            }
        }
    }
    basis
}

fn cycle_rank(n_atoms: usize, bonds: &[(usize, usize)]) -> usize {
    let mut parent: Vec<usize> = (0..n_atoms).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut redundant = 0;
    for &(a, b) in bonds {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            redundant += 1;
        } else {
            parent[ra] = rb;
        }
    }
    redundant
}

/// Membership in the 2-core (vertices remaining after repeatedly removing
/// vertices of degree < 2).
fn two_core(adj: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] < 2).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(u, _) in &adj[v] {
            if alive[u] {
                degree[u] -= 1;
                if degree[u] < 2 {
                    stack.push(u);
                }
            }
        }
    }
    alive
}

#[cfg(test)]
mod tests {
    use crate::chem::parse_smiles;

    use super::*;

    #[test]
    fn acyclic_has_no_rings() {
        let g = parse_smiles("CCC").unwrap();
        assert!(perceive_sssr(&g).is_empty());
    }

    #[test]
    fn benzene_single_ring() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(perceive_sssr(&g), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn decalin_two_fused_six_rings() {
        let g = parse_smiles("C1CCC2CCCCC2C1").unwrap();
        let rings = perceive_sssr(&g);
        assert_eq!(rings, vec![vec![0, 1, 2, 3, 8, 9], vec![3, 4, 5, 6, 7, 8]]);
        let shared: Vec<usize> = rings[0]
            .iter()
            .copied()
            .filter(|a| rings[1].contains(a))
            .collect();
        assert_eq!(shared, vec![3, 8]);
        // The shared atoms are bonded: the rings share exactly one edge.
        assert!(g.bond_between(3, 8).is_some());
    }

    #[test]
    fn bicyclopentyl_two_disjoint_five_rings() {
        let g = parse_smiles("C1CCC(C1)C1CCCC1").unwrap();
        let rings = perceive_sssr(&g);
        assert_eq!(rings, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
    }

    #[test]
    fn bridged_and_spiro_systems_hit_cycle_rank() {
        for s in [
            "C1CC2CCC1C2",      // norbornane
            "C1CC2CCC1CC2",     // bicyclo[2.2.2]octane
            "C12(CCC1)CCC2",    // spiro
            "C1C2CC3CC1CC(C2)C3", // adamantane
            "c1ccc2cc3ccccc3cc2c1",
        ] {
            let g = parse_smiles(s).unwrap();
            assert_eq!(g.rings().len(), g.cycle_rank(), "{s}");
        }
    }

    #[test]
    fn ring_bonds_form_simple_cycles() {
        let g = parse_smiles("C1CC2CCC1C2").unwrap();
        for ring in g.rings() {
            assert_eq!(ring.atoms.len(), ring.bonds.len());
            for &a in &ring.atoms {
                let incident = ring
                    .bonds
                    .iter()
                    .filter(|&&b| g.bonds()[b].begin == a || g.bonds()[b].end == a)
                    .count();
                assert_eq!(incident, 2);
            }
        }
        // norbornane: two 5-rings
        let sizes: Vec<usize> = g.rings().iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![5, 5]);
    }
}
