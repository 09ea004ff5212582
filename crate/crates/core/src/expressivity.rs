//! Unlabeled 1-WL color refinement and compound graphs.

use std::collections::BTreeMap;

use crate::chem::MolecularGraph;
use crate::reductions::{Correspondence, ReducedGraph};

/// A simple undirected graph without labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainGraph {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl PlainGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        debug_assert!(edges.iter().all(|&(a, b)| a < n_nodes && b < n_nodes && a != b));
        PlainGraph { n_nodes, edges }
    }

    pub fn from_molecule(g: &MolecularGraph) -> Self {
        PlainGraph::new(g.n_atoms(), g.bonds().iter().map(|b| (b.begin, b.end)).collect())
    }

    pub fn from_reduced(t: &ReducedGraph) -> Self {
        PlainGraph::new(t.n_nodes(), t.edges.clone())
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        PlainGraph::new(n, edges)
    }

    pub fn path(n: usize) -> Self {
        PlainGraph::new(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        PlainGraph::new(self.n_nodes, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect())
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn disjoint_union(&self, other: &PlainGraph) -> PlainGraph {
        let off = self.n_nodes;
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(a, b)| (a + off, b + off)));
        PlainGraph::new(self.n_nodes + other.n_nodes, edges)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringResult {
    /// Stable color per node.
    pub colors: Vec<u32>,
    /// Rounds that split at least one color class.
    pub rounds: usize,
    /// `(color, count)` sorted by color.
    pub histogram: Vec<(u32, usize)>,
}

fn histogram(colors: &[u32]) -> Vec<(u32, usize)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in colors {
        *counts.entry(c).or_default() += 1;
    }
    counts.into_iter().collect()
}

/// Stable coloring plus split count. New colors are ranks of the sorted
/// signature set, so the result does not depend on node order.
fn refine(g: &PlainGraph) -> (Vec<u32>, usize) {
    let adj = g.adjacency();
    let mut colors = vec![0u32; g.n_nodes];
    let mut n_classes = usize::from(g.n_nodes > 0);
    let mut rounds = 0;
    loop {
        let signatures: Vec<(u32, Vec<u32>)> = (0..g.n_nodes)
            .map(|v| {
                let mut nbr: Vec<u32> = adj[v].iter().map(|&u| colors[u]).collect();
                nbr.sort_unstable();
                (colors[v], nbr)
            })
            .collect();
        let mut dictionary: BTreeMap<&(u32, Vec<u32>), u32> = signatures.iter().map(|s| (s, 0)).collect();
        for (rank, slot) in dictionary.values_mut().enumerate() {
            *slot = rank as u32;
        }
        let next: Vec<u32> = signatures.iter().map(|s| dictionary[s]).collect();
        if dictionary.len() == n_classes {
            return (colors, rounds);
        }
        n_classes = dictionary.len();
        colors = next;
        rounds += 1;
    }
}

/// 1-WL with constant initial colors, run to a fixpoint.
pub fn wl_refine(g: &PlainGraph) -> ColoringResult {
    let (colors, rounds) = refine(g);
    ColoringResult {
        histogram: histogram(&colors),
        colors,
        rounds,
    }
}

/// True when the stable color histograms differ. Both graphs are refined as
/// one disjoint union so that their colors share a dictionary.
pub fn wl_distinguishable(g1: &PlainGraph, g2: &PlainGraph) -> bool {
    let (colors, _) = refine(&g1.disjoint_union(g2));
    let (a, b) = colors.split_at(g1.n_nodes);
    histogram(a) != histogram(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOrigin {
    Atom(usize),
    /// Node `node` of abstraction number `view`.
    Abstraction { view: usize, node: usize },
}

/// `G` and its abstractions side by side, joined by one undirected edge per
/// nonzero entry of each correspondence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundGraph {
    pub origins: Vec<NodeOrigin>,
    pub graph: PlainGraph,
    pub n_cross_edges: usize,
}

pub fn build_compound(g: &MolecularGraph, abstractions: &[&ReducedGraph], correspondences: &[&Correspondence]) -> CompoundGraph {
    assert_eq!(abstractions.len(), correspondences.len(), "one correspondence per abstraction");
    let mut origins: Vec<NodeOrigin> = (0..g.n_atoms()).map(NodeOrigin::Atom).collect();
    let mut edges: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.begin, b.end)).collect();
    let mut n_cross_edges = 0;
    for (view, (t, s)) in abstractions.iter().zip(correspondences).enumerate() {
        debug_assert!(s.is_left_total());
        let off = origins.len();
        origins.extend((0..t.n_nodes()).map(|node| NodeOrigin::Abstraction { view, node }));
        edges.extend(t.edges.iter().map(|&(a, b)| (a + off, b + off)));
        for atom in 0..g.n_atoms() {
            for node in s.memberships(atom) {
                edges.push((atom, node + off));
                n_cross_edges += 1;
            }
        }
    }
    CompoundGraph {
        graph: PlainGraph::new(origins.len(), edges),
        origins,
        n_cross_edges,
    }
}
