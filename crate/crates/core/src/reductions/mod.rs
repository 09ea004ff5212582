//! Reduced-graph abstractions of a molecular graph and the correspondence
//! matrices that link them back to atoms.

mod correspondence;
mod erg;
mod fingerprint;
mod junction_tree;
mod scaffold;

use serde::{Deserialize, Serialize};

pub use correspondence::{dimp_correspondence, dimp_correspondence_sparse, Correspondence};
pub use erg::{build_erg, ErgFeature, ErgFeatures};
pub(crate) use fingerprint::hash_seq;
pub use fingerprint::{ecfp, ecfp_identifiers, Fingerprint, ECFP_HASH_VERSION};
pub use junction_tree::{build_junction_tree, coarsen_junction_tree, JtCategory};
pub use scaffold::murcko_scaffold;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("correspondence shape mismatch: {left} vs {right} molecular rows")]
    ShapeMismatch { left: usize, right: usize },
    #[error("junction-tree resolution must be 1, 2 or 3, got {0}")]
    InvalidResolution(u32),
    #[error("fingerprint radius must be 2, 3 or 4, got {0}")]
    InvalidRadius(u32),
    #[error("fingerprint width must be 16, 32, 1024 or 2048, got {0}")]
    InvalidWidth(usize),
    #[error("expected a junction tree, got {0:?}")]
    WrongKind(ReducedKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducedKind {
    JunctionTree,
    Erg,
}

/// Node of a reduced graph; exactly one of the two feature fields is set,
/// matching the parent graph's kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedNode {
    pub jt_category: Option<JtCategory>,
    pub erg_features: Option<ErgFeatures>,
}

impl ReducedNode {
    pub fn junction(category: JtCategory) -> Self {
        ReducedNode {
            jt_category: Some(category),
            erg_features: None,
        }
    }

    pub fn erg(features: ErgFeatures) -> Self {
        ReducedNode {
            jt_category: None,
            erg_features: Some(features),
        }
    }

    /// Dense feature vector: category one-hot for junction-tree nodes,
    /// feature flags for ErG nodes.
    pub fn feature_vector(&self) -> Vec<f64> {
        match (&self.jt_category, &self.erg_features) {
            (Some(c), _) => {
                let mut v = vec![0.0; JtCategory::ALL.len()];
                v[c.ordinal()] = 1.0;
                v
            }
            (None, Some(f)) => f.as_vector(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedGraph {
    pub kind: ReducedKind,
    pub nodes: Vec<ReducedNode>,
    /// Unordered node pairs stored as `(low, high)`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Sorted molecular atom indices summarized by each node.
    pub atom_sets: Vec<Vec<usize>>,
}

impl ReducedGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn correspondence(&self, n_atoms: usize) -> Correspondence {
        Correspondence::from_atom_sets(n_atoms, &self.atom_sets)
    }

    /// Number of connected components.
    pub fn n_components(&self) -> usize {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = n;
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components
    }

    /// True when the edge set is a forest.
    pub fn is_forest(&self) -> bool {
        self.edges.len() + self.n_components() == self.nodes.len()
    }
}

pub(crate) fn normalize_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = edges
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
