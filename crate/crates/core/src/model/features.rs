use std::sync::Arc;

use crate::autodiff::{Matrix, SparseMatrix};
use crate::chem::{BondOrder, Element, MolecularGraph};
use crate::layers::GraphIndex;
use crate::reductions::{
    build_erg, build_junction_tree, coarsen_junction_tree, dimp_correspondence_sparse, ErgFeature,
    JtCategory, ReducedGraph,
};

use super::{Abstraction, ModelConfig, ModelError};

/// Bumped whenever input encodings change; stored in checkpoints.
pub const FEATURIZATION_VERSION: &str = "ximp-feat-v1";

pub const ATOM_FEATURES: usize = 10 + 5 + 5 + 1 + 5;
pub const BOND_FEATURES: usize = 4;

pub fn input_width(kind: Abstraction) -> usize {
    match kind {
        Abstraction::Jt => JtCategory::ALL.len(),
        Abstraction::Erg => ErgFeature::ALL.len(),
    }
}

/// One-hots of element, degree (0-4), charge (-2..2), aromaticity and
/// hydrogen count (0-4).
pub fn atom_features(g: &MolecularGraph) -> Matrix {
    let mut x = Matrix::zeros(g.n_atoms(), ATOM_FEATURES);
    for (i, a) in g.atoms().iter().enumerate() {
        let row = x.row_mut(i);
        row[a.element.ordinal()] = 1.0;
        let base = Element::ALL.len();
        row[base + g.degree(i).min(4)] = 1.0;
        row[base + 5 + (a.formal_charge + 2) as usize] = 1.0;
        if a.aromatic {
            row[base + 10] = 1.0;
        }
        row[base + 11 + (a.implicit_h_count as usize).min(4)] = 1.0;
    }
    x
}

/// Bond-order one-hots, one row per directed edge in [`GraphIndex`] order.
pub fn bond_features(g: &MolecularGraph) -> Matrix {
    let mut e = Matrix::zeros(2 * g.n_bonds(), BOND_FEATURES);
    for (k, b) in g.bonds().iter().enumerate() {
        debug_assert!(BondOrder::ALL.len() == BOND_FEATURES);
        e[(2 * k, b.order.ordinal())] = 1.0;
        e[(2 * k + 1, b.order.ordinal())] = 1.0;
    }
    e
}

/// Sparse `D⁻¹S` (atoms x nodes) and its counterpart `(S D_T⁻¹)ᵀ`
/// (nodes x atoms) built straight from atom sets.
fn normalized_maps(n_atoms: usize, atom_sets: &[Vec<usize>]) -> (SparseMatrix, SparseMatrix) {
    let mut memberships = vec![0usize; n_atoms];
    for set in atom_sets {
        for &a in set {
            memberships[a] += 1;
        }
    }
    let mut to_atoms = Vec::new();
    let mut to_nodes = Vec::new();
    for (node, set) in atom_sets.iter().enumerate() {
        for &a in set {
            to_atoms.push((a, node, 1.0 / memberships[a] as f64));
            to_nodes.push((node, a, 1.0 / set.len() as f64));
        }
    }
    (
        SparseMatrix::new(n_atoms, atom_sets.len(), to_atoms),
        SparseMatrix::new(atom_sets.len(), n_atoms, to_nodes),
    )
}

/// One reduced view prepared for message passing.
#[derive(Debug, Clone)]
pub struct ViewInput {
    pub kind: Abstraction,
    pub reduced: ReducedGraph,
    pub graph: GraphIndex,
    pub x: Matrix,
    /// Row-normalized correspondence, atoms x nodes.
    pub to_atoms: Arc<SparseMatrix>,
    /// Normalized transpose, nodes x atoms.
    pub to_nodes: Arc<SparseMatrix>,
}

/// Everything the model reads for one molecule.
#[derive(Debug, Clone)]
pub struct MoleculeInput {
    pub n_atoms: usize,
    pub graph: GraphIndex,
    pub atom_x: Matrix,
    pub edge_attr: Matrix,
    pub views: Vec<ViewInput>,
    /// `dimp[i][k]` maps view `k` onto view `i`; `None` on the diagonal.
    pub dimp: Vec<Vec<Option<Arc<SparseMatrix>>>>,
}

impl MoleculeInput {
    pub fn view(&self, kind: Abstraction) -> Option<&ViewInput> {
        self.views.iter().find(|v| v.kind == kind)
    }
}

fn reduced_view(g: &MolecularGraph, kind: Abstraction, jt_resolution: u32) -> Result<ViewInput, ModelError> {
    let (reduced, _) = match kind {
        Abstraction::Jt => {
            let (t, c) = build_junction_tree(g);
            coarsen_junction_tree(&t, &c, jt_resolution)?
        }
        Abstraction::Erg => build_erg(g),
    };
    let width = input_width(kind);
    let mut x = Matrix::zeros(reduced.n_nodes(), width);
    for (i, node) in reduced.nodes.iter().enumerate() {
        x.row_mut(i).copy_from_slice(&node.feature_vector());
    }
    let (to_atoms, to_nodes) = normalized_maps(g.n_atoms(), &reduced.atom_sets);
    Ok(ViewInput {
        kind,
        graph: GraphIndex::from_edges(reduced.n_nodes(), &reduced.edges),
        x,
        to_atoms: Arc::new(to_atoms),
        to_nodes: Arc::new(to_nodes),
        reduced,
    })
}

/// Builds graph tensors, reduced views and inter-view maps for `cfg`.
pub fn featurize(g: &MolecularGraph, cfg: &ModelConfig) -> Result<MoleculeInput, ModelError> {
    let edges: Vec<(usize, usize)> = g.bonds().iter().map(|b| (b.begin, b.end)).collect();
    let views = cfg
        .abstractions
        .iter()
        .map(|&kind| reduced_view(g, kind, cfg.jt_resolution))
        .collect::<Result<Vec<_>, _>>()?;

    let n = views.len();
    let mut dimp = vec![vec![None; n]; n];
    if cfg.enable_dimp {
        let corrs: Vec<_> = views.iter().map(|v| v.reduced.correspondence(g.n_atoms())).collect();
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    dimp[i][k] = Some(Arc::new(dimp_correspondence_sparse(&corrs[i], &corrs[k])?));
                }
            }
        }
    }
    Ok(MoleculeInput {
        n_atoms: g.n_atoms(),
        graph: GraphIndex::from_edges(g.n_atoms(), &edges),
        atom_x: atom_features(g),
        edge_attr: bond_features(g),
        views,
        dimp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn atom_rows_have_five_hot_entries_except_non_aromatic() {
        let g = parse_smiles("Oc1cnccc1").unwrap();
        let x = atom_features(&g);
        for i in 0..g.n_atoms() {
            let ones = x.row(i).iter().filter(|&&v| v == 1.0).count();
            assert_eq!(ones, if g.atoms()[i].aromatic { 5 } else { 4 });
        }
    }

    #[test]
    fn normalized_maps_match_dense_forms() {
        let g = parse_smiles("CC(C)c1ccc2CCCc2c1").unwrap();
        let cfg = ModelConfig::default();
        let input = featurize(&g, &cfg).unwrap();
        for v in &input.views {
            let c = v.reduced.correspondence(g.n_atoms());
            assert!(v.to_atoms.to_dense().max_abs_diff(&c.row_normalized) < 1e-15);
            assert!(v.to_nodes.to_dense().max_abs_diff(&c.col_normalized) < 1e-15);
        }
        assert!(input.dimp[0][1].is_some() && input.dimp[1][0].is_some());
        assert!(input.dimp[0][0].is_none());
    }
}
