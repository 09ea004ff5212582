use crate::autodiff::{Matrix, SparseMatrix};

use super::ReductionError;

/// Binary atom-to-node membership matrix `S` (|V(G)| x |V(T)|) with its
/// row-normalized form `D⁻¹S` and the row-normalized transpose `(S D_T⁻¹)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub s: Matrix,
    pub row_normalized: Matrix,
    pub col_normalized: Matrix,
}

fn row_normalize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let sum: f64 = out.row(i).iter().sum();
        if sum > 0.0 {
            out.row_mut(i).iter_mut().for_each(|v| *v /= sum);
        }
    }
    out
}

impl Correspondence {
    /// Builds `S` from a binary matrix. Panics on entries other than 0 or 1.
    pub fn from_binary(s: Matrix) -> Self {
        assert!(
            s.data().iter().all(|&v| v == 0.0 || v == 1.0),
            "correspondence entries must be binary"
        );
        let row_normalized = row_normalize(&s);
        let col_normalized = row_normalize(&s.transpose());
        Correspondence {
            s,
            row_normalized,
            col_normalized,
        }
    }

    pub fn from_atom_sets(n_atoms: usize, atom_sets: &[Vec<usize>]) -> Self {
        let mut s = Matrix::zeros(n_atoms, atom_sets.len());
        for (node, atoms) in atom_sets.iter().enumerate() {
            for &a in atoms {
                s[(a, node)] = 1.0;
            }
        }
        Correspondence::from_binary(s)
    }

    pub fn n_atoms(&self) -> usize {
        self.s.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.s.cols()
    }

    /// Every atom belongs to at least one node.
    pub fn is_left_total(&self) -> bool {
        (0..self.s.rows()).all(|i| self.s.row(i).iter().any(|&v| v == 1.0))
    }

    /// Nodes containing `atom`.
    pub fn memberships(&self, atom: usize) -> Vec<usize> {
        self.s
            .row(atom)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn row_normalized_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.row_normalized)
    }

    pub fn col_normalized_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.col_normalized)
    }
}

/// Doubly-normalized map from the nodes of `T_k` to the nodes of `T_i`:
/// `D_{T,i}⁻¹ S_iᵀ D_{G,k}⁻¹ S_k`.
pub fn dimp_correspondence(
    c_i: &Correspondence,
    c_k: &Correspondence,
) -> Result<Matrix, ReductionError> {
    if c_i.n_atoms() != c_k.n_atoms() {
        return Err(ReductionError::ShapeMismatch {
            left: c_i.n_atoms(),
            right: c_k.n_atoms(),
        });
    }
    // col_normalized = D_{T,i}⁻¹ S_iᵀ and row_normalized = D_{G,k}⁻¹ S_k.
    Ok(c_i.col_normalized.matmul(&c_k.row_normalized))
}

/// Sparse evaluation of [`dimp_correspondence`], linear in the number of
/// memberships.
pub fn dimp_correspondence_sparse(
    c_i: &Correspondence,
    c_k: &Correspondence,
) -> Result<SparseMatrix, ReductionError> {
    if c_i.n_atoms() != c_k.n_atoms() {
        return Err(ReductionError::ShapeMismatch {
            left: c_i.n_atoms(),
            right: c_k.n_atoms(),
        });
    }
    let size_i: Vec<f64> = (0..c_i.n_nodes())
        .map(|j| (0..c_i.n_atoms()).map(|a| c_i.s[(a, j)]).sum())
        .collect();
    let mut entries = std::collections::BTreeMap::new();
    for atom in 0..c_i.n_atoms() {
        let mi = c_i.memberships(atom);
        let mk = c_k.memberships(atom);
        if mk.is_empty() {
            continue;
        }
        let share = 1.0 / mk.len() as f64;
        for &a in &mi {
            for &b in &mk {
                *entries.entry((a, b)).or_insert(0.0) += share / size_i[a];
            }
        }
    }
    Ok(SparseMatrix::new(
        c_i.n_nodes(),
        c_k.n_nodes(),
        entries.into_iter().map(|((a, b), v)| (a, b, v)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    use super::*;

    fn random_left_total(n_atoms: usize, n_nodes: usize, rng: &mut Xoshiro256PlusPlus) -> Correspondence {
        let mut s = Matrix::zeros(n_atoms, n_nodes);
        for a in 0..n_atoms {
            s[(a, rng.random_range(0..n_nodes))] = 1.0;
            for n in 0..n_nodes {
                if rng.random_bool(0.2) {
                    s[(a, n)] = 1.0;
                }
            }
        }
        Correspondence::from_binary(s)
    }

    #[test]
    fn identity_mapping_gives_identity() {
        let c = Correspondence::from_binary(Matrix::identity(3));
        let s = dimp_correspondence(&c, &c).unwrap();
        assert_eq!(s, Matrix::identity(3));
    }

    #[test]
    fn partition_reduces_to_single_normalization() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let c_i = random_left_total(9, 4, &mut rng);
        // Partition: every atom in exactly one node.
        let mut s = Matrix::zeros(9, 3);
        for a in 0..9 {
            s[(a, a % 3)] = 1.0;
        }
        let c_k = Correspondence::from_binary(s.clone());
        let full = dimp_correspondence(&c_i, &c_k).unwrap();
        let reduced = c_i.col_normalized.matmul(&s);
        assert!(full.max_abs_diff(&reduced) < 1e-15);
    }

    #[test]
    fn rows_sum_to_one() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        for _ in 0..50 {
            let n_atoms = rng.random_range(1..=12);
            let c_i = random_left_total(n_atoms, rng.random_range(1..=6), &mut rng);
            let c_k = random_left_total(n_atoms, rng.random_range(1..=6), &mut rng);
            let s = dimp_correspondence(&c_i, &c_k).unwrap();
            for (r, row) in (0..s.rows()).map(|r| (r, s.row(r))) {
                // Nodes with no atoms have an all-zero row.
                let has_atoms = (0..n_atoms).any(|a| c_i.s[(a, r)] == 1.0);
                let sum: f64 = row.iter().sum();
                if has_atoms {
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sparse_matches_dense() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let c_i = random_left_total(10, 5, &mut rng);
        let c_k = random_left_total(10, 4, &mut rng);
        let dense = dimp_correspondence(&c_i, &c_k).unwrap();
        let sparse = dimp_correspondence_sparse(&c_i, &c_k).unwrap().to_dense();
        assert!(dense.max_abs_diff(&sparse) < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let a = Correspondence::from_binary(Matrix::identity(3));
        let b = Correspondence::from_binary(Matrix::identity(4));
        assert!(matches!(
            dimp_correspondence(&a, &b),
            Err(ReductionError::ShapeMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn left_totality() {
        let mut s = Matrix::identity(3);
        assert!(Correspondence::from_binary(s.clone()).is_left_total());
        s[(1, 1)] = 0.0;
        assert!(!Correspondence::from_binary(s).is_left_total());
    }
}
