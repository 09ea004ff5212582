//! Dense-matrix reverse-mode differentiation and the Adam optimizer.

mod checkpoint;
mod matrix;
mod params;
mod tape;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT_VERSION};
pub use matrix::{Matrix, SparseMatrix};
pub use params::{AdamConfig, BoundParams, Parameter, ParameterStore};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GradError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("parameter `{name}` has no gradient")]
    MissingGradient { name: String },
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{RngExt, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    use super::*;

    fn random(rows: usize, cols: usize, rng: &mut Xoshiro256PlusPlus) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    }

    /// Central differences of `f` with respect to every entry of `inputs[k]`.
    fn numeric_grad(
        f: &dyn Fn(&[Matrix]) -> f64,
        inputs: &[Matrix],
        k: usize,
        h: f64,
    ) -> Matrix {
        let mut g = Matrix::zeros(inputs[k].rows(), inputs[k].cols());
        for i in 0..inputs[k].data().len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            g.data_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        g
    }

    fn max_rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    #[test]
    fn relu_gradient_at_negative_and_positive_inputs() {
        let mut tape = Tape::new();
        let x = tape.parameter(Matrix::from_vec(1, 2, vec![-1.0, 2.0]));
        let y = tape.relu(x).unwrap();
        let s = tape.mean_all(y).unwrap();
        let loss = tape.scale(s, 2.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn matmul_gradients_match_central_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let a = random(2, 3, &mut rng);
        let b = random(3, 2, &mut rng);
        let weights = random(2, 2, &mut rng);

        // loss = sum(W ∘ (A B)), a linear functional with non-trivial upstream.
        let f = |m: &[Matrix]| -> f64 {
            let c = m[0].matmul(&m[1]);
            c.data().iter().zip(weights.data()).map(|(x, w)| x * w).sum()
        };

        let mut tape = Tape::new();
        let va = tape.parameter(a.clone());
        let vb = tape.parameter(b.clone());
        let c = tape.matmul(va, vb).unwrap();
        let sel: Arc<[usize]> = Arc::from(vec![0usize, 1]);
        let c = tape.row_select(c, sel).unwrap();
        // sum(W ∘ C) = 4 * mean(W ∘ C) via dropout-style masking with W.
        let masked = tape.dropout(c, Arc::from(weights.data().to_vec())).unwrap();
        let mean = tape.mean_all(masked).unwrap();
        let loss = tape.scale(mean, 4.0).unwrap();
        let grads = tape.backward(loss).unwrap();

        let inputs = [a, b];
        for (k, var) in [va, vb].into_iter().enumerate() {
            let numeric = numeric_grad(&f, &inputs, k, 1e-6);
            assert!(max_rel_err(grads.get(var).unwrap(), &numeric) < 1e-6);
        }
    }

    #[test]
    fn mean_rows_backward_splits_upstream_evenly() {
        let mut tape = Tape::new();
        let x = tape.parameter(Matrix::from_vec(4, 2, (0..8).map(f64::from).collect()));
        let m = tape.mean_rows(x).unwrap();
        let w = tape.constant(Matrix::from_vec(2, 1, vec![3.0, -5.0]));
        let loss = tape.matmul(m, w).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(x).unwrap();
        for i in 0..4 {
            assert_eq!(g.row(i), &[3.0 / 4.0, -5.0 / 4.0]);
        }
    }

    #[test]
    fn composite_ops_pass_gradient_check() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let x = random(4, 3, &mut rng);
        let w = random(3, 3, &mut rng);
        let b = random(1, 3, &mut rng);
        let s = random(1, 1, &mut rng);
        let sparse = Arc::new(SparseMatrix::new(
            2,
            4,
            vec![(0, 0, 0.5), (0, 2, 0.5), (1, 1, 0.25), (1, 3, 0.75)],
        ));
        let gather: Arc<[usize]> = Arc::from(vec![3usize, 0, 0, 2, 1]);
        let scatter: Arc<[usize]> = Arc::from(vec![1usize, 1, 0, 2, 3]);

        let build = |tape: &mut Tape, vars: &[Var]| -> Var {
            let h = tape.matmul(vars[0], vars[1]).unwrap();
            let h = tape.add_row(h, vars[2]).unwrap();
            let scaled = tape.scale_by(h, vars[3]).unwrap();
            let h = tape.add(h, scaled).unwrap();
            let g = tape.row_select(h, gather.clone()).unwrap();
            let g = tape.relu(g).unwrap();
            let g = tape.scatter_add(g, scatter.clone(), 4).unwrap();
            let p = tape.sparse_mul(sparse.clone(), g).unwrap();
            let q = tape.mean_rows(h).unwrap();
            let c = tape.concat_cols(&[p, p]).unwrap();
            let c = tape.sub(c, c).unwrap();
            let pm = tape.mean_rows(p).unwrap();
            let t = tape.add(pm, q).unwrap();
            let t = tape.concat_cols(&[t, q]).unwrap();
            let t = tape.abs(t).unwrap();
            let cm = tape.mean_all(c).unwrap();
            let tm = tape.mean_all(t).unwrap();
            tape.add(cm, tm).unwrap()
        };

        let inputs = [x, w, b, s];
        let f = |m: &[Matrix]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = m.iter().map(|v| tape.constant(v.clone())).collect();
            let out = build(&mut tape, &vars);
            tape.value(out)[(0, 0)]
        };
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|v| tape.parameter(v.clone())).collect();
        let loss = build(&mut tape, &vars);
        let grads = tape.backward(loss).unwrap();
        for (k, &var) in vars.iter().enumerate() {
            let numeric = numeric_grad(&f, &inputs, k, 1e-6);
            let err = max_rel_err(grads.get(var).unwrap(), &numeric);
            assert!(err < 1e-5, "input {k}: rel err {err}");
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros(2, 3));
        let b = tape.constant(Matrix::zeros(2, 3));
        assert!(matches!(
            tape.matmul(a, b),
            Err(GradError::ShapeMismatch { op: "matmul", .. })
        ));
        assert!(tape.add(a, b).is_ok());
    }

    #[test]
    fn non_finite_values_trip_an_error() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::filled(1, 1, f64::MAX));
        assert!(matches!(
            tape.scale(a, 10.0),
            Err(GradError::NonFiniteValue { op: "scale" })
        ));
    }
}
