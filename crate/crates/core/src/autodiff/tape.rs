use std::sync::Arc;

use super::{GradError, Matrix, SparseMatrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    /// `x * s` for a 1x1 `s`.
    ScaleBy(Var, Var),
    /// Adds a 1xC row to every row.
    AddRow(Var, Var),
    Relu(Var),
    Abs(Var),
    MeanRows(Var),
    MeanAll(Var),
    RowSelect(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    SparseMul(Arc<SparseMatrix>, Var),
    Dropout(Var, Arc<[f64]>),
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// Every operation checks shapes and rejects non-finite results.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to the trainable leaves of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn shape_err(op: &'static str, left: (usize, usize), right: (usize, usize)) -> GradError {
    GradError::ShapeMismatch { op, left, right }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Records a trainable input.
    pub fn parameter(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Records a constant input.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: &'static str, value: Matrix, record: Op) -> Result<Var, GradError> {
        if !value.is_finite() {
            return Err(GradError::NonFiniteValue { op });
        }
        let requires_grad = match &record {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::ScaleBy(a, b) | Op::AddRow(a, b) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Abs(a)
            | Op::MeanRows(a)
            | Op::MeanAll(a)
            | Op::RowSelect(a, _)
            | Op::ScatterAdd(a, _)
            | Op::SparseMul(_, a)
            | Op::Dropout(a, _) => self.nodes[a.0].requires_grad,
            Op::ConcatCols(parts) => parts.iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op: record,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let value = self.value(a).matmul(self.value(b));
        self.push("matmul", value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("add", sa, sb));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push("add", value, Op::Add(a, b))
    }

    /// Sums a non-empty list of same-shaped values.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var, GradError> {
        let (&first, rest) = terms.split_first().expect("sum of no terms");
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, GradError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("sub", sa, sb));
        }
        let value = Matrix::from_vec(
            sa.0,
            sa.1,
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(x, y)| x - y)
                .collect(),
        );
        self.push("sub", value, Op::Sub(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, GradError> {
        let value = self.value(a).scaled(s);
        self.push("scale", value, Op::Scale(a, s))
    }

    /// Multiplies `x` by the scalar held in the 1x1 value `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, GradError> {
        if self.shape(s) != (1, 1) {
            return Err(shape_err("scale_by", self.shape(x), self.shape(s)));
        }
        let factor = self.value(s)[(0, 0)];
        let value = self.value(x).scaled(factor);
        self.push("scale_by", value, Op::ScaleBy(x, s))
    }

    /// Adds the 1xC row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, GradError> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb.0 != 1 || sb.1 != sx.1 {
            return Err(shape_err("add_row", sx, sb));
        }
        let mut value = self.value(x).clone();
        let b = self.value(bias).row(0).to_vec();
        for i in 0..sx.0 {
            for (v, bb) in value.row_mut(i).iter_mut().zip(&b) {
                *v += bb;
            }
        }
        self.push("add_row", value, Op::AddRow(x, bias))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(a))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var, GradError> {
        let value = self.value(a).map(f64::abs);
        self.push("abs", value, Op::Abs(a))
    }

    /// Column-wise mean over rows, producing a 1xC row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, GradError> {
        let (r, c) = self.shape(a);
        if r == 0 {
            return Err(shape_err("mean_rows", (r, c), (1, c)));
        }
        let value = Matrix::from_vec(1, c, self.value(a).column_means());
        self.push("mean_rows", value, Op::MeanRows(a))
    }

    /// Mean of all entries as a 1x1 value.
    pub fn mean_all(&mut self, a: Var) -> Result<Var, GradError> {
        let m = self.value(a);
        let n = m.data().len();
        if n == 0 {
            return Err(shape_err("mean_all", m.shape(), (1, 1)));
        }
        let mean = m.data().iter().sum::<f64>() / n as f64;
        self.push("mean_all", Matrix::filled(1, 1, mean), Op::MeanAll(a))
    }

    /// Gathers rows: output row `i` is input row `index[i]`.
    pub fn row_select(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var, GradError> {
        let (r, c) = self.shape(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= r) {
            return Err(shape_err("row_select", (r, c), (bad, c)));
        }
        let src = self.value(a);
        let mut value = Matrix::zeros(index.len(), c);
        for (out, &i) in index.iter().enumerate() {
            value.row_mut(out).copy_from_slice(src.row(i));
        }
        self.push("row_select", value, Op::RowSelect(a, index))
    }

    /// Scatter-sum: input row `i` is added to output row `target[i]`; the
    /// output has `n_rows` rows.
    pub fn scatter_add(&mut self, a: Var, target: Arc<[usize]>, n_rows: usize) -> Result<Var, GradError> {
        let (r, c) = self.shape(a);
        if target.len() != r || target.iter().any(|&t| t >= n_rows) {
            return Err(shape_err("scatter_add", (r, c), (target.len(), n_rows)));
        }
        let src = self.value(a);
        let mut value = Matrix::zeros(n_rows, c);
        for (i, &t) in target.iter().enumerate() {
            for (o, s) in value.row_mut(t).iter_mut().zip(src.row(i)) {
                *o += s;
            }
        }
        self.push("scatter_add", value, Op::ScatterAdd(a, target))
    }

    /// Left-multiplies by a constant sparse matrix.
    pub fn sparse_mul(&mut self, s: Arc<SparseMatrix>, x: Var) -> Result<Var, GradError> {
        let sx = self.shape(x);
        if s.cols() != sx.0 {
            return Err(shape_err("sparse_mul", (s.rows(), s.cols()), sx));
        }
        let value = s.mul_dense(self.value(x));
        self.push("sparse_mul", value, Op::SparseMul(s, x))
    }

    /// Multiplies element-wise by a pre-drawn mask (already scaled by
    /// `1 / (1 - p)` on kept entries).
    pub fn dropout(&mut self, a: Var, mask: Arc<[f64]>) -> Result<Var, GradError> {
        let m = self.value(a);
        if mask.len() != m.data().len() {
            return Err(shape_err("dropout", m.shape(), (mask.len(), 1)));
        }
        let value = Matrix::from_vec(
            m.rows(),
            m.cols(),
            m.data().iter().zip(mask.iter()).map(|(v, k)| v * k).collect(),
        );
        self.push("dropout", value, Op::Dropout(a, mask))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, GradError> {
        let rows = self.shape(parts[0]).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(shape_err("concat_cols", self.shape(parts[0]), self.shape(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                value.row_mut(i)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()))
    }

    /// Back-propagates from the 1x1 value `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, GradError> {
        if self.shape(loss) != (1, 1) {
            return Err(shape_err("backward", self.shape(loss), (1, 1)));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            // Leaves keep their gradient.
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let wants = |v: &Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if wants(a) {
                        let g = upstream.matmul(&self.value(*b).transpose());
                        accumulate(&mut grads, *a, g);
                    }
                    if wants(b) {
                        let g = self.value(*a).transpose().matmul(&upstream);
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Add(a, b) => {
                    if wants(a) {
                        accumulate(&mut grads, *a, upstream.clone());
                    }
                    if wants(b) {
                        accumulate(&mut grads, *b, upstream.clone());
                    }
                }
                Op::Sub(a, b) => {
                    if wants(a) {
                        accumulate(&mut grads, *a, upstream.clone());
                    }
                    if wants(b) {
                        accumulate(&mut grads, *b, upstream.scaled(-1.0));
                    }
                }
                Op::Scale(a, s) => {
                    if wants(a) {
                        accumulate(&mut grads, *a, upstream.scaled(*s));
                    }
                }
                Op::ScaleBy(x, s) => {
                    let factor = self.value(*s)[(0, 0)];
                    if wants(x) {
                        accumulate(&mut grads, *x, upstream.scaled(factor));
                    }
                    if wants(s) {
                        let dot: f64 = upstream
                            .data()
                            .iter()
                            .zip(self.value(*x).data())
                            .map(|(u, v)| u * v)
                            .sum();
                        accumulate(&mut grads, *s, Matrix::filled(1, 1, dot));
                    }
                }
                Op::AddRow(x, bias) => {
                    if wants(bias) {
                        let g = Matrix::from_vec(1, upstream.cols(), {
                            let mut sums = upstream.column_means();
                            let n = upstream.rows() as f64;
                            sums.iter_mut().for_each(|v| *v *= n);
                            sums
                        });
                        accumulate(&mut grads, *bias, g);
                    }
                    if wants(x) {
                        accumulate(&mut grads, *x, upstream);
                    }
                }
                Op::Relu(a) => {
                    let input = self.value(*a);
                    let g = Matrix::from_vec(
                        upstream.rows(),
                        upstream.cols(),
                        upstream
                            .data()
                            .iter()
                            .zip(input.data())
                            .map(|(u, x)| if *x > 0.0 { *u } else { 0.0 })
                            .collect(),
                    );
                    accumulate(&mut grads, *a, g);
                }
                Op::Abs(a) => {
                    let input = self.value(*a);
                    let g = Matrix::from_vec(
                        upstream.rows(),
                        upstream.cols(),
                        upstream
                            .data()
                            .iter()
                            .zip(input.data())
                            .map(|(u, x)| {
                                if *x > 0.0 {
                                    *u
                                } else if *x < 0.0 {
                                    -*u
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    );
                    accumulate(&mut grads, *a, g);
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.shape(*a);
                    let mut g = Matrix::zeros(r, c);
                    let scaled: Vec<f64> = upstream.row(0).iter().map(|u| u / r as f64).collect();
                    for i in 0..r {
                        g.row_mut(i).copy_from_slice(&scaled);
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::MeanAll(a) => {
                    let (r, c) = self.shape(*a);
                    let g = Matrix::filled(r, c, upstream[(0, 0)] / (r * c) as f64);
                    accumulate(&mut grads, *a, g);
                }
                Op::RowSelect(a, index) => {
                    let (r, c) = self.shape(*a);
                    let mut g = Matrix::zeros(r, c);
                    for (out, &i) in index.iter().enumerate() {
                        for (d, u) in g.row_mut(i).iter_mut().zip(upstream.row(out)) {
                            *d += u;
                        }
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::ScatterAdd(a, target) => {
                    let (r, c) = self.shape(*a);
                    let mut g = Matrix::zeros(r, c);
                    for (i, &t) in target.iter().enumerate() {
                        g.row_mut(i).copy_from_slice(upstream.row(t));
                    }
                    accumulate(&mut grads, *a, g);
                }
                Op::SparseMul(s, x) => {
                    let g = s.transpose().mul_dense(&upstream);
                    accumulate(&mut grads, *x, g);
                }
                Op::Dropout(a, mask) => {
                    let g = Matrix::from_vec(
                        upstream.rows(),
                        upstream.cols(),
                        upstream.data().iter().zip(mask.iter()).map(|(u, k)| u * k).collect(),
                    );
                    accumulate(&mut grads, *a, g);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (r, c) = self.shape(*p);
                        if wants(p) {
                            let mut g = Matrix::zeros(r, c);
                            for i in 0..r {
                                g.row_mut(i)
                                    .copy_from_slice(&upstream.row(i)[offset..offset + c]);
                            }
                            accumulate(&mut grads, *p, g);
                        }
                        offset += c;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}
