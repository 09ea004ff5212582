//! GIN and GIN-E message passing, linear maps and the MLP head.

use std::sync::Arc;

use crate::autodiff::{BoundParams, GradError, Matrix, ParameterStore, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayerError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("expected {expected} edge feature rows, got {got}")]
    MissingEdgeFeature { expected: usize, got: usize },
}

/// Directed edge list with both orientations of every undirected edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphIndex {
    pub n_nodes: usize,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
}

impl GraphIndex {
    /// Edge `k` of `edges` becomes directed edges `2k` (a→b) and `2k+1` (b→a).
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut src = Vec::with_capacity(2 * edges.len());
        let mut dst = Vec::with_capacity(2 * edges.len());
        for &(a, b) in edges {
            src.extend([a, b]);
            dst.extend([b, a]);
        }
        GraphIndex {
            n_nodes,
            src: src.into(),
            dst: dst.into(),
        }
    }

    pub fn n_directed_edges(&self) -> usize {
        self.src.len()
    }

    /// Dense adjacency, for tests and oracles.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n_nodes, self.n_nodes);
        for (&s, &d) in self.src.iter().zip(self.dst.iter()) {
            a[(d, s)] += 1.0;
        }
        a
    }
}

/// Affine map `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub prefix: String,
    pub input: usize,
    pub output: usize,
    pub bias: bool,
}

impl Linear {
    pub fn new(prefix: impl Into<String>, input: usize, output: usize, bias: bool) -> Self {
        Linear {
            prefix: prefix.into(),
            input,
            output,
            bias,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.prefix)
    }

    pub fn init<R: rand::Rng>(&self, store: &mut ParameterStore, rng: &mut R) {
        store.insert_uniform(self.weight_name(), self.input, self.output, self.input, rng);
        if self.bias {
            store.insert_uniform(self.bias_name(), 1, self.output, self.input, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, x: Var) -> Result<Var, GradError> {
        let y = tape.matmul(x, p.get(&self.weight_name()))?;
        if self.bias {
            tape.add_row(y, p.get(&self.bias_name()))
        } else {
            Ok(y)
        }
    }
}

/// Stack of linear layers with ReLU between consecutive layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, hidden.., out]`; one linear layer per consecutive pair.
    pub fn new(prefix: &str, dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(format!("{prefix}.{i}"), w[0], w[1], true))
            .collect();
        Mlp { layers }
    }

    pub fn init<R: rand::Rng>(&self, store: &mut ParameterStore, rng: &mut R) {
        for l in &self.layers {
            l.init(store, rng);
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, x: Var) -> Result<Var, GradError> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.relu(h)?;
            }
            h = l.forward(tape, p, h)?;
        }
        Ok(h)
    }
}

/// Regression head: a `k`-layer MLP ending in one output.
pub fn mlp_head(prefix: &str, input: usize, hidden: usize, k: usize) -> Mlp {
    let mut dims = vec![input];
    dims.extend(std::iter::repeat_n(hidden, k.saturating_sub(1)));
    dims.push(1);
    Mlp::new(prefix, &dims)
}

/// GIN layer, or GIN-E when `edge_dim` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub prefix: String,
    pub dim: usize,
    pub edge_dim: Option<usize>,
    pub mlp: Mlp,
    pub edge_embed: Option<Linear>,
}

impl GinLayer {
    pub fn gin(prefix: &str, dim: usize) -> Self {
        GinLayer {
            prefix: prefix.to_string(),
            dim,
            edge_dim: None,
            mlp: Mlp::new(&format!("{prefix}.mlp"), &[dim, dim, dim]),
            edge_embed: None,
        }
    }

    /// Edge features are projected to `dim` unless already that wide.
    pub fn gine(prefix: &str, dim: usize, edge_dim: usize) -> Self {
        let edge_embed =
            (edge_dim != dim).then(|| Linear::new(format!("{prefix}.edge"), edge_dim, dim, true));
        GinLayer {
            edge_dim: Some(edge_dim),
            edge_embed,
            ..GinLayer::gin(prefix, dim)
        }
    }

    pub fn eps_name(&self) -> String {
        format!("{}.eps", self.prefix)
    }

    pub fn init<R: rand::Rng>(&self, store: &mut ParameterStore, rng: &mut R) {
        store.insert(self.eps_name(), Matrix::zeros(1, 1));
        self.mlp.init(store, rng);
        if let Some(e) = &self.edge_embed {
            e.init(store, rng);
        }
    }

    /// Aggregation `(1+ε)x_v + Σ_u m_u` before the MLP, where `m_u` is `x_u`
    /// for GIN and `ReLU(x_u + Ê_vu)` for GIN-E.
    pub fn aggregate(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        x: Var,
        graph: &GraphIndex,
        edge_attr: Option<Var>,
    ) -> Result<Var, LayerError> {
        let gathered = tape.row_select(x, graph.src.clone())?;
        let messages = match self.edge_dim {
            None => gathered,
            Some(_) => {
                let e = edge_attr.ok_or(LayerError::MissingEdgeFeature {
                    expected: graph.n_directed_edges(),
                    got: 0,
                })?;
                let rows = tape.shape(e).0;
                if rows != graph.n_directed_edges() {
                    return Err(LayerError::MissingEdgeFeature {
                        expected: graph.n_directed_edges(),
                        got: rows,
                    });
                }
                let e = match &self.edge_embed {
                    Some(lin) => lin.forward(tape, p, e)?,
                    None => e,
                };
                let s = tape.add(gathered, e)?;
                tape.relu(s)?
            }
        };
        let agg = tape.scatter_add(messages, graph.dst.clone(), graph.n_nodes)?;
        let scaled = tape.scale_by(x, p.get(&self.eps_name()))?;
        let own = tape.add(x, scaled)?;
        Ok(tape.add(agg, own)?)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        x: Var,
        graph: &GraphIndex,
        edge_attr: Option<Var>,
    ) -> Result<Var, LayerError> {
        let h = self.aggregate(tape, p, x, graph, edge_attr)?;
        Ok(self.mlp.forward(tape, p, h)?)
    }
}
