use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abstraction {
    Jt,
    Erg,
}

impl Abstraction {
    pub fn name(self) -> &'static str {
        match self {
            Abstraction::Jt => "jt",
            Abstraction::Erg => "erg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutCombine {
    Concat,
    Sum,
}

/// Which embeddings the inter-graph messages of layer `l` read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequencing {
    /// Every term reads the outputs of layer `l - 1`.
    PreviousLayer,
    /// Messages read the current layer's GNN outputs, and the reduced-graph
    /// update reads the already-updated atom embeddings.
    IntraLayer,
}

fn default_head_layers() -> usize {
    2
}

fn default_dropout() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub reduced_dim: usize,
    pub out_dim: usize,
    #[serde(default)]
    pub head_hidden: Option<usize>,
    #[serde(default = "default_head_layers")]
    pub head_layers: usize,
    pub abstractions: Vec<Abstraction>,
    pub jt_resolution: u32,
    pub enable_i2mp: bool,
    pub enable_dimp: bool,
    pub readout_combine: ReadoutCombine,
    pub sequencing: Sequencing,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_layers: 3,
            hidden: 32,
            reduced_dim: 32,
            out_dim: 32,
            head_hidden: None,
            head_layers: 2,
            abstractions: vec![Abstraction::Jt, Abstraction::Erg],
            jt_resolution: 1,
            enable_i2mp: true,
            enable_dimp: true,
            readout_combine: ReadoutCombine::Concat,
            sequencing: Sequencing::PreviousLayer,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    /// Plain GIN-E on the molecular graph.
    pub fn plain_gine(n_layers: usize, hidden: usize) -> Self {
        ModelConfig {
            n_layers,
            hidden,
            reduced_dim: hidden,
            out_dim: hidden,
            abstractions: Vec::new(),
            enable_i2mp: false,
            enable_dimp: false,
            ..ModelConfig::default()
        }
    }

    pub fn head_hidden(&self) -> usize {
        self.head_hidden.unwrap_or(self.hidden)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.n_layers == 0 {
            return fail("n_layers must be at least 1".into());
        }
        if self.hidden == 0 || self.reduced_dim == 0 || self.out_dim == 0 || self.head_hidden() == 0 {
            return fail("widths must be positive".into());
        }
        if self.head_layers == 0 {
            return fail("head_layers must be at least 1".into());
        }
        if !(1..=3).contains(&self.jt_resolution) {
            return fail(format!("jt_resolution must be 1, 2 or 3, got {}", self.jt_resolution));
        }
        let mut seen = self.abstractions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.abstractions.len() {
            return fail("abstractions must be distinct".into());
        }
        if self.enable_dimp && self.abstractions.len() < 2 {
            return fail("direct inter-message passing needs at least two abstractions".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}
