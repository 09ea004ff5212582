use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::autodiff::{BoundParams, Matrix, ParameterStore, Tape, Var};
use crate::layers::{mlp_head, GinLayer, Linear, Mlp};

use super::features::{input_width, MoleculeInput, ATOM_FEATURES, BOND_FEATURES};
use super::{Abstraction, ModelConfig, ModelError, ReadoutCombine, Sequencing, XimpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HimpConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub head_layers: usize,
    pub inter_message_passing: bool,
}

/// Two-view baseline: a GIN-E on atoms and a GIN on the junction tree that
/// exchange messages sequentially inside each layer.
#[derive(Debug, Clone)]
pub struct HimpModel {
    pub config: HimpConfig,
    atom_in: Linear,
    clique_in: Linear,
    atom_convs: Vec<GinLayer>,
    clique_convs: Vec<GinLayer>,
    clique2atom: Vec<Linear>,
    atom2clique: Vec<Linear>,
    head: Mlp,
}

impl HimpModel {
    pub fn new(config: HimpConfig) -> Self {
        let d = config.hidden;
        let per_layer = |name: &str| -> Vec<Linear> {
            (0..config.n_layers)
                .map(|l| Linear::new(format!("himp.l{l}.{name}"), d, d, false))
                .collect()
        };
        HimpModel {
            atom_in: Linear::new("himp.atom_in", ATOM_FEATURES, d, true),
            clique_in: Linear::new("himp.clique_in", input_width(Abstraction::Jt), d, true),
            atom_convs: (0..config.n_layers)
                .map(|l| GinLayer::gine(&format!("himp.l{l}.atom"), d, BOND_FEATURES))
                .collect(),
            clique_convs: (0..config.n_layers)
                .map(|l| GinLayer::gin(&format!("himp.l{l}.clique"), d))
                .collect(),
            clique2atom: if config.inter_message_passing { per_layer("clique2atom") } else { Vec::new() },
            atom2clique: if config.inter_message_passing { per_layer("atom2clique") } else { Vec::new() },
            head: mlp_head("himp.head", d, config.head_hidden, config.head_layers),
            config,
        }
    }

    pub fn init(&self, seed: u64) -> ParameterStore {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        self.atom_in.init(&mut store, &mut rng);
        self.clique_in.init(&mut store, &mut rng);
        for l in 0..self.config.n_layers {
            self.atom_convs[l].init(&mut store, &mut rng);
            self.clique_convs[l].init(&mut store, &mut rng);
            if self.config.inter_message_passing {
                self.clique2atom[l].init(&mut store, &mut rng);
                self.atom2clique[l].init(&mut store, &mut rng);
            }
        }
        self.head.init(&mut store, &mut rng);
        store
    }

    /// Final atom and clique embeddings.
    pub fn encode(&self, tape: &mut Tape, p: &BoundParams, input: &MoleculeInput) -> Result<(Var, Var), ModelError> {
        let jt = input
            .view(Abstraction::Jt)
            .ok_or_else(|| ModelError::Config("input has no junction tree".into()))?;
        let ax = tape.constant(input.atom_x.clone());
        let mut x = self.atom_in.forward(tape, p, ax)?;
        let cx = tape.constant(jt.x.clone());
        let mut t = self.clique_in.forward(tape, p, cx)?;
        let e = tape.constant(input.edge_attr.clone());
        for l in 0..self.config.n_layers {
            let hx = self.atom_convs[l].forward(tape, p, x, &input.graph, Some(e))?;
            x = tape.relu(hx)?;
            let ht = self.clique_convs[l].forward(tape, p, t, &jt.graph, None)?;
            t = tape.relu(ht)?;
            if self.config.inter_message_passing {
                let pooled = tape.sparse_mul(jt.to_atoms.clone(), t)?;
                let msg = self.clique2atom[l].forward(tape, p, pooled)?;
                let msg = tape.relu(msg)?;
                x = tape.add(x, msg)?;
                let pooled = tape.sparse_mul(jt.to_nodes.clone(), x)?;
                let msg = self.atom2clique[l].forward(tape, p, pooled)?;
                let msg = tape.relu(msg)?;
                t = tape.add(t, msg)?;
            }
        }
        Ok((x, t))
    }

    /// `mean(X) + mean(T)`.
    pub fn embed(&self, tape: &mut Tape, p: &BoundParams, input: &MoleculeInput) -> Result<Var, ModelError> {
        let (x, t) = self.encode(tape, p, input)?;
        let mx = tape.mean_rows(x)?;
        let mt = tape.mean_rows(t)?;
        Ok(tape.add(mx, mt)?)
    }

    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, input: &MoleculeInput) -> Result<Var, ModelError> {
        let h = self.embed(tape, p, input)?;
        Ok(self.head.forward(tape, p, h)?)
    }

    pub fn predict(&self, params: &ParameterStore, input: &MoleculeInput) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let y = self.forward(&mut tape, &p, input)?;
        Ok(tape.value(y)[(0, 0)])
    }
}

impl XimpModel {
    /// The XIMP configuration that reproduces a HIMP network: one junction-tree
    /// view, no direct messages, intra-layer sequencing and an identity
    /// sum readout. Returns the model with HIMP's weights copied over.
    pub fn embed_himp(himp: &HimpModel, params: &ParameterStore) -> Result<(XimpModel, ParameterStore), ModelError> {
        let c = &himp.config;
        let config = ModelConfig {
            n_layers: c.n_layers,
            hidden: c.hidden,
            reduced_dim: c.hidden,
            out_dim: c.hidden,
            head_hidden: Some(c.head_hidden),
            head_layers: c.head_layers,
            abstractions: vec![Abstraction::Jt],
            jt_resolution: 1,
            enable_i2mp: c.inter_message_passing,
            enable_dimp: false,
            readout_combine: ReadoutCombine::Sum,
            sequencing: Sequencing::IntraLayer,
            dropout: 0.0,
        };
        let model = XimpModel::new(config)?;

        let rename = |name: &str| -> String {
            let rest = name.strip_prefix("himp.").expect("HIMP parameter names are prefixed");
            let rest = rest
                .replacen("atom_in.", "input.atom.", 1)
                .replacen("clique_in.", "input.jt.", 1);
            let mut parts: Vec<&str> = rest.splitn(3, '.').collect();
            if parts[0].starts_with('l') && parts.len() >= 2 {
                parts[1] = match parts[1] {
                    "atom" => "mol",
                    "clique" => "jt",
                    "clique2atom" => "jt.to_mol",
                    "atom2clique" => "jt.from_mol",
                    other => other,
                };
            }
            parts.join(".")
        };

        let mut store = ParameterStore::new();
        for (name, value) in params.iter() {
            store.insert(rename(name), value.clone());
        }
        let d = c.hidden;
        store.insert("readout.mol.w", Matrix::identity(d));
        store.insert("readout.jt.w", Matrix::identity(d));

        let expected = model.init(0);
        let mut want: Vec<&str> = expected.names().collect();
        let mut got: Vec<&str> = store.names().collect();
        want.sort_unstable();
        got.sort_unstable();
        if want != got {
            return Err(ModelError::Config(format!(
                "parameter names do not line up: expected {want:?}, got {got:?}"
            )));
        }
        Ok((model, store))
    }
}
