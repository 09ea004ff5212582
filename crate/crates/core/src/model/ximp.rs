use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::autodiff::{BoundParams, ParameterStore, Tape, Var};
use crate::layers::{mlp_head, GinLayer, Linear, Mlp};

use super::features::{input_width, MoleculeInput, ATOM_FEATURES, BOND_FEATURES};
use super::{ModelConfig, ModelError, ReadoutCombine, Sequencing};

/// Atom embeddings `X` and one embedding matrix per reduced view.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub x: Var,
    pub t: Vec<Var>,
}

#[derive(Debug, Clone)]
struct XimpLayer {
    mol: GinLayer,
    views: Vec<GinLayer>,
    /// `W_{i,1}`: reduced width to atom width.
    to_mol: Vec<Linear>,
    /// `W_{i,2}`: atom width to reduced width.
    from_mol: Vec<Linear>,
    /// `W_{k→i}` at `[i][k]`.
    dimp: Vec<Vec<Option<Linear>>>,
}

/// The XIMP network for a fixed configuration. Parameters live in a separate
/// [`ParameterStore`] created by [`XimpModel::init`].
#[derive(Debug, Clone)]
pub struct XimpModel {
    pub config: ModelConfig,
    atom_in: Linear,
    view_in: Vec<Linear>,
    layers: Vec<XimpLayer>,
    readout: Vec<Linear>,
    head: Mlp,
}

fn draw_dropout(tape: &mut Tape, v: Var, p: f64, rng: &mut Xoshiro256PlusPlus) -> Result<Var, ModelError> {
    let n = tape.value(v).data().len();
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect();
    Ok(tape.dropout(v, mask.into())?)
}

impl XimpModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let (d, r, out) = (config.hidden, config.reduced_dim, config.out_dim);
        let names: Vec<&str> = config.abstractions.iter().map(|a| a.name()).collect();
        let n = names.len();

        let atom_in = Linear::new("input.atom", ATOM_FEATURES, d, true);
        let view_in = config
            .abstractions
            .iter()
            .map(|&a| Linear::new(format!("input.{}", a.name()), input_width(a), r, true))
            .collect();

        let layers = (0..config.n_layers)
            .map(|l| {
                let i2mp = |suffix: &str, input: usize, output: usize| -> Vec<Linear> {
                    if !config.enable_i2mp {
                        return Vec::new();
                    }
                    names
                        .iter()
                        .map(|name| Linear::new(format!("l{l}.{name}.{suffix}"), input, output, false))
                        .collect()
                };
                let dimp = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| {
                                (config.enable_dimp && i != k).then(|| {
                                    Linear::new(format!("l{l}.{}_to_{}", names[k], names[i]), r, r, false)
                                })
                            })
                            .collect()
                    })
                    .collect();
                XimpLayer {
                    mol: GinLayer::gine(&format!("l{l}.mol"), d, BOND_FEATURES),
                    views: names.iter().map(|name| GinLayer::gin(&format!("l{l}.{name}"), r)).collect(),
                    to_mol: i2mp("to_mol", r, d),
                    from_mol: i2mp("from_mol", d, r),
                    dimp,
                }
            })
            .collect();

        let mut readout = vec![Linear::new("readout.mol", d, out, false)];
        readout.extend(
            names
                .iter()
                .map(|name| Linear::new(format!("readout.{name}"), r, out, false)),
        );
        let head_in = match config.readout_combine {
            ReadoutCombine::Concat => (1 + n) * out,
            ReadoutCombine::Sum => out,
        };
        let head = mlp_head("head", head_in, config.head_hidden(), config.head_layers);
        Ok(XimpModel {
            config,
            atom_in,
            view_in,
            layers,
            readout,
            head,
        })
    }

    /// Seeded uniform initialization of every parameter.
    pub fn init(&self, seed: u64) -> ParameterStore {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        self.atom_in.init(&mut store, &mut rng);
        self.view_in.iter().for_each(|l| l.init(&mut store, &mut rng));
        for layer in &self.layers {
            layer.mol.init(&mut store, &mut rng);
            layer.views.iter().for_each(|g| g.init(&mut store, &mut rng));
            layer.to_mol.iter().for_each(|w| w.init(&mut store, &mut rng));
            layer.from_mol.iter().for_each(|w| w.init(&mut store, &mut rng));
            layer.dimp.iter().flatten().flatten().for_each(|w| w.init(&mut store, &mut rng));
        }
        self.readout.iter().for_each(|w| w.init(&mut store, &mut rng));
        self.head.init(&mut store, &mut rng);
        store
    }

    fn check_input(&self, input: &MoleculeInput) -> Result<(), ModelError> {
        let kinds: Vec<_> = input.views.iter().map(|v| v.kind).collect();
        if kinds != self.config.abstractions {
            return Err(ModelError::Config(format!(
                "input views {kinds:?} do not match configured abstractions {:?}",
                self.config.abstractions
            )));
        }
        Ok(())
    }

    /// Projected input features (layer 0).
    pub fn initial_state(&self, tape: &mut Tape, p: &BoundParams, input: &MoleculeInput) -> Result<LayerState, ModelError> {
        self.check_input(input)?;
        let ax = tape.constant(input.atom_x.clone());
        let x = self.atom_in.forward(tape, p, ax)?;
        let t = input
            .views
            .iter()
            .zip(&self.view_in)
            .map(|(v, lin)| {
                let tx = tape.constant(v.x.clone());
                lin.forward(tape, p, tx)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LayerState { x, t })
    }

    /// Atom-bound messages `σ(S̃_i T_i W_{i,1})` from each view embedding in `t`.
    pub fn i2mp_to_atoms(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        l: usize,
        input: &MoleculeInput,
        t: &[Var],
    ) -> Result<Vec<Var>, ModelError> {
        let layer = &self.layers[l];
        let mut out = Vec::with_capacity(layer.to_mol.len());
        for ((view, w), &ti) in input.views.iter().zip(&layer.to_mol).zip(t) {
            let pooled = tape.sparse_mul(view.to_atoms.clone(), ti)?;
            let h = w.forward(tape, p, pooled)?;
            out.push(tape.relu(h)?);
        }
        Ok(out)
    }

    /// View-bound messages `σ(S̃ᵀ_i X W_{i,2})` from the atom embedding `x`.
    pub fn i2mp_to_views(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        l: usize,
        input: &MoleculeInput,
        x: Var,
    ) -> Result<Vec<Var>, ModelError> {
        let layer = &self.layers[l];
        let mut out = Vec::with_capacity(layer.from_mol.len());
        for (view, w) in input.views.iter().zip(&layer.from_mol) {
            let pooled = tape.sparse_mul(view.to_nodes.clone(), x)?;
            let h = w.forward(tape, p, pooled)?;
            out.push(tape.relu(h)?);
        }
        Ok(out)
    }

    /// Both I²MP directions read from the same state: `(X_i terms, M_i terms)`.
    /// Empty when I²MP is disabled.
    pub fn i2mp_step(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        l: usize,
        input: &MoleculeInput,
        state: &LayerState,
    ) -> Result<(Vec<Var>, Vec<Var>), ModelError> {
        Ok((
            self.i2mp_to_atoms(tape, p, l, input, &state.t)?,
            self.i2mp_to_views(tape, p, l, input, state.x)?,
        ))
    }

    /// Direct messages `σ(S̃_ik T_k W_{k→i})`; entry `[i]` lists the messages
    /// arriving at view `i`.
    pub fn dimp_step(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        l: usize,
        input: &MoleculeInput,
        t: &[Var],
    ) -> Result<Vec<Vec<Var>>, ModelError> {
        if input.views.len() < 2 || !self.config.enable_dimp {
            return Err(ModelError::Config(
                "direct inter-message passing needs two enabled abstractions".into(),
            ));
        }
        let layer = &self.layers[l];
        let mut out = vec![Vec::new(); t.len()];
        for (i, row) in layer.dimp.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                let (Some(w), Some(s)) = (w, &input.dimp[i][k]) else {
                    continue;
                };
                let mixed = tape.sparse_mul(s.clone(), t[k])?;
                debug_assert!(
                    tape.value(mixed).norm_inf() <= tape.value(t[k]).norm_inf() * (1.0 + 1e-12) + 1e-12,
                    "row-stochastic map increased the infinity norm"
                );
                let h = w.forward(tape, p, mixed)?;
                out[i].push(tape.relu(h)?);
            }
        }
        Ok(out)
    }

    /// One XIMP layer. `rng` enables dropout on the intra-graph GNN outputs.
    pub fn layer_forward(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        l: usize,
        input: &MoleculeInput,
        prev: &LayerState,
        mut rng: Option<&mut Xoshiro256PlusPlus>,
    ) -> Result<LayerState, ModelError> {
        let layer = &self.layers[l];
        let dropout = self.config.dropout;
        let mut intra = |tape: &mut Tape, v: Var| -> Result<Var, ModelError> {
            let v = tape.relu(v)?;
            match rng.as_deref_mut() {
                Some(r) if dropout > 0.0 => draw_dropout(tape, v, dropout, r),
                _ => Ok(v),
            }
        };

        let e = tape.constant(input.edge_attr.clone());
        let gx = layer.mol.forward(tape, p, prev.x, &input.graph, Some(e))?;
        let gx = intra(tape, gx)?;
        let mut gt = Vec::with_capacity(prev.t.len());
        for ((gin, view), &ti) in layer.views.iter().zip(&input.views).zip(&prev.t) {
            let h = gin.forward(tape, p, ti, &view.graph, None)?;
            gt.push(intra(tape, h)?);
        }

        // Sources for inter-graph messages.
        let (t_src, intra_seq) = match self.config.sequencing {
            Sequencing::PreviousLayer => (prev.t.clone(), false),
            Sequencing::IntraLayer => (gt.clone(), true),
        };

        let mut x_terms = vec![gx];
        if self.config.enable_i2mp {
            x_terms.extend(self.i2mp_to_atoms(tape, p, l, input, &t_src)?);
        }
        let x = tape.sum(&x_terms)?;

        let mut t_terms: Vec<Vec<Var>> = gt.iter().map(|&g| vec![g]).collect();
        if self.config.enable_i2mp {
            let x_src = if intra_seq { x } else { prev.x };
            for (terms, m) in t_terms.iter_mut().zip(self.i2mp_to_views(tape, p, l, input, x_src)?) {
                terms.push(m);
            }
        }
        if self.config.enable_dimp {
            for (terms, ms) in t_terms.iter_mut().zip(self.dimp_step(tape, p, l, input, &t_src)?) {
                terms.extend(ms);
            }
        }
        let t = t_terms
            .iter()
            .map(|terms| tape.sum(terms))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LayerState { x, t })
    }

    /// States after every layer, starting with the projected inputs.
    pub fn states(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        input: &MoleculeInput,
        mut rng: Option<&mut Xoshiro256PlusPlus>,
    ) -> Result<Vec<LayerState>, ModelError> {
        let mut states = vec![self.initial_state(tape, p, input)?];
        for l in 0..self.layers.len() {
            let next = self.layer_forward(tape, p, l, input, states.last().expect("non-empty"), rng.as_deref_mut())?;
            states.push(next);
        }
        Ok(states)
    }

    /// Graph embedding `h_G` from the final state.
    pub fn readout(&self, tape: &mut Tape, p: &BoundParams, state: &LayerState) -> Result<Var, ModelError> {
        let parts = std::iter::once(state.x)
            .chain(state.t.iter().copied())
            .zip(&self.readout)
            .map(|(v, w)| {
                let pooled = tape.mean_rows(v)?;
                w.forward(tape, p, pooled)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match self.config.readout_combine {
            ReadoutCombine::Concat => tape.concat_cols(&parts)?,
            ReadoutCombine::Sum => tape.sum(&parts)?,
        })
    }

    pub fn embed(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        input: &MoleculeInput,
        rng: Option<&mut Xoshiro256PlusPlus>,
    ) -> Result<Var, ModelError> {
        let states = self.states(tape, p, input, rng)?;
        self.readout(tape, p, states.last().expect("non-empty"))
    }

    /// Scalar prediction as a 1x1 tape value.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &BoundParams,
        input: &MoleculeInput,
        rng: Option<&mut Xoshiro256PlusPlus>,
    ) -> Result<Var, ModelError> {
        let h = self.embed(tape, p, input, rng)?;
        Ok(self.head.forward(tape, p, h)?)
    }

    /// Evaluation-mode prediction.
    pub fn predict(&self, params: &ParameterStore, input: &MoleculeInput) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let y = self.forward(&mut tape, &p, input, None)?;
        Ok(tape.value(y)[(0, 0)])
    }
}

#[cfg(test)]
mod tests {
    use rand::{RngExt, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    use super::*;
    use crate::autodiff::Matrix;
    use crate::chem::parse_smiles;
    use crate::model::{featurize, Abstraction};

    fn config(abstractions: Vec<Abstraction>, i2mp: bool, dimp: bool, n_layers: usize, d: usize) -> ModelConfig {
        ModelConfig {
            n_layers,
            hidden: d,
            reduced_dim: d,
            out_dim: d,
            abstractions,
            enable_i2mp: i2mp,
            enable_dimp: dimp,
            dropout: 0.0,
            ..ModelConfig::default()
        }
    }

    fn setup(smiles: &str, cfg: &ModelConfig) -> (XimpModel, ParameterStore, MoleculeInput) {
        let model = XimpModel::new(cfg.clone()).unwrap();
        let params = model.init(5);
        let input = featurize(&parse_smiles(smiles).unwrap(), cfg).unwrap();
        (model, params, input)
    }

    fn nonneg(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect())
    }

    fn set(store: &mut ParameterStore, name: &str, value: Matrix) {
        *store.get_mut(name).unwrap_or_else(|| panic!("no parameter {name}")) = value;
    }

    #[test]
    fn zero_weights_give_zero_messages() {
        let cfg = config(vec![Abstraction::Jt, Abstraction::Erg], true, true, 1, 16);
        let (model, mut params, input) = setup("Oc1ccncc1", &cfg);
        let names: Vec<String> = params
            .names()
            .filter(|n| n.contains("to_mol") || n.contains("from_mol") || n.contains("_to_"))
            .map(str::to_string)
            .collect();
        assert_eq!(names.len(), 6);
        for n in &names {
            let (r, c) = params.get(n).unwrap().shape();
            set(&mut params, n, Matrix::zeros(r, c));
        }
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let state = model.initial_state(&mut tape, &p, &input).unwrap();
        let (xs, ms) = model.i2mp_step(&mut tape, &p, 0, &input, &state).unwrap();
        let dimp = model.dimp_step(&mut tape, &p, 0, &input, &state.t).unwrap();
        for v in xs.iter().chain(&ms).chain(dimp.iter().flatten()) {
            assert_eq!(tape.value(*v).norm_inf(), 0.0);
        }
    }

    #[test]
    fn benzene_view_message_is_column_mean() {
        let cfg = config(vec![Abstraction::Jt], true, false, 1, 16);
        let (model, mut params, input) = setup("c1ccccc1", &cfg);
        assert_eq!(input.views[0].reduced.n_nodes(), 1);
        set(&mut params, "l0.jt.from_mol.w", Matrix::identity(16));
        let x = nonneg(6, 16, 1);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let m = model.i2mp_to_views(&mut tape, &p, 0, &input, xv).unwrap();
        let expected: Vec<f64> = (0..16).map(|c| (0..6).map(|r| x[(r, c)]).sum::<f64>() / 6.0).collect();
        for (a, b) in tape.value(m[0]).row(0).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn direct_messages_preserve_constant_rows() {
        let cfg = config(vec![Abstraction::Jt, Abstraction::Erg], true, true, 1, 16);
        let (model, mut params, input) = setup("CC(=O)Nc1ccncc1", &cfg);
        set(&mut params, "l0.jt_to_erg.w", Matrix::identity(16));
        set(&mut params, "l0.erg_to_jt.w", Matrix::identity(16));
        let x: Vec<f64> = nonneg(1, 16, 2).into_vec();
        let rows = |n: usize| Matrix::from_rows(&vec![x.clone(); n]);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let t: Vec<Var> = input.views.iter().map(|v| tape.constant(rows(v.reduced.n_nodes()))).collect();
        let out = model.dimp_step(&mut tape, &p, 0, &input, &t).unwrap();
        for msgs in &out {
            assert_eq!(msgs.len(), 1);
            let m = tape.value(msgs[0]);
            for r in 0..m.rows() {
                for (a, b) in m.row(r).iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixed_rows_lie_in_convex_hull() {
        // Support function test: no row may exceed the maximum of T_k along
        // any direction.
        let cfg = config(vec![Abstraction::Jt, Abstraction::Erg], true, true, 1, 8);
        let (_, _, input) = setup("OC1CCN(C)C1C", &cfg);
        assert_eq!(input.n_atoms, 8);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        for i in 0..2 {
            let k = 1 - i;
            let s = input.dimp[i][k].as_ref().unwrap();
            let t = nonneg(input.views[k].reduced.n_nodes(), 8, 3 + i as u64).map(|v| v - 0.5);
            let mixed = s.mul_dense(&t);
            for _ in 0..200 {
                let u: Vec<f64> = (0..8).map(|_| rng.random::<f64>() - 0.5).collect();
                let dot = |row: &[f64]| row.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
                let support = (0..t.rows()).map(|r| dot(t.row(r))).fold(f64::NEG_INFINITY, f64::max);
                for r in 0..mixed.rows() {
                    assert!(dot(mixed.row(r)) <= support + 1e-12);
                }
            }
        }
    }

    #[test]
    fn direct_messages_need_two_views() {
        let cfg = config(vec![Abstraction::Jt, Abstraction::Erg], true, false, 1, 16);
        let (model, params, input) = setup("c1ccccc1O", &cfg);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let state = model.initial_state(&mut tape, &p, &input).unwrap();
        assert!(matches!(
            model.dimp_step(&mut tape, &p, 0, &input, &state.t),
            Err(ModelError::Config(_))
        ));
        let mut bad = cfg.clone();
        bad.abstractions = vec![Abstraction::Jt];
        bad.enable_dimp = true;
        assert!(XimpModel::new(bad).is_err());
    }

    #[test]
    fn no_abstractions_is_plain_gine() {
        let cfg = config(Vec::new(), false, false, 1, 16);
        let (model, params, input) = setup("CC(=O)Oc1ccccc1", &cfg);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let states = model.states(&mut tape, &p, &input, None).unwrap();
        let gine = GinLayer::gine("l0.mol", 16, BOND_FEATURES);
        let e = tape.constant(input.edge_attr.clone());
        let h = gine.forward(&mut tape, &p, states[0].x, &input.graph, Some(e)).unwrap();
        let h = tape.relu(h).unwrap();
        assert_eq!(tape.value(h), tape.value(states[1].x));
        assert!(states[1].t.is_empty());
    }

    #[test]
    fn disabled_schemes_decouple_views() {
        let cfg = config(vec![Abstraction::Jt, Abstraction::Erg], false, false, 3, 16);
        let (model, params, input) = setup("CC(=O)Nc1ccncc1", &cfg);
        assert!(!params.names().any(|n| n.contains("to_mol") || n.contains("_to_")));
        let plain = XimpModel::new(config(Vec::new(), false, false, 3, 16)).unwrap();
        let mut plain_params = plain.init(0);
        let shared: Vec<String> = plain_params.names().map(str::to_string).collect();
        for n in &shared {
            if let Some(v) = params.get(n).filter(|v| v.shape() == plain_params.get(n).unwrap().shape()) {
                set(&mut plain_params, n, v.clone());
            }
        }
        let mut plain_input = input.clone();
        plain_input.views.clear();
        plain_input.dimp.clear();

        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = model.states(&mut tape, &p, &input, None).unwrap()[3].x;
        let q = plain_params.bind(&mut tape);
        let y = plain.states(&mut tape, &q, &plain_input, None).unwrap()[3].x;
        assert_eq!(tape.value(x), tape.value(y));
    }

    /// Parameters that make every layer a sum of non-negative inputs: zero
    /// input weights with chosen biases, identity MLP weights, zero edge
    /// embedding.
    fn handcrafted(params: &mut ParameterStore, atom_bias: &[f64], view_bias: &[f64]) {
        let names: Vec<String> = params.names().map(str::to_string).collect();
        for n in &names {
            let (r, c) = params.get(n).unwrap().shape();
            let value = if n == "input.atom.b" {
                Matrix::from_vec(1, c, atom_bias.to_vec())
            } else if n == "input.jt.b" {
                Matrix::from_vec(1, c, view_bias.to_vec())
            } else if n.contains(".mlp.") && n.ends_with(".w") || n.ends_with("to_mol.w") || n.ends_with("from_mol.w") {
                Matrix::identity(r)
            } else {
                Matrix::zeros(r, c)
            };
            set(params, n, value);
        }
    }

    #[test]
    fn one_layer_by_hand() {
        // Cyclopropane has a single ring node. With X0 rows (1,2) and T0 row
        // (3,1): the GIN-E term is (1+deg)·(1,2) = (3,6) and the atom message
        // is the ring row, so every atom ends at (6,7).
        let mut cfg = config(vec![Abstraction::Jt], true, false, 1, 2);
        cfg.head_hidden = Some(2);
        let (model, mut params, input) = setup("C1CC1", &cfg);
        assert_eq!(input.views[0].reduced.n_nodes(), 1);
        handcrafted(&mut params, &[1.0, 2.0], &[3.0, 1.0]);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let states = model.states(&mut tape, &p, &input, None).unwrap();
        assert_eq!(tape.value(states[1].x), &Matrix::from_rows(&vec![vec![6.0, 7.0]; 3]));
        // Ring node: GIN sum (3,1) plus the column mean of X0.
        assert_eq!(tape.value(states[1].t[0]), &Matrix::from_rows(&[vec![4.0, 3.0]]));
    }

    #[test]
    fn receptive_field_grows_one_hop_per_layer() {
        let cfg = config(vec![Abstraction::Jt], true, false, 2, 16);
        let (model, params, input) = setup("CCCCCCCCCC", &cfg);
        let embed_atom0 = |inp: &MoleculeInput| -> Vec<f64> {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape);
            let states = model.states(&mut tape, &p, inp, None).unwrap();
            tape.value(states[2].x).row(0).to_vec()
        };
        let masked = |far: usize| -> MoleculeInput {
            let mut inp = input.clone();
            for a in far..inp.n_atoms {
                inp.atom_x.row_mut(a).fill(0.0);
            }
            let view = &mut inp.views[0];
            for (node, set) in view.reduced.atom_sets.iter().enumerate() {
                if set.iter().any(|&a| a >= far) {
                    view.x.row_mut(node).fill(0.0);
                }
            }
            inp
        };
        let base = embed_atom0(&input);
        assert_eq!(embed_atom0(&masked(3)), base);
        assert_ne!(embed_atom0(&masked(2)), base);
    }

    #[test]
    fn single_atom_readout_is_its_embedding() {
        let cfg = config(Vec::new(), false, false, 1, 16);
        let (model, mut params, input) = setup("C", &cfg);
        set(&mut params, "readout.mol.w", Matrix::identity(16));
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let states = model.states(&mut tape, &p, &input, None).unwrap();
        let h = model.readout(&mut tape, &p, &states[1]).unwrap();
        assert_eq!(tape.value(h).row(0), tape.value(states[1].x).row(0));
    }

    #[test]
    fn readout_combinations() {
        let views = vec![Abstraction::Jt, Abstraction::Erg];
        let mut cfg = config(views.clone(), true, true, 1, 16);
        let (concat, params, _) = setup("CCO", &cfg);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let state = LayerState {
            x: tape.constant(nonneg(3, 16, 1)),
            t: vec![tape.constant(nonneg(2, 16, 2)), tape.constant(nonneg(2, 16, 3))],
        };
        let h = concat.readout(&mut tape, &p, &state).unwrap();
        assert_eq!(tape.shape(h), (1, 48));

        cfg.readout_combine = ReadoutCombine::Sum;
        let (sum, mut params, _) = setup("CCO", &cfg);
        for n in ["readout.mol.w", "readout.jt.w", "readout.erg.w"] {
            set(&mut params, n, Matrix::identity(16));
        }
        let c: Vec<f64> = nonneg(1, 16, 4).into_vec();
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let state = LayerState {
            x: tape.constant(Matrix::from_rows(&vec![c.clone(); 3])),
            t: vec![
                tape.constant(Matrix::from_rows(&vec![c.clone(); 2])),
                tape.constant(Matrix::from_rows(&vec![c.clone(); 4])),
            ],
        };
        let h = sum.readout(&mut tape, &p, &state).unwrap();
        for (a, b) in tape.value(h).row(0).iter().zip(&c) {
            assert!((a - 3.0 * b).abs() < 1e-14);
        }
    }
}
