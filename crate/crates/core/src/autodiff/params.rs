use std::collections::BTreeMap;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{GradError, Gradients, Matrix, Tape, Var};

/// Adam hyperparameters. Weight decay is decoupled from the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Option<Matrix>,
    pub first_moment: Matrix,
    pub second_moment: Matrix,
}

impl Parameter {
    fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            value,
            grad: None,
            first_moment: Matrix::zeros(r, c),
            second_moment: Matrix::zeros(r, c),
        }
    }
}

/// Named trainable tensors, iterated in sorted name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: BTreeMap<String, Parameter>,
    step: u64,
}

/// Tape handles for every parameter of a store.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    /// Panics on an unknown name: parameter names are fixed by model code.
    pub fn get(&self, name: &str) -> Var {
        match self.vars.get(name) {
            Some(&v) => v,
            None => panic!("parameter `{name}` is not bound"),
        }
    }

    pub fn try_get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        self.params.insert(name.into(), Parameter::new(value));
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn insert_uniform<R: rand::Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        self.insert(name, Matrix::from_vec(rows, cols, data));
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.params.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.params.iter().map(|(k, p)| (k.as_str(), &p.value))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.data().len()).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Records every parameter on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let vars = self
            .params
            .iter()
            .map(|(name, p)| (name.clone(), tape.parameter(p.value.clone())))
            .collect();
        BoundParams { vars }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// Adds the tape gradients of every bound parameter. Parameters that the
    /// loss does not reach receive an explicit zero gradient.
    pub fn accumulate(&mut self, bound: &BoundParams, grads: &Gradients) {
        for (name, p) in self.params.iter_mut() {
            let Some(&var) = bound.vars.get(name) else {
                continue;
            };
            let (r, c) = p.value.shape();
            let slot = p.grad.get_or_insert_with(|| Matrix::zeros(r, c));
            if let Some(g) = grads.get(var) {
                slot.add_assign(g);
            }
        }
    }

    /// One Adam update with decoupled weight decay, then clears gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<(), GradError> {
        if let Some((name, _)) = self.params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(GradError::MissingGradient { name: name.clone() });
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        for p in self.params.values_mut() {
            let grad = p.grad.take().expect("checked above");
            let values = p.value.data_mut();
            let m = p.first_moment.data_mut();
            let v = p.second_moment.data_mut();
            for i in 0..values.len() {
                let g = grad.data()[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                values[i] -= cfg.lr * cfg.weight_decay * values[i];
                values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("w", Matrix::filled(1, 1, w));
        s
    }

    fn set_grad(s: &mut ParameterStore, g: f64) {
        s.params.get_mut("w").unwrap().grad = Some(Matrix::filled(1, 1, g));
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut s = single(0.7);
        set_grad(&mut s, 0.0);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        s.adam_step(&cfg).unwrap();
        assert_eq!(s.get("w").unwrap()[(0, 0)], 0.7);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // m1 = 0.1, v1 = 0.001, m_hat = 1, v_hat = 1.
        let mut s = single(1.0);
        set_grad(&mut s, 1.0);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        s.adam_step(&cfg).unwrap();
        let expected = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((s.get("w").unwrap()[(0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn moments_follow_recurrence_for_constant_gradient() {
        let g = 0.5;
        let mut s = single(2.0);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..2 {
            set_grad(&mut s, g);
            s.adam_step(&cfg).unwrap();
        }
        let p = s.parameter("w").unwrap();
        let m2 = 0.9 * (0.1 * g) + 0.1 * g;
        let v2 = 0.999 * (0.001 * g * g) + 0.001 * g * g;
        assert!((p.first_moment[(0, 0)] - m2).abs() < 1e-15);
        assert!((p.second_moment[(0, 0)] - v2).abs() < 1e-15);
        // Bias-corrected ratio is exactly g / |g| at every step.
        let w2 = 2.0 - 2.0 * 1e-3 * (g / (g.abs() + 1e-8));
        assert!((s.get("w").unwrap()[(0, 0)] - w2).abs() < 1e-12);
    }

    #[test]
    fn decoupled_weight_decay_shrinks_without_gradient() {
        let mut s = single(1.0);
        set_grad(&mut s, 0.0);
        s.adam_step(&AdamConfig::default()).unwrap();
        assert!((s.get("w").unwrap()[(0, 0)] - (1.0 - 1e-3 * 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut s = single(1.0);
        assert!(matches!(
            s.adam_step(&AdamConfig::default()),
            Err(GradError::MissingGradient { .. })
        ));
    }
}
