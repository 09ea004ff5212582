use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, Checkpoint, GradError, ParameterStore, Tape};
use crate::model::{featurize, ModelConfig, ModelError, MoleculeInput, XimpModel, FEATURIZATION_VERSION};

use super::{Dataset, HarnessError};

fn default_lr() -> f64 {
    1e-3
}

fn default_weight_decay() -> f64 {
    1e-4
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// Fit on `(y - mean) / std` and undo the scaling at prediction time.
    #[serde(default = "default_true")]
    pub standardize_targets: bool,
    /// Cosine decay of the learning rate from `lr` towards zero over the run.
    #[serde(default)]
    pub cosine_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            lr: default_lr(),
            weight_decay: default_weight_decay(),
            standardize_targets: true,
            cosine_decay: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(HarnessError::Config("lr and weight_decay must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn adam(&self, epoch: usize) -> AdamConfig {
        let lr = if self.cosine_decay && self.epochs > 0 {
            0.5 * self.lr * (1.0 + (std::f64::consts::PI * epoch as f64 / self.epochs as f64).cos())
        } else {
            self.lr
        };
        AdamConfig {
            lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's minibatches, original target units.
    pub train_loss: f64,
    /// MAE of an evaluation pass over the training set after the epoch.
    pub train_mae: f64,
    pub val_mae: Option<f64>,
}

/// Parameters plus everything needed to reproduce predictions.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: XimpModel,
    pub params: ParameterStore,
    pub train_config: TrainConfig,
    pub target_mean: f64,
    pub target_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    featurization_version: String,
    model: ModelConfig,
    train: TrainConfig,
    target_mean: f64,
    target_scale: f64,
    seed: u64,
}

impl TrainedModel {
    pub fn featurize(&self, ds: &Dataset) -> Result<Vec<MoleculeInput>, HarnessError> {
        featurize_all(ds, &self.model.config)
    }

    pub fn predict(&self, input: &MoleculeInput) -> Result<f64, HarnessError> {
        Ok(self.model.predict(&self.params, input)? * self.target_scale + self.target_mean)
    }

    /// MAE over pre-featurized inputs, dropout disabled.
    pub fn mae(&self, inputs: &[MoleculeInput], targets: &[f64]) -> Result<f64, HarnessError> {
        let preds = inputs.iter().map(|x| self.predict(x)).collect::<Result<Vec<_>, _>>()?;
        Ok(mean_absolute_error(&preds, targets))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint, HarnessError> {
        let meta = CheckpointMeta {
            featurization_version: FEATURIZATION_VERSION.to_string(),
            model: self.model.config.clone(),
            train: self.train_config.clone(),
            target_mean: self.target_mean,
            target_scale: self.target_scale,
            seed: self.seed,
        };
        Ok(Checkpoint::new(serde_json::to_value(meta)?, &self.params))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, HarnessError> {
        let found = ck
            .config
            .get("featurization_version")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .to_string();
        if found != FEATURIZATION_VERSION {
            return Err(HarnessError::VersionMismatch {
                expected: FEATURIZATION_VERSION.to_string(),
                found,
            });
        }
        let meta: CheckpointMeta = serde_json::from_value(ck.config.clone())?;
        let model = XimpModel::new(meta.model)?;
        let params = ck.to_store();
        let mut want: Vec<String> = model.init(0).names().map(str::to_string).collect();
        let mut got: Vec<String> = params.names().map(str::to_string).collect();
        want.sort();
        got.sort();
        if want != got {
            return Err(HarnessError::Config("checkpoint parameters do not match its model config".into()));
        }
        Ok(TrainedModel {
            model,
            params,
            train_config: meta.train,
            target_mean: meta.target_mean,
            target_scale: meta.target_scale,
            seed: meta.seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trained: TrainedModel,
    pub curve: Vec<EpochMetrics>,
}

pub fn mean_absolute_error(preds: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(preds.len(), targets.len(), "prediction and target counts differ");
    if preds.is_empty() {
        return 0.0;
    }
    preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64
}

fn featurize_all(ds: &Dataset, cfg: &ModelConfig) -> Result<Vec<MoleculeInput>, HarnessError> {
    ds.graphs
        .iter()
        .map(|g| featurize(g, cfg).map_err(HarnessError::from))
        .collect()
}

fn non_finite(epoch: usize, batch: usize, e: ModelError) -> HarnessError {
    match e {
        ModelError::Grad(GradError::NonFiniteValue { op }) => HarnessError::NonFiniteLoss {
            epoch,
            batch,
            detail: format!("non-finite value produced by {op}"),
        },
        other => HarnessError::Model(other),
    }
}

/// Minibatch MAE training with Adam. Shuffling, initialization and dropout
/// masks all derive from `seed`, so identical inputs give identical curves.
pub fn train(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    data: &Dataset,
    validation: Option<&Dataset>,
    seed: u64,
) -> Result<TrainOutcome, HarnessError> {
    train_config.validate()?;
    if data.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let model = XimpModel::new(model_config.clone())?;
    let inputs = featurize_all(data, model_config)?;
    let val_inputs = validation.map(|v| featurize_all(v, model_config)).transpose()?;
    let targets = data.targets();

    let (target_mean, target_scale) = if train_config.standardize_targets {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        (mean, if sd > 1e-12 { sd } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let scaled: Vec<f64> = targets.iter().map(|t| (t - target_mean) / target_scale).collect();

    let mut trained = TrainedModel {
        params: model.init(seed),
        model,
        train_config: train_config.clone(),
        target_mean,
        target_scale,
        seed,
    };
    let mut shuffle_rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let mut dropout_rng = Xoshiro256PlusPlus::seed_from_u64(seed.rotate_left(17) ^ 0xd0d0_d0d0);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut curve = Vec::with_capacity(train_config.epochs);

    for epoch in 0..train_config.epochs {
        order.shuffle(&mut shuffle_rng);
        let adam = train_config.adam(epoch);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(train_config.batch_size).enumerate() {
            let weight = 1.0 / chunk.len() as f64;
            trained.params.zero_grad();
            for &i in chunk {
                let mut tape = Tape::new();
                let p = trained.params.bind(&mut tape);
                let step = (|| -> Result<f64, ModelError> {
                    let y = trained.model.forward(&mut tape, &p, &inputs[i], Some(&mut dropout_rng))?;
                    let target = tape.constant(crate::autodiff::Matrix::filled(1, 1, scaled[i]));
                    let diff = tape.sub(y, target)?;
                    let abs = tape.abs(diff)?;
                    let loss = tape.scale(abs, weight)?;
                    let grads = tape.backward(loss)?;
                    trained.params.accumulate(&p, &grads);
                    Ok(tape.value(abs)[(0, 0)])
                })();
                let l = step.map_err(|e| non_finite(epoch, batch, e))?;
                if !l.is_finite() {
                    return Err(HarnessError::NonFiniteLoss {
                        epoch,
                        batch,
                        detail: format!("loss {l} on record {i}"),
                    });
                }
                loss_sum += l;
            }
            trained
                .params
                .adam_step(&adam)
                .map_err(|e| non_finite(epoch, batch, e.into()))?;
        }
        let train_mae = trained.mae(&inputs, &targets)?;
        let val_mae = match (&val_inputs, validation) {
            (Some(vi), Some(v)) => Some(trained.mae(vi, &v.targets())?),
            _ => None,
        };
        log::debug!("epoch {epoch}: train MAE {train_mae:.4}");
        curve.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / inputs.len() as f64 * target_scale,
            train_mae,
            val_mae,
        });
    }
    Ok(TrainOutcome { trained, curve })
}

/// MAE of a checkpoint on `ds`, dropout disabled.
pub fn evaluate(checkpoint: &Checkpoint, ds: &Dataset) -> Result<f64, HarnessError> {
    let trained = TrainedModel::from_checkpoint(checkpoint)?;
    let inputs = trained.featurize(ds)?;
    trained.mae(&inputs, &ds.targets())
}
