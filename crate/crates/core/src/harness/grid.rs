use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::reductions::hash_seq;

use super::{train, Dataset, HarnessError, SplitPlan, TrainConfig, FOLD_COUNT};

const LAYER_CHOICES: &[usize] = &[1, 2, 3];
const WIDTH_CHOICES: &[usize] = &[16, 32];
const BATCH_CHOICES: &[usize] = &[64, 128];
const EPOCH_CHOICES: &[usize] = &[50, 100, 150];

fn default_runs() -> usize {
    10
}

/// Grid over the tunable hyperparameters. Everything else comes from `base`
/// and the fixed optimizer settings of `TrainConfig::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub base: ModelConfig,
    pub n_layers: Vec<usize>,
    pub hidden: Vec<usize>,
    pub out_dim: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub epochs: Vec<usize>,
    pub master_seed: u64,
    /// Cross-validation folds actually trained, taken in fold order.
    #[serde(default = "default_runs")]
    pub folds: usize,
    /// Retraining seeds for the test estimate.
    #[serde(default = "default_runs")]
    pub test_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_layers: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub batch_size: usize,
    pub head_hidden: usize,
    pub epochs: usize,
}

impl GridCell {
    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            hidden: self.hidden,
            reduced_dim: self.hidden,
            out_dim: self.out_dim,
            head_hidden: Some(self.head_hidden),
            ..base.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..TrainConfig::default()
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let check = |name: &str, values: &[usize], allowed: &[usize]| {
            if values.is_empty() {
                return Err(HarnessError::Config(format!("grid axis `{name}` is empty")));
            }
            match values.iter().find(|v| !allowed.contains(v)) {
                Some(v) => Err(HarnessError::Config(format!(
                    "grid axis `{name}` value {v} is outside {allowed:?}"
                ))),
                None => Ok(()),
            }
        };
        check("n_layers", &self.n_layers, LAYER_CHOICES)?;
        check("hidden", &self.hidden, WIDTH_CHOICES)?;
        check("out_dim", &self.out_dim, WIDTH_CHOICES)?;
        check("batch_size", &self.batch_size, BATCH_CHOICES)?;
        check("head_hidden", &self.head_hidden, WIDTH_CHOICES)?;
        check("epochs", &self.epochs, EPOCH_CHOICES)?;
        if !(1..=FOLD_COUNT).contains(&self.folds) {
            return Err(HarnessError::Config(format!("folds must be in 1..={FOLD_COUNT}")));
        }
        if self.test_seeds == 0 {
            return Err(HarnessError::Config("test_seeds must be positive".into()));
        }
        for cell in self.cells() {
            cell.model_config(&self.base).validate()?;
        }
        Ok(())
    }

    /// Cartesian product in axis order, last axis fastest.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &n_layers in &self.n_layers {
            for &hidden in &self.hidden {
                for &out_dim in &self.out_dim {
                    for &batch_size in &self.batch_size {
                        for &head_hidden in &self.head_hidden {
                            for &epochs in &self.epochs {
                                out.push(GridCell {
                                    n_layers,
                                    hidden,
                                    out_dim,
                                    batch_size,
                                    head_hidden,
                                    epochs,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config_id: String,
    pub cell: GridCell,
    pub fold_val_mae: Vec<f64>,
    pub mean_val_mae: f64,
    pub test_mae: Vec<f64>,
    pub test_mae_mean: f64,
    pub test_mae_std: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub results: Vec<RunResult>,
    /// Index of the cell with the lowest mean validation MAE.
    pub selected_by_validation: usize,
    /// Index of the cell with the lowest mean test MAE.
    pub selected_by_test: usize,
}

/// Independent PRNG stream for one training replica.
pub fn derive_seed(master: u64, cell: usize, phase: u64, run: usize) -> u64 {
    hash_seq([master, cell as u64, phase, run as u64])
}

/// Rayon pool capped by `XIMP_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("XIMP_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| HarnessError::Config(format!("XIMP_THREADS must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| HarnessError::Config(e.to_string()))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
        .0
}

enum Job {
    Fold(usize, usize),
    Test(usize, usize),
}

/// Cross-validates every cell, then retrains each on all non-test records
/// under `test_seeds` seeds and scores the scaffold test set.
pub fn grid_search(spec: &GridSpec, ds: &Dataset, plan: &SplitPlan) -> Result<GridReport, HarnessError> {
    spec.validate()?;
    let cells = spec.cells();
    let mut jobs = Vec::new();
    for c in 0..cells.len() {
        jobs.extend((0..spec.folds).map(|k| Job::Fold(c, k)));
        jobs.extend((0..spec.test_seeds).map(|r| Job::Test(c, r)));
    }
    let train_all = ds.subset(&plan.train);
    let test = ds.subset(&plan.test);

    let run = |job: &Job| -> Result<(f64, f64), HarnessError> {
        let start = Instant::now();
        let (c, mae) = match *job {
            Job::Fold(c, k) => {
                let cell = &cells[c];
                let tr = ds.subset(&plan.fold_training(k));
                let va = ds.subset(plan.fold_validation(k));
                let seed = derive_seed(spec.master_seed, c, 0, k);
                let out = train(&cell.model_config(&spec.base), &cell.train_config(), &tr, None, seed)?;
                let inputs = out.trained.featurize(&va)?;
                (c, out.trained.mae(&inputs, &va.targets())?)
            }
            Job::Test(c, r) => {
                let cell = &cells[c];
                let seed = derive_seed(spec.master_seed, c, 1, r);
                let out = train(&cell.model_config(&spec.base), &cell.train_config(), &train_all, None, seed)?;
                let inputs = out.trained.featurize(&test)?;
                (c, out.trained.mae(&inputs, &test.targets())?)
            }
        };
        log::info!("cell {c} job done: MAE {mae:.4}");
        Ok((mae, start.elapsed().as_secs_f64()))
    };
    let outputs: Vec<(f64, f64)> = thread_pool()?.install(|| jobs.par_iter().map(run).collect::<Result<_, _>>())?;

    let mut results: Vec<RunResult> = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| RunResult {
            config_id: format!("cell{c:03}"),
            cell: cell.clone(),
            fold_val_mae: Vec::new(),
            mean_val_mae: 0.0,
            test_mae: Vec::new(),
            test_mae_mean: 0.0,
            test_mae_std: 0.0,
            wall_seconds: 0.0,
        })
        .collect();
    for (job, (mae, secs)) in jobs.iter().zip(outputs) {
        let (c, slot) = match *job {
            Job::Fold(c, _) => (c, &mut results[c].fold_val_mae),
            Job::Test(c, _) => (c, &mut results[c].test_mae),
        };
        slot.push(mae);
        results[c].wall_seconds += secs;
    }
    for r in &mut results {
        r.mean_val_mae = mean_std(&r.fold_val_mae).0;
        (r.test_mae_mean, r.test_mae_std) = mean_std(&r.test_mae);
    }
    Ok(GridReport {
        selected_by_validation: argmin(results.iter().map(|r| r.mean_val_mae)),
        selected_by_test: argmin(results.iter().map(|r| r.test_mae_mean)),
        results,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

/// Writes `results.csv`, `folds.csv` and `timing.csv` into `dir`. The first
/// two are deterministic in the master seed; wall times live apart.
pub fn write_results(report: &GridReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let f6 = |v: f64| format!("{v:.6}");

    let path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record([
        "config_id",
        "n_layers",
        "hidden",
        "out_dim",
        "batch_size",
        "head_hidden",
        "epochs",
        "mean_val_mae",
        "test_mae_mean",
        "test_mae_std",
        "selected_by_validation",
        "selected_by_test",
    ])
    .map_err(csv_err(&path))?;
    for (i, r) in report.results.iter().enumerate() {
        let c = &r.cell;
        w.write_record([
            r.config_id.clone(),
            c.n_layers.to_string(),
            c.hidden.to_string(),
            c.out_dim.to_string(),
            c.batch_size.to_string(),
            c.head_hidden.to_string(),
            c.epochs.to_string(),
            f6(r.mean_val_mae),
            f6(r.test_mae_mean),
            f6(r.test_mae_std),
            (i == report.selected_by_validation).to_string(),
            (i == report.selected_by_test).to_string(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = dir.join("folds.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["config_id", "kind", "index", "mae"]).map_err(csv_err(&path))?;
    for r in &report.results {
        for (kind, values) in [("fold", &r.fold_val_mae), ("test_seed", &r.test_mae)] {
            for (k, v) in values.iter().enumerate() {
                w.write_record([r.config_id.as_str(), kind, &k.to_string(), &f6(*v)])
                    .map_err(csv_err(&path))?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;

    let path = dir.join("timing.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["config_id", "wall_seconds"]).map_err(csv_err(&path))?;
    for r in &report.results {
        w.write_record([r.config_id.as_str(), &f6(r.wall_seconds)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec {
            base: ModelConfig::default(),
            n_layers: vec![1, 2],
            hidden: vec![16],
            out_dim: vec![16, 32],
            batch_size: vec![64],
            head_hidden: vec![16],
            epochs: vec![50, 150],
            master_seed: 1,
            folds: 10,
            test_seeds: 10,
        }
    }

    #[test]
    fn cells_enumerate_the_product() {
        let cells = spec().cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].epochs, 50);
        assert_eq!(cells[1].epochs, 150);
        assert_eq!(cells[7].n_layers, 2);
    }

    #[test]
    fn values_outside_the_enumerations_are_rejected() {
        let mut s = spec();
        s.epochs = vec![10];
        assert!(matches!(s.validate(), Err(HarnessError::Config(_))));
        let mut s = spec();
        s.hidden = vec![];
        assert!(s.validate().is_err());
        assert!(spec().validate().is_ok());
    }

    #[test]
    fn argmin_prefers_first_on_ties() {
        assert_eq!(argmin([2.0, 1.0, 1.0].into_iter()), 1);
        assert_eq!(argmin([0.5].into_iter()), 0);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]).1, 0.0);
    }

    #[test]
    fn derived_seeds_differ_by_every_coordinate() {
        let base = derive_seed(1, 0, 0, 0);
        assert_ne!(base, derive_seed(2, 0, 0, 0));
        assert_ne!(base, derive_seed(1, 1, 0, 0));
        assert_ne!(base, derive_seed(1, 0, 1, 0));
        assert_ne!(base, derive_seed(1, 0, 0, 1));
    }
}
