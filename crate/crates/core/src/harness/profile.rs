use std::path::Path;

use super::HarnessError;

/// Model × task MAE matrix. `mae[m][t]` is `None` for a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeTable {
    pub models: Vec<String>,
    pub tasks: Vec<String>,
    pub mae: Vec<Vec<Option<f64>>>,
}

impl MaeTable {
    pub fn from_rows(models: &[&str], tasks: &[&str], rows: &[&[f64]]) -> Self {
        MaeTable {
            models: models.iter().map(|s| s.to_string()).collect(),
            tasks: tasks.iter().map(|s| s.to_string()).collect(),
            mae: rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelProfile {
    pub model: String,
    /// Ratio to the best model, per task in table order.
    pub rho_by_task: Vec<f64>,
    /// Sorted ratios; the ECDF steps to `(i + 1) / n` at `rho_sorted[i]`.
    pub rho_sorted: Vec<f64>,
    pub ecdf: Vec<f64>,
    pub win_fraction: f64,
    pub within_tau_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub tau: f64,
    pub models: Vec<ModelProfile>,
}

/// Dolan-Moré profile: `rho = MAE / min over models` per task. A model wins a
/// task when its MAE equals the minimum exactly.
pub fn performance_profile(table: &MaeTable, tau: f64) -> Result<Profile, HarnessError> {
    let n_tasks = table.tasks.len();
    if table.models.is_empty() || n_tasks == 0 {
        return Err(HarnessError::IncompleteTable("no models or no tasks".into()));
    }
    if table.mae.len() != table.models.len() {
        return Err(HarnessError::IncompleteTable("row count differs from model count".into()));
    }
    let mut values = vec![vec![0.0; n_tasks]; table.models.len()];
    for (m, row) in table.mae.iter().enumerate() {
        if row.len() != n_tasks {
            return Err(HarnessError::IncompleteTable(format!("model `{}` has {} cells", table.models[m], row.len())));
        }
        for (t, cell) in row.iter().enumerate() {
            match cell {
                Some(v) if v.is_finite() && *v > 0.0 => values[m][t] = *v,
                _ => {
                    return Err(HarnessError::IncompleteTable(format!(
                        "model `{}` task `{}` needs a positive finite MAE",
                        table.models[m], table.tasks[t]
                    )))
                }
            }
        }
    }
    let best: Vec<f64> = (0..n_tasks)
        .map(|t| values.iter().map(|row| row[t]).fold(f64::INFINITY, f64::min))
        .collect();
    let models = table
        .models
        .iter()
        .zip(&values)
        .map(|(name, row)| {
            let rho_by_task: Vec<f64> = row.iter().zip(&best).map(|(v, b)| v / b).collect();
            let wins = row.iter().zip(&best).filter(|(v, b)| v == b).count();
            let within = rho_by_task.iter().filter(|&&r| r <= tau).count();
            let mut rho_sorted = rho_by_task.clone();
            rho_sorted.sort_by(f64::total_cmp);
            let ecdf = (1..=n_tasks).map(|i| i as f64 / n_tasks as f64).collect();
            ModelProfile {
                model: name.clone(),
                rho_by_task,
                rho_sorted,
                ecdf,
                win_fraction: wins as f64 / n_tasks as f64,
                within_tau_fraction: within as f64 / n_tasks as f64,
            }
        })
        .collect();
    Ok(Profile { tau, models })
}

/// Reads a long-format CSV with columns `model,task,mae`. Model and task
/// order follow first appearance.
pub fn load_table(path: &Path) -> Result<MaeTable, HarnessError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let headers = reader.headers().map_err(|e| HarnessError::io(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::MissingColumn(name.into()))
    };
    let (mc, tc, vc) = (col("model")?, col("task")?, col("mae")?);
    let mut table = MaeTable {
        models: Vec::new(),
        tasks: Vec::new(),
        mae: Vec::new(),
    };
    let mut cells = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| HarnessError::io(path, e))?;
        let model = row.get(mc).unwrap_or("").to_string();
        let task = row.get(tc).unwrap_or("").to_string();
        let value: f64 = row
            .get(vc)
            .unwrap_or("")
            .parse()
            .map_err(|_| HarnessError::IncompleteTable(format!("unreadable MAE for `{model}` / `{task}`")))?;
        if !table.models.contains(&model) {
            table.models.push(model.clone());
        }
        if !table.tasks.contains(&task) {
            table.tasks.push(task.clone());
        }
        cells.push((model, task, value));
    }
    table.mae = vec![vec![None; table.tasks.len()]; table.models.len()];
    for (model, task, value) in cells {
        let m = table.models.iter().position(|x| *x == model).expect("inserted above");
        let t = table.tasks.iter().position(|x| *x == task).expect("inserted above");
        table.mae[m][t] = Some(value);
    }
    Ok(table)
}

/// ECDF points to `path`, plus a per-model summary beside it
/// (`<stem>_summary.csv`).
pub fn write_profile(profile: &Profile, path: &Path) -> Result<(), HarnessError> {
    let f6 = |v: f64| format!("{v:.6}");
    let err = |e: csv::Error| HarnessError::io(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["model", "rho", "ecdf"]).map_err(err)?;
    for m in &profile.models {
        for (r, e) in m.rho_sorted.iter().zip(&m.ecdf) {
            w.write_record([m.model.as_str(), &f6(*r), &f6(*e)]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;

    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
    let summary = path.with_file_name(format!("{stem}_summary.csv"));
    let err = |e: csv::Error| HarnessError::io(&summary, e);
    let mut w = csv::Writer::from_path(&summary).map_err(err)?;
    w.write_record(["model", "win_fraction", "within_tau_fraction", "tau"]).map_err(err)?;
    for m in &profile.models {
        w.write_record([
            m.model.as_str(),
            &f6(m.win_fraction),
            &f6(m.within_tau_fraction),
            &f6(profile.tau),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(&summary, e))
}
