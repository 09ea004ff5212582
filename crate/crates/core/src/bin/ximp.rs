use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use ximp::autodiff::Checkpoint;
use ximp::chem::parse_smiles;
use ximp::expressivity::{build_compound, wl_distinguishable, PlainGraph};
use ximp::harness::{
    evaluate, grid_search, load_csv, load_table, make_split, performance_profile, train, write_profile, write_results,
    GridSpec, TrainConfig,
};
use ximp::model::ModelConfig;
use ximp::reductions::{build_erg, build_junction_tree, murcko_scaffold};

#[derive(Parser)]
#[command(name = "ximp", version, about = "Cross-graph inter-message passing for molecular property prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a CSV, build abstractions and write a summary cache.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Train one model from a JSON run file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean absolute error of a checkpoint on a CSV.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Scaffold split, cross-validated grid and seeded test retraining.
    Gridsearch {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 1-WL distinguishability of two molecules per view.
    WlCheck {
        #[arg(long)]
        smiles_a: String,
        #[arg(long)]
        smiles_b: String,
        #[arg(long, value_delimiter = ',', default_value = "g,jt,erg,compound")]
        views: Vec<String>,
    },
    /// Performance profile from a long `model,task,mae` table.
    Profile {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 1.05)]
        tau: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Contents of the `train --config` file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    data: PathBuf,
    #[serde(default)]
    validation: Option<PathBuf>,
    model: ModelConfig,
    train: TrainConfig,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Resolves `p` against the directory of the file that mentioned it.
fn relative_to(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn prep(input: &Path, cache: &Path) -> Result<()> {
    let ds = load_csv(input)?;
    fs::create_dir_all(cache)?;
    let mut w = csv::Writer::from_path(cache.join("molecules.csv"))?;
    w.write_record(["smiles", "target", "atoms", "rings", "jt_nodes", "erg_nodes", "scaffold"])?;
    for (rec, g) in ds.records.iter().zip(&ds.graphs) {
        let (jt, _) = build_junction_tree(g);
        let (erg, _) = build_erg(g);
        w.write_record([
            rec.smiles.clone(),
            rec.target.to_string(),
            g.n_atoms().to_string(),
            g.rings().len().to_string(),
            jt.n_nodes().to_string(),
            erg.n_nodes().to_string(),
            murcko_scaffold(g),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(cache.join("rejected.csv"))?;
    w.write_record(["line", "smiles", "reason"])?;
    for r in &ds.rejected {
        w.write_record([r.line.to_string(), r.smiles.clone(), r.reason.clone()])?;
    }
    w.flush()?;
    println!("{} records cached, {} rejected", ds.len(), ds.rejected.len());
    Ok(())
}

fn run_train(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let run: RunFile = read_json(config)?;
    let data = load_csv(relative_to(config, &run.data))?;
    let val = run
        .validation
        .as_ref()
        .map(|p| load_csv(relative_to(config, p)))
        .transpose()?;
    let outcome = train(&run.model, &run.train, &data, val.as_ref(), seed)?;
    fs::write(out, outcome.trained.to_checkpoint()?.to_json()?)?;

    let curve_path = out.with_extension("curve.csv");
    let mut w = csv::Writer::from_path(&curve_path)?;
    w.write_record(["epoch", "train_loss", "train_mae", "val_mae"])?;
    for m in &outcome.curve {
        w.write_record([
            m.epoch.to_string(),
            format!("{:.6}", m.train_loss),
            format!("{:.6}", m.train_mae),
            m.val_mae.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    if let Some(last) = outcome.curve.last() {
        println!("final train MAE {:.6}", last.train_mae);
        if let Some(v) = last.val_mae {
            println!("final validation MAE {v:.6}");
        }
    }
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn wl_check(a: &str, b: &str, views: &[String]) -> Result<()> {
    let (ga, gb) = (parse_smiles(a)?, parse_smiles(b)?);
    let (ja, sja) = build_junction_tree(&ga);
    let (jb, sjb) = build_junction_tree(&gb);
    let (ea, sea) = build_erg(&ga);
    let (eb, seb) = build_erg(&gb);
    println!("{:<10} distinguishable", "view");
    for view in views {
        let verdict = match view.as_str() {
            "g" => wl_distinguishable(&PlainGraph::from_molecule(&ga), &PlainGraph::from_molecule(&gb)),
            "jt" => wl_distinguishable(&PlainGraph::from_reduced(&ja), &PlainGraph::from_reduced(&jb)),
            "erg" => wl_distinguishable(&PlainGraph::from_reduced(&ea), &PlainGraph::from_reduced(&eb)),
            "compound" => wl_distinguishable(
                &build_compound(&ga, &[&ja, &ea], &[&sja, &sea]).graph,
                &build_compound(&gb, &[&jb, &eb], &[&sjb, &seb]).graph,
            ),
            other => bail!("unknown view `{other}`; expected g, jt, erg or compound"),
        };
        println!("{view:<10} {verdict}");
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Prep { input, cache } => prep(&input, &cache),
        Command::Train { config, seed, out } => run_train(&config, seed, &out),
        Command::Eval { checkpoint, input } => {
            let text = fs::read_to_string(&checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
            let ck = Checkpoint::from_json(&text)?;
            println!("MAE {:.6}", evaluate(&ck, &load_csv(&input)?)?);
            Ok(())
        }
        Command::Gridsearch { grid, data, out } => {
            let spec: GridSpec = read_json(&grid)?;
            let ds = load_csv(&data)?;
            let plan = make_split(&ds, spec.master_seed)?;
            let report = grid_search(&spec, &ds, &plan)?;
            write_results(&report, &out)?;
            let v = &report.results[report.selected_by_validation];
            let t = &report.results[report.selected_by_test];
            println!("selected by validation: {} (test MAE {:.6} ± {:.6})", v.config_id, v.test_mae_mean, v.test_mae_std);
            println!("selected by test:       {} (test MAE {:.6} ± {:.6})", t.config_id, t.test_mae_mean, t.test_mae_std);
            Ok(())
        }
        Command::WlCheck { smiles_a, smiles_b, views } => wl_check(&smiles_a, &smiles_b, &views),
        Command::Profile { results, tau, out } => {
            let profile = performance_profile(&load_table(&results)?, tau)?;
            write_profile(&profile, &out)?;
            for m in &profile.models {
                println!(
                    "{:<12} wins {:.3}  within tau {:.3}",
                    m.model, m.win_fraction, m.within_tau_fraction
                );
            }
            Ok(())
        }
    }
}
