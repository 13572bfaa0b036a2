//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data, 3 numerical.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::autodiff::{read_checkpoint, write_checkpoint, ParamStore};
use crate::config::RunConfig;
use crate::dataset::{load_cache, preprocess, write_cache, Manifest, CACHE_VERSION};
use crate::model::synthetic::{generate, SyntheticConfig};
use crate::model::{evaluate, explain, split_indices, train, Classifier, EpochRecord, SplitName, TrainError};

#[derive(Parser, Debug)]
#[command(name = "fragxsite", version, about = "Fragment/pocket attention models for drug-target interaction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse, fragment, detect pockets and featurize a pair table into a cache.
    Preprocess {
        /// CSV with header smiles,pdb_path,label,drug_id,protein_id
        csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train on a cache and write checkpoint, history and split.
    Train {
        /// Directory written by `preprocess` or `synth`
        cache: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Metrics of a trained run on one split.
    Evaluate {
        /// Run directory or checkpoint file
        checkpoint: PathBuf,
        cache: PathBuf,
        #[arg(long, default_value = "test")]
        split: SplitName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranked pockets and fragments for one pair, plus attention matrices.
    Explain {
        checkpoint: PathBuf,
        cache: PathBuf,
        drug_id: String,
        protein_id: String,
        #[arg(long = "top-k", default_value_t = 6)]
        top_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a planted-motif dataset as a cache.
    Synth {
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

const CACHE_FILE: &str = "cache.bin";
const MANIFEST_FILE: &str = "manifest.json";
const CONFIG_FILE: &str = "config.toml";
const CHECKPOINT_FILE: &str = "checkpoint.bin";

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(data)?;
    fs::write(path, text + "\n").map_err(|e| data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

fn save_cache(dir: &Path, cfg: &RunConfig, samples: &[crate::model::InteractionSample], manifest: &Manifest) -> Result<(), CliError> {
    create_dir(dir)?;
    let path = dir.join(CACHE_FILE);
    let f = fs::File::create(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    write_cache(BufWriter::new(f), &cfg.preprocess_hash(), samples).map_err(data)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()).map_err(data)
}

fn cache_path(p: &Path) -> PathBuf {
    if p.is_dir() { p.join(CACHE_FILE) } else { p.to_path_buf() }
}

/// A trained run: its directory holds the checkpoint and the config it used.
struct Run {
    cfg: RunConfig,
    model: Classifier,
    store: ParamStore<f32>,
}

fn load_run(p: &Path) -> Result<Run, CliError> {
    let (dir, ckpt) = if p.is_dir() { (p.to_path_buf(), p.join(CHECKPOINT_FILE)) } else { (p.parent().unwrap_or(Path::new(".")).to_path_buf(), p.to_path_buf()) };
    if !ckpt.exists() {
        return Err(data(format!("checkpoint {} does not exist", ckpt.display())));
    }
    let cfg = load_config(Some(&dir.join(CONFIG_FILE)), None)?;
    let f = fs::File::open(&ckpt).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let loaded: ParamStore<f32> = read_checkpoint(BufReader::new(f)).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let (model, mut store) = Classifier::new::<f32>(&cfg.model, cfg.train.seed).map_err(data)?;
    store.load_from(&loaded).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    Ok(Run { cfg, model, store })
}

fn load_samples(cache: &Path, cfg: &RunConfig) -> Result<Vec<crate::model::InteractionSample>, CliError> {
    load_cache(&cache_path(cache), cfg).map_err(data)
}

fn print_epoch(r: &EpochRecord) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    println!(
        "{:>5}  {:>10.5}  {:>10}  {:>7}  {:>7}{}",
        r.epoch,
        r.train_loss,
        fmt(r.val_loss),
        fmt(r.val_metrics.as_ref().map(|m| m.auc)),
        fmt(r.val_metrics.as_ref().map(|m| m.f1)),
        if r.improved { "  *" } else { "" }
    );
}

pub fn cmd_preprocess(csv: &Path, cfg: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let (samples, manifest) = preprocess(csv, cfg).map_err(data)?;
    save_cache(out, cfg, &samples, &manifest)?;
    for d in &manifest.dropped {
        eprintln!("dropped row {}: {}", d.row, d.reason);
    }
    println!("{} of {} rows cached in {}", samples.len(), manifest.rows, out.display());
    if manifest.drop_fraction() > cfg.preprocess.max_drop_fraction {
        return Err(data(format!(
            "{} of {} rows dropped, above the allowed fraction {}",
            manifest.dropped.len(),
            manifest.rows,
            cfg.preprocess.max_drop_fraction
        )));
    }
    Ok(manifest)
}

pub fn cmd_train(cache: &Path, cfg: &RunConfig, out: &Path) -> Result<Vec<EpochRecord>, CliError> {
    let samples = load_samples(cache, cfg)?;
    let (model, mut store) = Classifier::new::<f32>(&cfg.model, cfg.train.seed).map_err(data)?;
    println!("{:>5}  {:>10}  {:>10}  {:>7}  {:>7}", "epoch", "train_loss", "val_loss", "val_auc", "val_f1");
    let outcome = train(&model, &mut store, &samples, &cfg.train, print_epoch).map_err(|e| match e {
        TrainError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        other => data(other),
    })?;
    create_dir(out)?;
    let path = out.join(CHECKPOINT_FILE);
    let f = fs::File::create(&path).map_err(data)?;
    write_checkpoint(&outcome.best, BufWriter::new(f)).map_err(data)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml()).map_err(data)?;
    write_json(&out.join("history.json"), &json!({ "best_epoch": outcome.best_epoch, "epochs": outcome.history }))?;
    write_json(&out.join("split.json"), &outcome.split)?;
    println!("best epoch {}; checkpoint written to {}", outcome.best_epoch, path.display());
    Ok(outcome.history)
}

pub fn cmd_evaluate(checkpoint: &Path, cache: &Path, split: SplitName, out: Option<&Path>) -> Result<crate::model::Metrics, CliError> {
    let run = load_run(checkpoint)?;
    let samples = load_samples(cache, &run.cfg)?;
    let idx = split_indices(samples.len(), run.cfg.train.seed);
    let chosen: Vec<_> = idx.get(split).iter().map(|&i| &samples[i]).collect();
    if chosen.is_empty() {
        return Err(data(format!("split {split:?} is empty")));
    }
    let (_, metrics) = evaluate(&run.model, &run.store, &chosen, run.cfg.train.batch_size).map_err(data)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
    }
    Ok(metrics)
}

fn nearest<'a>(want: &str, have: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = have.map(|h| (strsim::jaro_winkler(want, h), h)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    scored.dedup_by(|a, b| a.1 == b.1);
    scored.into_iter().take(3).map(|(_, s)| s.to_string()).collect()
}

fn write_matrix(path: &Path, m: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(data)?;
    for row in m {
        w.write_record(row.iter().map(|v| format!("{v:.9}"))).map_err(data)?;
    }
    w.flush().map_err(data)
}

pub fn cmd_explain(
    checkpoint: &Path,
    cache: &Path,
    drug_id: &str,
    protein_id: &str,
    top_k: usize,
    out: Option<&Path>,
) -> Result<crate::model::Explanation, CliError> {
    let run = load_run(checkpoint)?;
    let samples = load_samples(cache, &run.cfg)?;
    let Some(sample) = samples.iter().find(|s| s.drug_id == drug_id && s.protein_id == protein_id) else {
        let drugs = nearest(drug_id, samples.iter().map(|s| s.drug_id.as_str()));
        let proteins = nearest(protein_id, samples.iter().map(|s| s.protein_id.as_str()));
        return Err(data(format!(
            "pair {drug_id}/{protein_id} is not in the cache; nearest drug ids: {}; nearest protein ids: {}",
            drugs.join(", "),
            proteins.join(", ")
        )));
    };
    let pred = run.model.predict(&run.store, &[sample], 1).map_err(data)?.remove(0);
    let e = explain(sample, &pred, top_k);
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("explain.json"), &e)?;
        write_matrix(&dir.join("pocket_stage.csv"), &pred.map.pocket_stage)?;
        write_matrix(&dir.join("fragment_stage.csv"), &pred.map.fragment_stage)?;
    }
    Ok(e)
}

pub fn cmd_synth(samples: usize, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let syn = SyntheticConfig { n_samples: samples, seed: cfg.train.seed, ..Default::default() };
    let set = generate(&syn, cfg).map_err(data)?;
    let manifest = Manifest {
        cache_version: CACHE_VERSION,
        config_hash: cfg.preprocess_hash(),
        input_csv: "synthetic".into(),
        input_sha256: String::new(),
        seed: cfg.train.seed,
        rows: set.samples.len(),
        records: set
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| crate::dataset::RecordSummary {
                row: i + 1,
                drug_id: s.drug_id.clone(),
                protein_id: s.protein_id.clone(),
                label: s.label,
                fragments: s.fragments.len(),
                pockets: s.pockets.len(),
            })
            .collect(),
        dropped: vec![],
    };
    save_cache(out, cfg, &set.samples, &manifest)?;
    let mut w = BufWriter::new(fs::File::create(out.join("molecules.csv")).map_err(data)?);
    writeln!(w, "drug_id,smiles,label").map_err(data)?;
    for (s, smi) in set.samples.iter().zip(&set.smiles) {
        writeln!(w, "{},{},{}", s.drug_id, smi, s.label).map_err(data)?;
    }
    w.flush().map_err(data)?;
    println!("{} synthetic samples written to {}", set.samples.len(), out.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Preprocess { csv, common } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            cmd_preprocess(&csv, &cfg, &common.out).map(drop)
        }
        Command::Train { cache, common } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            cmd_train(&cache, &cfg, &common.out).map(drop)
        }
        Command::Evaluate { checkpoint, cache, split, out } => {
            let m = cmd_evaluate(&checkpoint, &cache, split, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&m).map_err(data)?);
            Ok(())
        }
        Command::Explain { checkpoint, cache, drug_id, protein_id, top_k, out } => {
            let e = cmd_explain(&checkpoint, &cache, &drug_id, &protein_id, top_k, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&e).map_err(data)?);
            Ok(())
        }
        Command::Synth { samples, common } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            cmd_synth(samples, &cfg, &common.out)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
