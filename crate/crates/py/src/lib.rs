//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists built from the core types' JSON form.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use fragxsite::autodiff::{read_checkpoint, write_checkpoint, ParamStore};
use fragxsite::chemio::{parse_pdb, parse_smiles, to_smiles, MolGraph};
use fragxsite::config::RunConfig;
use fragxsite::dataset::{load_cache, preprocess, write_cache};
use fragxsite::fragmenter::{find_cleavable_bonds, fragment_molecule, BricsRules, FragmentConfig};
use fragxsite::model::synthetic::{generate, SyntheticConfig};
use fragxsite::model::{evaluate, explain, split_indices, train, Classifier, InteractionSample, SplitName, TrainError};
use fragxsite::pocket::find_pockets as core_find_pockets;
use pyo3::exceptions::{PyIOError, PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::json;

const CHECKPOINT_FILE: &str = "checkpoint.bin";
const CONFIG_FILE: &str = "config.toml";

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(format!("{}: {e}", path.display()))
}

fn to_py<T: Serialize + ?Sized>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn molecule(smiles: &str) -> PyResult<MolGraph> {
    parse_smiles(smiles).map_err(|e| value_err(format!("SMILES {smiles:?}: {e}")))
}

/// Run configuration, built from TOML text. Missing sections take defaults.
#[pyclass(name = "Config", module = "fragxsite_py")]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => RunConfig::from_toml(t).map_err(value_err)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        Self::new(Some(&text))
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    /// Hash of the sections that affect preprocessing.
    fn preprocess_hash(&self) -> String {
        self.inner.preprocess_hash()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.train.seed
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", &self.inner.preprocess_hash()[..12])
    }
}

/// Preprocessed drug-protein pairs.
#[pyclass(name = "Dataset", module = "fragxsite_py")]
struct PyDataset {
    samples: Vec<InteractionSample>,
}

#[pymethods]
impl PyDataset {
    /// Reads a `smiles,pdb_path,label,drug_id,protein_id` CSV. Returns the
    /// dataset and the manifest, which lists dropped rows.
    #[staticmethod]
    fn preprocess(py: Python<'_>, csv_path: PathBuf, config: &PyConfig) -> PyResult<(Self, Py<PyAny>)> {
        let (samples, manifest) = preprocess(&csv_path, &config.inner).map_err(value_err)?;
        Ok((Self { samples }, to_py(py, &manifest)?))
    }

    /// Synthetic pairs where positives carry a sulfonamide linker.
    #[staticmethod]
    #[pyo3(signature = (config, n_samples=500, n_proteins=20, seed=0))]
    fn synthetic(config: &PyConfig, n_samples: usize, n_proteins: usize, seed: u64) -> PyResult<Self> {
        let cfg = SyntheticConfig { n_samples, n_proteins, seed, ..Default::default() };
        let set = generate(&cfg, &config.inner).map_err(value_err)?;
        Ok(Self { samples: set.samples })
    }

    #[staticmethod]
    fn load(path: PathBuf, config: &PyConfig) -> PyResult<Self> {
        Ok(Self { samples: load_cache(&path, &config.inner).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf, config: &PyConfig) -> PyResult<()> {
        let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        write_cache(BufWriter::new(f), &config.inner.preprocess_hash(), &self.samples).map_err(value_err)
    }

    /// `(drug_id, protein_id, label)` per sample.
    fn pairs(&self) -> Vec<(String, String, u8)> {
        self.samples.iter().map(|s| (s.drug_id.clone(), s.protein_id.clone(), s.label)).collect()
    }

    /// Fragment and pocket counts per sample.
    fn sizes(&self) -> Vec<(usize, usize)> {
        self.samples.iter().map(|s| (s.fragments.len(), s.pockets.len())).collect()
    }

    fn __len__(&self) -> usize {
        self.samples.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={})", self.samples.len())
    }
}

impl PyDataset {
    fn select(&self, split: Option<&str>, seed: u64) -> PyResult<Vec<&InteractionSample>> {
        match split {
            None => Ok(self.samples.iter().collect()),
            Some(s) => {
                let name: SplitName = s.parse().map_err(value_err)?;
                Ok(split_indices(self.samples.len(), seed).get(name).iter().map(|&i| &self.samples[i]).collect())
            }
        }
    }

    fn find(&self, drug_id: &str, protein_id: &str) -> PyResult<&InteractionSample> {
        self.samples
            .iter()
            .find(|s| s.drug_id == drug_id && s.protein_id == protein_id)
            .ok_or_else(|| PyKeyError::new_err(format!("no pair ({drug_id}, {protein_id})")))
    }
}

/// Classifier with its parameters, in single precision.
#[pyclass(name = "Model", module = "fragxsite_py")]
struct PyModel {
    cfg: RunConfig,
    model: Classifier,
    store: ParamStore<f32>,
}

#[pymethods]
impl PyModel {
    /// Fresh model initialized from `config`'s seed.
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        let cfg = config.inner.clone();
        let (model, store) = Classifier::new::<f32>(&cfg.model, cfg.train.seed).map_err(value_err)?;
        Ok(Self { cfg, model, store })
    }

    /// Reads `checkpoint.bin` and `config.toml` from a run directory.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let config = PyConfig::from_file(dir.join(CONFIG_FILE))?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        let f = fs::File::open(&ckpt).map_err(|e| io_err(&ckpt, e))?;
        let loaded: ParamStore<f32> = read_checkpoint(BufReader::new(f)).map_err(|e| io_err(&ckpt, e))?;
        let mut m = Self::new(&config)?;
        m.store.load_from(&loaded).map_err(|e| io_err(&ckpt, e))?;
        Ok(m)
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let ckpt = dir.join(CHECKPOINT_FILE);
        let f = fs::File::create(&ckpt).map_err(|e| io_err(&ckpt, e))?;
        write_checkpoint(&self.store, BufWriter::new(f)).map_err(|e| io_err(&ckpt, e))?;
        let cfg = dir.join(CONFIG_FILE);
        fs::write(&cfg, self.cfg.to_toml()).map_err(|e| io_err(&cfg, e))
    }

    /// Trains with early stopping and keeps the best parameters. Returns
    /// `{"best_epoch", "epochs", "split"}`.
    fn train(&mut self, py: Python<'_>, dataset: &PyDataset) -> PyResult<Py<PyAny>> {
        let outcome = train(&self.model, &mut self.store, &dataset.samples, &self.cfg.train, |_| {}).map_err(|e| match e {
            TrainError::NonFinite { .. } => PyRuntimeError::new_err(e.to_string()),
            other => value_err(other),
        })?;
        self.store = outcome.best;
        to_py(py, &json!({ "best_epoch": outcome.best_epoch, "epochs": outcome.history, "split": outcome.split }))
    }

    /// One dict per sample with probability, logit and attention scores.
    #[pyo3(signature = (dataset, split=None))]
    fn predict(&self, py: Python<'_>, dataset: &PyDataset, split: Option<&str>) -> PyResult<Py<PyAny>> {
        let chosen = dataset.select(split, self.cfg.train.seed)?;
        let preds = self.model.predict(&self.store, &chosen, self.cfg.train.batch_size).map_err(value_err)?;
        let rows: Vec<_> = chosen
            .iter()
            .zip(&preds)
            .map(|(s, p)| {
                json!({
                    "drug_id": s.drug_id,
                    "protein_id": s.protein_id,
                    "label": s.label,
                    "probability": p.probability,
                    "logit": p.logit,
                    "pocket_scores": p.map.pocket_scores,
                    "fragment_scores": p.map.fragment_scores,
                })
            })
            .collect();
        to_py(py, &rows)
    }

    /// Classification metrics on the whole dataset or one named split.
    #[pyo3(signature = (dataset, split=None))]
    fn evaluate(&self, py: Python<'_>, dataset: &PyDataset, split: Option<&str>) -> PyResult<Py<PyAny>> {
        let chosen = dataset.select(split, self.cfg.train.seed)?;
        let (_, metrics) = evaluate(&self.model, &self.store, &chosen, self.cfg.train.batch_size).map_err(value_err)?;
        to_py(py, &metrics)
    }

    /// Top-ranked pockets and fragments for one pair, with the full maps.
    #[pyo3(signature = (dataset, drug_id, protein_id, top_k=5))]
    fn explain(&self, py: Python<'_>, dataset: &PyDataset, drug_id: &str, protein_id: &str, top_k: usize) -> PyResult<Py<PyAny>> {
        let sample = dataset.find(drug_id, protein_id)?;
        let pred = &self.model.predict(&self.store, &[sample], 1).map_err(value_err)?[0];
        let e = explain(sample, pred, top_k);
        to_py(py, &json!({ "explanation": e, "map": pred.map }))
    }

    fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }
}

/// BRICS bonds of a molecule with their environment labels.
#[pyfunction]
fn cleavable_bonds(py: Python<'_>, smiles: &str) -> PyResult<Py<PyAny>> {
    let mol = molecule(smiles)?;
    let rows: Vec<_> = find_cleavable_bonds(&mol, &BricsRules::default())
        .iter()
        .map(|c| json!({ "bond": c.bond, "atoms": [c.atoms.0, c.atoms.1], "rule": c.rule_label() }))
        .collect();
    to_py(py, &rows)
}

/// Overlapping fragments, each with its atoms, attachment points, blocks
/// and SMILES.
#[pyfunction]
#[pyo3(signature = (smiles, max_blocks=4, max_fragments=32))]
fn fragment(py: Python<'_>, smiles: &str, max_blocks: usize, max_fragments: usize) -> PyResult<Py<PyAny>> {
    let mol = molecule(smiles)?;
    let cfg = FragmentConfig { max_blocks, max_fragments };
    let frags = fragment_molecule(&mol, &BricsRules::default(), &cfg).map_err(value_err)?;
    let rows = frags
        .iter()
        .map(|f| {
            let sub = mol.induced(&f.atom_indices).map_err(value_err)?;
            Ok(json!({
                "atom_indices": f.atom_indices,
                "attachment_points": f.attachment_points,
                "blocks": f.blocks,
                "smiles": to_smiles(&sub),
            }))
        })
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &rows)
}

/// Pocket boxes detected in PDB text.
#[pyfunction]
#[pyo3(signature = (pdb_text, config=None))]
fn find_pockets(py: Python<'_>, pdb_text: &str, config: Option<&PyConfig>) -> PyResult<Py<PyAny>> {
    let protein = parse_pdb(pdb_text).map_err(value_err)?;
    let cfg = config.map(|c| c.inner.pocket.clone()).unwrap_or_default();
    let boxes = core_find_pockets(&protein, &cfg).map_err(value_err)?;
    to_py(py, &boxes)
}

#[pymodule]
pub fn fragxsite_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(cleavable_bonds, m)?)?;
    m.add_function(wrap_pyfunction!(fragment, m)?)?;
    m.add_function(wrap_pyfunction!(find_pockets, m)?)?;
    Ok(())
}
