//! CSV ingestion, preprocessing into samples, and the binary sample cache.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chemio::{parse_pdb, parse_smiles, ProteinStructure};
use crate::config::RunConfig;
use crate::fragmenter::BricsRules;
use crate::model::InteractionSample;
use crate::pipeline::build_sample;

pub const CACHE_MAGIC: &[u8; 4] = b"FXSC";
pub const CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub smiles: String,
    pub pdb_path: String,
    pub label: u8,
    pub drug_id: String,
    pub protein_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    /// 1-based data row, not counting the header.
    pub row: usize,
    pub drug_id: Option<String>,
    pub protein_id: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub row: usize,
    pub drug_id: String,
    pub protein_id: String,
    pub label: u8,
    pub fragments: usize,
    pub pockets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub cache_version: u32,
    pub config_hash: String,
    pub input_csv: String,
    pub input_sha256: String,
    pub seed: u64,
    pub rows: usize,
    pub records: Vec<RecordSummary>,
    pub dropped: Vec<Dropped>,
}

impl Manifest {
    pub fn drop_fraction(&self) -> f64 {
        if self.rows == 0 { 0.0 } else { self.dropped.len() as f64 / self.rows as f64 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV header must be smiles,pdb_path,label,drug_id,protein_id; got {0}")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("not a sample cache (bad magic)")]
    Magic,
    #[error("cache version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("cache was built with config hash {cache}, current config hashes to {config}")]
    ConfigMismatch { cache: String, config: String },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

const HEADER: [&str; 5] = ["smiles", "pdb_path", "label", "drug_id", "protein_id"];

/// Reads records; rows that fail to parse come back as drops.
pub fn read_records(text: &str) -> Result<(Vec<(usize, DatasetRecord)>, Vec<Dropped>), DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(DatasetError::Header(header.join(",")));
    }
    let mut ok = Vec::new();
    let mut dropped = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let drop = |reason: String, rec: Option<&csv::StringRecord>| Dropped {
            row: row_no,
            drug_id: rec.and_then(|r| r.get(3)).map(str::to_owned),
            protein_id: rec.and_then(|r| r.get(4)).map(str::to_owned),
            reason,
        };
        let rec = match row {
            Ok(r) => r,
            Err(e) => {
                dropped.push(drop(format!("malformed row: {e}"), None));
                continue;
            }
        };
        if rec.len() != HEADER.len() {
            dropped.push(drop(format!("expected {} fields, found {}", HEADER.len(), rec.len()), Some(&rec)));
            continue;
        }
        let label = match &rec[2] {
            "0" => 0,
            "1" => 1,
            other => {
                dropped.push(drop(format!("label {other:?} is not 0 or 1"), Some(&rec)));
                continue;
            }
        };
        ok.push((
            row_no,
            DatasetRecord {
                smiles: rec[0].to_owned(),
                pdb_path: rec[1].to_owned(),
                label,
                drug_id: rec[3].to_owned(),
                protein_id: rec[4].to_owned(),
            },
        ));
    }
    Ok((ok, dropped))
}

fn thread_count() -> usize {
    std::env::var("FRAGX_THREADS").ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0).unwrap_or(0)
}

/// Parses, fragments, extracts pockets and featurizes every row of the CSV.
/// Relative PDB paths resolve against the CSV's directory. Output order
/// follows input row order regardless of thread count.
pub fn preprocess(csv_path: &Path, cfg: &RunConfig) -> Result<(Vec<InteractionSample>, Manifest), DatasetError> {
    let bytes = std::fs::read(csv_path).map_err(io_err(csv_path))?;
    let text = String::from_utf8_lossy(&bytes);
    let (records, mut dropped) = read_records(&text)?;
    let base = csv_path.parent().unwrap_or(Path::new("."));
    let rows = records.len() + dropped.len();

    let mut paths: Vec<&str> = records.iter().map(|(_, r)| r.pdb_path.as_str()).collect();
    paths.sort_unstable();
    paths.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| DatasetError::Threads(e.to_string()))?;
    let rules = BricsRules::default();

    let (proteins, results) = pool.install(|| {
        let proteins: BTreeMap<&str, Result<ProteinStructure, String>> = paths
            .par_iter()
            .map(|&p| {
                let full = base.join(p);
                let parsed = std::fs::read_to_string(&full)
                    .map_err(|e| format!("cannot read {}: {e}", full.display()))
                    .and_then(|t| parse_pdb(&t).map_err(|e| format!("{}: {e}", full.display())));
                (p, parsed)
            })
            .collect();
        let results: Vec<Result<InteractionSample, String>> = records
            .par_iter()
            .map(|(_, r)| {
                let protein = proteins[r.pdb_path.as_str()].as_ref().map_err(Clone::clone)?;
                let mol = parse_smiles(&r.smiles).map_err(|e| format!("SMILES {:?}: {e}", r.smiles))?;
                build_sample(&r.drug_id, &r.protein_id, r.label, &mol, protein, &rules, cfg).map_err(|e| e.to_string())
            })
            .collect();
        (proteins, results)
    });
    drop(proteins);

    let mut samples = Vec::new();
    let mut summaries = Vec::new();
    for ((row, r), res) in records.iter().zip(results) {
        match res {
            Ok(s) => {
                summaries.push(RecordSummary {
                    row: *row,
                    drug_id: s.drug_id.clone(),
                    protein_id: s.protein_id.clone(),
                    label: s.label,
                    fragments: s.fragments.len(),
                    pockets: s.pockets.len(),
                });
                samples.push(s);
            }
            Err(reason) => dropped.push(Dropped {
                row: *row,
                drug_id: Some(r.drug_id.clone()),
                protein_id: Some(r.protein_id.clone()),
                reason,
            }),
        }
    }
    dropped.sort_by_key(|d| d.row);
    let manifest = Manifest {
        cache_version: CACHE_VERSION,
        config_hash: cfg.preprocess_hash(),
        input_csv: csv_path.display().to_string(),
        input_sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        seed: cfg.train.seed,
        rows,
        records: summaries,
        dropped,
    };
    Ok((samples, manifest))
}

/// `FXSC`, version (u32 LE), hash length (u32 LE), hash bytes, then the
/// bincode-encoded sample list.
pub fn write_cache(mut w: impl Write, config_hash: &str, samples: &[InteractionSample]) -> Result<(), DatasetError> {
    let io = |e| DatasetError::Io { path: PathBuf::from("<cache>"), source: e };
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(config_hash.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(config_hash.as_bytes()).map_err(io)?;
    bincode::serialize_into(&mut w, samples).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    w.flush().map_err(io)
}

pub fn read_cache(mut r: impl Read) -> Result<(String, Vec<InteractionSample>), DatasetError> {
    let io = |e| DatasetError::Io { path: PathBuf::from("<cache>"), source: e };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| DatasetError::Magic)?;
    if &magic != CACHE_MAGIC {
        return Err(DatasetError::Magic);
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let found = u32::from_le_bytes(word);
    if found != CACHE_VERSION {
        return Err(DatasetError::Version { found, expected: CACHE_VERSION });
    }
    r.read_exact(&mut word).map_err(io)?;
    let n = u32::from_le_bytes(word) as usize;
    if n > 1024 {
        return Err(DatasetError::Corrupt(format!("hash length {n}")));
    }
    let mut hash = vec![0u8; n];
    r.read_exact(&mut hash).map_err(io)?;
    let hash = String::from_utf8(hash).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    let samples = bincode::deserialize_from(r).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    Ok((hash, samples))
}

/// Loads a cache and checks it was built with `cfg`'s preprocessing sections.
pub fn load_cache(path: &Path, cfg: &RunConfig) -> Result<Vec<InteractionSample>, DatasetError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let (hash, samples) = read_cache(std::io::BufReader::new(f))?;
    let config = cfg.preprocess_hash();
    if hash != config {
        return Err(DatasetError::ConfigMismatch { cache: hash, config });
    }
    Ok(samples)
}
