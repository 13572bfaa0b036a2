//! The interaction classifier: two graph encoders, a learned latent array,
//! and three attention stages (latents ← pockets, latents ← latents,
//! latents ← fragments) followed by a mean-pool, linear, sigmoid head.

mod explain;
mod metrics;
pub mod synthetic;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Real, Tape, TensorError, Var};
use crate::featurize::{GraphSample, FEATURE_DIM};
use crate::layers::{average_heads, Bound, DropCtx, Encoder, GraphBatch, Linear, TransformerBlock};
use crate::pocket::PocketBox;

pub use explain::{explain, Explanation, FragmentEntry, PocketEntry};
pub use metrics::{auc, compute_metrics, Metrics, MetricsError};
pub use train::{
    bce, evaluate, split_indices, train, train_step, EpochRecord, Split, SplitName, TrainConfig, TrainError, TrainOutcome,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub gnn_hidden: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub hops: usize,
    pub latent: usize,
    pub blocks_per_stage: usize,
    pub ffn_mult: usize,
    pub dropout: f64,
    pub gat_slope: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            gnn_hidden: 64,
            embed_dim: 64,
            heads: 4,
            hops: 2,
            latent: 8,
            blocks_per_stage: 1,
            ffn_mult: 4,
            dropout: 0.1,
            gat_slope: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.gnn_hidden == 0 || self.embed_dim == 0 || self.latent == 0 || self.ffn_mult == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!("embed_dim {} is not divisible by heads {}", self.embed_dim, self.heads));
        }
        if self.hops < 1 {
            return bad("hops must be at least 1".into());
        }
        if self.blocks_per_stage < 1 {
            return bad("blocks_per_stage must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("sample {drug_id}/{protein_id} has {fragments} fragments and {pockets} pockets; both must be at least 1")]
    EmptySample { drug_id: String, protein_id: String, fragments: usize, pockets: usize },
    #[error("no samples")]
    NoSamples,
}

/// One labeled drug–protein pair, featurized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSample {
    pub drug_id: String,
    pub protein_id: String,
    pub label: u8,
    pub fragments: Vec<GraphSample>,
    /// Parent-molecule atom indices of each fragment.
    pub fragment_atoms: Vec<Vec<usize>>,
    pub pockets: Vec<GraphSample>,
    pub pocket_boxes: Vec<PocketBox>,
}

impl InteractionSample {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.fragments.is_empty() || self.pockets.is_empty() {
            return Err(ModelError::EmptySample {
                drug_id: self.drug_id.clone(),
                protein_id: self.protein_id.clone(),
                fragments: self.fragments.len(),
                pockets: self.pockets.len(),
            });
        }
        Ok(())
    }
}

/// Attention of the latent rows over pockets and fragments, averaged over
/// heads, from the last block of each cross-attention stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    /// `L × P`
    pub pocket_stage: Vec<Vec<f64>>,
    /// `L × F`
    pub fragment_stage: Vec<Vec<f64>>,
    pub pocket_scores: Vec<f64>,
    pub fragment_scores: Vec<f64>,
}

/// Column means of a row-stochastic matrix, renormalized to sum to 1.
pub fn column_scores(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.first().map_or(0, Vec::len);
    let mut s: Vec<f64> = (0..n).map(|j| m.iter().map(|r| r[j]).sum::<f64>() / m.len() as f64).collect();
    let total: f64 = s.iter().sum();
    if total > 0.0 {
        s.iter_mut().for_each(|v| *v /= total);
    }
    s
}

impl AttentionMap {
    fn from_heads<T: Real>(pocket: &[Var<'_, T>], n_pockets: usize, fragment: &[Var<'_, T>], n_fragments: usize) -> Self {
        let trim = |m: Vec<Vec<f64>>, n: usize| m.into_iter().map(|r| r[..n].to_vec()).collect::<Vec<_>>();
        let pocket_stage = trim(average_heads(pocket), n_pockets);
        let fragment_stage = trim(average_heads(fragment), n_fragments);
        Self {
            pocket_scores: column_scores(&pocket_stage),
            fragment_scores: column_scores(&fragment_stage),
            pocket_stage,
            fragment_stage,
        }
    }

    /// Largest deviation of any stage row sum or score-vector sum from 1.
    pub fn normalization_error(&self) -> f64 {
        let rows = self.pocket_stage.iter().chain(&self.fragment_stage).map(|r| r.iter().sum::<f64>());
        let scores = [self.pocket_scores.iter().sum::<f64>(), self.fragment_scores.iter().sum::<f64>()];
        rows.chain(scores).map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Classifier {
    pub cfg: ModelConfig,
    pub drug: Encoder,
    pub protein: Encoder,
    pub latent: ParamId,
    pub pocket_stage: Vec<TransformerBlock>,
    pub latent_stage: Vec<TransformerBlock>,
    pub fragment_stage: Vec<TransformerBlock>,
    pub head: Linear,
}

pub struct BatchOutput<'t, T: Real> {
    /// `B × 1` pre-sigmoid scores.
    pub logits: Var<'t, T>,
    pub maps: Vec<AttentionMap>,
    /// Per sample, the largest weight any head gave a padded key.
    pub masked_max: Vec<f64>,
}

fn padded_max<T: Real>(heads: &[Var<'_, T>], valid: usize) -> f64 {
    let mut worst = 0.0f64;
    for h in heads {
        let w = h.value();
        let (m, n) = w.dims2().expect("attention weights are 2-D");
        for i in 0..m {
            for j in valid..n {
                worst = worst.max(w.at2(i, j).to_f64_lossy());
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub logit: f64,
    pub map: AttentionMap,
}

impl Classifier {
    /// Builds the model and its parameters, initialized from `seed`.
    pub fn new<T: Real>(cfg: &ModelConfig, seed: u64) -> Result<(Self, ParamStore<T>), ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (h, d) = (cfg.gnn_hidden, cfg.embed_dim);
        let drug = Encoder::new(&mut store, "drug", FEATURE_DIM, h, d, cfg.hops, cfg.gat_slope, &mut rng)?;
        let protein = Encoder::new(&mut store, "protein", FEATURE_DIM, h, d, cfg.hops, cfg.gat_slope, &mut rng)?;
        let latent = store.add_glorot("latent", cfg.latent, d, &mut rng)?;
        let mut site = 0;
        let mut stage = |store: &mut ParamStore<T>, name: &str, rng: &mut ChaCha8Rng| {
            (0..cfg.blocks_per_stage)
                .map(|i| {
                    site += 1;
                    TransformerBlock::new(store, &format!("{name}{i}"), d, cfg.heads, cfg.ffn_mult, site, rng)
                })
                .collect::<Result<Vec<_>, _>>()
        };
        let pocket_stage = stage(&mut store, "stage1.block", &mut rng)?;
        let latent_stage = stage(&mut store, "stage2.block", &mut rng)?;
        let fragment_stage = stage(&mut store, "stage3.block", &mut rng)?;
        let head = Linear::new(&mut store, "head", d, 1, &mut rng)?;
        let model = Self { cfg: cfg.clone(), drug, protein, latent, pocket_stage, latent_stage, fragment_stage, head };
        Ok((model, store))
    }

    /// Forward pass over a batch. Fragments and pockets are padded to the
    /// batch maximum and the padding is masked out of every attention.
    pub fn forward_batch<'t, T: Real>(
        &self,
        tape: &'t Tape<T>,
        p: &Bound<'t, T>,
        samples: &[&InteractionSample],
        drop: &DropCtx,
    ) -> Result<BatchOutput<'t, T>, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::NoSamples);
        }
        for s in samples {
            s.validate()?;
        }
        let frag_graphs: Vec<&GraphSample> = samples.iter().flat_map(|s| &s.fragments).collect();
        let pocket_graphs: Vec<&GraphSample> = samples.iter().flat_map(|s| &s.pockets).collect();
        let frag_emb = self.drug.forward(tape, p, &GraphBatch::from_samples(&frag_graphs)?)?.graphs;
        let pocket_emb = self.protein.forward(tape, p, &GraphBatch::from_samples(&pocket_graphs)?)?.graphs;
        let f_max = samples.iter().map(|s| s.fragments.len()).max().unwrap();
        let p_max = samples.iter().map(|s| s.pockets.len()).max().unwrap();

        let padded = |emb: Var<'t, T>, offset: usize, n: usize, max: usize| -> Result<(Var<'t, T>, Vec<bool>), TensorError> {
            let idx: Vec<usize> = (0..max).map(|j| offset + if j < n { j } else { 0 }).collect();
            Ok((emb.gather_rows(idx.into())?, (0..max).map(|j| j < n).collect()))
        };

        let (mut f_off, mut p_off) = (0, 0);
        let mut logits = Vec::with_capacity(samples.len());
        let mut maps = Vec::with_capacity(samples.len());
        let mut masked_max = Vec::with_capacity(samples.len());
        for (si, s) in samples.iter().enumerate() {
            let (nf, np) = (s.fragments.len(), s.pockets.len());
            let (pk, p_valid) = padded(pocket_emb, p_off, np, p_max)?;
            let (fk, f_valid) = padded(frag_emb, f_off, nf, f_max)?;
            f_off += nf;
            p_off += np;
            let drop = DropCtx { stream: si as u64, ..*drop };

            let mut x = p.get(self.latent);
            let mut pocket_weights = Vec::new();
            for block in &self.pocket_stage {
                let o = block.forward(p, x, Some((pk, Some(&p_valid))), &drop)?;
                x = o.out;
                pocket_weights = o.head_weights;
            }
            for block in &self.latent_stage {
                x = block.forward(p, x, None, &drop)?.out;
            }
            let mut fragment_weights = Vec::new();
            for block in &self.fragment_stage {
                let o = block.forward(p, x, Some((fk, Some(&f_valid))), &drop)?;
                x = o.out;
                fragment_weights = o.head_weights;
            }
            logits.push(self.head.forward(p, x.mean(0)?)?);
            masked_max.push(padded_max(&pocket_weights, np).max(padded_max(&fragment_weights, nf)));
            maps.push(AttentionMap::from_heads(&pocket_weights, np, &fragment_weights, nf));
        }
        let logits = if logits.len() == 1 { logits[0] } else { tape.concat(&logits, 0)? };
        Ok(BatchOutput { logits, maps, masked_max })
    }

    /// Inference in batches of `batch_size`, without dropout.
    pub fn predict<T: Real>(
        &self,
        store: &ParamStore<T>,
        samples: &[&InteractionSample],
        batch_size: usize,
    ) -> Result<Vec<Prediction>, ModelError> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(batch_size.max(1)) {
            let tape = Tape::new();
            let p = Bound::new(&tape, store);
            let o = self.forward_batch(&tape, &p, chunk, &DropCtx::eval())?;
            let logits = o.logits.value();
            let probs = o.logits.sigmoid().value();
            for ((z, prob), map) in logits.data().iter().zip(probs.data()).zip(o.maps) {
                out.push(Prediction { probability: prob.to_f64_lossy(), logit: z.to_f64_lossy(), map });
            }
        }
        Ok(out)
    }
}
