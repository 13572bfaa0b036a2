use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, Metrics, MetricsError};
use super::{Classifier, InteractionSample, ModelError, Prediction};
use crate::autodiff::{Adam, AdamConfig, ParamStore, Real, Tape, TensorError};
use crate::layers::{Bound, DropCtx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self { epochs: 100, batch_size: 32, patience: 10, seed: 0, lr: adam.lr, beta1: adam.beta1, beta2: adam.beta2, eps: adam.eps }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config("train.epochs and train.batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ModelError::Config("train.lr must be positive and betas in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => Err(format!("unknown split {s:?}; expected train, val or test")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn get(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

/// Seeded 80/10/10 partition. Validation and test take `floor(n / 10)`
/// each; the remainder goes to training.
pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = n / 10;
    let test = idx[..k].to_vec();
    let val = idx[k..2 * k].to_vec();
    let train = idx[2 * k..].to_vec();
    Split { train, val, test }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metrics: Option<Metrics>,
    /// Largest deviation from 1 of any attention row or score sum seen
    /// during validation.
    pub attention_max_error: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("dataset contains only label {0}; training needs both classes")]
    SingleClass(u8),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: u64 },
}

pub struct TrainOutcome<T: Real> {
    /// Parameters from the epoch with the best validation score.
    pub best: ParamStore<T>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub split: Split,
}

/// Mean binary cross-entropy, computed from logits.
pub fn bce(preds: &[Prediction], samples: &[&InteractionSample]) -> f64 {
    let total: f64 = preds
        .iter()
        .zip(samples)
        .map(|(p, s)| {
            let z = p.logit;
            z.max(0.0) - z * s.label as f64 + (-z.abs()).exp().ln_1p()
        })
        .sum();
    total / preds.len() as f64
}

/// Predictions and metrics over `samples`, in their given order.
pub fn evaluate<T: Real>(
    model: &Classifier,
    store: &ParamStore<T>,
    samples: &[&InteractionSample],
    batch_size: usize,
) -> Result<(Vec<Prediction>, Metrics), TrainError> {
    let preds = model.predict(store, samples, batch_size)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.label == 1).collect();
    let m = compute_metrics(&scores, &labels)?;
    Ok((preds, m))
}

/// One optimizer step on `batch`; returns the batch loss before the update.
pub fn train_step<T: Real>(
    model: &Classifier,
    store: &mut ParamStore<T>,
    adam: &mut Adam,
    batch: &[&InteractionSample],
    drop: &DropCtx,
) -> Result<f64, TrainError> {
    let tape = Tape::new();
    let loss = {
        let p = Bound::new(&tape, store);
        let out = model.forward_batch(&tape, &p, batch, drop)?;
        let targets: Vec<f64> = batch.iter().map(|s| s.label as f64).collect();
        let loss = out.logits.bce_with_logits(&targets)?;
        tape.backward(loss)?;
        loss.value().item().to_f64_lossy()
    };
    if !loss.is_finite() {
        return Ok(loss);
    }
    store.zero_grad();
    tape.accumulate_param_grads(store);
    adam.step(store);
    Ok(loss)
}

/// Trains on the 80% split with early stopping on validation AUC, ties
/// broken by lower validation loss. When the validation split has a single
/// class, only the loss is tracked.
pub fn train<T: Real>(
    model: &Classifier,
    store: &mut ParamStore<T>,
    samples: &[InteractionSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>, TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(ModelError::NoSamples.into());
    }
    if let Some(first) = samples.first() {
        if samples.iter().all(|s| s.label == first.label) {
            return Err(TrainError::SingleClass(first.label));
        }
    }
    for s in samples {
        s.validate()?;
    }
    let split = split_indices(samples.len(), cfg.seed);
    let val: Vec<&InteractionSample> = split.val.iter().map(|&i| &samples[i]).collect();
    let mut order = split.train.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut adam = Adam::new(cfg.adam());

    let mut best = store.clone();
    let mut best_epoch = 0;
    let mut best_score = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut stale = 0;
    let mut history = Vec::new();
    let mut step = 0u64;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&InteractionSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let drop = DropCtx { p: model.cfg.dropout, train: true, seed: cfg.seed, step, stream: 0 };
            let loss = train_step(model, store, &mut adam, &batch, &drop)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, step });
            }
            step += 1;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let train_loss = loss_sum / seen.max(1) as f64;

        let (val_loss, val_metrics, attention_max_error, score) = if val.is_empty() {
            (None, None, 0.0, (0.0, -train_loss))
        } else {
            let preds = model.predict(store, &val, cfg.batch_size)?;
            let loss = bce(&preds, &val);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, step });
            }
            let err = preds.iter().map(|p| p.map.normalization_error()).fold(0.0, f64::max);
            let scores: Vec<f64> = preds.iter().map(|p| p.probability).collect();
            let labels: Vec<bool> = val.iter().map(|s| s.label == 1).collect();
            match compute_metrics(&scores, &labels) {
                Ok(m) => {
                    let auc = m.auc;
                    (Some(loss), Some(m), err, (auc, -loss))
                }
                Err(MetricsError::OneClass(_)) => (Some(loss), None, err, (0.0, -loss)),
                Err(e) => return Err(e.into()),
            }
        };
        let improved = score > best_score;
        if improved {
            best_score = score;
            best_epoch = epoch;
            best = store.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        let rec = EpochRecord { epoch, train_loss, val_loss, val_metrics, attention_max_error, improved };
        on_epoch(&rec);
        history.push(rec);
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome { best, best_epoch, history, split })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_arithmetic() {
        let s = split_indices(1000, 7);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (800, 100, 100));
        let s = split_indices(15, 7);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (13, 1, 1));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..15).collect::<Vec<_>>());
    }
}
