#![allow(dead_code)]

use fragxsite::autodiff::gradcheck::check_params;
use fragxsite::autodiff::{ParamStore, TensorError};
use fragxsite::featurize::{GraphSample, FEATURE_DIM};
use fragxsite::layers::{Bound, DropCtx};
use fragxsite::model::{Classifier, InteractionSample, ModelConfig, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::random_graph;

pub fn small_config() -> ModelConfig {
    ModelConfig { gnn_hidden: 12, embed_dim: 8, heads: 2, hops: 2, latent: 4, ffn_mult: 2, ..Default::default() }
}

pub fn random_graph_sample(rng: &mut impl Rng, max_nodes: usize) -> GraphSample {
    let n = rng.gen_range(1..=max_nodes);
    let features = (0..n * FEATURE_DIM).map(|_| if rng.gen_bool(0.1) { 1.0 } else { 0.0 }).collect();
    GraphSample::new(n, features, random_graph(rng, n, 0.4)).unwrap()
}

pub fn random_sample(rng: &mut impl Rng, fragments: usize, pockets: usize) -> InteractionSample {
    let fragments: Vec<GraphSample> = (0..fragments).map(|_| random_graph_sample(rng, 6)).collect();
    InteractionSample {
        drug_id: format!("d{}", rng.gen::<u16>()),
        protein_id: format!("p{}", rng.gen::<u16>()),
        label: rng.gen_range(0..=1),
        fragment_atoms: (0..fragments.len()).map(|i| vec![i]).collect(),
        fragments,
        pockets: (0..pockets).map(|_| random_graph_sample(rng, 8)).collect(),
        pocket_boxes: vec![],
    }
}

pub fn random_samples(seed: u64, n: usize, max_fragments: usize, max_pockets: usize) -> Vec<InteractionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let f = rng.gen_range(1..=max_fragments);
            let p = rng.gen_range(1..=max_pockets);
            random_sample(&mut rng, f, p)
        })
        .collect()
}

fn tensor_err(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

/// Max relative gradient error of the full classifier, in f64, on one
/// sample with two fragments and two pockets.
pub fn gradcheck_full_model(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = random_sample(&mut rng, 2, 2);
    sample.label = 1;
    let cfg = ModelConfig { dropout: 0.0, ..small_config() };
    let (model, mut store) = Classifier::new::<f64>(&cfg, seed).unwrap();
    let report = check_params(&mut store, 1e-6, None, |tape, s: &ParamStore<f64>| {
        let p = Bound::new(tape, s);
        let out = model.forward_batch(tape, &p, &[&sample], &DropCtx::eval()).map_err(tensor_err)?;
        out.logits.bce_with_logits(&[1.0])
    })
    .unwrap();
    report.max_rel_error
}

/// Worst row-sum error and worst weight on a masked key over `n` random
/// samples run as padded batches of four.
pub fn attention_invariants(seed: u64, n: usize) -> (f64, f64) {
    let samples = random_samples(seed, n, 6, 4);
    let (model, store) = Classifier::new::<f32>(&small_config(), seed).unwrap();
    let (mut row_err, mut masked_max) = (0.0f64, 0.0f64);
    for chunk in samples.chunks(4) {
        let refs: Vec<&InteractionSample> = chunk.iter().collect();
        let tape = fragxsite::autodiff::Tape::new();
        let p = Bound::new(&tape, &store);
        let out = model.forward_batch(&tape, &p, &refs, &DropCtx::eval()).unwrap();
        for (map, &m) in out.maps.iter().zip(&out.masked_max) {
            row_err = row_err.max(map.normalization_error());
            masked_max = masked_max.max(m);
        }
    }
    (row_err, masked_max)
}
