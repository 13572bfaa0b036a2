use serde::{Deserialize, Serialize};

use super::{InteractionSample, Prediction};
use crate::pocket::PocketBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocketEntry {
    pub index: usize,
    #[serde(rename = "box")]
    pub pocket: Option<PocketBox>,
    pub score: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FragmentEntry {
    pub index: usize,
    pub atom_indices: Vec<usize>,
    pub score: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub drug_id: String,
    pub protein_id: String,
    pub probability: f64,
    pub pockets: Vec<PocketEntry>,
    pub fragments: Vec<FragmentEntry>,
}

/// Indices sorted by score descending, ties by index ascending.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Top `top_k` pockets and fragments by attention score. `top_k` larger
/// than what is available is truncated.
pub fn explain(sample: &InteractionSample, pred: &Prediction, top_k: usize) -> Explanation {
    let pockets = ranking(&pred.map.pocket_scores)
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(r, i)| PocketEntry {
            index: i,
            pocket: sample.pocket_boxes.get(i).cloned(),
            score: pred.map.pocket_scores[i],
            rank: r + 1,
        })
        .collect();
    let fragments = ranking(&pred.map.fragment_scores)
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(r, i)| FragmentEntry {
            index: i,
            atom_indices: sample.fragment_atoms.get(i).cloned().unwrap_or_default(),
            score: pred.map.fragment_scores[i],
            rank: r + 1,
        })
        .collect();
    Explanation {
        drug_id: sample.drug_id.clone(),
        protein_id: sample.protein_id.clone(),
        probability: pred.probability,
        pockets,
        fragments,
    }
}
