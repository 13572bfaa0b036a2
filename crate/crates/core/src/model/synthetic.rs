//! Planted-motif dataset. Drugs are chains of rings joined by cleavable
//! linkers; a sample is positive iff one linker is a sulfonamide, so the
//! label is carried by the sulfonyl group `S(=O)=O` that stays attached to
//! a ring block. Pockets are random atom clouds independent of the label.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InteractionSample;
use crate::chemio::{parse_smiles, BondOrder, Element, MolGraph, ProteinAtom};
use crate::config::RunConfig;
use crate::featurize::{pocket_graph, GraphSample};
use crate::fragmenter::BricsRules;
use crate::pipeline::{drug_fragments, SampleError};
use crate::pocket::PocketBox;

const INNER_RINGS: [&str; 3] = ["c1ccc(cc1)", "c1cncc(c1)", "C1CCC(CC1)"];
const END_RINGS: [&str; 3] = ["c1ccccc1", "c1ccncc1", "C1CCCCC1"];
const DECOYS: [&str; 6] = ["", "O", "C(=O)", "S", "C(=O)N", "NC(=O)"];
const MOTIFS: [&str; 2] = ["S(=O)(=O)N", "NS(=O)(=O)"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_proteins: usize,
    pub min_rings: usize,
    pub max_rings: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { n_samples: 500, n_proteins: 20, min_rings: 2, max_rings: 4, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSet {
    pub samples: Vec<InteractionSample>,
    pub smiles: Vec<String>,
    /// Per sample, per fragment: whether the fragment contains the motif.
    pub motif_fragments: Vec<Vec<bool>>,
}

/// Sulfur atoms carrying two double-bonded oxygens.
pub fn motif_atoms(mol: &MolGraph) -> Vec<usize> {
    (0..mol.num_atoms())
        .filter(|&i| mol.atoms()[i].element == Element::S)
        .filter(|&i| {
            let oxo = mol
                .neighbors(i)
                .iter()
                .filter(|&&(j, b)| mol.atoms()[j].element == Element::O && mol.bonds()[b].order == BondOrder::Double)
                .count();
            oxo >= 2
        })
        .collect()
}

fn drug_smiles(rng: &mut impl Rng, cfg: &SyntheticConfig, positive: bool) -> String {
    let n = rng.gen_range(cfg.min_rings.max(2)..=cfg.max_rings.max(cfg.min_rings.max(2)));
    let motif_at = positive.then(|| rng.gen_range(0..n - 1));
    let mut s = String::new();
    for i in 0..n {
        if i + 1 == n {
            s.push_str(END_RINGS.choose(rng).unwrap());
            break;
        }
        s.push_str(INNER_RINGS.choose(rng).unwrap());
        let linker = if motif_at == Some(i) { MOTIFS.choose(rng) } else { DECOYS.choose(rng) };
        s.push_str(linker.unwrap());
    }
    s
}

fn protein_cloud(rng: &mut impl Rng, tag: usize) -> Vec<ProteinAtom> {
    let n = rng.gen_range(6..=12);
    let elements = [Element::C, Element::C, Element::N, Element::O, Element::S];
    (0..n)
        .map(|i| ProteinAtom {
            name: format!("X{i}"),
            element: *elements.choose(rng).unwrap(),
            residue_name: "UNK".into(),
            residue_seq: (tag * 100 + i) as i32,
            chain_id: 'A',
            coords: [rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0)],
        })
        .collect()
}

fn cloud_box(atoms: &[ProteinAtom]) -> PocketBox {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in atoms {
        for k in 0..3 {
            lo[k] = lo[k].min(a.coords[k]);
            hi[k] = hi[k].max(a.coords[k]);
        }
    }
    PocketBox {
        atom_indices: (0..atoms.len()).collect(),
        centroid: std::array::from_fn(|k| 0.5 * (lo[k] + hi[k])),
        min_corner: lo,
        max_corner: hi,
        score: 0.0,
        cluster_size: 0,
    }
}

/// Balanced labels; every sample's drug is fragmented with `run.fragment`.
pub fn generate(cfg: &SyntheticConfig, run: &RunConfig) -> Result<SyntheticSet, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rules = BricsRules::default();
    let proteins: Vec<(Vec<GraphSample>, Vec<PocketBox>)> = (0..cfg.n_proteins.max(1))
        .map(|t| {
            let k = rng.gen_range(1..=2);
            let mut graphs = Vec::new();
            let mut boxes = Vec::new();
            for _ in 0..k {
                let cloud = protein_cloud(&mut rng, t);
                graphs.push(pocket_graph(&cloud, run.featurize.pocket_edge_threshold)?);
                boxes.push(cloud_box(&cloud));
            }
            Ok((graphs, boxes))
        })
        .collect::<Result<_, SampleError>>()?;

    let mut set = SyntheticSet { samples: Vec::new(), smiles: Vec::new(), motif_fragments: Vec::new() };
    for i in 0..cfg.n_samples {
        let positive = i % 2 == 0;
        let smiles = drug_smiles(&mut rng, cfg, positive);
        let mol = parse_smiles(&smiles).expect("generated SMILES parses");
        let (fragments, fragment_atoms) = drug_fragments(&mol, &rules, run)?;
        let motif = motif_atoms(&mol);
        debug_assert_eq!(!motif.is_empty(), positive);
        let flags = fragment_atoms.iter().map(|a| motif.iter().any(|m| a.binary_search(m).is_ok())).collect();
        let p = rng.gen_range(0..proteins.len());
        set.samples.push(InteractionSample {
            drug_id: format!("D{i:04}"),
            protein_id: format!("P{p:02}"),
            label: positive as u8,
            fragments,
            fragment_atoms,
            pockets: proteins[p].0.clone(),
            pocket_boxes: proteins[p].1.clone(),
        });
        set.smiles.push(smiles);
        set.motif_fragments.push(flags);
    }
    Ok(set)
}
