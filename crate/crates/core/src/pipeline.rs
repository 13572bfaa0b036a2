//! From a parsed molecule and protein to a model-ready sample.

use crate::chemio::{MolGraph, ProteinStructure};
use crate::config::RunConfig;
use crate::featurize::{fragment_graph, pocket_graph, FeaturizeError, GraphSample};
use crate::fragmenter::{fragment_molecule, BricsRules, FragmentError};
use crate::model::InteractionSample;
use crate::pocket::{find_pockets, pocket_atoms, PocketBox, PocketError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Pocket(#[from] PocketError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("no pocket encloses any atom")]
    NoPockets,
}

/// Fragment graphs and their parent-atom indices.
pub fn drug_fragments(
    mol: &MolGraph,
    rules: &BricsRules,
    cfg: &RunConfig,
) -> Result<(Vec<GraphSample>, Vec<Vec<usize>>), SampleError> {
    if mol.num_atoms() == 0 {
        return Err(SampleError::EmptyMolecule);
    }
    let frags = fragment_molecule(mol, rules, &cfg.fragment)?;
    let graphs = frags.iter().map(|f| fragment_graph(mol, f)).collect::<Result<Vec<_>, _>>()?;
    Ok((graphs, frags.into_iter().map(|f| f.atom_indices).collect()))
}

/// Pocket graphs with their boxes. Boxes enclosing no atom are skipped.
pub fn protein_pockets(
    protein: &ProteinStructure,
    cfg: &RunConfig,
) -> Result<(Vec<GraphSample>, Vec<PocketBox>), SampleError> {
    let mut graphs = Vec::new();
    let mut boxes = Vec::new();
    for b in find_pockets(protein, &cfg.pocket)? {
        let atoms = pocket_atoms(protein, &b);
        if atoms.is_empty() {
            continue;
        }
        graphs.push(pocket_graph(&atoms, cfg.featurize.pocket_edge_threshold)?);
        boxes.push(b);
    }
    if graphs.is_empty() {
        return Err(SampleError::NoPockets);
    }
    Ok((graphs, boxes))
}

pub fn build_sample(
    drug_id: &str,
    protein_id: &str,
    label: u8,
    mol: &MolGraph,
    protein: &ProteinStructure,
    rules: &BricsRules,
    cfg: &RunConfig,
) -> Result<InteractionSample, SampleError> {
    let (fragments, fragment_atoms) = drug_fragments(mol, rules, cfg)?;
    let (pockets, pocket_boxes) = protein_pockets(protein, cfg)?;
    Ok(InteractionSample {
        drug_id: drug_id.into(),
        protein_id: protein_id.into(),
        label,
        fragments,
        fragment_atoms,
        pockets,
        pocket_boxes,
    })
}
