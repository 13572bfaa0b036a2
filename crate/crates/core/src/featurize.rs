//! Node features and edge lists for fragment and pocket graphs.
//!
//! Each node is a 74-wide vector:
//!
//! | block               | width | offset |
//! |---------------------|-------|--------|
//! | element one-hot     | 44    | 0      |
//! | degree 0..=10       | 11    | 44     |
//! | implicit valence 0..=6 | 7  | 55     |
//! | formal charge       | 1     | 62     |
//! | radical electrons   | 1     | 63     |
//! | hybridization       | 5     | 64     |
//! | aromatic            | 1     | 69     |
//! | attached H 0..=3    | 4     | 70     |
//!
//! Counts past the end of a one-hot block land in its top slot.

use serde::{Deserialize, Serialize};

use crate::chemio::{BondOrder, MolGraph, ProteinAtom, NUM_ELEMENT_SLOTS};
use crate::fragmenter::Fragment;

pub const FEATURE_DIM: usize = 74;

pub const DEGREE_OFFSET: usize = 44;
pub const VALENCE_OFFSET: usize = 55;
pub const CHARGE_OFFSET: usize = 62;
pub const RADICAL_OFFSET: usize = 63;
pub const HYBRID_OFFSET: usize = 64;
pub const AROMATIC_OFFSET: usize = 69;
pub const HCOUNT_OFFSET: usize = 70;

/// `(offset, width)` of every one-hot block.
pub const ONE_HOT_BLOCKS: [(usize, usize); 5] =
    [(0, NUM_ELEMENT_SLOTS), (DEGREE_OFFSET, 11), (VALENCE_OFFSET, 7), (HYBRID_OFFSET, 5), (HCOUNT_OFFSET, 4)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
}

impl Hybridization {
    pub fn slot(self) -> usize {
        self as usize
    }
}

pub type AtomFeatures = [f32; FEATURE_DIM];

fn one_hot(v: &mut AtomFeatures, offset: usize, width: usize, value: usize) {
    v[offset + value.min(width - 1)] = 1.0;
}

/// Hybridization from bond orders. Five or six neighbors (hydrogens
/// included) are hypervalent; a triple or two doubles is SP; one double or
/// aromaticity is SP2; otherwise SP3.
pub fn hybridization(g: &MolGraph, i: usize) -> Hybridization {
    let neighbors = g.neighbors(i).len() + g.implicit_hydrogens(i) as usize;
    let mut doubles = 0;
    let mut triple = false;
    for &(_, b) in g.neighbors(i) {
        match g.bonds()[b].order {
            BondOrder::Double => doubles += 1,
            BondOrder::Triple => triple = true,
            _ => {}
        }
    }
    match neighbors {
        n if n >= 6 => Hybridization::Sp3d2,
        5 => Hybridization::Sp3d,
        _ if triple || doubles >= 2 => Hybridization::Sp,
        _ if doubles == 1 || g.atoms()[i].aromatic => Hybridization::Sp2,
        _ => Hybridization::Sp3,
    }
}

/// Features of atom `i` in the context of the whole molecule `g`.
pub fn featurize_atom(g: &MolGraph, i: usize) -> AtomFeatures {
    let atom = &g.atoms()[i];
    let mut v = [0.0; FEATURE_DIM];
    v[atom.element.slot()] = 1.0;
    one_hot(&mut v, DEGREE_OFFSET, 11, g.heavy_degree(i));
    one_hot(&mut v, VALENCE_OFFSET, 7, g.valence_hydrogens(i) as usize);
    v[CHARGE_OFFSET] = atom.formal_charge as f32;
    v[RADICAL_OFFSET] = g.radical_electrons(i) as f32;
    v[HYBRID_OFFSET + hybridization(g, i).slot()] = 1.0;
    v[AROMATIC_OFFSET] = if atom.aromatic { 1.0 } else { 0.0 };
    one_hot(&mut v, HCOUNT_OFFSET, 4, g.total_hydrogens(i));
    v
}

/// Features of a pocket atom with `spatial_degree` neighbors within the
/// edge threshold. There is no bond graph, so valence mirrors the degree,
/// hybridization is SP3 and the charge, radical, aromatic and H slots are 0.
pub fn featurize_pocket_atom(atom: &ProteinAtom, spatial_degree: usize) -> AtomFeatures {
    let mut v = [0.0; FEATURE_DIM];
    v[atom.element.slot()] = 1.0;
    one_hot(&mut v, DEGREE_OFFSET, 11, spatial_degree);
    one_hot(&mut v, VALENCE_OFFSET, 7, spatial_degree);
    v[HYBRID_OFFSET + Hybridization::Sp3.slot()] = 1.0;
    one_hot(&mut v, HCOUNT_OFFSET, 4, 0);
    v
}

/// Node features (row-major `n × 74`) and undirected edges `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    pub num_nodes: usize,
    pub features: Vec<f32>,
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeaturizeError {
    #[error("graph has no nodes")]
    Empty,
    #[error("edge ({0}, {1}) is invalid for {2} nodes")]
    Edge(u32, u32, usize),
    #[error("feature buffer has {got} values, expected {expected}")]
    Features { got: usize, expected: usize },
}

impl GraphSample {
    pub fn new(num_nodes: usize, features: Vec<f32>, edges: Vec<(u32, u32)>) -> Result<Self, FeaturizeError> {
        if num_nodes == 0 {
            return Err(FeaturizeError::Empty);
        }
        if features.len() != num_nodes * FEATURE_DIM {
            return Err(FeaturizeError::Features { got: features.len(), expected: num_nodes * FEATURE_DIM });
        }
        for &(a, b) in &edges {
            if a == b || a as usize >= num_nodes || b as usize >= num_nodes {
                return Err(FeaturizeError::Edge(a, b, num_nodes));
            }
        }
        Ok(Self { num_nodes, features, edges })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }
}

/// Fragment nodes in sorted parent order; features are those of the intact
/// parent molecule.
pub fn fragment_graph(g: &MolGraph, f: &Fragment) -> Result<GraphSample, FeaturizeError> {
    if f.atom_indices.is_empty() {
        return Err(FeaturizeError::Empty);
    }
    let mut features = Vec::with_capacity(f.atom_indices.len() * FEATURE_DIM);
    for &a in &f.atom_indices {
        features.extend_from_slice(&featurize_atom(g, a));
    }
    let local = |parent: usize| f.atom_indices.binary_search(&parent).ok().map(|i| i as u32);
    let mut edges: Vec<(u32, u32)> = g
        .bonds()
        .iter()
        .filter_map(|b| {
            let (x, y) = (local(b.a)?, local(b.b)?);
            Some((x.min(y), x.max(y)))
        })
        .collect();
    edges.sort_unstable();
    GraphSample::new(f.atom_indices.len(), features, edges)
}

/// Whole-molecule graph.
pub fn molecule_graph(g: &MolGraph) -> Result<GraphSample, FeaturizeError> {
    let all = Fragment {
        atom_indices: (0..g.num_atoms()).collect(),
        bonds: (0..g.bonds().len()).collect(),
        attachment_points: vec![],
        blocks: vec![0],
    };
    fragment_graph(g, &all)
}

/// Pairs of atoms closer than `threshold` Å, `(a, b)` with `a < b`, sorted.
pub fn distance_edges(atoms: &[ProteinAtom], threshold: f64) -> Vec<(u32, u32)> {
    let t2 = threshold * threshold;
    let mut edges = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let d2: f64 = (0..3).map(|k| (atoms[i].coords[k] - atoms[j].coords[k]).powi(2)).sum();
            if d2 < t2 {
                edges.push((i as u32, j as u32));
            }
        }
    }
    edges
}

pub fn pocket_graph(atoms: &[ProteinAtom], threshold: f64) -> Result<GraphSample, FeaturizeError> {
    if atoms.is_empty() {
        return Err(FeaturizeError::Empty);
    }
    let edges = distance_edges(atoms, threshold);
    let mut degree = vec![0usize; atoms.len()];
    for &(a, b) in &edges {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let mut features = Vec::with_capacity(atoms.len() * FEATURE_DIM);
    for (atom, &d) in atoms.iter().zip(&degree) {
        features.extend_from_slice(&featurize_pocket_atom(atom, d));
    }
    GraphSample::new(atoms.len(), features, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::{parse_smiles, Element};

    fn active(v: &AtomFeatures, offset: usize, width: usize) -> Vec<usize> {
        (0..width).filter(|&k| v[offset + k] != 0.0).collect()
    }

    #[test]
    fn benzene_carbon() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let v = featurize_atom(&g, 0);
        assert_eq!(active(&v, 0, 44), vec![Element::C.slot()]);
        assert_eq!(active(&v, DEGREE_OFFSET, 11), vec![2]);
        assert_eq!(active(&v, HCOUNT_OFFSET, 4), vec![1]);
        assert_eq!(active(&v, VALENCE_OFFSET, 7), vec![1]);
        assert_eq!(v[AROMATIC_OFFSET], 1.0);
        assert_eq!(active(&v, HYBRID_OFFSET, 5), vec![Hybridization::Sp2.slot()]);
    }

    #[test]
    fn methane_clamps_hydrogens() {
        let g = parse_smiles("C").unwrap();
        let v = featurize_atom(&g, 0);
        assert_eq!(active(&v, DEGREE_OFFSET, 11), vec![0]);
        assert_eq!(active(&v, HCOUNT_OFFSET, 4), vec![3]);
        assert_eq!(active(&v, VALENCE_OFFSET, 7), vec![4]);
        assert_eq!(active(&v, HYBRID_OFFSET, 5), vec![Hybridization::Sp3.slot()]);
    }

    #[test]
    fn hybridization_rules() {
        let g = parse_smiles("C#CC=CC(=O)O").unwrap();
        assert_eq!(hybridization(&g, 0), Hybridization::Sp);
        assert_eq!(hybridization(&g, 2), Hybridization::Sp2);
        assert_eq!(hybridization(&g, 6), Hybridization::Sp3);
        let g = parse_smiles("C=C=C").unwrap();
        assert_eq!(hybridization(&g, 1), Hybridization::Sp);
        let g = parse_smiles("FS(F)(F)(F)(F)F").unwrap();
        assert_eq!(hybridization(&g, 1), Hybridization::Sp3d2);
        let g = parse_smiles("FP(F)(F)(F)F").unwrap();
        assert_eq!(hybridization(&g, 1), Hybridization::Sp3d);
    }

    #[test]
    fn charge_and_radical_scalars() {
        let g = parse_smiles("[NH4+]").unwrap();
        let v = featurize_atom(&g, 0);
        assert_eq!(v[CHARGE_OFFSET], 1.0);
        assert_eq!(active(&v, HCOUNT_OFFSET, 4), vec![3]);
        let g = parse_smiles("[CH2]C").unwrap();
        assert_eq!(featurize_atom(&g, 0)[RADICAL_OFFSET], 1.0);
    }

    #[test]
    fn unknown_element_slot() {
        let atom = ProteinAtom {
            name: "XE".into(),
            element: Element::UNKNOWN,
            residue_name: "UNK".into(),
            residue_seq: 1,
            chain_id: 'A',
            coords: [0.0; 3],
        };
        let s = pocket_graph(&[atom], 5.0).unwrap();
        assert_eq!(s.row(0)[43], 1.0);
        assert_eq!(active(s.row(0).try_into().unwrap(), DEGREE_OFFSET, 11), vec![0]);
    }

    #[test]
    fn molecule_graph_shape() {
        let g = parse_smiles("CCO").unwrap();
        let s = molecule_graph(&g).unwrap();
        assert_eq!(s.num_nodes, 3);
        assert_eq!(s.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn empty_fragment_rejected() {
        let g = parse_smiles("CCO").unwrap();
        let f = Fragment { atom_indices: vec![], bonds: vec![], attachment_points: vec![], blocks: vec![] };
        assert_eq!(fragment_graph(&g, &f), Err(FeaturizeError::Empty));
    }
}
