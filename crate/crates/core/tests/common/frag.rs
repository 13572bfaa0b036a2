#![allow(dead_code)]

use fragxsite::chemio::MolGraph;
use fragxsite::fragmenter::{building_blocks, find_cleavable_bonds, BricsRules};

/// Drug-like molecules with at most 12 heavy atoms; the first two have no
/// cleavable bond.
pub const SMALL_MOLECULES: [&str; 30] = [
    "c1ccccc1",
    "c1ccc2ccccc2c1",
    "CCO",
    "CCc1ccccc1",
    "CC(=O)Oc1ccccc1",
    "CC(=O)Nc1ccccc1",
    "COc1ccccc1",
    "c1ccccc1C(=O)C",
    "CN(C)C(=O)c1ccco1",
    "c1ccc(cc1)N",
    "CCOC(=O)C",
    "c1ccncc1C",
    "c1ccccc1Sc1ccco1",
    "CC(C)Oc1ccccc1",
    "O=C(O)c1ccccc1",
    "c1ccccc1-c1ccncc1",
    "CCNC(=O)C1CC1",
    "C1CCCC1Oc1ccccc1",
    "CS(=O)(=O)Nc1ccccc1",
    "NC(=O)c1ccccc1",
    "CC(=O)c1ccc(O)cc1",
    "COC(=O)c1ccccc1O",
    "CCCCCC",
    "CN1CCCC1",
    "CCN(CC)CC",
    "OCc1ccccc1",
    "C=CCOc1ccccc1",
    "Clc1ccc(N)cc1",
    "CC(=O)NCC(=O)O",
    "C",
];

/// Every union of at most `k` blocks whose atoms induce a connected
/// subgraph, sorted.
pub fn brute_force_fragments(g: &MolGraph, rules: &BricsRules, k: usize) -> Vec<Vec<usize>> {
    let blocks = building_blocks(g, &find_cleavable_bonds(g, rules));
    let mut want = Vec::new();
    for mask in 1u64..(1 << blocks.len()) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let mut atoms: Vec<usize> =
            (0..blocks.len()).filter(|i| mask >> i & 1 == 1).flat_map(|i| blocks[i].clone()).collect();
        atoms.sort_unstable();
        if g.induced(&atoms).unwrap().components().len() == 1 {
            want.push(atoms);
        }
    }
    want.sort();
    want
}
