//! Cleavable bonds compared against reference output from RDKit's
//! `FindBRICSBonds`, reported as `(lower atom, higher atom, rule env, rule env)`
//! where the environments follow the order of the matched rule pair.

use fragxsite::chemio::parse_smiles;
use fragxsite::fragmenter::{building_blocks, enumerate_fragments, find_cleavable_bonds, BricsRules};

fn found(smiles: &str) -> Vec<(usize, usize, String, String)> {
    let g = parse_smiles(smiles).unwrap();
    let mut v: Vec<_> = find_cleavable_bonds(&g, &BricsRules::default())
        .into_iter()
        .map(|c| {
            let (a, b) = c.atoms;
            (a.min(b), a.max(b), c.rule.0.id()[1..].to_string(), c.rule.1.id()[1..].to_string())
        })
        .collect();
    v.sort();
    v
}

fn expect(list: &[(usize, usize, &str, &str)]) -> Vec<(usize, usize, String, String)> {
    let mut v: Vec<_> = list.iter().map(|&(a, b, x, y)| (a, b, x.to_string(), y.to_string())).collect();
    v.sort();
    v
}

const CASES: &[(&str, &[(usize, usize, &str, &str)])] = &[
    ("CCc1ccccc1", &[(1, 2, "8", "16")]),
    ("CC(=O)Oc1ccccc1C(=O)O", &[(1, 3, "1", "3"), (3, 4, "3", "16"), (9, 10, "6", "16")]),
    ("CC(=O)Nc1ccc(O)cc1", &[(1, 3, "1", "5"), (3, 4, "5", "16")]),
    ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", &[]),
    ("CC(C)Cc1ccc(cc1)C(C)C(=O)O", &[(3, 4, "8", "16"), (7, 10, "8", "16")]),
    ("COc1ccc2[nH]cc(CCN(C)C)c2c1", &[(1, 2, "3", "16"), (8, 9, "8", "16"), (10, 11, "4", "5")]),
    ("O=C(NCc1ccccc1)c1ccncc1", &[(1, 2, "1", "5"), (1, 10, "6", "16"), (2, 3, "4", "5"), (3, 4, "8", "16")]),
    ("CCOC(=O)c1ccc(N)cc1", &[(1, 2, "3", "4"), (2, 3, "1", "3"), (3, 5, "6", "16")]),
    (
        "Cc1ccc(S(=O)(=O)NC(=O)NC2CCCCC2)cc1",
        &[(5, 8, "5", "12"), (8, 9, "1", "5"), (9, 11, "1", "5"), (11, 12, "5", "15")],
    ),
    ("c1ccc(-c2ccccn2)cc1", &[(3, 4, "14", "16")]),
    (
        "CCN(CC)CCOC(=O)c1ccc(N)cc1",
        &[(1, 2, "4", "5"), (2, 3, "4", "5"), (2, 5, "4", "5"), (6, 7, "3", "4"), (7, 8, "1", "3"), (8, 10, "6", "16")],
    ),
    ("Clc1ccc(CN2CCNCC2)cc1", &[(4, 5, "8", "16"), (5, 6, "4", "5")]),
    ("OCC1OC(O)C(O)C1O", &[(1, 2, "8", "13")]),
    ("CC(=O)OCC(=O)N1CCCC1", &[(1, 3, "1", "3"), (3, 4, "3", "4"), (5, 7, "1", "5")]),
    ("c1ccc(Oc2ccccc2)cc1", &[(3, 4, "3", "16"), (4, 5, "3", "16")]),
    ("CSc1ccc(C=O)cc1", &[(1, 2, "11", "16")]),
    ("NS(=O)(=O)c1ccc(C(=O)NC2CC2)cc1", &[(7, 8, "6", "16"), (8, 10, "1", "5"), (10, 11, "5", "15")]),
    ("C1CCNCC1", &[]),
];

#[test]
fn matches_reference_bond_sets() {
    let mut failures = Vec::new();
    for (smiles, want) in CASES {
        let got = found(smiles);
        if got != expect(want) {
            failures.push(format!("{smiles}: got {got:?}, want {:?}", expect(want)));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn blocks_partition_atoms() {
    for (smiles, want) in CASES {
        let g = parse_smiles(smiles).unwrap();
        let cl = find_cleavable_bonds(&g, &BricsRules::default());
        let blocks = building_blocks(&g, &cl);
        assert_eq!(blocks.len(), want.len() + 1, "{smiles}");
        let mut all: Vec<usize> = blocks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..g.num_atoms()).collect::<Vec<_>>());
    }
}

/// Brute force over all block subsets: a subset is a fragment iff its
/// induced atom set is connected in the molecule.
#[test]
fn enumeration_matches_brute_force() {
    for (smiles, _) in CASES {
        let g = parse_smiles(smiles).unwrap();
        let rules = BricsRules::default();
        let cl = find_cleavable_bonds(&g, &rules);
        let blocks = building_blocks(&g, &cl);
        for k in 1..=4 {
            let mut want = Vec::new();
            for mask in 1u32..(1 << blocks.len()) {
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
            let got: Vec<_> = enumerate_fragments(&g, &rules, k).unwrap().into_iter().map(|f| f.atom_indices).collect();
            assert_eq!(got, want, "{smiles} k={k}");
        }
    }
}
