//! Ligand fragmentation: cut BRICS bonds into building blocks, then enumerate
//! every connected combination of up to `max_blocks` blocks. Fragments overlap
//! freely and keep only real atoms; severed bonds are recorded as attachment points.

mod brics;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chemio::{BondOrder, Element, MolGraph};

pub use brics::{BricsRules, Environment, RuleError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleavableBond {
    pub bond: usize,
    /// Matched environment pair, oriented as `(env of first atom, env of second atom)`.
    pub rule: (Environment, Environment),
    /// Bond endpoints in the same orientation as `rule`.
    pub atoms: (usize, usize),
}

impl CleavableBond {
    pub fn rule_label(&self) -> String {
        format!("{}-{}", self.rule.0.id(), self.rule.1.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    /// Sorted parent-molecule atom indices.
    pub atom_indices: Vec<usize>,
    /// Parent bond indices with both ends inside the fragment.
    pub bonds: Vec<usize>,
    /// `(inside atom, outside partner)` for every severed bond.
    pub attachment_points: Vec<(usize, usize)>,
    /// Indices of the building blocks the fragment is made of.
    pub blocks: Vec<usize>,
}

impl Fragment {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FragmentConfig {
    pub max_blocks: usize,
    pub max_fragments: usize,
}

impl Default for FragmentConfig {
    fn default() -> Self {
        Self { max_blocks: 4, max_fragments: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FragmentError {
    #[error("max_blocks must be at least 1, got {0}")]
    MaxBlocks(usize),
    #[error("max_fragments must be at least 1, got {0}")]
    MaxFragments(usize),
}

/// Acyclic single bonds between heavy atoms whose endpoint environments form
/// a pair in `rules`, in bond-index order.
pub fn find_cleavable_bonds(g: &MolGraph, rules: &BricsRules) -> Vec<CleavableBond> {
    let envs: Vec<Vec<Environment>> = (0..g.num_atoms()).map(|i| rules.environments(g, i)).collect();
    let mut out = Vec::new();
    for (bi, bond) in g.bonds().iter().enumerate() {
        if bond.order != BondOrder::Single || bond.ring_member {
            continue;
        }
        let (a, b) = (bond.a, bond.b);
        if g.atoms()[a].element == Element::H || g.atoms()[b].element == Element::H {
            continue;
        }
        let hit = rules.pairs().iter().find_map(|&(p, q)| {
            if envs[a].contains(&p) && envs[b].contains(&q) {
                Some(((p, q), (a, b)))
            } else if envs[b].contains(&p) && envs[a].contains(&q) {
                Some(((p, q), (b, a)))
            } else {
                None
            }
        });
        if let Some((rule, atoms)) = hit {
            out.push(CleavableBond { bond: bi, rule, atoms });
        }
    }
    out
}

/// Connected components after deleting `cleavable` bonds. Blocks are sorted
/// internally and ordered by their smallest atom.
pub fn building_blocks(g: &MolGraph, cleavable: &[CleavableBond]) -> Vec<Vec<usize>> {
    let cut: BTreeSet<usize> = cleavable.iter().map(|c| c.bond).collect();
    let mut label = vec![usize::MAX; g.num_atoms()];
    let mut blocks = Vec::new();
    for start in 0..g.num_atoms() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        label[start] = id;
        let mut block = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, b) in g.neighbors(u) {
                if !cut.contains(&b) && label[v] == usize::MAX {
                    label[v] = id;
                    block.push(v);
                    stack.push(v);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

/// Block adjacency induced by the cleaved bonds.
pub fn block_adjacency(g: &MolGraph, blocks: &[Vec<usize>], cleavable: &[CleavableBond]) -> Vec<Vec<usize>> {
    let mut owner = vec![0; g.num_atoms()];
    for (i, block) in blocks.iter().enumerate() {
        for &a in block {
            owner[a] = i;
        }
    }
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks.len()];
    for c in cleavable {
        let bond = &g.bonds()[c.bond];
        let (x, y) = (owner[bond.a], owner[bond.b]);
        if x != y {
            adj[x].insert(y);
            adj[y].insert(x);
        }
    }
    adj.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Every connected set of `1..=k` vertices, each exactly once (ESU enumeration).
pub fn connected_subsets(adj: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    fn extend(adj: &[Vec<usize>], k: usize, root: usize, subset: &mut Vec<usize>, ext: Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let mut sorted = subset.clone();
        sorted.sort_unstable();
        out.push(sorted);
        if subset.len() == k {
            return;
        }
        let mut ext = ext;
        while let Some(w) = ext.pop() {
            let mut next = ext.clone();
            for &u in &adj[w] {
                let exclusive = u > root
                    && !subset.contains(&u)
                    && u != w
                    && !subset.iter().any(|&s| adj[s].contains(&u))
                    && !next.contains(&u);
                if exclusive {
                    next.push(u);
                }
            }
            subset.push(w);
            extend(adj, k, root, subset, next, out);
            subset.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    for v in 0..adj.len() {
        let ext: Vec<usize> = adj[v].iter().copied().filter(|&u| u > v).collect();
        extend(adj, k, v, &mut vec![v], ext, &mut out);
    }
    out
}

fn assemble(g: &MolGraph, blocks: &[Vec<usize>], cleavable: &[CleavableBond], members: Vec<usize>) -> Fragment {
    let mut atoms: Vec<usize> = members.iter().flat_map(|&b| blocks[b].iter().copied()).collect();
    atoms.sort_unstable();
    let mut inside = vec![false; g.num_atoms()];
    for &a in &atoms {
        inside[a] = true;
    }
    let bonds = g
        .bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| inside[b.a] && inside[b.b])
        .map(|(i, _)| i)
        .collect();
    let mut attachment_points: Vec<(usize, usize)> = cleavable
        .iter()
        .filter_map(|c| {
            let b = &g.bonds()[c.bond];
            match (inside[b.a], inside[b.b]) {
                (true, false) => Some((b.a, b.b)),
                (false, true) => Some((b.b, b.a)),
                _ => None,
            }
        })
        .collect();
    attachment_points.sort_unstable();
    Fragment { atom_indices: atoms, bonds, attachment_points, blocks: members }
}

/// All fragments built from 1..=`max_blocks` connected building blocks,
/// sorted lexicographically by atom indices.
pub fn enumerate_fragments(g: &MolGraph, rules: &BricsRules, max_blocks: usize) -> Result<Vec<Fragment>, FragmentError> {
    if max_blocks < 1 {
        return Err(FragmentError::MaxBlocks(max_blocks));
    }
    let cleavable = find_cleavable_bonds(g, rules);
    let blocks = building_blocks(g, &cleavable);
    let adj = block_adjacency(g, &blocks, &cleavable);
    let mut frags: Vec<Fragment> = connected_subsets(&adj, max_blocks)
        .into_iter()
        .map(|members| assemble(g, &blocks, &cleavable, members))
        .collect();
    frags.sort_by(|a, b| a.atom_indices.cmp(&b.atom_indices));
    frags.dedup_by(|a, b| a.atom_indices == b.atom_indices);
    Ok(frags)
}

/// Keeps at most `max_fragments`, preferring more blocks and then
/// lexicographic order; the result is returned in lexicographic order.
pub fn cap_fragments(mut frags: Vec<Fragment>, max_fragments: usize) -> Result<Vec<Fragment>, FragmentError> {
    if max_fragments < 1 {
        return Err(FragmentError::MaxFragments(max_fragments));
    }
    if frags.len() > max_fragments {
        frags.sort_by(|a, b| b.block_count().cmp(&a.block_count()).then_with(|| a.atom_indices.cmp(&b.atom_indices)));
        frags.truncate(max_fragments);
        frags.sort_by(|a, b| a.atom_indices.cmp(&b.atom_indices));
    }
    Ok(frags)
}

/// Enumerate and cap in one step.
pub fn fragment_molecule(g: &MolGraph, rules: &BricsRules, cfg: &FragmentConfig) -> Result<Vec<Fragment>, FragmentError> {
    cap_fragments(enumerate_fragments(g, rules, cfg.max_blocks)?, cfg.max_fragments)
}
