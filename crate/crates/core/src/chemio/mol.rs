use serde::{Deserialize, Serialize};

use super::element::Element;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence contribution; aromatic bonds count 1.5.
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket atom.
    pub explicit_h: u8,
    pub aromatic: bool,
    pub ring_member: bool,
    /// Written as a bracket atom; such atoms carry no valence-derived hydrogens.
    pub bracket: bool,
    pub coords: Option<[f64; 3]>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Self {
            element,
            formal_charge: 0,
            explicit_h: 0,
            aromatic: false,
            ring_member: false,
            bracket: false,
            coords: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub ring_member: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("bond {0} references a missing atom")]
    BadIndex(usize),
    #[error("bond {0} is a self-loop")]
    SelfLoop(usize),
    #[error("atoms {0} and {1} are bonded more than once")]
    DuplicateBond(usize, usize),
    #[error("aromatic bond {0} joins a non-aromatic atom")]
    AromaticMismatch(usize),
    #[error("formal charge {0} outside [-4, 4]")]
    Charge(i8),
}

/// Small-molecule graph. Ring flags and adjacency are derived on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new(mut atoms: Vec<Atom>, mut bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let mut seen = std::collections::HashSet::new();
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(GraphError::BadIndex(i));
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop(i));
            }
            if !seen.insert((bond.a.min(bond.b), bond.a.max(bond.b))) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic) {
                return Err(GraphError::AromaticMismatch(i));
            }
        }
        if let Some(a) = atoms.iter().find(|a| !(-4..=4).contains(&a.formal_charge)) {
            return Err(GraphError::Charge(a.formal_charge));
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let bridges = find_bridges(atoms.len(), &adjacency);
        for atom in &mut atoms {
            atom.ring_member = false;
        }
        for (i, bond) in bonds.iter_mut().enumerate() {
            bond.ring_member = !bridges[i];
            if bond.ring_member {
                atoms[bond.a].ring_member = true;
                atoms[bond.b].ring_member = true;
            }
        }
        Ok(Self { atoms, bonds, adjacency })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor atom, bond index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(n, _)| n == b).map(|&(_, bi)| bi)
    }

    /// Number of non-hydrogen neighbors.
    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|&&(n, _)| self.atoms[n].element != Element::H).count()
    }

    pub fn bond_order_sum(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, b)| self.bonds[b].order.valence()).sum()
    }

    /// Hydrogens implied by the organic-subset valence rules: the smallest
    /// allowed valence at or above the bond-order sum, minus that sum. Aromatic
    /// atoms use their default valence and the fractional remainder is floored.
    /// Always 0 for bracket atoms.
    pub fn valence_hydrogens(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        if atom.bracket {
            return 0;
        }
        let Some(valences) = atom.element.allowed_valences(atom.formal_charge) else {
            return 0;
        };
        let used = self.bond_order_sum(i) + atom.explicit_h as f64;
        let target = if atom.aromatic {
            valences.first().copied()
        } else {
            valences.iter().copied().find(|&v| v as f64 >= used)
        };
        match target {
            Some(v) => (v as f64 - used).floor().max(0.0) as u8,
            None => 0,
        }
    }

    /// Hydrogens attached to atom `i` that are not graph nodes: the bracket
    /// count plus any valence-derived hydrogens.
    pub fn implicit_hydrogens(&self, i: usize) -> u8 {
        self.atoms[i].explicit_h + self.valence_hydrogens(i)
    }

    /// All attached hydrogens, including explicit `[H]` graph atoms.
    pub fn total_hydrogens(&self, i: usize) -> usize {
        let graph_h = self.adjacency[i].iter().filter(|&&(n, _)| self.atoms[n].element == Element::H).count();
        self.implicit_hydrogens(i) as usize + graph_h
    }

    /// Unpaired electrons on bracket atoms whose written hydrogen count leaves
    /// the valence unsatisfied (e.g. `[CH3]`).
    pub fn radical_electrons(&self, i: usize) -> u8 {
        let atom = &self.atoms[i];
        if !atom.bracket || atom.aromatic {
            return 0;
        }
        let Some(valences) = atom.element.allowed_valences(atom.formal_charge) else {
            return 0;
        };
        let used = (self.bond_order_sum(i) + atom.explicit_h as f64).round() as u8;
        valences.iter().find(|&&v| v >= used).map_or(0, |&v| v - used)
    }

    /// Connected components as sorted atom-index lists, in order of first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut comps = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            let mut comp = vec![start];
            label[start] = comps.len();
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = comps.len();
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    /// Induced subgraph on `atoms` (sorted ascending), re-indexed densely.
    pub fn induced(&self, atoms: &[usize]) -> Result<MolGraph, GraphError> {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in atoms.iter().enumerate() {
            map[old] = new;
        }
        let new_atoms = atoms.iter().map(|&i| self.atoms[i].clone()).collect();
        let new_bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond { a: map[b.a], b: map[b.b], order: b.order, ring_member: false })
            .collect();
        MolGraph::new(new_atoms, new_bonds)
    }
}

/// Marks bonds whose removal disconnects the graph (Tarjan low-link).
fn find_bridges(n: usize, adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let n_bonds = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
    let mut is_bridge = vec![false; n_bonds];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, parent bond, next neighbor position)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent_bond, ref mut pos)) = stack.last_mut() {
            if let Some(&(v, b)) = adjacency[u].get(*pos) {
                *pos += 1;
                if b == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, b, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge
}
