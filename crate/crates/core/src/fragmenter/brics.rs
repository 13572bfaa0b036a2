use serde::{Deserialize, Serialize};

use crate::chemio::{BondOrder, Element, MolGraph};

/// The BRICS atom environments that can sit on either side of a cleavable
/// acyclic single bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Environment {
    L1,
    L3,
    L4,
    L5,
    L6,
    L8,
    L9,
    L10,
    L11,
    L12,
    L13,
    L14,
    L15,
    L16,
}

impl Environment {
    pub const ALL: [Environment; 14] = [
        Environment::L1,
        Environment::L3,
        Environment::L4,
        Environment::L5,
        Environment::L6,
        Environment::L8,
        Environment::L9,
        Environment::L10,
        Environment::L11,
        Environment::L12,
        Environment::L13,
        Environment::L14,
        Environment::L15,
        Environment::L16,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Environment::L1 => "L1",
            Environment::L3 => "L3",
            Environment::L4 => "L4",
            Environment::L5 => "L5",
            Environment::L6 => "L6",
            Environment::L8 => "L8",
            Environment::L9 => "L9",
            Environment::L10 => "L10",
            Environment::L11 => "L11",
            Environment::L12 => "L12",
            Environment::L13 => "L13",
            Environment::L14 => "L14",
            Environment::L15 => "L15",
            Environment::L16 => "L16",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.id() == id)
    }

    /// Whether atom `x` of `g` has this environment.
    pub fn matches(self, g: &MolGraph, x: usize) -> bool {
        let atoms = g.atoms();
        let atom = &atoms[x];
        let deg = g.heavy_degree(x);
        let nb = g.neighbors(x);
        let bond = |b: usize| &g.bonds()[b];
        let aliph = |i: usize, el: Element| atoms[i].element == el && !atoms[i].aromatic;
        let arom_in = |i: usize, els: &[Element]| atoms[i].aromatic && els.contains(&atoms[i].element);
        let aliph_in = |i: usize, els: &[Element]| !atoms[i].aromatic && els.contains(&atoms[i].element);
        let single_acyclic = |b: usize| bond(b).order == BondOrder::Single && !bond(b).ring_member;
        let ring_single = |b: usize| bond(b).order == BondOrder::Single && bond(b).ring_member;
        let is_carbonyl_o = |n: usize, b: usize| bond(b).order == BondOrder::Double && aliph(n, Element::O);
        let has_double = || nb.iter().any(|&(_, b)| bond(b).order == BondOrder::Double);
        // two distinct neighbors satisfying `p` and `q` respectively
        let two = |p: &dyn Fn(usize, usize) -> bool, q: &dyn Fn(usize, usize) -> bool| {
            nb.iter().any(|&(n1, b1)| p(n1, b1) && nb.iter().any(|&(n2, b2)| n2 != n1 && q(n2, b2)))
        };
        let is_c = !atom.aromatic && atom.element == Element::C;
        let cno = [Element::C, Element::N, Element::O];

        match self {
            Environment::L1 => {
                is_c && deg == 3
                    && two(&|n, b| is_carbonyl_o(n, b), &|n, _| cno.contains(&atoms[n].element))
            }
            Environment::L3 => {
                aliph(x, Element::O)
                    && deg == 2
                    && nb.iter().any(|&(n, b)| {
                        single_acyclic(b) && matches!(atoms[n].element, Element::C | Element::H)
                    })
            }
            Environment::L4 => {
                is_c && deg >= 2
                    && !has_double()
                    && nb.iter().any(|&(n, b)| single_acyclic(b) && atoms[n].element == Element::C)
            }
            Environment::L5 => {
                let lactam = atom.ring_member
                    && nb.iter().any(|&(n, b)| {
                        bond(b).ring_member
                            && aliph(n, Element::C)
                            && atoms[n].ring_member
                            && g.neighbors(n).iter().any(|&(o, ob)| is_carbonyl_o(o, ob))
                    });
                aliph(x, Element::N)
                    && deg >= 2
                    && !has_double()
                    && !nb.iter().any(|&(n, b)| {
                        bond(b).order == BondOrder::Single
                            && !matches!(atoms[n].element, Element::C | Element::S | Element::H)
                    })
                    && !lactam
            }
            Environment::L6 => {
                is_c && deg == 3
                    && !atom.ring_member
                    && nb.iter().any(|&(n, b)| is_carbonyl_o(n, b))
                    && nb.iter().any(|&(n, b)| single_acyclic(b) && cno.contains(&atoms[n].element))
            }
            Environment::L8 => {
                is_c && !atom.ring_member
                    && deg >= 2
                    && nb.iter().all(|&(_, b)| bond(b).order == BondOrder::Single)
            }
            Environment::L9 => {
                let ring_atoms = [Element::C, Element::N, Element::O, Element::S];
                let p = |n: usize, b: usize| bond(b).order == BondOrder::Aromatic && arom_in(n, &ring_atoms);
                atom.aromatic && atom.element == Element::N && atom.formal_charge == 0 && two(&p, &p)
            }
            Environment::L10 => {
                aliph(x, Element::N)
                    && atom.ring_member
                    && two(
                        &|n, b| {
                            bond(b).ring_member
                                && aliph(n, Element::C)
                                && g.neighbors(n).iter().any(|&(o, ob)| is_carbonyl_o(o, ob))
                        },
                        &|n, b| bond(b).ring_member && aliph_in(n, &[Element::C, Element::N, Element::O, Element::S]),
                    )
            }
            Environment::L11 => {
                aliph(x, Element::S)
                    && deg == 2
                    && nb.iter().any(|&(n, b)| single_acyclic(b) && atoms[n].element == Element::C)
            }
            Environment::L12 => {
                let oxo = nb.iter().filter(|&&(n, b)| is_carbonyl_o(n, b)).count();
                aliph(x, Element::S) && deg == 4 && oxo >= 2 && nb.iter().any(|&(n, _)| atoms[n].element == Element::C)
            }
            Environment::L13 => {
                is_c && two(
                    &|n, b| ring_single(b) && aliph_in(n, &[Element::C, Element::N, Element::O, Element::S]),
                    &|n, b| ring_single(b) && aliph_in(n, &[Element::N, Element::O, Element::S]),
                )
            }
            Environment::L14 => {
                atom.aromatic
                    && atom.element == Element::C
                    && two(
                        &|n, b| bond(b).order == BondOrder::Aromatic && arom_in(n, &[Element::C, Element::N, Element::O, Element::S]),
                        &|n, b| bond(b).order == BondOrder::Aromatic && arom_in(n, &[Element::N, Element::O, Element::S]),
                    )
            }
            Environment::L15 => {
                let p = |n: usize, b: usize| ring_single(b) && aliph(n, Element::C);
                is_c && two(&p, &p)
            }
            Environment::L16 => {
                let p = |n: usize, b: usize| bond(b).order == BondOrder::Aromatic && arom_in(n, &[Element::C]);
                atom.aromatic && atom.element == Element::C && two(&p, &p)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleFile {
    #[serde(default)]
    description: String,
    environments: Vec<EnvironmentEntry>,
    pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EnvironmentEntry {
    id: String,
    #[serde(default)]
    smarts: String,
    #[serde(default)]
    description: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("invalid rule file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown environment id {0:?}")]
    UnknownEnvironment(String),
    #[error("pair uses environment {0:?} that the file does not declare")]
    Undeclared(String),
}

/// Ordered table of cleavable environment pairs. Earlier pairs take
/// precedence when labeling a bond.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BricsRules {
    enabled: Vec<Environment>,
    pairs: Vec<(Environment, Environment)>,
}

const DEFAULT_RULES: &str = include_str!("../../data/brics_rules.json");

impl Default for BricsRules {
    fn default() -> Self {
        Self::from_json(DEFAULT_RULES).expect("bundled BRICS rule table is valid")
    }
}

impl BricsRules {
    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let file: RuleFile = serde_json::from_str(text)?;
        let mut enabled = Vec::new();
        for e in &file.environments {
            enabled.push(Environment::from_id(&e.id).ok_or_else(|| RuleError::UnknownEnvironment(e.id.clone()))?);
        }
        let lookup = |id: &str| -> Result<Environment, RuleError> {
            let env = Environment::from_id(id).ok_or_else(|| RuleError::UnknownEnvironment(id.to_string()))?;
            if !enabled.contains(&env) {
                return Err(RuleError::Undeclared(id.to_string()));
            }
            Ok(env)
        };
        let pairs = file.pairs.iter().map(|(a, b)| Ok((lookup(a)?, lookup(b)?))).collect::<Result<_, RuleError>>()?;
        Ok(Self { enabled, pairs })
    }

    pub fn pairs(&self) -> &[(Environment, Environment)] {
        &self.pairs
    }

    /// Environments of atom `x` among the enabled ones.
    pub fn environments(&self, g: &MolGraph, x: usize) -> Vec<Environment> {
        self.enabled.iter().copied().filter(|e| e.matches(g, x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemio::parse_smiles;

    #[test]
    fn default_table_loads() {
        let rules = BricsRules::default();
        assert_eq!(rules.pairs().len(), 45);
        assert_eq!(rules.pairs()[0], (Environment::L1, Environment::L3));
    }

    #[test]
    fn rejects_unknown_ids() {
        let text = r#"{"environments":[{"id":"L99"}],"pairs":[]}"#;
        assert!(matches!(BricsRules::from_json(text), Err(RuleError::UnknownEnvironment(_))));
        let text = r#"{"environments":[{"id":"L1"}],"pairs":[["L1","L3"]]}"#;
        assert!(matches!(BricsRules::from_json(text), Err(RuleError::Undeclared(_))));
    }

    #[test]
    fn ethylbenzene_environments() {
        let g = parse_smiles("CCc1ccccc1").unwrap();
        let rules = BricsRules::default();
        assert!(rules.environments(&g, 1).contains(&Environment::L8));
        assert_eq!(rules.environments(&g, 2), vec![Environment::L16]);
        assert!(rules.environments(&g, 0).is_empty());
    }
}
