//! OpenSMILES subset: organic-subset and bracket atoms, bonds, branches,
//! ring closures up to `%99` and dot-disconnected components. Stereo marks are
//! accepted and dropped; isotopes and atom classes are ignored.

use std::collections::HashMap;

use super::element::Element;
use super::mol::{Atom, Bond, BondOrder, GraphError, MolGraph};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("non-ASCII input")]
    NonAscii,
    #[error("unexpected character {0:?}")]
    Unexpected(char),
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("ring closure {0} is never closed")]
    UnclosedRing(u8),
    #[error("ring closure bond conflicts with its opening bond")]
    RingBondMismatch,
    #[error("ring closure joins an atom to itself or duplicates a bond")]
    InvalidRingClosure,
    #[error("unbalanced parenthesis")]
    UnbalancedParen,
    #[error("unterminated bracket atom")]
    UnclosedBracket,
    #[error("bond symbol not followed by an atom")]
    DanglingBond,
    #[error("formal charge out of range")]
    Charge,
    #[error("valence exceeded on {0}")]
    Valence(Element),
    #[error("invalid molecular graph: {0}")]
    Graph(GraphError),
}

/// SMILES parse failure at byte `offset`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SMILES error at byte {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

fn err(offset: usize, kind: SmilesErrorKind) -> SmilesError {
    SmilesError { offset, kind }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`: single bond with discarded stereo.
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Directional => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct RawBond {
    a: usize,
    b: usize,
    sym: Option<BondSym>,
}

struct Parser<'s> {
    bytes: &'s [u8],
    pos: usize,
    atoms: Vec<Atom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<RawBond>,
}

const AROMATIC_ORGANIC: [(&str, Element); 6] = [
    ("b", Element::B),
    ("c", Element::C),
    ("n", Element::N),
    ("o", Element::O),
    ("p", Element::P),
    ("s", Element::S),
];

impl<'s> Parser<'s> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn parse_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }

    fn organic_atom(&mut self) -> Result<Option<Atom>, SmilesError> {
        let rest = &self.bytes[self.pos..];
        for (sym, el) in [("Cl", Element::CL), ("Br", Element::BR)] {
            if rest.starts_with(sym.as_bytes()) {
                self.pos += 2;
                return Ok(Some(Atom::new(el)));
            }
        }
        let c = rest[0];
        let upper = [
            (b'B', Element::B),
            (b'C', Element::C),
            (b'N', Element::N),
            (b'O', Element::O),
            (b'P', Element::P),
            (b'S', Element::S),
            (b'F', Element::F),
            (b'I', Element::I),
        ];
        if let Some(&(_, el)) = upper.iter().find(|(ch, _)| *ch == c) {
            self.pos += 1;
            return Ok(Some(Atom::new(el)));
        }
        if let Some(&(_, el)) = AROMATIC_ORGANIC.iter().find(|(s, _)| s.as_bytes()[0] == c) {
            self.pos += 1;
            let mut atom = Atom::new(el);
            atom.aromatic = true;
            return Ok(Some(atom));
        }
        if c == b'*' || c.is_ascii_alphabetic() {
            let end = (self.pos + 1..self.bytes.len())
                .find(|&i| !self.bytes[i].is_ascii_lowercase())
                .unwrap_or(self.bytes.len());
            let sym = String::from_utf8_lossy(&self.bytes[self.pos..end.max(self.pos + 1)]).into_owned();
            return Err(err(self.pos, SmilesErrorKind::UnknownElement(sym)));
        }
        Ok(None)
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let _isotope = self.parse_number();
        let sym_start = self.pos;
        let c = self.peek().ok_or_else(|| err(open, SmilesErrorKind::UnclosedBracket))?;
        let (element, aromatic) = if c.is_ascii_uppercase() {
            let two = self.bytes.get(self.pos + 1).filter(|b| b.is_ascii_lowercase()).map(|&b| {
                String::from_utf8(vec![c, b]).unwrap()
            });
            match two.as_deref().and_then(Element::from_symbol) {
                Some(el) => {
                    self.pos += 2;
                    (el, false)
                }
                None => {
                    self.pos += 1;
                    let sym = (c as char).to_string();
                    let el = Element::from_symbol(&sym).ok_or_else(|| {
                        let shown = two.unwrap_or(sym);
                        err(sym_start, SmilesErrorKind::UnknownElement(shown))
                    })?;
                    (el, false)
                }
            }
        } else if c.is_ascii_lowercase() {
            let rest = &self.bytes[self.pos..];
            let (len, el) = if rest.starts_with(b"se") {
                (2, Element::SE)
            } else if rest.starts_with(b"as") {
                (2, Element::from_symbol("As").unwrap())
            } else if let Some(&(_, el)) = AROMATIC_ORGANIC.iter().find(|(s, _)| s.as_bytes()[0] == c) {
                (1, el)
            } else {
                return Err(err(sym_start, SmilesErrorKind::UnknownElement((c as char).to_string())));
            };
            self.pos += len;
            (el, true)
        } else if c == b'*' {
            return Err(err(sym_start, SmilesErrorKind::UnknownElement("*".into())));
        } else {
            return Err(err(self.pos, SmilesErrorKind::Unexpected(c as char)));
        };

        // chirality: @, @@, or @TH1/@AL2/@SP3/@TB12/@OH30 forms
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.peek().is_some_and(|c| c.is_ascii_uppercase()) && self.bytes.get(self.pos + 1).is_some_and(|c| c.is_ascii_uppercase()) {
                self.pos += 2;
                self.parse_number();
            }
        }
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        atom.bracket = true;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.explicit_h = self.parse_number().map_or(1, |n| n.min(255) as u8);
        }
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let charge_at = self.pos;
            self.pos += 1;
            let unit: i32 = if sign == b'+' { 1 } else { -1 };
            let mut magnitude = 1i32;
            if let Some(n) = self.parse_number() {
                magnitude = n as i32;
            } else {
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    magnitude += 1;
                }
            }
            let charge = unit * magnitude;
            if !(-4..=4).contains(&charge) {
                return Err(err(charge_at, SmilesErrorKind::Charge));
            }
            atom.formal_charge = charge as i8;
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.parse_number();
        }
        match self.peek() {
            Some(b']') => {
                self.pos += 1;
                Ok(atom)
            }
            Some(c) => Err(err(self.pos, SmilesErrorKind::Unexpected(c as char))),
            None => Err(err(open, SmilesErrorKind::UnclosedBracket)),
        }
    }
}

/// Parses a SMILES string. For multi-component input only the largest
/// component (first on ties) is kept; atom order follows token order.
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    if s.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    if let Some(i) = s.bytes().position(|b| !b.is_ascii()) {
        return Err(err(i, SmilesErrorKind::NonAscii));
    }
    let mut p = Parser { bytes: s.as_bytes(), pos: 0, atoms: Vec::new(), atom_offsets: Vec::new(), bonds: Vec::new() };
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSym, usize)> = None;
    let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
    let mut rings: HashMap<u8, (usize, Option<BondSym>, usize)> = HashMap::new();

    while let Some(c) = p.peek() {
        let here = p.pos;
        let bond_sym = match c {
            b'-' => Some(BondSym::Single),
            b'=' => Some(BondSym::Double),
            b'#' => Some(BondSym::Triple),
            b':' => Some(BondSym::Aromatic),
            b'/' | b'\\' => Some(BondSym::Directional),
            _ => None,
        };
        if let Some(sym) = bond_sym {
            if pending.is_some() || prev.is_none() {
                return Err(err(here, SmilesErrorKind::Unexpected(c as char)));
            }
            pending = Some((sym, here));
            p.pos += 1;
            continue;
        }
        match c {
            b'(' => {
                if prev.is_none() || pending.is_some() {
                    return Err(err(here, SmilesErrorKind::UnbalancedParen));
                }
                branches.push((prev, here));
                p.pos += 1;
            }
            b')' => {
                if pending.is_some() {
                    return Err(err(here, SmilesErrorKind::DanglingBond));
                }
                let (atom, _) = branches.pop().ok_or_else(|| err(here, SmilesErrorKind::UnbalancedParen))?;
                prev = atom;
                p.pos += 1;
            }
            b'.' => {
                if pending.is_some() || prev.is_none() {
                    return Err(err(here, SmilesErrorKind::Unexpected('.')));
                }
                prev = None;
                p.pos += 1;
            }
            b'%' | b'0'..=b'9' => {
                let current = prev.ok_or_else(|| err(here, SmilesErrorKind::Unexpected(c as char)))?;
                let label = if c == b'%' {
                    let digits = p.bytes.get(here + 1..here + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                    let d = digits.ok_or_else(|| err(here, SmilesErrorKind::Unexpected('%')))?;
                    p.pos += 3;
                    (d[0] - b'0') * 10 + (d[1] - b'0')
                } else {
                    p.pos += 1;
                    c - b'0'
                };
                let sym = pending.take().map(|(s, _)| s);
                match rings.remove(&label) {
                    Some((open_atom, open_sym, _)) => {
                        let sym = match (open_sym, sym) {
                            (Some(a), Some(b)) if a != b => return Err(err(here, SmilesErrorKind::RingBondMismatch)),
                            (a, b) => a.or(b),
                        };
                        let duplicate = p.bonds.iter().any(|rb| {
                            (rb.a == open_atom && rb.b == current) || (rb.a == current && rb.b == open_atom)
                        });
                        if open_atom == current || duplicate {
                            return Err(err(here, SmilesErrorKind::InvalidRingClosure));
                        }
                        p.bonds.push(RawBond { a: open_atom, b: current, sym });
                    }
                    None => {
                        rings.insert(label, (current, sym, here));
                    }
                }
            }
            b'[' => {
                let atom = p.bracket_atom()?;
                attach(&mut p, atom, here, &mut prev, &mut pending);
            }
            _ => match p.organic_atom()? {
                Some(atom) => attach(&mut p, atom, here, &mut prev, &mut pending),
                None => return Err(err(here, SmilesErrorKind::Unexpected(c as char))),
            },
        }
    }
    if let Some((_, at)) = pending {
        return Err(err(at, SmilesErrorKind::DanglingBond));
    }
    if let Some(&(_, at)) = branches.last() {
        return Err(err(at, SmilesErrorKind::UnbalancedParen));
    }
    if let Some((&label, &(_, _, at))) = rings.iter().min_by_key(|(_, v)| v.2) {
        return Err(err(at, SmilesErrorKind::UnclosedRing(label)));
    }
    if p.atoms.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    build_graph(p)
}

fn attach(p: &mut Parser<'_>, atom: Atom, offset: usize, prev: &mut Option<usize>, pending: &mut Option<(BondSym, usize)>) {
    let idx = p.atoms.len();
    p.atoms.push(atom);
    p.atom_offsets.push(offset);
    if let Some(a) = *prev {
        p.bonds.push(RawBond { a, b: idx, sym: pending.take().map(|(s, _)| s) });
    }
    *prev = Some(idx);
}

fn build_graph(p: Parser<'_>) -> Result<MolGraph, SmilesError> {
    let Parser { atoms, atom_offsets, bonds: raw, .. } = p;
    // Unmarked bonds between two aromatic atoms are aromatic; those that turn
    // out not to be in a ring (e.g. biphenyl links) are demoted to single below.
    let mut bonds: Vec<Bond> = raw
        .iter()
        .map(|rb| {
            let order = match rb.sym {
                Some(s) => s.order(),
                None if atoms[rb.a].aromatic && atoms[rb.b].aromatic => BondOrder::Aromatic,
                None => BondOrder::Single,
            };
            Bond { a: rb.a, b: rb.b, order, ring_member: false }
        })
        .collect();
    let first_offset = atom_offsets.first().copied().unwrap_or(0);
    for (i, b) in bonds.iter().enumerate() {
        if b.order == BondOrder::Aromatic && !(atoms[b.a].aromatic && atoms[b.b].aromatic) {
            return Err(err(atom_offsets[b.b], SmilesErrorKind::Graph(GraphError::AromaticMismatch(i))));
        }
    }
    let graph = MolGraph::new(atoms.clone(), bonds.clone()).map_err(|e| err(first_offset, SmilesErrorKind::Graph(e)))?;
    let mut changed = false;
    for (i, b) in bonds.iter_mut().enumerate() {
        if b.order == BondOrder::Aromatic && raw[i].sym.is_none() && !graph.bonds()[i].ring_member {
            b.order = BondOrder::Single;
            changed = true;
        }
    }
    let graph = if changed {
        MolGraph::new(atoms, bonds).map_err(|e| err(first_offset, SmilesErrorKind::Graph(e)))?
    } else {
        graph
    };

    for i in 0..graph.num_atoms() {
        check_valence(&graph, i).map_err(|kind| err(atom_offsets[i], kind))?;
    }

    let comps = graph.components();
    if comps.len() == 1 {
        return Ok(graph);
    }
    let largest = comps.iter().enumerate().max_by_key(|(i, c)| (c.len(), std::cmp::Reverse(*i))).map(|(_, c)| c).unwrap();
    graph.induced(largest).map_err(|e| err(first_offset, SmilesErrorKind::Graph(e)))
}

fn check_valence(g: &MolGraph, i: usize) -> Result<(), SmilesErrorKind> {
    let atom = &g.atoms()[i];
    let Some(valences) = atom.element.allowed_valences(atom.formal_charge) else {
        return Ok(());
    };
    let max = valences.iter().copied().max().unwrap_or(0) as f64;
    // aromatic bonds may be single in a Kekule form, so count them as 1 here
    let used: f64 = g
        .neighbors(i)
        .iter()
        .map(|&(_, b)| match g.bonds()[b].order {
            BondOrder::Aromatic => 1.0,
            o => o.valence(),
        })
        .sum::<f64>()
        + atom.explicit_h as f64;
    if used > max {
        return Err(SmilesErrorKind::Valence(atom.element));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> SmilesErrorKind {
        parse_smiles(s).unwrap_err().kind
    }

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        let els: Vec<_> = g.atoms().iter().map(|a| a.element).collect();
        assert_eq!(els, vec![Element::C, Element::C, Element::O]);
        assert_eq!(g.bonds().len(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        assert_eq!(g.implicit_hydrogens(0), 3);
        assert_eq!(g.implicit_hydrogens(1), 2);
        assert_eq!(g.implicit_hydrogens(2), 1);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.num_atoms(), 6);
        assert_eq!(g.bonds().len(), 6);
        assert!(g.atoms().iter().all(|a| a.aromatic && a.ring_member));
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Aromatic && b.ring_member));
        assert!((0..6).all(|i| g.implicit_hydrogens(i) == 1));
    }

    #[test]
    fn acetic_acid_matches_reference_table() {
        // atom/bond table of CC(=O)O from a reference toolkit:
        // atoms C C O O; bonds 0-1 single, 1-2 double, 1-3 single; H counts 3,0,0,1
        let g = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(g.num_atoms(), 4);
        let table: Vec<_> = g.bonds().iter().map(|b| (b.a, b.b, b.order)).collect();
        assert_eq!(table, vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Double), (1, 3, BondOrder::Single)]);
        let hs: Vec<_> = (0..4).map(|i| g.implicit_hydrogens(i)).collect();
        assert_eq!(hs, vec![3, 0, 0, 1]);
    }

    #[test]
    fn ammonium_hydrogens() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atoms()[0].formal_charge, 1);
        assert_eq!(g.implicit_hydrogens(0), 4);
        assert_eq!(g.valence_hydrogens(0), 0);
        assert_eq!(g.radical_electrons(0), 0);
    }

    #[test]
    fn bracket_details() {
        let g = parse_smiles("[13CH3:2][C@@H](N)[O-]").unwrap();
        assert_eq!(g.atoms()[0].explicit_h, 3);
        assert_eq!(g.atoms()[1].explicit_h, 1);
        assert_eq!(g.atoms()[3].formal_charge, -1);
        assert_eq!(parse_smiles("[Fe+++]").unwrap().atoms()[0].formal_charge, 3);
        assert_eq!(parse_smiles("[CH3]").unwrap().radical_electrons(0), 1);
    }

    #[test]
    fn ring_closures_and_percent_labels() {
        let g = parse_smiles("C%12CCCCC%12").unwrap();
        assert_eq!(g.bonds().len(), 6);
        assert!(g.atoms().iter().all(|a| a.ring_member));
        let g = parse_smiles("C1CC=1").unwrap();
        assert_eq!(g.bonds()[2].order, BondOrder::Double);
    }

    #[test]
    fn stereo_marks_are_dropped() {
        let g = parse_smiles("F/C=C\\F").unwrap();
        assert_eq!(g.num_atoms(), 4);
        assert_eq!(g.bonds()[1].order, BondOrder::Double);
    }

    #[test]
    fn largest_component_is_kept() {
        let g = parse_smiles("[Na+].CC(=O)[O-]").unwrap();
        assert_eq!(g.num_atoms(), 4);
        assert_eq!(g.atoms()[0].element, Element::C);
    }

    #[test]
    fn biphenyl_link_is_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let link = g.bond_between(5, 6).unwrap();
        assert_eq!(g.bonds()[link].order, BondOrder::Single);
        assert!(!g.bonds()[link].ring_member);
    }

    #[test]
    fn aromatic_hydrogen_rules() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(g.implicit_hydrogens(3), 0); // ring fusion carbon
        let g = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(g.implicit_hydrogens(3), 0);
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.implicit_hydrogens(3), 0);
        let g = parse_smiles("Cc1ccccc1").unwrap();
        assert_eq!(g.implicit_hydrogens(1), 0);
    }

    #[test]
    fn errors_report_offsets() {
        assert_eq!(parse_smiles("C1CC").unwrap_err(), err(1, SmilesErrorKind::UnclosedRing(1)));
        assert_eq!(parse_smiles("CC(C").unwrap_err().kind, SmilesErrorKind::UnbalancedParen);
        assert_eq!(parse_smiles("CC)C").unwrap_err().offset, 2);
        assert_eq!(parse_smiles("C[Xe]").unwrap_err().offset, 2);
        assert!(matches!(kinds("CX"), SmilesErrorKind::UnknownElement(_)));
        assert_eq!(kinds("[CH3"), SmilesErrorKind::UnclosedBracket);
        assert_eq!(parse_smiles("CC(C)(C)(C)(C)C").unwrap_err().offset, 1);
        assert!(matches!(kinds("C(C)(C)(C)(C)C"), SmilesErrorKind::Valence(Element::C)));
        assert_eq!(kinds(""), SmilesErrorKind::Empty);
        assert_eq!(kinds("C="), SmilesErrorKind::DanglingBond);
        assert_eq!(kinds("C11"), SmilesErrorKind::InvalidRingClosure);
        assert_eq!(kinds("CÅ"), SmilesErrorKind::NonAscii);
    }

    #[test]
    fn handshake_identity() {
        for s in ["CC(=O)Oc1ccccc1C(=O)O", "C#N", "c1ccc2[nH]ccc2c1", "O=S(=O)(N)c1ccccc1"] {
            let g = parse_smiles(s).unwrap();
            let atom_side: f64 = (0..g.num_atoms()).map(|i| g.bond_order_sum(i)).sum();
            let bond_side: f64 = g.bonds().iter().map(|b| b.order.valence()).sum();
            assert_eq!(atom_side, 2.0 * bond_side, "{s}");
        }
    }
}
