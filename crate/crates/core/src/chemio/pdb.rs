//! Fixed-column PDB `ATOM` records (format v3.3).
//!
//! | columns | field                 |
//! |---------|-----------------------|
//! | 1-6     | record name `ATOM  `  |
//! | 13-16   | atom name             |
//! | 17      | alternate location    |
//! | 18-20   | residue name          |
//! | 22      | chain identifier      |
//! | 23-26   | residue sequence      |
//! | 31-54   | x, y, z (8.3 each)    |
//! | 77-78   | element symbol        |
//!
//! `HETATM` records and waters are skipped, as is everything after the first
//! `ENDMDL`. Only the first alternate location of each atom is kept.

use serde::{Deserialize, Serialize};

use super::element::Element;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProteinAtom {
    pub name: String,
    pub element: Element,
    pub residue_name: String,
    pub residue_seq: i32,
    pub chain_id: char,
    pub coords: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProteinStructure {
    pub source_id: String,
    pub atoms: Vec<ProteinAtom>,
}

impl ProteinStructure {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Componentwise `(min, max)` over atom coordinates.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for a in &self.atoms {
            for k in 0..3 {
                lo[k] = lo[k].min(a.coords[k]);
                hi[k] = hi[k].max(a.coords[k]);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdbError {
    #[error("no ATOM records found")]
    Empty,
    #[error("line {line}: malformed {field} field {text:?}")]
    Field { line: usize, field: &'static str, text: String },
    #[error("line {line}: ATOM record too short ({len} columns)")]
    Truncated { line: usize, len: usize },
}

const WATERS: [&str; 4] = ["HOH", "WAT", "H2O", "DOD"];

fn col(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        ""
    } else {
        &line[start..end]
    }
}

/// Parses PDB text. `source_id` is taken from the `HEADER` id code when present.
pub fn parse_pdb(text: &str) -> Result<ProteinStructure, PdbError> {
    let mut atoms = Vec::new();
    let mut source_id = String::new();
    let mut seen_altloc: std::collections::HashMap<(char, i32, String, String), char> = Default::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if !line.is_ascii() {
            if line.starts_with("ATOM") {
                return Err(PdbError::Field { line: line_no, field: "record", text: line.to_string() });
            }
            continue;
        }
        if line.starts_with("HEADER") && source_id.is_empty() {
            source_id = col(line, 62, 66).trim().to_string();
            continue;
        }
        if line.starts_with("ENDMDL") {
            break;
        }
        if !line.starts_with("ATOM  ") && line != "ATOM" {
            continue;
        }
        if line.len() < 54 {
            return Err(PdbError::Truncated { line: line_no, len: line.len() });
        }
        let residue_name = col(line, 17, 20).trim().to_string();
        if WATERS.contains(&residue_name.as_str()) {
            continue;
        }
        let name = col(line, 12, 16).trim().to_string();
        let chain_id = col(line, 21, 22).chars().next().unwrap_or(' ');
        let seq_text = col(line, 22, 26).trim();
        let residue_seq = seq_text.parse().map_err(|_| PdbError::Field {
            line: line_no,
            field: "residue sequence",
            text: seq_text.to_string(),
        })?;
        let altloc = col(line, 16, 17).chars().next().unwrap_or(' ');
        let insertion = col(line, 26, 27).to_string();
        let key = (chain_id, residue_seq, insertion, name.clone());
        if altloc != ' ' {
            match seen_altloc.get(&key) {
                Some(&first) if first != altloc => continue,
                Some(_) => {}
                None => {
                    seen_altloc.insert(key, altloc);
                }
            }
        }
        let mut coords = [0.0; 3];
        for (k, field) in ["x", "y", "z"].into_iter().enumerate() {
            let text = col(line, 30 + 8 * k, 38 + 8 * k).trim();
            let v: f64 = text.parse().map_err(|_| PdbError::Field { line: line_no, field, text: text.to_string() })?;
            if !v.is_finite() {
                return Err(PdbError::Field { line: line_no, field, text: text.to_string() });
            }
            coords[k] = v;
        }
        let element_text = col(line, 76, 78).trim();
        let element = if element_text.is_empty() {
            element_from_atom_name(col(line, 12, 16))
        } else {
            Element::from_symbol_loose(element_text)
        };
        atoms.push(ProteinAtom { name, element, residue_name, residue_seq, chain_id, coords });
    }
    if atoms.is_empty() {
        return Err(PdbError::Empty);
    }
    Ok(ProteinStructure { source_id, atoms })
}

/// Element guess from a column-aligned atom name: two-letter symbols are
/// left-justified in column 13, one-letter symbols start in column 14.
fn element_from_atom_name(name: &str) -> Element {
    let letters: String = name.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    if name.starts_with(|c: char| c.is_ascii_alphabetic()) && letters.len() >= 2 {
        let two = Element::from_symbol_loose(&letters[..2]);
        if !two.is_unknown() && !matches!(&letters[..1], "C" | "N" | "O" | "S" | "H") {
            return two;
        }
    }
    letters.get(..1).map_or(Element::UNKNOWN, Element::from_symbol_loose)
}
