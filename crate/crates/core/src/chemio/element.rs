use std::fmt;

/// Element symbols in featurization slot order. The final slot is reserved
/// for unrecognized elements.
pub const ELEMENT_SYMBOLS: [&str; 43] = [
    "C", "N", "O", "S", "F", "Si", "P", "Cl", "Br", "Mg", "Na", "Ca", "Fe", "As", "Al", "I", "B",
    "V", "K", "Tl", "Yb", "Sb", "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H", "Li", "Ge", "Cu",
    "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb",
];

pub const NUM_ELEMENT_SLOTS: usize = ELEMENT_SYMBOLS.len() + 1;

/// A chemical element from the supported table, or [`Element::UNKNOWN`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const UNKNOWN: Element = Element(ELEMENT_SYMBOLS.len() as u8);
    pub const C: Element = Element(0);
    pub const N: Element = Element(1);
    pub const O: Element = Element(2);
    pub const S: Element = Element(3);
    pub const F: Element = Element(4);
    pub const SI: Element = Element(5);
    pub const P: Element = Element(6);
    pub const CL: Element = Element(7);
    pub const BR: Element = Element(8);
    pub const I: Element = Element(15);
    pub const B: Element = Element(16);
    pub const SE: Element = Element(26);
    pub const H: Element = Element(29);

    /// Case-sensitive lookup of a canonical symbol (`"Cl"`, not `"CL"`).
    pub fn from_symbol(sym: &str) -> Option<Element> {
        ELEMENT_SYMBOLS.iter().position(|&s| s == sym).map(|i| Element(i as u8))
    }

    /// Lookup tolerant of PDB-style upper-case symbols; unrecognized symbols map to `UNKNOWN`.
    pub fn from_symbol_loose(sym: &str) -> Element {
        let sym = sym.trim();
        let mut chars = sym.chars();
        let canonical: String = match chars.next() {
            Some(first) => first.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
            None => return Element::UNKNOWN,
        };
        Element::from_symbol(&canonical).unwrap_or(Element::UNKNOWN)
    }

    pub fn slot(self) -> usize {
        self.0 as usize
    }

    pub fn from_slot(slot: usize) -> Option<Element> {
        (slot < NUM_ELEMENT_SLOTS).then_some(Element(slot as u8))
    }

    pub fn is_unknown(self) -> bool {
        self == Element::UNKNOWN
    }

    pub fn symbol(self) -> &'static str {
        ELEMENT_SYMBOLS.get(self.slot()).copied().unwrap_or("*")
    }

    /// Allowed valences in ascending order for elements with a conventional
    /// valence model, adjusted for formal charge. `None` for metals and other
    /// elements whose valence is not modeled.
    pub fn allowed_valences(self, charge: i8) -> Option<Vec<u8>> {
        let base: &[i16] = match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N | Element::P => &[3, 5],
            Element::O => &[2],
            Element::S | Element::SE => &[2, 4, 6],
            Element::F | Element::CL | Element::BR | Element::I => &[1],
            Element::H => &[1],
            Element::SI => &[4],
            _ => return None,
        };
        let q = charge as i16;
        let shifted: Vec<u8> = base
            .iter()
            .map(|&v| match self {
                // electron-deficient: B- is isoelectronic with C
                Element::B => v - q,
                Element::C | Element::SI | Element::H => v - q.abs(),
                _ => v + q,
            })
            .filter(|&v| v >= 0)
            .map(|v| v as u8)
            .collect();
        Some(shifted)
    }

    /// Member of the SMILES organic subset (may be written without brackets).
    pub fn is_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S | Element::F
                | Element::CL | Element::BR | Element::I
        )
    }
}

impl serde::Serialize for Element {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> serde::Deserialize<'de> for Element {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let sym = String::deserialize(d)?;
        Ok(Element::from_symbol(&sym).unwrap_or(Element::UNKNOWN))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_44_slots_and_known_positions() {
        assert_eq!(NUM_ELEMENT_SLOTS, 44);
        assert_eq!(Element::UNKNOWN.slot(), 43);
        for (sym, el) in [("C", Element::C), ("Cl", Element::CL), ("H", Element::H), ("Se", Element::SE)] {
            assert_eq!(Element::from_symbol(sym), Some(el));
        }
    }

    #[test]
    fn loose_lookup_handles_pdb_case() {
        assert_eq!(Element::from_symbol_loose("CL"), Element::CL);
        assert_eq!(Element::from_symbol_loose(" N"), Element::N);
        assert_eq!(Element::from_symbol_loose("XX"), Element::UNKNOWN);
    }

    #[test]
    fn charge_adjusted_valences() {
        assert_eq!(Element::N.allowed_valences(1), Some(vec![4, 6]));
        assert_eq!(Element::O.allowed_valences(-1), Some(vec![1]));
        assert_eq!(Element::C.allowed_valences(-1), Some(vec![3]));
        assert_eq!(Element::B.allowed_valences(-1), Some(vec![4]));
        assert_eq!(Element::from_symbol("Na").unwrap().allowed_valences(1), None);
    }
}
