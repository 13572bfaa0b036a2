//! SMILES and PDB readers producing molecular graphs and protein structures.

mod element;
mod mol;
mod pdb;
mod smiles;
mod writer;

pub use element::{Element, ELEMENT_SYMBOLS, NUM_ELEMENT_SLOTS};
pub use mol::{Atom, Bond, BondOrder, GraphError, MolGraph};
pub use pdb::{parse_pdb, PdbError, ProteinAtom, ProteinStructure};
pub use smiles::{parse_smiles, SmilesError, SmilesErrorKind};
pub use writer::to_smiles;
