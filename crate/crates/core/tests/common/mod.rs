#![allow(dead_code)]

pub mod layers;
pub mod model;
pub mod frag;

use fragxsite::chemio::{Element, ProteinAtom, ProteinStructure};

pub fn structure(coords: &[[f64; 3]]) -> ProteinStructure {
    ProteinStructure {
        source_id: "synthetic".into(),
        atoms: coords
            .iter()
            .enumerate()
            .map(|(i, &c)| ProteinAtom {
                name: "CA".into(),
                element: Element::C,
                residue_name: "GLY".into(),
                residue_seq: i as i32 + 1,
                chain_id: 'A',
                coords: c,
            })
            .collect(),
    }
}

/// Thick-walled hollow cube of side 20 Å centered at `center`: atoms on a
/// 1 Å lattice with Chebyshev radius 7..=10, minus a 6 Å square opening
/// through the +z face.
pub fn hollow_cube(center: [f64; 3]) -> ProteinStructure {
    let mut coords = Vec::new();
    for x in -10i32..=10 {
        for y in -10i32..=10 {
            for z in -10i32..=10 {
                let r = x.abs().max(y.abs()).max(z.abs());
                if !(7..=10).contains(&r) {
                    continue;
                }
                if z >= 7 && x.abs() < 3 && y.abs() < 3 {
                    continue;
                }
                coords.push([center[0] + x as f64, center[1] + y as f64, center[2] + z as f64]);
            }
        }
    }
    structure(&coords)
}

/// Fixed-column PDB text for `p`.
pub fn pdb_text(p: &ProteinStructure) -> String {
    let mut s = String::new();
    for (i, a) in p.atoms.iter().enumerate() {
        s.push_str(&format!(
            "ATOM  {:>5}  {:<3} {:>3} {}{:>4}    {:>8.3}{:>8.3}{:>8.3}  1.00  0.00          {:>2}\n",
            i + 1,
            a.name,
            a.residue_name,
            a.chain_id,
            a.residue_seq % 10000,
            a.coords[0],
            a.coords[1],
            a.coords[2],
            a.element.symbol()
        ));
    }
    s.push_str("END\n");
    s
}
