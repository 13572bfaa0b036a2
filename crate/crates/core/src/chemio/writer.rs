use super::mol::{BondOrder, MolGraph};

/// Emits a (non-canonical) SMILES string that re-parses to an isomorphic graph.
/// Components are joined with `.`.
pub fn to_smiles(g: &MolGraph) -> String {
    let n = g.num_atoms();
    let mut visited = vec![false; n];
    let mut parent_bond = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    // ring closures: (other atom, bond) lists for openers and closers
    let mut opens: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];

    let mut roots = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        let mut stack = vec![(root, 0usize)];
        visited[root] = true;
        order.push(root);
        while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
            let nbrs = g.neighbors(u);
            if let Some(&(v, b)) = nbrs.get(*pos) {
                *pos += 1;
                if b == parent_bond[u] {
                    continue;
                }
                if !visited[v] {
                    visited[v] = true;
                    parent_bond[v] = b;
                    order.push(v);
                    children[u].push((v, b));
                    stack.push((v, 0));
                } else if !closes[u].iter().any(|&(_, cb)| cb == b) && !opens[u].iter().any(|&(_, ob)| ob == b) {
                    // v is an ancestor still on the stack or an already finished atom: v opens, u closes
                    opens[v].push((u, b));
                    closes[u].push((v, b));
                }
            } else {
                stack.pop();
            }
        }
    }

    let mut labels: Vec<Option<u8>> = vec![None; g.bonds().len()];
    let mut in_use = [false; 100];
    let mut out = String::new();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit(g, root, &children, &opens, &closes, &mut labels, &mut in_use, &mut out);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn emit(
    g: &MolGraph,
    u: usize,
    children: &[Vec<(usize, usize)>],
    opens: &[Vec<(usize, usize)>],
    closes: &[Vec<(usize, usize)>],
    labels: &mut [Option<u8>],
    in_use: &mut [bool; 100],
    out: &mut String,
) {
    out.push_str(&atom_token(g, u));
    for &(_, b) in &closes[u] {
        if let Some(l) = labels[b].take() {
            push_label(out, l);
            in_use[l as usize] = false;
        }
    }
    for &(_, b) in &opens[u] {
        let l = (1..100).find(|&l| !in_use[l]).expect("more than 99 open rings") as u8;
        in_use[l as usize] = true;
        labels[b] = Some(l);
        out.push_str(bond_token(g, b));
        push_label(out, l);
    }
    let kids = &children[u];
    for (i, &(v, b)) in kids.iter().enumerate() {
        let last = i + 1 == kids.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_token(g, b));
        emit(g, v, children, opens, closes, labels, in_use, out);
        if !last {
            out.push(')');
        }
    }
}

fn push_label(out: &mut String, l: u8) {
    if l < 10 {
        out.push((b'0' + l) as char);
    } else {
        out.push_str(&format!("%{l:02}"));
    }
}

fn bond_token(g: &MolGraph, b: usize) -> &'static str {
    let bond = &g.bonds()[b];
    let both_aromatic = g.atoms()[bond.a].aromatic && g.atoms()[bond.b].aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single | BondOrder::Aromatic => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
    }
}

fn atom_token(g: &MolGraph, i: usize) -> String {
    let atom = &g.atoms()[i];
    let sym = atom.element.symbol();
    let sym = if atom.aromatic { sym.to_ascii_lowercase() } else { sym.to_string() };
    if !atom.bracket && atom.element.is_organic_subset() && atom.formal_charge == 0 {
        return sym;
    }
    let mut t = format!("[{sym}");
    match atom.explicit_h {
        0 => {}
        1 => t.push('H'),
        h => t.push_str(&format!("H{h}")),
    }
    match atom.formal_charge {
        0 => {}
        1 => t.push('+'),
        -1 => t.push('-'),
        q if q > 0 => t.push_str(&format!("+{q}")),
        q => t.push_str(&format!("-{}", -q)),
    }
    t.push(']');
    t
}
