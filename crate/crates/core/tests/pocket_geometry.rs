mod common;

use fragxsite::pocket::{find_pockets, PocketConfig};

#[test]
fn hollow_cube_has_one_central_pocket() {
    let p = common::hollow_cube([0.0; 3]);
    let pockets = find_pockets(&p, &PocketConfig::default()).unwrap();
    assert_eq!(pockets.len(), 1, "{pockets:?}");
    let b = &pockets[0];
    assert!(!b.is_fallback());
    let dist = b.centroid.iter().map(|c| c * c).sum::<f64>().sqrt();
    assert!(dist < 3.0, "centroid {:?}", b.centroid);
    assert!(b.min_corner.iter().all(|&v| v > -10.0) && b.max_corner[..2].iter().all(|&v| v < 10.0));
    for &i in &b.atom_indices {
        assert!(b.contains(&p.atoms[i].coords));
    }
}

#[test]
fn translation_equivariance_is_exact() {
    let cfg = PocketConfig::default();
    let a = find_pockets(&common::hollow_cube([0.0; 3]), &cfg).unwrap();
    let b = find_pockets(&common::hollow_cube([5.0; 3]), &cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.min_corner.map(|v| v + 5.0), y.min_corner);
        assert_eq!(x.max_corner.map(|v| v + 5.0), y.max_corner);
        assert_eq!(x.cluster_size, y.cluster_size);
        assert_eq!(x.atom_indices, y.atom_indices);
    }
}

#[test]
fn rotation_preserves_cluster_sizes() {
    let cfg = PocketConfig::default();
    let p = common::hollow_cube([0.0; 3]);
    // opening on +x instead of +z: rotate 90 degrees about y
    let rotated = common::structure(&p.atoms.iter().map(|a| [a.coords[2], a.coords[1], -a.coords[0]]).collect::<Vec<_>>());
    let mut s1: Vec<_> = find_pockets(&p, &cfg).unwrap().iter().map(|b| b.cluster_size).collect();
    let mut s2: Vec<_> = find_pockets(&rotated, &cfg).unwrap().iter().map(|b| b.cluster_size).collect();
    s1.sort_unstable();
    s2.sort_unstable();
    assert_eq!(s1, s2);
}

#[test]
fn deterministic_bytes() {
    let p = common::hollow_cube([1.5, -2.25, 0.5]);
    let a = serde_json::to_vec(&find_pockets(&p, &PocketConfig::default()).unwrap()).unwrap();
    let b = serde_json::to_vec(&find_pockets(&p, &PocketConfig::default()).unwrap()).unwrap();
    assert_eq!(a, b);
}
