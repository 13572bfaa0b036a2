//! Binding-site detection by a buriedness grid scan.
//!
//! A cubic grid centered on the protein's bounding box is laid over the
//! structure. Points within `occl` of an atom are occupied. Each empty point
//! scans seven directions (the six axis half-rays and one representative for
//! the eight cube diagonals, blocked if any diagonal is) and counts how many
//! hit an occupied point within `range`. Empty points with buriedness of at
//! least `min_buried` are clustered by 26-connectivity; large clusters become
//! axis-aligned boxes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::chemio::{ProteinAtom, ProteinStructure};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PocketConfig {
    pub grid: f64,
    pub pad: f64,
    pub occl: f64,
    pub range: f64,
    pub min_buried: u8,
    pub min_cluster: usize,
    pub margin: f64,
    pub max_pockets: usize,
}

impl Default for PocketConfig {
    fn default() -> Self {
        Self {
            grid: 1.0,
            pad: 4.0,
            occl: 2.5,
            range: 8.0,
            min_buried: 5,
            min_cluster: 30,
            margin: 2.0,
            max_pockets: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PocketError {
    #[error("protein has no atoms")]
    Empty,
    #[error("invalid pocket config: {0}")]
    Config(String),
    #[error("grid of {0} points exceeds the limit; increase grid spacing")]
    GridTooLarge(usize),
}

impl PocketConfig {
    pub fn validate(&self) -> Result<(), PocketError> {
        let positive = [("grid", self.grid), ("margin", self.margin)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PocketError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("pad", self.pad), ("occl", self.occl), ("range", self.range)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PocketError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.min_buried > 7 {
            return Err(PocketError::Config(format!("min_buried must be at most 7, got {}", self.min_buried)));
        }
        if self.max_pockets < 1 {
            return Err(PocketError::Config("max_pockets must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocketBox {
    pub min_corner: [f64; 3],
    pub max_corner: [f64; 3],
    /// Protein atoms inside the box, ascending.
    pub atom_indices: Vec<usize>,
    /// Mean buriedness of the cluster; 0 for the whole-protein fallback.
    pub score: f64,
    /// Number of grid points in the cluster (0 for the fallback).
    pub cluster_size: usize,
    /// Mean position of the cluster's grid points (box center for the fallback).
    pub centroid: [f64; 3],
}

impl PocketBox {
    pub fn contains(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|k| self.min_corner[k] <= x[k] && x[k] <= self.max_corner[k])
    }

    pub fn is_fallback(&self) -> bool {
        self.cluster_size == 0
    }
}

const MAX_GRID_POINTS: usize = 64_000_000;

struct Grid {
    center: [f64; 3],
    half: [i64; 3],
    dims: [usize; 3],
    spacing: f64,
}

impl Grid {
    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    fn unindex(&self, mut idx: usize) -> [usize; 3] {
        let z = idx % self.dims[2];
        idx /= self.dims[2];
        let y = idx % self.dims[1];
        [idx / self.dims[1], y, z]
    }

    fn coord(&self, i: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.center[k] + (i[k] as i64 - self.half[k]) as f64 * self.spacing)
    }

    fn offset(&self, i: [usize; 3], d: [i64; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for k in 0..3 {
            let v = i[k] as i64 + d[k];
            if v < 0 || v >= self.dims[k] as i64 {
                return None;
            }
            out[k] = v as usize;
        }
        Some(out)
    }
}

fn build_grid(p: &ProteinStructure, cfg: &PocketConfig) -> Result<Grid, PocketError> {
    let (lo, hi) = p.bounds();
    let center: [f64; 3] = std::array::from_fn(|k| 0.5 * (lo[k] + hi[k]));
    let half: [i64; 3] = std::array::from_fn(|k| ((0.5 * (hi[k] - lo[k]) + cfg.pad) / cfg.grid).ceil() as i64);
    let dims: [usize; 3] = std::array::from_fn(|k| 2 * half[k] as usize + 1);
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if total > MAX_GRID_POINTS {
        return Err(PocketError::GridTooLarge(total));
    }
    Ok(Grid { center, half, dims, spacing: cfg.grid })
}

fn occupancy(p: &ProteinStructure, grid: &Grid, occl: f64) -> Vec<bool> {
    let mut occ = vec![false; grid.len()];
    let r2 = occl * occl;
    let reach = (occl / grid.spacing).ceil() as i64 + 1;
    for atom in &p.atoms {
        // nearest grid index of the atom, then scan the surrounding cube
        let base: [i64; 3] =
            std::array::from_fn(|k| ((atom.coords[k] - grid.center[k]) / grid.spacing).round() as i64 + grid.half[k]);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let i = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if (0..3).any(|k| i[k] < 0 || i[k] >= grid.dims[k] as i64) {
                        continue;
                    }
                    let i = [i[0] as usize, i[1] as usize, i[2] as usize];
                    let c = grid.coord(i);
                    let d2: f64 = (0..3).map(|k| (c[k] - atom.coords[k]).powi(2)).sum();
                    if d2 <= r2 {
                        occ[grid.index(i)] = true;
                    }
                }
            }
        }
    }
    occ
}

const AXES: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn diagonals() -> impl Iterator<Item = [i64; 3]> {
    (0..8).map(|m| std::array::from_fn(|k| if m >> k & 1 == 1 { -1 } else { 1 }))
}

fn ray_blocked(grid: &Grid, occ: &[bool], i: [usize; 3], d: [i64; 3], steps: i64) -> bool {
    (1..=steps).any(|m| match grid.offset(i, [d[0] * m, d[1] * m, d[2] * m]) {
        Some(j) => occ[grid.index(j)],
        None => false,
    })
}

fn buriedness(grid: &Grid, occ: &[bool], range: f64) -> Vec<u8> {
    let axis_steps = (range / grid.spacing + 1e-9).floor() as i64;
    let diag_steps = (range / (grid.spacing * 3f64.sqrt()) + 1e-9).floor() as i64;
    (0..grid.len())
        .map(|idx| {
            if occ[idx] {
                return 0;
            }
            let i = grid.unindex(idx);
            let axes = AXES.iter().filter(|&&d| ray_blocked(grid, occ, i, d, axis_steps)).count() as u8;
            let diag = diagonals().any(|d| ray_blocked(grid, occ, i, d, diag_steps)) as u8;
            axes + diag
        })
        .collect()
}

fn clusters(grid: &Grid, keep: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for start in 0..grid.len() {
        if !keep[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(idx) = queue.pop_front() {
            let i = grid.unindex(idx);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(j) = grid.offset(i, [dx, dy, dz]) {
                            let jdx = grid.index(j);
                            if keep[jdx] && !seen[jdx] {
                                seen[jdx] = true;
                                members.push(jdx);
                                queue.push_back(jdx);
                            }
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Indices of atoms with coordinates inside `[min, max]` (inclusive), in input order.
pub fn atoms_in_box(p: &ProteinStructure, min: &[f64; 3], max: &[f64; 3]) -> Vec<usize> {
    p.atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| (0..3).all(|k| min[k] <= a.coords[k] && a.coords[k] <= max[k]))
        .map(|(i, _)| i)
        .collect()
}

/// Atom records inside `b`, preserving input order.
pub fn pocket_atoms(p: &ProteinStructure, b: &PocketBox) -> Vec<ProteinAtom> {
    atoms_in_box(p, &b.min_corner, &b.max_corner).into_iter().map(|i| p.atoms[i].clone()).collect()
}

fn fallback(p: &ProteinStructure, margin: f64) -> PocketBox {
    let (lo, hi) = p.bounds();
    let min_corner = lo.map(|v| v - margin);
    let max_corner = hi.map(|v| v + margin);
    PocketBox {
        atom_indices: (0..p.len()).collect(),
        centroid: std::array::from_fn(|k| 0.5 * (min_corner[k] + max_corner[k])),
        min_corner,
        max_corner,
        score: 0.0,
        cluster_size: 0,
    }
}

/// Detects pockets, largest cluster first. Falls back to a single
/// whole-protein box with score 0 when no cluster passes the thresholds.
pub fn find_pockets(p: &ProteinStructure, cfg: &PocketConfig) -> Result<Vec<PocketBox>, PocketError> {
    cfg.validate()?;
    if p.is_empty() {
        return Err(PocketError::Empty);
    }
    let grid = build_grid(p, cfg)?;
    let occ = occupancy(p, &grid, cfg.occl);
    let bur = buriedness(&grid, &occ, cfg.range);
    let keep: Vec<bool> = bur.iter().zip(&occ).map(|(&b, &o)| !o && b >= cfg.min_buried).collect();

    let mut boxes: Vec<PocketBox> = clusters(&grid, &keep)
        .into_iter()
        .filter(|c| c.len() >= cfg.min_cluster)
        .map(|members| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            let mut sum = [0.0; 3];
            let mut score = 0.0;
            for &idx in &members {
                let c = grid.coord(grid.unindex(idx));
                for k in 0..3 {
                    lo[k] = lo[k].min(c[k]);
                    hi[k] = hi[k].max(c[k]);
                    sum[k] += c[k];
                }
                score += bur[idx] as f64;
            }
            let n = members.len() as f64;
            let min_corner = lo.map(|v| v - cfg.margin);
            let max_corner = hi.map(|v| v + cfg.margin);
            PocketBox {
                atom_indices: atoms_in_box(p, &min_corner, &max_corner),
                min_corner,
                max_corner,
                score: score / n,
                cluster_size: members.len(),
                centroid: sum.map(|s| s / n),
            }
        })
        .collect();

    if boxes.is_empty() {
        return Ok(vec![fallback(p, cfg.margin)]);
    }
    boxes.sort_by(|a, b| {
        b.cluster_size.cmp(&a.cluster_size).then_with(|| {
            a.min_corner.iter().zip(&b.min_corner).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    boxes.truncate(cfg.max_pockets);
    Ok(boxes)
}

/// JSON export: corners, score, cluster size and atom count per pocket.
pub fn pockets_to_json(pockets: &[PocketBox]) -> serde_json::Value {
    serde_json::Value::Array(
        pockets
            .iter()
            .enumerate()
            .map(|(i, b)| {
                serde_json::json!({
                    "index": i,
                    "min_corner": b.min_corner,
                    "max_corner": b.max_corner,
                    "score": b.score,
                    "cluster_size": b.cluster_size,
                    "atom_count": b.atom_indices.len(),
                })
            })
            .collect(),
    )
}
