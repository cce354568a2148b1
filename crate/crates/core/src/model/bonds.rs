use std::collections::HashMap;

use super::frame::AtomFrame;
use super::geometry::{self, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_BOND_TOLERANCE: f64 = 1.2;

/// Unordered atom pairs, stored as `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BondList {
    pairs: Vec<(u32, u32)>,
}

impl BondList {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut pairs: Vec<(u32, u32)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        BondList { pairs }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.pairs.binary_search(&(a.min(b), a.max(b))).is_ok()
    }
}

/// Bonds every pair closer than `tolerance * (r_i + r_j)`, using the
/// minimum-image distance along periodic axes.
pub fn infer_bonds(frame: &AtomFrame, tolerance: f64) -> Result<BondList> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bond tolerance must be positive, got {tolerance}"
        )));
    }
    let n = frame.len();
    if n < 2 {
        return Ok(BondList::default());
    }
    let radii: Vec<f64> = frame.elements().iter().map(|e| e.covalent_radius()).collect();
    let pos = frame.positions();
    let within = |i: usize, j: usize, d2: f64| {
        let cut = tolerance * (radii[i] + radii[j]);
        d2 <= cut * cut
    };

    let pairs = match frame.cell().filter(|c| c.is_periodic()) {
        Some(cell) => {
            let images = MinimumImage::new(&cell.matrix, cell.pbc)?;
            let mut out = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if within(i, j, images.distance_sq(pos[i], pos[j])) {
                        out.push((i as u32, j as u32));
                    }
                }
            }
            out
        }
        None => neighbor_pairs(pos, radii.iter().cloned().fold(0.0, f64::max) * 2.0 * tolerance, within),
    };
    Ok(BondList::from_pairs(pairs))
}

fn neighbor_pairs(pos: &[Vec3], cell_size: f64, within: impl Fn(usize, usize, f64) -> bool) -> Vec<(u32, u32)> {
    let key = |p: Vec3| -> [i64; 3] { p.map(|c| (c / cell_size).floor() as i64) };
    let mut bins: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, &p) in pos.iter().enumerate() {
        bins.entry(key(p)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (i, &p) in pos.iter().enumerate() {
        let k = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(cands) = bins.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in cands {
                        if j > i {
                            let d = geometry::sub(pos[j], p);
                            if within(i, j, geometry::dot(d, d)) {
                                out.push((i as u32, j as u32));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

struct MinimumImage {
    lattice: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
    pbc: [bool; 3],
}

impl MinimumImage {
    fn new(lattice: &[[f64; 3]; 3], pbc: [bool; 3]) -> Result<Self> {
        let inverse = geometry::inverse(lattice)
            .ok_or_else(|| Error::InvalidArgument("singular periodic cell".into()))?;
        Ok(MinimumImage {
            lattice: *lattice,
            inverse,
            pbc,
        })
    }

    /// Wraps the fractional separation into [-0.5, 0.5) and then checks the
    /// neighbouring images, which is exact for skewed cells as well.
    fn distance_sq(&self, a: Vec3, b: Vec3) -> f64 {
        let mut f = geometry::cart_to_frac(&self.inverse, geometry::sub(b, a));
        for k in 0..3 {
            if self.pbc[k] {
                f[k] -= f[k].round();
            }
        }
        let span = |k: usize| if self.pbc[k] { -1..=1 } else { 0..=0 };
        let mut best = f64::INFINITY;
        for i in span(0) {
            for j in span(1) {
                for l in span(2) {
                    let g = [f[0] + i as f64, f[1] + j as f64, f[2] + l as f64];
                    let d = geometry::frac_to_cart(&self.lattice, g);
                    best = best.min(geometry::dot(d, d));
                }
            }
        }
        best
    }
}
