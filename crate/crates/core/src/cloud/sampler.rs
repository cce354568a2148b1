//! Density-proportional point clouds.
//!
//! The exact point budget `M` is split over voxels as a multinomial draw
//! with `p_i = v_i / sum(v)`. The draw is realized by recursive binomial
//! splitting of voxel ranges, each node using its own counter-keyed RNG
//! stream, so the result is independent of how the recursion is scheduled
//! across threads. Each voxel then jitters its points uniformly inside its
//! parallelepiped with a stream keyed by the voxel index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::VolumetricGrid;

/// Jitter stays this far (in voxel units) from the voxel faces, so float
/// rounding can never push a point into a neighbouring voxel.
const FACE_MARGIN: f64 = 1e-7;
const PARALLEL_SPLIT: usize = 1 << 16;
const NODE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub source_voxel: Vec<u32>,
    pub seed: u64,
    /// Voxels whose value was negative or non-finite and was treated as zero.
    pub n_clamped: usize,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Per-voxel point counts (length = grid size).
    pub fn counts(&self, n_voxels: usize) -> Vec<u32> {
        let mut c = vec![0u32; n_voxels];
        for &v in &self.source_voxel {
            c[v as usize] += 1;
        }
        c
    }
}

/// Sampling weights and the number of clamped voxels.
pub fn clamped_weights(values: &[f64]) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let w = values
        .iter()
        .map(|&v| {
            if v.is_finite() && v >= 0.0 {
                v
            } else {
                clamped += 1;
                0.0
            }
        })
        .collect();
    (w, clamped)
}

/// Multinomial allocation of `total` points over `weights`.
pub fn multinomial_counts(weights: &[f64], total: u64, seed: u64) -> Result<Vec<u32>> {
    let mut counts = vec![0u32; weights.len()];
    if total == 0 {
        return Ok(counts);
    }
    if total > u32::MAX as u64 {
        return Err(Error::InvalidArgument(format!("point budget {total} too large")));
    }
    let mut prefix = Vec::with_capacity(weights.len() + 1);
    let mut acc = 0.0f64;
    prefix.push(0.0);
    for &w in weights {
        acc += w;
        prefix.push(acc);
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::DegenerateField(
            "cannot sample points from a field whose clamped values sum to zero".into(),
        ));
    }
    split(&prefix, 0, weights.len(), total, 0, seed, &mut counts);
    Ok(counts)
}

fn node_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn split(prefix: &[f64], a: usize, b: usize, n: u64, depth: u64, seed: u64, out: &mut [u32]) {
    if n == 0 {
        return;
    }
    if b - a == 1 {
        out[0] = n as u32;
        return;
    }
    let m = a + (b - a) / 2;
    let wt = prefix[b] - prefix[a];
    let wl = prefix[m] - prefix[a];
    let p = if wt > 0.0 { (wl / wt).clamp(0.0, 1.0) } else { 0.5 };
    let left = if p == 0.0 {
        0
    } else if p == 1.0 {
        n
    } else {
        let mut rng = node_rng(seed, NODE_STREAM_BIT | (depth << 48) | a as u64);
        Binomial::new(n, p).expect("valid binomial").sample(&mut rng)
    };
    let (lo, hi) = out.split_at_mut(m - a);
    if b - a > PARALLEL_SPLIT {
        rayon::join(
            || split(prefix, a, m, left, depth + 1, seed, lo),
            || split(prefix, m, b, n - left, depth + 1, seed, hi),
        );
    } else {
        split(prefix, a, m, left, depth + 1, seed, lo);
        split(prefix, m, b, n - left, depth + 1, seed, hi);
    }
}

pub fn sample_point_cloud(grid: &VolumetricGrid, target_count: usize, seed: u64) -> Result<PointCloud> {
    if grid.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("grid too large for 32-bit voxel indices".into()));
    }
    let (weights, n_clamped) = clamped_weights(grid.values());
    let counts = multinomial_counts(&weights, target_count as u64, seed)?;

    const BLOCK: usize = 4096;
    let blocks: Vec<(Vec<[f64; 3]>, Vec<u32>)> = counts
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let n: usize = chunk.iter().map(|&c| c as usize).sum();
            let mut pos = Vec::with_capacity(n);
            let mut src = Vec::with_capacity(n);
            for (k, &c) in chunk.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let voxel = b * BLOCK + k;
                let [ix, iy, iz] = grid.unravel(voxel);
                let mut rng = node_rng(seed, voxel as u64);
                for _ in 0..c {
                    let mut j = || FACE_MARGIN + (1.0 - 2.0 * FACE_MARGIN) * rng.random::<f64>();
                    let f = [ix as f64 + j(), iy as f64 + j(), iz as f64 + j()];
                    pos.push(grid.grid_to_cart(f));
                    src.push(voxel as u32);
                }
            }
            (pos, src)
        })
        .collect();

    let mut positions = Vec::with_capacity(target_count);
    let mut source_voxel = Vec::with_capacity(target_count);
    for (p, s) in blocks {
        positions.extend(p);
        source_voxel.extend(s);
    }
    Ok(PointCloud {
        positions,
        source_voxel,
        seed,
        n_clamped,
    })
}
