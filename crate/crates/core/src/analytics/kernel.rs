//! Blocked, deterministic column reductions shared by correlation and PCA.
//!
//! Rows are visited in fixed-size blocks and blocks are grouped into fixed
//! tasks; partial results are combined in task order, so sums do not depend
//! on the number of worker threads.

use rayon::prelude::*;

use crate::error::Result;
use crate::model::{DataKind, SystemCollection};

pub(crate) const BLOCK_ROWS: usize = 1024;
const BLOCKS_PER_TASK: usize = 16;

/// Selected columns of a pooled kind, as per-segment slices.
pub(crate) struct Pooled<'a> {
    pub names: Vec<String>,
    /// parts[segment][column]
    pub parts: Vec<Vec<&'a [f64]>>,
    pub n: usize,
}

impl<'a> Pooled<'a> {
    pub fn new(c: &'a SystemCollection, kind: DataKind, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| c.column_index(kind, n))
            .collect::<Result<_>>()?;
        let parts = c
            .segments(kind)
            .iter()
            .map(|s| idx.iter().map(|&j| s.table.column_at(j).values()).collect())
            .collect();
        Ok(Pooled {
            names: names.to_vec(),
            parts,
            n: c.total(kind),
        })
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    fn blocks(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (s, p) in self.parts.iter().enumerate() {
            let len = p.first().map_or(0, |c| c.len());
            let mut a = 0;
            while a < len {
                let b = (a + BLOCK_ROWS).min(len);
                out.push((s, a, b));
                a = b;
            }
        }
        out
    }

    /// Folds `f` over blocks of column slices with a deterministic reduction.
    pub fn fold_blocks<T, F, R>(&self, init: impl Fn() -> T + Sync, f: F, reduce: R) -> T
    where
        T: Send,
        F: Fn(&mut T, &[&[f64]]) + Sync,
        R: Fn(&mut T, T),
    {
        let blocks = self.blocks();
        let partials: Vec<T> = blocks
            .par_chunks(BLOCKS_PER_TASK)
            .map(|group| {
                let mut acc = init();
                let mut cols: Vec<&[f64]> = Vec::with_capacity(self.width());
                for &(s, a, b) in group {
                    cols.clear();
                    cols.extend(self.parts[s].iter().map(|c| &c[a..b]));
                    f(&mut acc, &cols);
                }
                acc
            })
            .collect();
        let mut out = init();
        for p in partials {
            reduce(&mut out, p);
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn row_valid(cols: &[&[f64]], valid: &mut Vec<bool>) -> usize {
    let len = cols.first().map_or(0, |c| c.len());
    valid.clear();
    valid.resize(len, true);
    for c in cols {
        for (v, x) in valid.iter_mut().zip(c.iter()) {
            *v &= x.is_finite();
        }
    }
    valid.iter().filter(|&&v| v).count()
}

/// Count and per-column sums over rows finite in every selected column.
pub(crate) fn complete_row_sums(p: &Pooled) -> (usize, Vec<f64>) {
    let f = p.width();
    let (n, sum, _) = p.fold_blocks(
        || (0usize, vec![0.0; f], Vec::new()),
        |(n, sum, valid): &mut (usize, Vec<f64>, Vec<bool>), cols| {
            *n += row_valid(cols, valid);
            for (j, c) in cols.iter().enumerate() {
                let mut s = 0.0;
                for (x, &ok) in c.iter().zip(valid.iter()) {
                    if ok {
                        s += x;
                    }
                }
                sum[j] += s;
            }
        },
        |a, b| {
            a.0 += b.0;
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                *x += y;
            }
        },
    );
    (n, sum)
}

/// Sums over complete rows of `x - shift`: count, column sums and the full
/// symmetric Gram matrix (row-major F x F).
pub(crate) struct Moments {
    pub n: usize,
    pub sum: Vec<f64>,
    pub gram: Vec<f64>,
}

pub(crate) fn complete_row_moments(p: &Pooled, shift: &[f64]) -> Moments {
    let f = p.width();
    let (n, sum, upper, _, _) = p.fold_blocks(
        || (0usize, vec![0.0; f], vec![0.0; f * f], Vec::new(), Vec::new()),
        |(n, sum, g, valid, buf): &mut (usize, Vec<f64>, Vec<f64>, Vec<bool>, Vec<f64>), cols| {
            let len = cols.first().map_or(0, |c| c.len());
            *n += row_valid(cols, valid);
            buf.clear();
            buf.resize(f * len, 0.0);
            for (j, c) in cols.iter().enumerate() {
                let row = &mut buf[j * len..(j + 1) * len];
                let mut s = 0.0;
                for ((o, &x), &ok) in row.iter_mut().zip(c.iter()).zip(valid.iter()) {
                    if ok {
                        *o = x - shift[j];
                        s += *o;
                    }
                }
                sum[j] += s;
            }
            for i in 0..f {
                let bi = &buf[i * len..(i + 1) * len];
                for j in i..f {
                    g[i * f + j] += dot(bi, &buf[j * len..(j + 1) * len]);
                }
            }
        },
        |a, b| {
            a.0 += b.0;
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                *x += y;
            }
            for (x, y) in a.2.iter_mut().zip(&b.2) {
                *x += y;
            }
        },
    );
    let mut gram = upper;
    for i in 0..f {
        for j in 0..i {
            gram[i * f + j] = gram[j * f + i];
        }
    }
    Moments { n, sum, gram }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 3.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }
}
