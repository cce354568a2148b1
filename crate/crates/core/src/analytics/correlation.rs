use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{complete_row_moments, Pooled};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};

/// Pearson correlation over pairwise-complete observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub column_names: Vec<String>,
    /// Row-major F x F.
    pub r: Vec<f64>,
    /// Zero-variance columns; their off-diagonal entries are 0.
    pub degenerate: Vec<bool>,
    /// Pairs (i < j, plus (i, i)) with fewer than two complete observations; NaN in `r`.
    pub insufficient: Vec<(usize, usize)>,
}

impl CorrelationMatrix {
    pub fn len(&self) -> usize {
        self.column_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.column_names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.len() + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let key = (i.min(j), i.max(j));
        if self.insufficient.contains(&key) {
            return Err(Error::InsufficientData(format!(
                "fewer than 2 complete pairs for `{}` / `{}`",
                self.column_names[i], self.column_names[j]
            )));
        }
        Ok(self.get(i, j))
    }
}

pub fn correlation_matrix(c: &SystemCollection, kind: DataKind, columns: &[String]) -> Result<CorrelationMatrix> {
    Ok(correlate(&Pooled::new(c, kind, columns)?))
}

pub fn correlation_columns(names: &[String], columns: &[&[f64]]) -> Result<CorrelationMatrix> {
    let n = columns.first().map_or(0, |c| c.len());
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("names and equal-length columns required".into()));
    }
    Ok(correlate(&Pooled {
        names: names.to_vec(),
        parts: vec![columns.to_vec()],
        n,
    }))
}

struct ColumnStats {
    n_finite: usize,
    mean: f64,
    min: f64,
    max: f64,
}

fn column_stats(p: &Pooled, j: usize) -> ColumnStats {
    let (n, sum, min, max) = p.parts.iter().map(|part| part[j]).fold(
        (0usize, 0.0f64, f64::INFINITY, f64::NEG_INFINITY),
        |(n, s, lo, hi), col| {
            col.iter().filter(|v| v.is_finite()).fold((n, s, lo, hi), |(n, s, lo, hi), &v| {
                (n + 1, s + v, lo.min(v), hi.max(v))
            })
        },
    );
    ColumnStats {
        n_finite: n,
        mean: if n > 0 { sum / n as f64 } else { 0.0 },
        min,
        max,
    }
}

fn pearson(n: f64, sx: f64, sy: f64, sxx: f64, syy: f64, sxy: f64) -> f64 {
    let vx = sxx - sx * sx / n;
    let vy = syy - sy * sy / n;
    let cxy = sxy - sx * sy / n;
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (cxy / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
}

fn masked_pair(p: &Pooled, i: usize, j: usize, mi: f64, mj: f64) -> (usize, f64) {
    let mut acc = [0.0f64; 5];
    let mut n = 0usize;
    for part in &p.parts {
        for (&x, &y) in part[i].iter().zip(part[j]) {
            if x.is_finite() && y.is_finite() {
                let (x, y) = (x - mi, y - mj);
                acc[0] += x;
                acc[1] += y;
                acc[2] += x * x;
                acc[3] += y * y;
                acc[4] += x * y;
                n += 1;
            }
        }
    }
    if n < 2 {
        return (n, f64::NAN);
    }
    (n, pearson(n as f64, acc[0], acc[1], acc[2], acc[3], acc[4]))
}

fn correlate(p: &Pooled) -> CorrelationMatrix {
    let f = p.width();
    let stats: Vec<ColumnStats> = (0..f).map(|j| column_stats(p, j)).collect();
    let degenerate: Vec<bool> = stats.iter().map(|s| s.n_finite >= 1 && s.min == s.max).collect();
    let mut r = vec![0.0; f * f];
    let mut insufficient = Vec::new();

    // Columns without any non-finite value go through one blocked Gram pass.
    let complete: Vec<usize> = (0..f).filter(|&j| stats[j].n_finite == p.n).collect();
    if p.n >= 2 && !complete.is_empty() {
        let sub = Pooled {
            names: complete.iter().map(|&j| p.names[j].clone()).collect(),
            parts: p.parts.iter().map(|part| complete.iter().map(|&j| part[j]).collect()).collect(),
            n: p.n,
        };
        let shift: Vec<f64> = complete.iter().map(|&j| stats[j].mean).collect();
        let m = complete_row_moments(&sub, &shift);
        let w = complete.len();
        let nf = m.n as f64;
        for a in 0..w {
            for b in a + 1..w {
                let v = pearson(
                    nf,
                    m.sum[a],
                    m.sum[b],
                    m.gram[a * w + a],
                    m.gram[b * w + b],
                    m.gram[a * w + b],
                );
                r[complete[a] * f + complete[b]] = v;
            }
        }
    }

    let masked: Vec<(usize, usize)> = (0..f)
        .flat_map(|i| (i + 1..f).map(move |j| (i, j)))
        .filter(|&(i, j)| !(p.n >= 2 && stats[i].n_finite == p.n && stats[j].n_finite == p.n))
        .collect();
    let results: Vec<(usize, f64)> = masked
        .par_iter()
        .map(|&(i, j)| masked_pair(p, i, j, stats[i].mean, stats[j].mean))
        .collect();
    for (&(i, j), &(n, v)) in masked.iter().zip(&results) {
        r[i * f + j] = v;
        if n < 2 {
            insufficient.push((i, j));
        }
    }

    for i in 0..f {
        for j in i + 1..f {
            if (degenerate[i] || degenerate[j]) && !r[i * f + j].is_nan() {
                r[i * f + j] = 0.0;
            }
            r[j * f + i] = r[i * f + j];
        }
        r[i * f + i] = if stats[i].n_finite < 2 {
            insufficient.push((i, i));
            f64::NAN
        } else if degenerate[i] {
            0.0
        } else {
            1.0
        };
    }
    insufficient.sort_unstable();
    CorrelationMatrix {
        column_names: p.names.clone(),
        r,
        degenerate,
        insufficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corr(cols: &[Vec<f64>]) -> CorrelationMatrix {
        let names: Vec<String> = (0..cols.len()).map(|j| format!("c{j}")).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        correlation_columns(&names, &refs).unwrap()
    }

    /// Textbook two-pass Pearson over pairwise-complete rows.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(&a, &b)| (a, b)).collect();
        let n = pairs.len() as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn linear_relations() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = corr(&[x.clone(), x.iter().map(|v| 2.0 * v).collect(), x.iter().map(|v| -v).collect()]);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((m.get(0, 2) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_signs() {
        let m = corr(&[vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]]);
        assert!(m.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_insufficient() {
        let nan = f64::NAN;
        let m = corr(&[
            vec![1.0, 2.0, 3.0, 4.0],
            vec![5.0, 5.0, 5.0, 5.0],
            vec![nan, nan, nan, 1.0],
            vec![1.0, nan, 2.0, 7.0],
        ]);
        assert_eq!(m.degenerate, vec![false, true, true, false]);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(m.get(0, 2).is_nan());
        assert!(m.entry(2, 0).is_err());
        assert!(m.entry(0, 3).is_ok());
        assert!((m.get(0, 3) - oracle(&[1.0, nan, 3.0, 4.0], &[1.0, nan, 2.0, 7.0])).abs() < 1e-12);
        assert!(m.insufficient.contains(&(2, 2)));
    }

    proptest! {
        #[test]
        fn matches_oracle_and_invariants(
            data in prop::collection::vec(prop::collection::vec(prop_oneof![9 => -100.0f64..100.0, 1 => Just(f64::NAN)], 30), 2..6),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let m = corr(&data);
            let f = data.len();
            for i in 0..f {
                for j in 0..f {
                    let v = m.get(i, j);
                    let w = m.get(j, i);
                    prop_assert!(v.to_bits() == w.to_bits());
                    if v.is_finite() {
                        prop_assert!(v.abs() <= 1.0 + 1e-12);
                    }
                    if i != j && !m.degenerate[i] && !m.degenerate[j] && v.is_finite() {
                        prop_assert!((v - oracle(&data[i], &data[j])).abs() < 1e-10);
                    }
                }
                if !m.degenerate[i] {
                    prop_assert!((m.get(i, i) - 1.0).abs() < 1e-12);
                }
            }
            let mut shifted = data.clone();
            shifted[0] = shifted[0].iter().map(|x| a * x + b).collect();
            let ms = corr(&shifted);
            for j in 1..f {
                let (v, w) = (m.get(0, j), ms.get(0, j));
                if v.is_finite() && !m.degenerate[0] && !m.degenerate[j] {
                    prop_assert!((w - a.signum() * v).abs() < 1e-12, "{} vs {}", w, v);
                }
            }
        }
    }
}
