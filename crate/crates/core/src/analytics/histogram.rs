use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::axis::{resolve_axis, AxisSpec, AxisValues};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};
use crate::selection::Bitset;

pub const DEFAULT_BINS: usize = 128;
const TASK_ROWS: usize = 1 << 16;

fn default_bins() -> [usize; 2] {
    [DEFAULT_BINS, DEFAULT_BINS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramSpec {
    pub x: AxisSpec,
    pub y: AxisSpec,
    #[serde(default = "default_bins")]
    pub bins: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_range: Option<[f64; 2]>,
}

impl HistogramSpec {
    pub fn new(x: AxisSpec, y: AxisSpec) -> Self {
        HistogramSpec {
            x,
            y,
            bins: default_bins(),
            x_range: None,
            y_range: None,
        }
    }

    pub fn with_bins(mut self, bx: usize, by: usize) -> Self {
        self.bins = [bx, by];
        self
    }

    pub fn with_ranges(mut self, x: [f64; 2], y: [f64; 2]) -> Self {
        self.x_range = Some(x);
        self.y_range = Some(y);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub bins: [usize; 2],
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// `counts[ix * by + iy]`.
    pub counts: Vec<u64>,
    /// Points considered (all pooled points, or the masked subset).
    pub n_points: usize,
    /// Points outside the range or with a non-finite transformed value.
    pub n_dropped: usize,
    /// Set when every point was dropped.
    pub empty: bool,
}

impl Histogram2D {
    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.bins[1] + iy]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin edges over `[lo, hi]`; the last edge is exactly `hi`.
pub fn make_edges(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::InvalidArgument(format!("invalid bin range [{lo}, {hi}]")));
    }
    let mut e: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * (i as f64 / n as f64)).collect();
    e[n] = hi;
    if e.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "range [{lo}, {hi}] too narrow for {n} bins"
        )));
    }
    Ok(e)
}

/// Bin of `v` under half-open bins with a closed last bin; `None` when outside.
#[inline]
pub fn bin_index(v: f64, edges: &[f64]) -> Option<usize> {
    let n = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[n]);
    if !(v >= lo && v <= hi) {
        return None;
    }
    let mut i = (((v - lo) / (hi - lo)) * n as f64) as usize;
    i = i.min(n - 1);
    while i > 0 && v < edges[i] {
        i -= 1;
    }
    while i + 1 < n && v >= edges[i + 1] {
        i += 1;
    }
    Some(i)
}

fn finite_extent(a: &AxisValues) -> Option<(f64, f64)> {
    let (lo, hi) = (0..a.n_parts())
        .into_par_iter()
        .map(|s| {
            a.raw(s).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                let t = a.transform(v);
                if t.is_finite() {
                    (lo.min(t), hi.max(t))
                } else {
                    (lo, hi)
                }
            })
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    (lo <= hi).then_some((lo, hi))
}

fn axis_edges(a: &AxisValues, range: Option<[f64; 2]>, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1".into()));
    }
    let (lo, hi) = match range {
        Some([lo, hi]) => (lo, hi),
        None => match finite_extent(a) {
            Some((lo, hi)) if hi > lo => (lo, hi + (hi - lo) * 1e-9),
            Some((v, _)) => (v - 0.5, v + 0.5),
            None => (0.0, 1.0),
        },
    };
    make_edges(lo, hi, n)
}

pub fn histogram2d(c: &SystemCollection, kind: DataKind, spec: &HistogramSpec) -> Result<Histogram2D> {
    build(c, kind, spec, None)
}

/// Histogram of the points set in `mask`, binned on the edges the full
/// (unmasked) histogram would use.
pub fn histogram2d_masked(
    c: &SystemCollection,
    kind: DataKind,
    spec: &HistogramSpec,
    mask: &Bitset,
) -> Result<Histogram2D> {
    if mask.len() != c.total(kind) {
        return Err(Error::Shape {
            context: "selection mask".into(),
            expected: c.total(kind),
            found: mask.len(),
        });
    }
    build(c, kind, spec, Some(mask))
}

fn build(c: &SystemCollection, kind: DataKind, spec: &HistogramSpec, mask: Option<&Bitset>) -> Result<Histogram2D> {
    let xa = resolve_axis(c, kind, &spec.x)?;
    let ya = resolve_axis(c, kind, &spec.y)?;
    let [bx, by] = spec.bins;
    let xe = axis_edges(&xa, spec.x_range, bx)?;
    let ye = axis_edges(&ya, spec.y_range, by)?;

    let mut tasks = Vec::new();
    for s in 0..xa.n_parts() {
        let len = xa.raw(s).len();
        let mut a = 0;
        while a < len {
            let b = (a + TASK_ROWS).min(len);
            tasks.push((s, a, b));
            a = b;
        }
    }
    let (counts, considered, binned) = tasks
        .par_iter()
        .map(|&(s, a, b)| {
            let mut counts = vec![0u64; bx * by];
            let (xs, ys) = (&xa.raw(s)[a..b], &ya.raw(s)[a..b]);
            let start = xa.start(s) + a;
            let mut considered = 0usize;
            let mut binned = 0usize;
            for (r, (&x, &y)) in xs.iter().zip(ys).enumerate() {
                if let Some(m) = mask {
                    if !m.get(start + r) {
                        continue;
                    }
                }
                considered += 1;
                let (Some(i), Some(j)) = (bin_index(xa.transform(x), &xe), bin_index(ya.transform(y), &ye)) else {
                    continue;
                };
                counts[i * by + j] += 1;
                binned += 1;
            }
            (counts, considered, binned)
        })
        .reduce(
            || (vec![0u64; bx * by], 0, 0),
            |mut a, b| {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    *x += y;
                }
                (a.0, a.1 + b.1, a.2 + b.2)
            },
        );
    let n_dropped = considered - binned;
    Ok(Histogram2D {
        x: spec.x.clone(),
        y: spec.y.clone(),
        bins: spec.bins,
        x_edges: xe,
        y_edges: ye,
        counts,
        n_points: considered,
        n_dropped,
        empty: considered > 0 && binned == 0,
    })
}
