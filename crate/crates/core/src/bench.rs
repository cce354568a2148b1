//! Timings of the interactive operations on a loaded collection.

use std::time::Instant;

use serde::Serialize;

use crate::analytics::{correlation_matrix, histogram2d, pca_fit, AxisSpec, HistogramSpec, PcaSpec};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};
use crate::selection::{compute_mask, Brush, CombineMode};

pub const BRUSH_LIMIT_MS: f64 = 200.0;
pub const HISTOGRAM_LIMIT_MS: f64 = 150.0;
pub const CORRELATION_LIMIT_MS: f64 = 2000.0;
pub const PCA_LIMIT_MS: f64 = 3000.0;
pub const DEFAULT_BENCH_COLUMNS: usize = 47;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Pool to measure; defaults to voxels when present.
    pub kind: Option<DataKind>,
    /// Leading schema columns used for correlation and PCA.
    pub columns: usize,
    /// Repetitions of the fast operations; the median is reported.
    pub repeats: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            kind: None,
            columns: DEFAULT_BENCH_COLUMNS,
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub kind: DataKind,
    pub n_points: usize,
    pub n_columns: usize,
    pub threads: usize,
    pub brush_ms: f64,
    pub histogram_ms: f64,
    pub correlation_ms: f64,
    pub pca_ms: f64,
}

impl BenchReport {
    /// (label, measured ms, limit ms).
    pub fn checks(&self) -> [(&'static str, f64, f64); 4] {
        [
            ("brush mask recompute", self.brush_ms, BRUSH_LIMIT_MS),
            ("histogram2d 128x128", self.histogram_ms, HISTOGRAM_LIMIT_MS),
            ("correlation matrix", self.correlation_ms, CORRELATION_LIMIT_MS),
            ("pca fit k=2", self.pca_ms, PCA_LIMIT_MS),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, v, lim)| v < lim)
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{} points x {} columns ({} pool, {} threads)\n",
            self.n_points, self.n_columns, self.kind, self.threads
        );
        for (label, v, lim) in self.checks() {
            let verdict = if v < lim { "ok" } else { "SLOW" };
            s.push_str(&format!("{label:<22} {v:>10.1} ms  (limit {lim:.0} ms) {verdict}\n"));
        }
        s
    }
}

fn median_ms(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut t = Vec::with_capacity(repeats.max(1));
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed().as_secs_f64() * 1e3);
    }
    t.sort_by(f64::total_cmp);
    Ok(t[t.len() / 2])
}

pub fn run_bench(c: &SystemCollection, opts: &BenchOptions) -> Result<BenchReport> {
    let kind = opts.kind.unwrap_or(if c.total(DataKind::Voxel) > 0 { DataKind::Voxel } else { DataKind::Atom });
    let schema = c.schema(kind).unwrap_or(&[]);
    if schema.len() < 2 || c.total(kind) < 3 {
        return Err(Error::InvalidArgument(format!(
            "benchmark needs at least 2 {kind} columns and 3 points"
        )));
    }
    let columns: Vec<String> = schema.iter().take(opts.columns.max(2)).cloned().collect();

    let seg = c.segments(kind);
    let range_of = |name: &str| {
        let j = c.column_index(kind, name)?;
        let lo = seg.iter().map(|s| s.table.column_at(j).finite_min()).fold(f64::INFINITY, f64::min);
        let hi = seg.iter().map(|s| s.table.column_at(j).finite_max()).fold(f64::NEG_INFINITY, f64::max);
        Ok::<_, Error>([lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)])
    };
    let brush = Brush::new(
        "bench",
        "bench",
        kind,
        AxisSpec::column(columns[0].clone()),
        AxisSpec::column(columns[1].clone()),
        range_of(&columns[0])?,
        range_of(&columns[1])?,
    );
    let brushes = [brush];
    let brush_ms = median_ms(opts.repeats, || compute_mask(c, kind, &brushes, CombineMode::Intersection).map(drop))?;

    let spec = HistogramSpec::new(AxisSpec::column(columns[0].clone()), AxisSpec::column(columns[1].clone()));
    let histogram_ms = median_ms(opts.repeats, || histogram2d(c, kind, &spec).map(drop))?;
    let correlation_ms = median_ms(opts.repeats.min(3), || correlation_matrix(c, kind, &columns).map(drop))?;
    let pca = PcaSpec {
        columns: columns.clone(),
        k: 2,
        standardized: true,
    };
    let pca_ms = median_ms(opts.repeats.min(3), || pca_fit(c, kind, &pca).map(drop))?;

    Ok(BenchReport {
        kind,
        n_points: c.total(kind),
        n_columns: columns.len(),
        threads: rayon::current_num_threads(),
        brush_ms,
        histogram_ms,
        correlation_ms,
        pca_ms,
    })
}
