//! Deterministic synthetic datasets: small in-memory collections, the
//! three-molecule density fixture and the large benchmark manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{write_cube, Manifest, SystemEntry, MANIFEST_VERSION};
use crate::model::{
    geometry, AtomFrame, Column, DataKind, Element, FeatureTable, System, SystemCollection, VolumetricGrid,
    DENSITY_COLUMN,
};

/// Named columns of one system.
pub type SystemColumns = (String, Vec<(String, Vec<f64>)>);

/// Collection whose systems carry only the given feature columns.
///
/// Atom systems get hydrogens on a line; voxel systems get a 1 x 1 x n grid
/// whose scalar field is the `density` column when present (otherwise 1).
pub fn table_collection(kind: DataKind, systems: Vec<SystemColumns>) -> Result<SystemCollection> {
    let built = systems
        .into_iter()
        .map(|(id, cols)| {
            let n = cols.first().map_or(0, |c| c.1.len());
            let columns: Vec<Column> = cols.into_iter().map(|(name, v)| Column::new(name, v)).collect();
            let table = FeatureTable::from_columns(n, columns)?;
            Ok(match kind {
                DataKind::Atom => {
                    let pos = (0..n).map(|i| [i as f64 * 1.5, 0.0, 0.0]).collect();
                    System::new(id, Some(AtomFrame::from_symbols(pos, &vec!["H"; n], None, table)?), None)
                }
                DataKind::Voxel => {
                    let values = table
                        .column(DENSITY_COLUMN)
                        .map(|c| c.shared_values().clone())
                        .unwrap_or_else(|| vec![1.0; n].into());
                    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
                    let grid = VolumetricGrid::with_features([0.0; 3], basis, [1, 1, n.max(1)], values, table)?;
                    System::new(id, None, Some(grid))
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SystemCollection::new(built)
}

pub const CASE_STUDY_SYSTEMS: [&str; 3] = ["CO2", "N2O", "HCOOH"];
pub const ERROR_COLUMN: &str = "error";
pub const DERIVATIVE_COLUMN: &str = "derivative";
/// Sidecar columns per voxel: error, derivative and 45 descriptor columns.
pub const CASE_STUDY_FEATURES: usize = 47;

/// Exponential core model per element: amplitude, decay and the slope of
/// the simulated model error against density.
pub fn core_model(e: Element) -> (f64, f64, f64) {
    match e.symbol() {
        "H" => (0.5, 2.0, 0.002),
        "C" => (68.75, 2.6, 0.01),
        "N" => (109.2, 3.0, 0.02),
        "O" => (163.0, 3.4, 0.05),
        _ => {
            let z = e.atomic_number() as f64;
            (z.powi(3) / std::f64::consts::PI, 1.5 + 0.25 * z, 0.005 * z)
        }
    }
}

pub fn case_study_molecules() -> Vec<(String, AtomFrame)> {
    let mk = |syms: &[&str], pos: Vec<[f64; 3]>| {
        AtomFrame::from_symbols(pos, syms, None, FeatureTable::empty(syms.len())).expect("valid molecule")
    };
    vec![
        (
            "CO2".into(),
            mk(&["C", "O", "O"], vec![[0.0, 0.0, 0.0], [1.16, 0.0, 0.0], [-1.16, 0.0, 0.0]]),
        ),
        (
            "N2O".into(),
            mk(&["N", "N", "O"], vec![[-1.128, 0.0, 0.0], [0.0, 0.0, 0.0], [1.184, 0.0, 0.0]]),
        ),
        (
            "HCOOH".into(),
            mk(
                &["C", "O", "O", "H", "H"],
                vec![
                    [0.0, 0.0, 0.0],
                    [1.20, 0.0, 0.0],
                    [-0.67, 1.14, 0.0],
                    [-0.55, -0.94, 0.0],
                    [-0.10, 1.87, 0.0],
                ],
            ),
        ),
    ]
}

/// Density, gradient magnitude and nearest atom at `p`.
pub fn model_density(atoms: &AtomFrame, p: [f64; 3]) -> (f64, f64, usize) {
    let mut rho = 0.0;
    let mut grad = [0.0; 3];
    let mut nearest = (f64::INFINITY, 0);
    for (i, (e, r)) in atoms.elements().iter().zip(atoms.positions()).enumerate() {
        let (a, zeta, _) = core_model(*e);
        let d = geometry::sub(p, *r);
        let dist = geometry::norm(d);
        let v = a * (-zeta * dist).exp();
        rho += v;
        if dist > 1e-12 {
            grad = geometry::add(grad, geometry::scale(d, -zeta * v / dist));
        }
        if dist < nearest.0 {
            nearest = (dist, i);
        }
    }
    (rho, geometry::norm(grad), nearest.1)
}

fn grid_around(atoms: &AtomFrame, spacing: f64, pad: f64) -> ([f64; 3], [usize; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in atoms.positions() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let origin = [lo[0] - pad, lo[1] - pad, lo[2] - pad];
    let shape = [0, 1, 2].map(|k| ((hi[k] - lo[k] + 2.0 * pad) / spacing).ceil() as usize);
    (origin, shape)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the three-molecule fixture (cube + 47-column sidecar per system)
/// and its manifest into `dir`; returns the manifest path.
pub fn write_case_study(dir: &Path, spacing: f64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (s, (id, atoms)) in case_study_molecules().into_iter().enumerate() {
        let (origin, shape) = grid_around(&atoms, spacing, 2.0);
        let basis = [[spacing, 0.0, 0.0], [0.0, spacing, 0.0], [0.0, 0.0, spacing]];
        let n: usize = shape.iter().product();
        let probe = VolumetricGrid::new(origin, basis, shape, vec![0.0; n])?;
        let samples: Vec<(f64, f64, usize)> = (0..n)
            .into_par_iter()
            .map(|i| model_density(&atoms, probe.voxel_center(i)))
            .collect();
        let grid = VolumetricGrid::new(origin, basis, shape, samples.iter().map(|s| s.0).collect())?;
        let cube = write_cube(&grid, &atoms, [&format!("{id} model density"), "synthetic exponential cores"]);
        let cube_name = format!("{}.cube", id.to_lowercase());
        write_file(&dir.join(&cube_name), cube.as_bytes())?;

        let mut header = format!("{ERROR_COLUMN},{DERIVATIVE_COLUMN}");
        for k in 0..CASE_STUDY_FEATURES - 2 {
            let _ = write!(header, ",mcsh_{k}");
        }
        header.push('\n');
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + s as u64);
        let noise: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.clamp(-3.0, 3.0)
            })
            .collect();
        let rows: Vec<String> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (rho, grad, near) = samples[i];
                let (_, _, slope) = core_model(atoms.elements()[near]);
                let dist = geometry::norm(geometry::sub(probe.voxel_center(i), atoms.positions()[near]));
                let mut line = format!("{:.6e},{:.6e}", slope * rho * (1.0 + 0.02 * noise[i]), grad);
                for k in 0..CASE_STUDY_FEATURES - 2 {
                    let shell = 0.1 * k as f64;
                    let v = (-(dist - shell).powi(2) / 0.5).exp() * (1.0 + 0.1 * k as f64) + 1e-3 * noise[(i + k) % n];
                    let _ = write!(line, ",{v:.6e}");
                }
                line.push('\n');
                line
            })
            .collect();
        let csv_name = format!("{}_voxels.csv", id.to_lowercase());
        let mut body = header;
        body.reserve(rows.iter().map(String::len).sum());
        rows.iter().for_each(|r| body.push_str(r));
        write_file(&dir.join(&csv_name), body.as_bytes())?;

        entries.push(SystemEntry {
            id,
            volume: Some(cube_name.into()),
            voxel_features: Some(csv_name.into()),
            ..Default::default()
        });
    }
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        systems: entries,
    };
    let path = dir.join("manifest.json");
    write_file(&path, manifest.to_json().as_bytes())?;
    Ok(path)
}

/// Writes a single-system benchmark manifest: a cube of the given shape and
/// a sidecar of `n_features` correlated columns (one row per voxel).
pub fn write_scale_manifest(dir: &Path, shape: [usize; 3], n_features: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n: usize = shape.iter().product();
    let step = 0.1;
    let basis = [[step, 0.0, 0.0], [0.0, step, 0.0], [0.0, 0.0, step]];
    let probe = VolumetricGrid::new([0.0; 3], basis, shape, vec![0.0; n])?;
    let extent = shape.map(|s| s as f64 * step);
    let blobs = [[0.3, 0.4, 0.5], [0.7, 0.6, 0.4], [0.5, 0.5, 0.8]]
        .map(|f| [f[0] * extent[0], f[1] * extent[1], f[2] * extent[2]]);
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = probe.voxel_center(i);
            1e-3 + blobs
                .iter()
                .map(|b| (-geometry::norm(geometry::sub(p, *b)) * 2.0).exp())
                .sum::<f64>()
        })
        .collect();
    let grid = VolumetricGrid::new([0.0; 3], basis, shape, values)?;
    let atoms = AtomFrame::from_symbols(blobs.to_vec(), &["O", "O", "O"], None, FeatureTable::empty(3))?;
    write_file(&dir.join("scale.cube"), write_cube(&grid, &atoms, ["benchmark density", "synthetic"]).as_bytes())?;

    const LATENT: usize = 3;
    let mut wrng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<[f64; LATENT]> = (0..n_features)
        .map(|_| [0; LATENT].map(|_| wrng.random_range(-1.0..1.0)))
        .collect();
    let mut out = (0..n_features).map(|j| format!("f{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    const ROWS: usize = 16384;
    let chunks: Vec<String> = (0..n.div_ceil(ROWS))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let rows = ROWS.min(n - c * ROWS);
            let mut s = String::with_capacity(rows * n_features * 9);
            for _ in 0..rows {
                let z: [f64; LATENT] = [0; LATENT].map(|_| StandardNormal.sample(&mut rng));
                for (j, w) in weights.iter().enumerate() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let v = w[0] * z[0] + w[1] * z[1] + w[2] * z[2] + 0.5 * e;
                    if j > 0 {
                        s.push(',');
                    }
                    let _ = write!(s, "{v:.5}");
                }
                s.push('\n');
            }
            s
        })
        .collect();
    out.reserve(chunks.iter().map(String::len).sum());
    chunks.iter().for_each(|c| out.push_str(c));
    drop(chunks);
    write_file(&dir.join("scale_voxels.csv"), out.as_bytes())?;

    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        systems: vec![SystemEntry {
            id: "scale".into(),
            volume: Some("scale.cube".into()),
            voxel_features: Some("scale_voxels.csv".into()),
            ..Default::default()
        }],
    };
    let path = dir.join("manifest.json");
    write_file(&path, manifest.to_json().as_bytes())?;
    Ok(path)
}
