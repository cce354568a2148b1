//! Session manifest: a JSON document listing the systems to load.
//!
//! ```json
//! {
//!   "manifest_version": 1,
//!   "systems": [
//!     { "id": "CO2", "volume": "co2.cube", "voxel_features": "co2_voxels.csv",
//!       "units": { "density": "e/bohr^3" } },
//!     { "id": "water", "atoms": "water.xyz", "frame": 0 }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{cube, extxyz, feature_csv};
use crate::error::{Error, Result};
use crate::model::{SourceFile, System, SystemCollection};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub systems: Vec<SystemEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemEntry {
    pub id: String,
    /// Extended XYZ file; takes precedence over the atoms embedded in a cube.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<PathBuf>,
    /// Frame of a multi-frame atoms file (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
    /// Gaussian cube file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxel_features: Option<PathBuf>,
    /// Column name to unit string.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, String>,
}

impl Manifest {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(bytes)?;
        if m.manifest_version > MANIFEST_VERSION || m.manifest_version == 0 {
            return Err(Error::Version {
                what: "manifest",
                found: m.manifest_version as u64,
                supported: MANIFEST_VERSION as u64,
            });
        }
        for s in &m.systems {
            if s.atoms.is_none() && s.volume.is_none() {
                return Err(Error::Schema(format!(
                    "system `{}` has no data source (needs `atoms` or `volume`)",
                    s.id
                )));
            }
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SystemCollection> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let manifest = Manifest::from_json(&bytes)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut collection = load_with_base(&manifest, base, Some(SourceFile {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    }))?;
    collection.set_manifest_path(path);
    Ok(collection)
}

/// Loads every system of `manifest`, resolving relative paths against `base`.
pub fn load_with_base(
    manifest: &Manifest,
    base: &Path,
    manifest_source: Option<SourceFile>,
) -> Result<SystemCollection> {
    let loaded: Vec<Result<(System, Vec<SourceFile>)>> = manifest
        .systems
        .par_iter()
        .map(|entry| load_system(entry, base))
        .collect();
    let mut systems = Vec::with_capacity(loaded.len());
    let mut sources: Vec<SourceFile> = manifest_source.into_iter().collect();
    for l in loaded {
        let (s, src) = l?;
        systems.push(s);
        sources.extend(src);
    }
    SystemCollection::with_sources(systems, sources)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_system(entry: &SystemEntry, base: &Path) -> Result<(System, Vec<SourceFile>)> {
    let mut sources = Vec::new();
    let mut read = |p: &Path| -> Result<Vec<u8>> {
        let full = resolve(base, p);
        let bytes = read_file(&full)?;
        sources.push(SourceFile {
            path: p.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    };
    let context = |e: Error, file: &Path| match e {
        Error::Parse(mut pe) => {
            pe.message = format!("{} ({}): {}", entry.id, file.display(), pe.message);
            Error::Parse(pe)
        }
        other => other,
    };

    let (mut grid, cube_atoms) = match &entry.volume {
        Some(p) => {
            let c = cube::parse_cube(&read(p)?).map_err(|e| context(e, p))?;
            (Some(c.grid), Some(c.atoms))
        }
        None => (None, None),
    };
    let mut atoms = match &entry.atoms {
        Some(p) => {
            let mut frames = extxyz::parse_extxyz(&read(p)?).map_err(|e| context(e, p))?;
            let idx = entry.frame.unwrap_or(0);
            if idx >= frames.len() {
                return Err(Error::Range {
                    what: "atoms frame",
                    index: idx as u64,
                    len: frames.len() as u64,
                });
            }
            Some(frames.swap_remove(idx))
        }
        None => cube_atoms,
    };

    if let Some(p) = &entry.atom_features {
        let frame = atoms.take().ok_or_else(|| {
            Error::Schema(format!("system `{}`: atom_features given without atoms", entry.id))
        })?;
        let sidecar = feature_csv::parse_feature_csv(&read(p)?, frame.len())
            .map_err(|e| sidecar_context(e, &entry.id, p))?;
        let merged = frame.features().merge(&sidecar).map_err(|e| sidecar_context(e, &entry.id, p))?;
        atoms = Some(frame.with_features(merged)?);
    }
    if let Some(p) = &entry.voxel_features {
        let g = grid.take().ok_or_else(|| {
            Error::Schema(format!("system `{}`: voxel_features given without a volume", entry.id))
        })?;
        let sidecar = feature_csv::parse_feature_csv(&read(p)?, g.len())
            .map_err(|e| sidecar_context(e, &entry.id, p))?;
        let merged = g.features().merge(&sidecar).map_err(|e| sidecar_context(e, &entry.id, p))?;
        grid = Some(g.replace_features(merged)?);
    }

    if !entry.units.is_empty() {
        if let Some(frame) = atoms.take() {
            let mut t = frame.features().clone();
            for (c, u) in &entry.units {
                t.set_unit(c, u);
            }
            atoms = Some(frame.with_features(t)?);
        }
        if let Some(g) = grid.take() {
            let mut t = g.features().clone();
            for (c, u) in &entry.units {
                t.set_unit(c, u);
            }
            grid = Some(g.replace_features(t)?);
        }
    }
    Ok((System::new(entry.id.clone(), atoms, grid), sources))
}

fn sidecar_context(e: Error, id: &str, p: &Path) -> Error {
    match e {
        Error::Shape { expected, found, .. } => Error::Shape {
            context: format!("sidecar {} of system `{id}`", p.display()),
            expected,
            found,
        },
        Error::Schema(m) => Error::Schema(format!("system `{id}` ({}): {m}", p.display())),
        other => other,
    }
}
