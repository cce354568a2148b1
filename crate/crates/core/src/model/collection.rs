use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::AtomFrame;
use super::geometry::Vec3;
use super::grid::VolumetricGrid;
use super::table::FeatureTable;
use crate::analytics::ModelCache;
use crate::error::{Error, Result};

/// The two point populations: atoms (irregular) and voxels (regular).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Atom,
    Voxel,
}

impl DataKind {
    pub const ALL: [DataKind; 2] = [DataKind::Atom, DataKind::Voxel];

    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Atom => "atom",
            DataKind::Voxel => "voxel",
        }
    }

    pub(crate) fn slot(self) -> usize {
        match self {
            DataKind::Atom => 0,
            DataKind::Voxel => 1,
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atom" | "atoms" => Ok(DataKind::Atom),
            "voxel" | "voxels" => Ok(DataKind::Voxel),
            other => Err(Error::InvalidArgument(format!("unknown data kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct System {
    pub id: String,
    pub atoms: Option<AtomFrame>,
    pub grid: Option<VolumetricGrid>,
}

impl System {
    pub fn new(id: impl Into<String>, atoms: Option<AtomFrame>, grid: Option<VolumetricGrid>) -> Self {
        System {
            id: id.into(),
            atoms,
            grid,
        }
    }

    pub fn table(&self, kind: DataKind) -> Option<&FeatureTable> {
        match kind {
            DataKind::Atom => self.atoms.as_ref().map(|a| a.features()),
            DataKind::Voxel => self.grid.as_ref().map(|g| g.features()),
        }
    }

    pub fn len(&self, kind: DataKind) -> usize {
        self.table(kind).map_or(0, |t| t.n_points())
    }

    /// Cartesian position of a point: atom position or voxel center.
    pub fn position(&self, kind: DataKind, local: usize) -> Option<Vec3> {
        match kind {
            DataKind::Atom => self.atoms.as_ref()?.positions().get(local).copied(),
            DataKind::Voxel => {
                let g = self.grid.as_ref()?;
                (local < g.len()).then(|| g.voxel_center(local))
            }
        }
    }
}

/// A data file the collection was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub sha256: String,
}

/// A point addressed by system position in the collection and local index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PointRef {
    pub system: usize,
    pub local: usize,
}

/// A contiguous run of pooled points belonging to one system.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub system: usize,
    pub offset: usize,
    pub table: &'a FeatureTable,
}

impl Segment<'_> {
    pub fn len(&self) -> usize {
        self.table.n_points()
    }

    pub fn is_empty(&self) -> bool {
        self.table.n_points() == 0
    }
}

/// Ordered set of systems whose points are pooled per data kind.
#[derive(Debug)]
pub struct SystemCollection {
    systems: Vec<System>,
    // offsets[kind][s] is the first global index of system s; last entry is the total.
    offsets: [Vec<usize>; 2],
    schemas: [Option<Vec<String>>; 2],
    sources: Vec<SourceFile>,
    data_version: u64,
    manifest_path: Option<PathBuf>,
    pub(crate) models: ModelCache,
}

impl SystemCollection {
    pub fn new(systems: Vec<System>) -> Result<Self> {
        Self::with_sources(systems, Vec::new())
    }

    pub fn with_sources(systems: Vec<System>, sources: Vec<SourceFile>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &systems {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Schema(format!("duplicate system id `{}`", s.id)));
            }
        }
        let mut schemas: [Option<Vec<String>>; 2] = [None, None];
        for kind in DataKind::ALL {
            let mut reference: Option<(&str, Vec<&str>)> = None;
            for s in &systems {
                let Some(table) = s.table(kind) else { continue };
                let names = table.column_names();
                match &reference {
                    None => reference = Some((&s.id, names)),
                    Some((ref_id, ref_names)) => {
                        if *ref_names != names {
                            return Err(schema_mismatch(kind, ref_id, ref_names, &s.id, &names));
                        }
                    }
                }
            }
            schemas[kind.slot()] =
                reference.map(|(_, names)| names.into_iter().map(String::from).collect());
        }
        let offsets = DataKind::ALL.map(|kind| {
            let mut acc = 0usize;
            let mut v = Vec::with_capacity(systems.len() + 1);
            v.push(0);
            for s in &systems {
                acc += s.len(kind);
                v.push(acc);
            }
            v
        });
        let data_version = version_of(&sources, &offsets);
        Ok(SystemCollection {
            systems,
            offsets,
            schemas,
            sources,
            data_version,
            manifest_path: None,
            models: ModelCache::default(),
        })
    }

    pub fn systems(&self) -> &[System] {
        &self.systems
    }

    pub fn system(&self, index: usize) -> Option<&System> {
        self.systems.get(index)
    }

    pub fn system_index(&self, id: &str) -> Option<usize> {
        self.systems.iter().position(|s| s.id == id)
    }

    /// Path of the manifest this collection was loaded from, if any.
    pub fn manifest_path(&self) -> Option<&Path> {
        self.manifest_path.as_deref()
    }

    pub(crate) fn set_manifest_path(&mut self, path: &Path) {
        self.manifest_path = Some(path.to_path_buf());
    }

    pub fn sources(&self) -> &[SourceFile] {
        &self.sources
    }

    /// Identifier of the loaded data; changes whenever any source changes.
    pub fn data_version(&self) -> u64 {
        self.data_version
    }

    pub fn total(&self, kind: DataKind) -> usize {
        *self.offsets[kind.slot()].last().unwrap_or(&0)
    }

    /// Pooled feature schema of a kind; `None` when no system has that kind.
    pub fn schema(&self, kind: DataKind) -> Option<&[String]> {
        self.schemas[kind.slot()].as_deref()
    }

    pub fn column_index(&self, kind: DataKind, name: &str) -> Result<usize> {
        self.schema(kind)
            .and_then(|s| s.iter().position(|c| c == name))
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, kind: DataKind, name: &str) -> bool {
        self.column_index(kind, name).is_ok()
    }

    pub fn offsets(&self, kind: DataKind) -> &[usize] {
        &self.offsets[kind.slot()]
    }

    /// Non-empty per-system runs of the pool, in global order.
    pub fn segments(&self, kind: DataKind) -> Vec<Segment<'_>> {
        let offs = &self.offsets[kind.slot()];
        self.systems
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let table = s.table(kind)?;
                (table.n_points() > 0).then_some(Segment {
                    system: i,
                    offset: offs[i],
                    table,
                })
            })
            .collect()
    }

    pub fn resolve_global_index(&self, kind: DataKind, g: usize) -> Result<PointRef> {
        let offs = &self.offsets[kind.slot()];
        let total = self.total(kind);
        if g >= total {
            return Err(Error::Range {
                what: "global point",
                index: g as u64,
                len: total as u64,
            });
        }
        // Last system whose start is <= g; empty systems share starts and are skipped.
        let system = offs.partition_point(|&o| o <= g) - 1;
        Ok(PointRef {
            system,
            local: g - offs[system],
        })
    }

    pub fn global_index(&self, kind: DataKind, p: PointRef) -> Result<usize> {
        let len = self
            .systems
            .get(p.system)
            .map(|s| s.len(kind))
            .ok_or(Error::Range {
                what: "system",
                index: p.system as u64,
                len: self.systems.len() as u64,
            })?;
        if p.local >= len {
            return Err(Error::Range {
                what: "local point",
                index: p.local as u64,
                len: len as u64,
            });
        }
        Ok(self.offsets[kind.slot()][p.system] + p.local)
    }

    pub fn position(&self, kind: DataKind, p: PointRef) -> Option<Vec3> {
        self.systems.get(p.system)?.position(kind, p.local)
    }

    pub fn storage_bytes(&self) -> usize {
        self.systems
            .iter()
            .map(|s| DataKind::ALL.iter().filter_map(|&k| s.table(k)).map(|t| t.storage_bytes()).sum::<usize>())
            .sum()
    }
}

fn schema_mismatch(kind: DataKind, a: &str, a_names: &[&str], b: &str, b_names: &[&str]) -> Error {
    let only_a: Vec<&str> = a_names.iter().copied().filter(|n| !b_names.contains(n)).collect();
    let only_b: Vec<&str> = b_names.iter().copied().filter(|n| !a_names.contains(n)).collect();
    let detail = if only_a.is_empty() && only_b.is_empty() {
        "same columns in a different order".to_string()
    } else {
        format!(
            "only in `{a}`: [{}]; only in `{b}`: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )
    };
    Error::Schema(format!(
        "systems `{a}` and `{b}` have different {kind} feature schemas: {detail}"
    ))
}

fn version_of(sources: &[SourceFile], offsets: &[Vec<usize>; 2]) -> u64 {
    // FNV-1a over source hashes and pool sizes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for s in sources {
        eat(s.path.as_bytes());
        eat(s.sha256.as_bytes());
    }
    for o in offsets.iter().flatten() {
        eat(&o.to_le_bytes());
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::table::Column;
    use proptest::prelude::*;

    fn atoms(n: usize, cols: &[&str]) -> AtomFrame {
        let mut t = FeatureTable::empty(n);
        for c in cols {
            t.push(Column::new(*c, vec![0.0; n])).unwrap();
        }
        AtomFrame::from_symbols(vec![[0.0; 3]; n], &vec!["H"; n], None, t).unwrap()
    }

    fn collection(sizes: &[usize]) -> SystemCollection {
        let systems = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| System::new(format!("s{i}"), Some(atoms(n, &["f"])), None))
            .collect();
        SystemCollection::new(systems).unwrap()
    }

    #[test]
    fn resolves_prefix_sum_examples() {
        let c = collection(&[100, 200]);
        assert_eq!(
            c.resolve_global_index(DataKind::Atom, 150).unwrap(),
            PointRef { system: 1, local: 50 }
        );
        assert_eq!(
            c.resolve_global_index(DataKind::Atom, 0).unwrap(),
            PointRef { system: 0, local: 0 }
        );
        assert!(matches!(
            c.resolve_global_index(DataKind::Atom, 300),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn resolves_against_brute_force_enumeration() {
        let sizes = [3, 5, 2];
        let c = collection(&sizes);
        let brute: Vec<(usize, usize)> = sizes
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| (0..n).map(move |l| (s, l)))
            .collect();
        assert_eq!(brute.len(), 10);
        for (g, &(s, l)) in brute.iter().enumerate() {
            let p = c.resolve_global_index(DataKind::Atom, g).unwrap();
            assert_eq!((p.system, p.local), (s, l));
        }
        assert_eq!(
            c.resolve_global_index(DataKind::Atom, 9).unwrap(),
            PointRef { system: 2, local: 1 }
        );
    }

    #[test]
    fn empty_systems_are_skipped() {
        let c = collection(&[0, 2, 0, 1]);
        assert_eq!(c.resolve_global_index(DataKind::Atom, 0).unwrap().system, 1);
        assert_eq!(c.resolve_global_index(DataKind::Atom, 2).unwrap().system, 3);
        assert_eq!(c.segments(DataKind::Atom).len(), 2);
        assert_eq!(c.total(DataKind::Voxel), 0);
        assert!(c.schema(DataKind::Voxel).is_none());
    }

    #[test]
    fn schema_mismatch_names_both_systems() {
        let systems = vec![
            System::new("a", Some(atoms(2, &["x", "y"])), None),
            System::new("b", Some(atoms(2, &["x", "z"])), None),
        ];
        let err = SystemCollection::new(systems).unwrap_err().to_string();
        assert!(err.contains("`a`") && err.contains("`b`"), "{err}");
        assert!(err.contains('y') && err.contains('z'), "{err}");
    }

    proptest! {
        #[test]
        fn global_index_round_trips(sizes in prop::collection::vec(0usize..40, 1..8)) {
            let c = collection(&sizes);
            for g in 0..c.total(DataKind::Atom) {
                let p = c.resolve_global_index(DataKind::Atom, g).unwrap();
                prop_assert!(p.local < sizes[p.system]);
                prop_assert_eq!(c.global_index(DataKind::Atom, p).unwrap(), g);
            }
        }
    }
}
