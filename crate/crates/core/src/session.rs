//! Saved views: plots, encodings, cloud parameters, brushes and cameras as
//! a versioned JSON document.
//!
//! Maps are `BTreeMap`s and struct fields serialize in declaration order,
//! so saving the same session twice yields identical bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analytics::{AxisSpec, HistogramSpec, PcaSpec, DEFAULT_BINS};
use crate::cloud::{sample_point_cloud, PointCloud, SlicePlane};
use crate::error::{Error, ParseError, Position, Result};
use crate::model::{ColorMap, DataKind, EncodingSpec, SourceFile, SystemCollection};
use crate::selection::{Brush, CombineMode, SelectionState};

pub const SESSION_VERSION: u64 = 1;
const FORMAT: &str = "session";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemEncodings {
    pub atoms: EncodingSpec,
    pub voxels: EncodingSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudParams {
    pub target_count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SlicePlane>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSpec {
    pub combine_mode: CombineMode,
    pub brushes: Vec<Brush>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub target: [f64; 3],
    pub up: [f64; 3],
    pub fov_deg: f64,
}

fn default_bins() -> [usize; 2] {
    [DEFAULT_BINS, DEFAULT_BINS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlotSpec {
    Scatter2d {
        plot_id: String,
        kind: DataKind,
        histogram: HistogramSpec,
        #[serde(default)]
        color_map: ColorMap,
    },
    Correlation {
        plot_id: String,
        kind: DataKind,
        columns: Vec<String>,
        #[serde(default)]
        color_map: ColorMap,
    },
    Pca {
        plot_id: String,
        kind: DataKind,
        pca: PcaSpec,
        #[serde(default = "default_bins")]
        bins: [usize; 2],
        #[serde(default)]
        color_map: ColorMap,
    },
}

impl PlotSpec {
    pub fn plot_id(&self) -> &str {
        match self {
            PlotSpec::Scatter2d { plot_id, .. } | PlotSpec::Correlation { plot_id, .. } | PlotSpec::Pca { plot_id, .. } => {
                plot_id
            }
        }
    }

    pub fn kind(&self) -> DataKind {
        match self {
            PlotSpec::Scatter2d { kind, .. } | PlotSpec::Correlation { kind, .. } | PlotSpec::Pca { kind, .. } => *kind,
        }
    }

    /// The binned product behind a scatter or PCA plot (PC1 vs PC2 for PCA).
    pub fn histogram_spec(&self) -> Option<HistogramSpec> {
        match self {
            PlotSpec::Scatter2d { histogram, .. } => Some(histogram.clone()),
            PlotSpec::Pca { pca, bins, .. } => {
                let axis = |c| AxisSpec::principal(pca.columns.clone(), pca.standardized, c);
                let second = if pca.k >= 2 { 1 } else { 0 };
                Some(HistogramSpec::new(axis(0), axis(second)).with_bins(bins[0], bins[1]))
            }
            PlotSpec::Correlation { .. } => None,
        }
    }

    pub fn referenced_columns(&self) -> Vec<&str> {
        match self {
            PlotSpec::Scatter2d { histogram, .. } => {
                let mut v = histogram.x.referenced_columns();
                v.extend(histogram.y.referenced_columns());
                v
            }
            PlotSpec::Correlation { columns, .. } => columns.iter().map(String::as_str).collect(),
            PlotSpec::Pca { pca, .. } => pca.columns.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSession {
    pub session_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestRef>,
    #[serde(default)]
    pub data_files: Vec<SourceFile>,
    #[serde(default)]
    pub plots: Vec<PlotSpec>,
    #[serde(default)]
    pub encodings: BTreeMap<String, SystemEncodings>,
    #[serde(default)]
    pub clouds: BTreeMap<String, CloudParams>,
    #[serde(default)]
    pub selection: SelectionSpec,
    #[serde(default)]
    pub cameras: BTreeMap<String, CameraPose>,
}

impl Default for ViewSession {
    fn default() -> Self {
        ViewSession {
            session_version: SESSION_VERSION,
            manifest: None,
            data_files: Vec::new(),
            plots: Vec::new(),
            encodings: BTreeMap::new(),
            clouds: BTreeMap::new(),
            selection: SelectionSpec::default(),
            cameras: BTreeMap::new(),
        }
    }
}

impl ViewSession {
    /// Session referencing the collection's files and holding `selection`'s brushes.
    pub fn capture(c: &SystemCollection, selection: &SelectionState) -> Self {
        let manifest_path = c.manifest_path().map(|p| p.display().to_string());
        let manifest = manifest_path.as_ref().and_then(|mp| {
            c.sources().iter().find(|s| &s.path == mp).map(|s| ManifestRef {
                path: s.path.clone(),
                sha256: s.sha256.clone(),
            })
        });
        let data_files = c
            .sources()
            .iter()
            .filter(|s| Some(&s.path) != manifest_path.as_ref())
            .cloned()
            .collect();
        ViewSession {
            manifest,
            data_files,
            selection: SelectionSpec {
                combine_mode: selection.combine_mode(),
                brushes: selection.brushes().to_vec(),
            },
            ..Default::default()
        }
    }

    /// Point cloud of a system as recorded in the session.
    pub fn point_cloud(&self, c: &SystemCollection, system_id: &str) -> Result<PointCloud> {
        let params = self
            .clouds
            .get(system_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no cloud parameters for system `{system_id}`")))?;
        let grid = c
            .system_index(system_id)
            .and_then(|i| c.systems()[i].grid.as_ref())
            .ok_or_else(|| Error::InvalidArgument(format!("system `{system_id}` has no volume")))?;
        sample_point_cloud(grid, params.target_count, params.seed)
    }
}

pub fn save_session(session: &ViewSession) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(session).expect("session serializes");
    s.push('\n');
    s.into_bytes()
}

/// A loaded session with the selection rebuilt against the collection.
#[derive(Debug, Clone)]
pub struct RestoredSession {
    pub session: ViewSession,
    pub selection: SelectionState,
    /// Non-fatal findings, such as data files whose hash changed.
    pub warnings: Vec<String>,
}

fn json_error(e: serde_json::Error) -> Error {
    ParseError::new(
        FORMAT,
        Position::LineColumn {
            line: e.line(),
            column: e.column(),
        },
        e.to_string(),
    )
    .into()
}

pub fn parse_session(bytes: &[u8]) -> Result<ViewSession> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(json_error)?;
    let version = value
        .get("session_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ParseError::new(FORMAT, Position::Byte(0), "missing integer `session_version`"))?;
    if version > SESSION_VERSION || version == 0 {
        return Err(Error::Version {
            what: "session",
            found: version,
            supported: SESSION_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| ParseError::new(FORMAT, Position::Byte(0), e.to_string()).into())
}

pub fn load_session(bytes: &[u8], c: &SystemCollection) -> Result<RestoredSession> {
    let session = parse_session(bytes)?;
    check_compatibility(&session, c)?;

    let mut warnings = Vec::new();
    let hash_of = |path: &str| c.sources().iter().find(|s| s.path == path).map(|s| s.sha256.as_str());
    let mut recorded: Vec<(&str, &str)> = session.data_files.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    if let Some(m) = &session.manifest {
        recorded.insert(0, (m.path.as_str(), m.sha256.as_str()));
    }
    for (path, sha) in recorded {
        match hash_of(path) {
            Some(h) if h == sha => {}
            Some(_) => warnings.push(format!("content of `{path}` changed since the session was saved")),
            None => warnings.push(format!("`{path}` is not part of the loaded data")),
        }
    }

    let selection = SelectionState::with_brushes(
        c,
        session.selection.brushes.clone(),
        session.selection.combine_mode,
    )?;
    Ok(RestoredSession {
        session,
        selection,
        warnings,
    })
}

fn check_compatibility(s: &ViewSession, c: &SystemCollection) -> Result<()> {
    let mut missing = BTreeSet::new();
    let mut need = |kind: DataKind, col: &str| {
        if !c.has_column(kind, col) {
            missing.insert(format!("{kind}:{col}"));
        }
    };
    for p in &s.plots {
        for col in p.referenced_columns() {
            need(p.kind(), col);
        }
    }
    for b in &s.selection.brushes {
        for col in b.x.referenced_columns().into_iter().chain(b.y.referenced_columns()) {
            need(b.kind, col);
        }
    }
    for enc in s.encodings.values() {
        enc.atoms.referenced_columns().for_each(|col| need(DataKind::Atom, col));
        enc.voxels.referenced_columns().for_each(|col| need(DataKind::Voxel, col));
    }
    for id in s.encodings.keys().chain(s.clouds.keys()) {
        if c.system_index(id).is_none() {
            missing.insert(format!("system:{id}"));
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Compatibility {
            missing: missing.into_iter().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::histogram2d;
    use crate::synthetic::table_collection;

    fn collection() -> SystemCollection {
        table_collection(
            DataKind::Voxel,
            vec![
                ("a".into(), vec![("density".into(), vec![1.0, 2.0, 3.0]), ("g".into(), vec![0.5, 0.1, 0.9])]),
                ("b".into(), vec![("density".into(), vec![4.0, 0.0]), ("g".into(), vec![0.2, 0.7])]),
            ],
        )
        .unwrap()
    }

    fn session(c: &SystemCollection) -> ViewSession {
        let brush = Brush::new(
            "b1",
            "p1",
            DataKind::Voxel,
            AxisSpec::column("density"),
            AxisSpec::column("g"),
            [1.5, 10.0],
            [0.0, 1.0],
        );
        let sel = SelectionState::with_brushes(c, vec![brush], CombineMode::Intersection).unwrap();
        let mut s = ViewSession::capture(c, &sel);
        s.plots.push(PlotSpec::Scatter2d {
            plot_id: "p1".into(),
            kind: DataKind::Voxel,
            histogram: HistogramSpec::new(AxisSpec::column("density"), AxisSpec::column("g")).with_bins(4, 4),
            color_map: ColorMap::Viridis,
        });
        s.clouds.insert("a".into(), CloudParams { target_count: 50, seed: 9, slice: None });
        s.encodings.insert(
            "b".into(),
            SystemEncodings {
                voxels: EncodingSpec {
                    color_feature: Some("g".into()),
                    ..Default::default()
                },
                ..Default::default()
            },
        );
        s.cameras.insert(
            "a".into(),
            CameraPose { position: [0.0, 0.0, 10.0], target: [0.0; 3], up: [0.0, 1.0, 0.0], fov_deg: 45.0 },
        );
        s
    }

    #[test]
    fn round_trip_reproduces_products() {
        let c = collection();
        let s = session(&c);
        let bytes = save_session(&s);
        assert_eq!(bytes, save_session(&s));
        let r = load_session(&bytes, &c).unwrap();
        assert_eq!(r.session, s);
        assert_eq!(save_session(&r.session), bytes);
        assert_eq!(r.selection.mask(DataKind::Voxel).iter_ones().collect::<Vec<_>>(), vec![1, 2, 3]);
        let spec = r.session.plots[0].histogram_spec().unwrap();
        assert_eq!(
            histogram2d(&c, DataKind::Voxel, &spec).unwrap(),
            histogram2d(&c, DataKind::Voxel, &s.plots[0].histogram_spec().unwrap()).unwrap()
        );
        assert_eq!(r.session.point_cloud(&c, "a").unwrap(), s.point_cloud(&c, "a").unwrap());
    }

    #[test]
    fn future_version_rejected() {
        let c = collection();
        let mut v: serde_json::Value = serde_json::from_slice(&save_session(&session(&c))).unwrap();
        v["session_version"] = 2.into();
        v["new_field"] = true.into();
        let e = load_session(v.to_string().as_bytes(), &c).unwrap_err();
        assert!(matches!(e, Error::Version { found: 2, supported: 1, .. }), "{e}");
    }

    #[test]
    fn corrupt_document_is_a_parse_error() {
        let c = collection();
        assert!(matches!(load_session(b"{\"session_version\": 1,", &c), Err(Error::Parse(_))));
        assert!(matches!(load_session(b"{}", &c), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_columns_are_listed() {
        let c = collection();
        let other = table_collection(
            DataKind::Voxel,
            vec![("a".into(), vec![("density".into(), vec![1.0]), ("h".into(), vec![0.0])])],
        )
        .unwrap();
        let bytes = save_session(&session(&c));
        match load_session(&bytes, &other) {
            Err(Error::Compatibility { missing }) => {
                assert_eq!(missing, vec!["system:b".to_string(), "voxel:g".to_string()]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_mismatch_is_a_warning() {
        let c = collection();
        let mut s = session(&c);
        s.data_files.push(SourceFile { path: "gone.cube".into(), sha256: "00".into() });
        let r = load_session(&save_session(&s), &c).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
