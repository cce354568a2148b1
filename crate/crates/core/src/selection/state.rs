use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::brush::{brush_mask, Brush};
use super::Bitset;
use crate::analytics::{histogram2d_masked, Histogram2D, HistogramSpec};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    #[default]
    Intersection,
    Union,
}

impl std::str::FromStr for CombineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersection" => Ok(CombineMode::Intersection),
            "union" => Ok(CombineMode::Union),
            other => Err(Error::InvalidArgument(format!("unknown combine mode `{other}`"))),
        }
    }
}

/// Mask of one kind from scratch. No active brush of that kind selects everything.
pub fn compute_mask(c: &SystemCollection, kind: DataKind, brushes: &[Brush], mode: CombineMode) -> Result<Bitset> {
    let mut acc: Option<Bitset> = None;
    for b in brushes.iter().filter(|b| b.active && b.kind == kind) {
        let m = brush_mask(c, b)?;
        acc = Some(match (acc, mode) {
            (None, _) => m,
            (Some(mut a), CombineMode::Intersection) => {
                a.and_assign(&m);
                a
            }
            (Some(mut a), CombineMode::Union) => {
                a.or_assign(&m);
                a
            }
        });
    }
    Ok(acc.unwrap_or_else(|| Bitset::full(c.total(kind))))
}

/// Brushes, combine mode and the derived per-kind masks. Every successful
/// mutation bumps `version`; failed ones leave the state untouched.
#[derive(Debug, Clone)]
pub struct SelectionState {
    brushes: Vec<Brush>,
    combine_mode: CombineMode,
    version: u64,
    masks: [Arc<Bitset>; 2],
}

/// Immutable view of the masks at one version.
#[derive(Debug, Clone)]
pub struct SelectionSnapshot {
    pub version: u64,
    pub masks: [Arc<Bitset>; 2],
}

impl SelectionSnapshot {
    pub fn mask(&self, kind: DataKind) -> &Bitset {
        &self.masks[kind.slot()]
    }
}

impl SelectionState {
    pub fn new(c: &SystemCollection) -> Self {
        SelectionState {
            brushes: Vec::new(),
            combine_mode: CombineMode::default(),
            version: 0,
            masks: DataKind::ALL.map(|k| Arc::new(Bitset::full(c.total(k)))),
        }
    }

    pub fn with_brushes(c: &SystemCollection, brushes: Vec<Brush>, mode: CombineMode) -> Result<Self> {
        let mut s = SelectionState::new(c);
        s.set_brushes(c, brushes, mode)?;
        Ok(s)
    }

    pub fn brushes(&self) -> &[Brush] {
        &self.brushes
    }

    pub fn combine_mode(&self) -> CombineMode {
        self.combine_mode
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn mask(&self, kind: DataKind) -> &Bitset {
        &self.masks[kind.slot()]
    }

    pub fn snapshot(&self) -> SelectionSnapshot {
        SelectionSnapshot {
            version: self.version,
            masks: self.masks.clone(),
        }
    }

    fn commit(&mut self, c: &SystemCollection, brushes: Vec<Brush>, mode: CombineMode) -> Result<u64> {
        for b in &brushes {
            b.validate(c)?;
        }
        let mut ids = std::collections::HashSet::new();
        if let Some(b) = brushes.iter().find(|b| !ids.insert(b.brush_id.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate brush id `{}`", b.brush_id)));
        }
        let masks = [
            compute_mask(c, DataKind::Atom, &brushes, mode)?,
            compute_mask(c, DataKind::Voxel, &brushes, mode)?,
        ];
        self.masks = masks.map(Arc::new);
        self.brushes = brushes;
        self.combine_mode = mode;
        self.version += 1;
        Ok(self.version)
    }

    /// Adds the brush, or replaces the one with the same id. Returns the new version.
    pub fn apply_brush(&mut self, c: &SystemCollection, brush: Brush) -> Result<u64> {
        let mut next = self.brushes.clone();
        match next.iter_mut().find(|b| b.brush_id == brush.brush_id) {
            Some(slot) => *slot = brush,
            None => next.push(brush),
        }
        self.commit(c, next, self.combine_mode)
    }

    pub fn remove_brush(&mut self, c: &SystemCollection, brush_id: &str) -> Result<u64> {
        if !self.brushes.iter().any(|b| b.brush_id == brush_id) {
            return Err(Error::InvalidArgument(format!("no brush with id `{brush_id}`")));
        }
        let next = self.brushes.iter().filter(|b| b.brush_id != brush_id).cloned().collect();
        self.commit(c, next, self.combine_mode)
    }

    pub fn clear(&mut self, c: &SystemCollection) -> Result<u64> {
        self.commit(c, Vec::new(), self.combine_mode)
    }

    pub fn set_combine_mode(&mut self, c: &SystemCollection, mode: CombineMode) -> Result<u64> {
        self.commit(c, self.brushes.clone(), mode)
    }

    pub fn set_brushes(&mut self, c: &SystemCollection, brushes: Vec<Brush>, mode: CombineMode) -> Result<u64> {
        self.commit(c, brushes, mode)
    }
}

/// Local indices (ascending) of the selected points of one system.
pub fn selected_in_system(c: &SystemCollection, mask: &Bitset, kind: DataKind, system_id: &str) -> Result<Vec<usize>> {
    let s = c
        .system_index(system_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown system `{system_id}`")))?;
    if mask.len() != c.total(kind) {
        return Err(Error::Shape {
            context: "selection mask".into(),
            expected: c.total(kind),
            found: mask.len(),
        });
    }
    let offs = c.offsets(kind);
    let (a, b) = (offs[s], offs[s + 1]);
    Ok(mask.iter_ones_in(a, b).map(|g| g - a).collect())
}

/// Selected-point counts per bin of a histogram plot, on that plot's own edges.
pub fn brush_projection(
    c: &SystemCollection,
    state: &SelectionState,
    kind: DataKind,
    spec: &HistogramSpec,
) -> Result<Histogram2D> {
    histogram2d_masked(c, kind, spec, state.mask(kind))
}
