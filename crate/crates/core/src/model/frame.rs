use serde::{Deserialize, Serialize};

use super::elements::Element;
use super::geometry::{self, Mat3, Vec3};
use super::table::FeatureTable;
use crate::error::{Error, Result};

/// Lattice vectors (rows, Å) and per-axis periodicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub matrix: Mat3,
    pub pbc: [bool; 3],
}

impl Cell {
    pub fn is_periodic(&self) -> bool {
        self.pbc.iter().any(|&p| p)
    }
}

/// Atoms of one structure: positions, elements, optional cell and per-atom
/// features.
#[derive(Debug, Clone)]
pub struct AtomFrame {
    positions: Vec<Vec3>,
    elements: Vec<Element>,
    cell: Option<Cell>,
    features: FeatureTable,
}

impl AtomFrame {
    pub fn new(
        positions: Vec<Vec3>,
        elements: Vec<Element>,
        cell: Option<Cell>,
        features: FeatureTable,
    ) -> Result<Self> {
        if positions.len() != elements.len() {
            return Err(Error::Shape {
                context: "atom elements".into(),
                expected: positions.len(),
                found: elements.len(),
            });
        }
        if features.n_points() != positions.len() {
            return Err(Error::Shape {
                context: "atom feature table".into(),
                expected: positions.len(),
                found: features.n_points(),
            });
        }
        if let Some(c) = &cell {
            if c.is_periodic() && geometry::inverse(&c.matrix).is_none() {
                return Err(Error::InvalidArgument(
                    "periodic cell has a singular lattice matrix".into(),
                ));
            }
        }
        Ok(AtomFrame {
            positions,
            elements,
            cell,
            features,
        })
    }

    /// Builds a frame from element symbols, failing on the first symbol
    /// absent from the catalog.
    pub fn from_symbols<S: AsRef<str>>(
        positions: Vec<Vec3>,
        symbols: &[S],
        cell: Option<Cell>,
        features: FeatureTable,
    ) -> Result<Self> {
        let elements = symbols
            .iter()
            .map(|s| Element::from_symbol(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        AtomFrame::new(positions, elements, cell, features)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn cell(&self) -> Option<&Cell> {
        self.cell.as_ref()
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub(crate) fn with_features(mut self, features: FeatureTable) -> Result<Self> {
        if features.n_points() != self.len() {
            return Err(Error::Shape {
                context: "atom feature table".into(),
                expected: self.len(),
                found: features.n_points(),
            });
        }
        self.features = features;
        Ok(self)
    }
}
