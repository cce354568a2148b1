//! Shared, immutable data model: feature tables, atoms, voxel grids and the
//! pooled multi-system collection.

pub mod bonds;
pub mod collection;
pub mod elements;
pub mod encoding;
pub mod frame;
pub mod geometry;
pub mod grid;
pub mod table;

pub use bonds::{infer_bonds, BondList, DEFAULT_BOND_TOLERANCE};
pub use collection::{DataKind, PointRef, Segment, SourceFile, System, SystemCollection};
pub use elements::Element;
pub use encoding::{ColorMap, EncodingSpec};
pub use frame::{AtomFrame, Cell};
pub use grid::{VolumetricGrid, DENSITY_COLUMN};
pub use table::{Column, FeatureTable};
