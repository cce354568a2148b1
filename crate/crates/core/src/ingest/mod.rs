//! Readers (and the cube writer) for the external file formats, plus the
//! manifest that ties a multi-system session together.

pub mod cube;
pub mod extxyz;
pub mod feature_csv;
pub mod manifest;
mod text;

pub use cube::{parse_cube, write_cube, CubeFile, BOHR_TO_ANGSTROM};
pub use extxyz::parse_extxyz;
pub use feature_csv::{parse_feature_csv, parse_feature_csv_excluding};
pub use manifest::{load_manifest, load_with_base, sha256_hex, Manifest, SystemEntry, MANIFEST_VERSION};
