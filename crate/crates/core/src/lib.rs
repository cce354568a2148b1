//! Linked feature-space / Cartesian-space exploration engine for atoms and
//! electron-density voxels.
//!
//! Data is loaded once into a [`model::SystemCollection`]; plots
//! ([`analytics`]), brushes ([`selection`]), point clouds ([`cloud`]) and
//! saved views ([`session`]) all read the same shared columns.

pub mod analytics;
pub mod bench;
pub mod cloud;
pub mod error;
pub mod ingest;
pub mod model;
pub mod selection;
pub mod session;
pub mod synthetic;

pub use error::{Error, ParseError, Position, Result};
