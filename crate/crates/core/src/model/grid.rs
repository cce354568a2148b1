use std::sync::Arc;

use super::geometry::{self, Mat3, Vec3};
use super::table::{Column, FeatureTable};
use crate::error::{Error, Result};

/// Name under which the scalar field is registered as a feature column.
pub const DENSITY_COLUMN: &str = "density";

/// Regular grid of voxels with a scalar value and a feature row per voxel.
///
/// Linear index `i = (ix * ny + iy) * nz + iz`, i.e. z runs fastest, which
/// is the order values appear in a cube file. Voxel `(ix, iy, iz)` covers
/// `origin + (ix + u) b1 + (iy + v) b2 + (iz + w) b3` for `u, v, w` in
/// `[0, 1)`.
#[derive(Debug, Clone)]
pub struct VolumetricGrid {
    origin: Vec3,
    basis: Mat3,
    inverse_basis: Mat3,
    shape: [usize; 3],
    values: Arc<[f64]>,
    features: FeatureTable,
}

impl VolumetricGrid {
    /// Builds a grid and registers `values` as the [`DENSITY_COLUMN`]
    /// feature, sharing storage.
    pub fn new(origin: Vec3, basis: Mat3, shape: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let values: Arc<[f64]> = values.into();
        let mut features = FeatureTable::empty(values.len());
        features.push(Column::new(DENSITY_COLUMN, values.clone()))?;
        Self::with_features(origin, basis, shape, values, features)
    }

    pub fn with_features(
        origin: Vec3,
        basis: Mat3,
        shape: [usize; 3],
        values: Arc<[f64]>,
        features: FeatureTable,
    ) -> Result<Self> {
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!(
                "grid shape {shape:?} has a zero extent"
            )));
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::InvalidArgument("grid shape overflows".into()))?;
        if values.len() != n {
            return Err(Error::Shape {
                context: "grid values".into(),
                expected: n,
                found: values.len(),
            });
        }
        if features.n_points() != n {
            return Err(Error::Shape {
                context: "voxel feature table".into(),
                expected: n,
                found: features.n_points(),
            });
        }
        let vol = geometry::det(&basis);
        let inverse_basis = match geometry::inverse(&basis) {
            Some(inv) if vol.abs() > 0.0 => inv,
            _ => {
                return Err(Error::InvalidArgument(
                    "voxel basis is singular (zero voxel volume)".into(),
                ))
            }
        };
        Ok(VolumetricGrid {
            origin,
            basis,
            inverse_basis,
            shape,
            values,
            features,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn basis(&self) -> &Mat3 {
        &self.basis
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn features(&self) -> &FeatureTable {
        &self.features
    }

    pub fn voxel_volume(&self) -> f64 {
        geometry::det(&self.basis).abs()
    }

    #[inline]
    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.shape[1] + iy) * self.shape[2] + iz
    }

    #[inline]
    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let nz = self.shape[2];
        let ny = self.shape[1];
        [i / (ny * nz), (i / nz) % ny, i % nz]
    }

    /// Cartesian point at continuous grid coordinates `f` (in voxel units).
    #[inline]
    pub fn grid_to_cart(&self, f: Vec3) -> Vec3 {
        geometry::add(self.origin, geometry::frac_to_cart(&self.basis, f))
    }

    /// Continuous grid coordinates of a Cartesian point.
    #[inline]
    pub fn cart_to_grid(&self, p: Vec3) -> Vec3 {
        geometry::cart_to_frac(&self.inverse_basis, geometry::sub(p, self.origin))
    }

    pub fn voxel_center(&self, i: usize) -> Vec3 {
        let [ix, iy, iz] = self.unravel(i);
        self.grid_to_cart([ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5])
    }

    /// Linear index of the voxel containing `p`, if inside the grid.
    pub fn voxel_containing(&self, p: Vec3) -> Option<usize> {
        let f = self.cart_to_grid(p);
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let c = f[k].floor();
            if !(c >= 0.0 && c < self.shape[k] as f64) {
                return None;
            }
            idx[k] = c as usize;
        }
        Some(self.linear_index(idx[0], idx[1], idx[2]))
    }

    pub(crate) fn replace_features(mut self, features: FeatureTable) -> Result<Self> {
        if features.n_points() != self.len() {
            return Err(Error::Shape {
                context: "voxel feature table".into(),
                expected: self.len(),
                found: features.n_points(),
            });
        }
        self.features = features;
        Ok(self)
    }
}
