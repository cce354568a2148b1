//! Axis-aligned slabs of voxel layers.

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::model::VolumetricGrid;
use crate::selection::Bitset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAxis {
    X,
    Y,
    Z,
}

impl GridAxis {
    pub fn index(self) -> usize {
        match self {
            GridAxis::X => 0,
            GridAxis::Y => 1,
            GridAxis::Z => 2,
        }
    }
}

impl std::str::FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" | "0" => Ok(GridAxis::X),
            "y" | "Y" | "1" => Ok(GridAxis::Y),
            "z" | "Z" | "2" => Ok(GridAxis::Z),
            other => Err(Error::InvalidArgument(format!("unknown grid axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePlane {
    pub axis: GridAxis,
    pub index: usize,
    pub thickness: usize,
}

impl SlicePlane {
    pub fn validate(&self, grid: &VolumetricGrid) -> Result<()> {
        let extent = grid.shape()[self.axis.index()];
        if self.thickness == 0 {
            return Err(Error::InvalidArgument("slice thickness must be at least 1".into()));
        }
        if self.index + self.thickness > extent {
            return Err(Error::Range {
                what: "slice layer",
                index: (self.index + self.thickness - 1) as u64,
                len: extent as u64,
            });
        }
        Ok(())
    }

    fn contains(&self, ijk: [usize; 3]) -> bool {
        let c = ijk[self.axis.index()];
        c >= self.index && c < self.index + self.thickness
    }
}

/// Linear indices, ascending, of the voxels in the slab.
pub fn slice_points(grid: &VolumetricGrid, plane: &SlicePlane) -> Result<Vec<usize>> {
    plane.validate(grid)?;
    let [nx, ny, nz] = grid.shape();
    let lo = plane.index;
    let hi = plane.index + plane.thickness;
    let (xr, yr, zr) = match plane.axis {
        GridAxis::X => (lo..hi, 0..ny, 0..nz),
        GridAxis::Y => (0..nx, lo..hi, 0..nz),
        GridAxis::Z => (0..nx, 0..ny, lo..hi),
    };
    let mut out = Vec::with_capacity(xr.len() * yr.len() * zr.len());
    for ix in xr {
        for iy in yr.clone() {
            let base = grid.linear_index(ix, iy, 0);
            out.extend(zr.clone().map(|iz| base + iz));
        }
    }
    Ok(out)
}

/// The slab as a bitset over the grid's voxels, for intersecting with a
/// selection mask.
pub fn slice_mask(grid: &VolumetricGrid, plane: &SlicePlane) -> Result<Bitset> {
    let mut b = Bitset::new(grid.len());
    for i in slice_points(grid, plane)? {
        b.set(i);
    }
    Ok(b)
}

impl PointCloud {
    /// Indices of the cloud points whose source voxel lies in the slab.
    pub fn points_in_slice(&self, grid: &VolumetricGrid, plane: &SlicePlane) -> Result<Vec<usize>> {
        plane.validate(grid)?;
        Ok(self
            .source_voxel
            .iter()
            .enumerate()
            .filter(|(_, &v)| plane.contains(grid.unravel(v as usize)))
            .map(|(i, _)| i)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(shape: [usize; 3]) -> VolumetricGrid {
        let n = shape.iter().product();
        VolumetricGrid::new(
            [0.0; 3],
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            shape,
            vec![1.0; n],
        )
        .unwrap()
    }

    #[test]
    fn single_z_layer() {
        let g = grid([2, 2, 2]);
        let p = slice_points(&g, &SlicePlane { axis: GridAxis::Z, index: 0, thickness: 1 }).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|&i| g.unravel(i)[2] == 0));
    }

    #[test]
    fn full_thickness_is_everything() {
        let g = grid([2, 3, 4]);
        let p = slice_points(&g, &SlicePlane { axis: GridAxis::X, index: 0, thickness: 2 }).unwrap();
        assert_eq!(p, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn matches_brute_force_filter() {
        let g = grid([3, 4, 5]);
        let plane = SlicePlane { axis: GridAxis::Y, index: 1, thickness: 2 };
        let p = slice_points(&g, &plane).unwrap();
        let brute: Vec<usize> = (0..60).filter(|&i| (1..3).contains(&g.unravel(i)[1])).collect();
        assert_eq!(p.len(), 30);
        assert_eq!(p, brute);
        let m = slice_mask(&g, &plane).unwrap();
        assert_eq!(m.iter_ones().collect::<Vec<_>>(), brute);
    }

    #[test]
    fn out_of_range_plane() {
        let g = grid([2, 2, 2]);
        let e = slice_points(&g, &SlicePlane { axis: GridAxis::Y, index: 1, thickness: 2 });
        assert!(matches!(e, Err(Error::Range { .. })));
        let e = slice_points(&g, &SlicePlane { axis: GridAxis::Y, index: 0, thickness: 0 });
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }
}
