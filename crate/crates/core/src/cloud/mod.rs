//! Point clouds sampled from volumetric grids, and planar slabs.

mod sampler;
mod slice;

pub use sampler::{clamped_weights, multinomial_counts, sample_point_cloud, PointCloud};
pub use slice::{slice_mask, slice_points, GridAxis, SlicePlane};
