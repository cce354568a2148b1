//! Plot products over pooled columns: 2D histograms, correlation matrices
//! and PCA, plus value transforms and result caches.

mod axis;
mod cache;
mod correlation;
mod histogram;
mod kernel;
mod pca;
mod transform;

pub use axis::{resolve_axis, AxisSource, AxisSpec, AxisValues, PrincipalAxis};
pub use cache::{cached_pca, cached_projection, ModelCache, ProductCache};
pub use correlation::{correlation_columns, correlation_matrix, CorrelationMatrix};
pub use histogram::{bin_index, histogram2d, histogram2d_masked, make_edges, Histogram2D, HistogramSpec, DEFAULT_BINS};
pub use pca::{
    apply_sign_convention, pca_fit, pca_fit_columns, pca_project, pca_project_columns, PcaModel, PcaSpec,
    Projection,
};
pub use transform::{apply_chain, parse_chain, Transform};
