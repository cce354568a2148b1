//! HTTP server, push channel and command-line interface for featurelens.

pub mod api;
pub mod cli;
mod error;
mod params;
pub mod serve;
pub mod state;
pub mod tiles;

pub use api::router;
pub use error::{ApiError, ApiResult};
pub use state::AppState;
