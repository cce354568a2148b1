//! Brushes over 2D plots, the derived per-kind selection masks, and
//! selected-subset export.

mod bitset;
mod brush;
mod export;
mod state;

pub use bitset::Bitset;
pub use brush::{brush_mask, Brush};
pub use export::{export_selection, export_selection_to_path, format_value};
pub use state::{
    brush_projection, compute_mask, selected_in_system, CombineMode, SelectionSnapshot, SelectionState,
};
