use serde::{Deserialize, Serialize};

use super::Bitset;
use crate::analytics::{resolve_axis, AxisSpec};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};

fn yes() -> bool {
    true
}

/// Axis-aligned rectangle in the transformed coordinates of a plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Brush {
    pub brush_id: String,
    pub plot_id: String,
    pub kind: DataKind,
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    #[serde(default = "yes")]
    pub active: bool,
}

impl Brush {
    pub fn new(
        brush_id: impl Into<String>,
        plot_id: impl Into<String>,
        kind: DataKind,
        x: AxisSpec,
        y: AxisSpec,
        x_range: [f64; 2],
        y_range: [f64; 2],
    ) -> Self {
        Brush {
            brush_id: brush_id.into(),
            plot_id: plot_id.into(),
            kind,
            x,
            y,
            x_range,
            y_range,
            active: true,
        }
    }

    /// Closed-interval test on transformed values; non-finite never matches.
    #[inline]
    pub fn contains(&self, tx: f64, ty: f64) -> bool {
        tx >= self.x_range[0] && tx <= self.x_range[1] && ty >= self.y_range[0] && ty <= self.y_range[1]
    }

    pub fn validate(&self, c: &SystemCollection) -> Result<()> {
        for (r, axis) in [(self.x_range, "x"), (self.y_range, "y")] {
            if r[0].is_nan() || r[1].is_nan() || r[0] > r[1] {
                return Err(Error::InvalidArgument(format!(
                    "brush `{}`: {axis} range [{}, {}] is not an interval",
                    self.brush_id, r[0], r[1]
                )));
            }
        }
        for col in self.x.referenced_columns().into_iter().chain(self.y.referenced_columns()) {
            if !c.has_column(self.kind, col) {
                return Err(Error::Schema(format!(
                    "brush `{}` references column `{col}` absent from the pooled {} schema",
                    self.brush_id, self.kind
                )));
            }
        }
        Ok(())
    }
}

/// Points of the brush's kind falling inside it.
pub fn brush_mask(c: &SystemCollection, brush: &Brush) -> Result<Bitset> {
    brush.validate(c)?;
    let xa = resolve_axis(c, brush.kind, &brush.x)?;
    let ya = resolve_axis(c, brush.kind, &brush.y)?;
    let starts: Vec<usize> = (0..xa.n_parts()).map(|s| xa.start(s)).collect();
    Ok(Bitset::from_segments(c.total(brush.kind), &starts, |s, i| {
        brush.contains(xa.transform(xa.raw(s)[i]), ya.transform(ya.raw(s)[i]))
    }))
}
