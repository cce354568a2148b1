use serde::{Deserialize, Serialize};

use super::table::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMap {
    #[default]
    Viridis,
    Plasma,
    Inferno,
    Magma,
    Cividis,
    Coolwarm,
    Greys,
    Jet,
}

/// Visual channel assignment for one glyph layer (atoms or cloud points).
///
/// `None` for `size_feature` means glyphs are sized by element (covalent
/// radius) for atoms and uniformly for cloud points; `None` for
/// `color_feature` means element colors / a single color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSpec {
    pub size_feature: Option<String>,
    pub color_feature: Option<String>,
    pub color_map: ColorMap,
    pub color_range: Option<[f64; 2]>,
    pub size_range: [f64; 2],
    pub transparency: f64,
    pub point_density_scale: f64,
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec {
            size_feature: None,
            color_feature: None,
            color_map: ColorMap::default(),
            color_range: None,
            size_range: [0.5, 1.5],
            transparency: 0.0,
            point_density_scale: 1.0,
        }
    }
}

impl EncodingSpec {
    pub fn referenced_columns(&self) -> impl Iterator<Item = &str> {
        self.size_feature
            .iter()
            .chain(self.color_feature.iter())
            .map(String::as_str)
    }

    pub fn validate(&self, table: &FeatureTable) -> Result<()> {
        for name in self.referenced_columns() {
            if table.column(name).is_none() {
                return Err(Error::UnknownColumn(name.to_string()));
            }
        }
        if !(0.0..=1.0).contains(&self.transparency) {
            return Err(Error::InvalidArgument(format!(
                "transparency {} outside [0, 1]",
                self.transparency
            )));
        }
        if !(self.size_range[0] <= self.size_range[1]) || self.size_range[0] < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "invalid size range {:?}",
                self.size_range
            )));
        }
        if !(self.point_density_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "point density scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Per-point glyph sizes from `size_feature`, linearly mapped onto
    /// `size_range`. Non-finite inputs map to the low end.
    pub fn sizes(&self, table: &FeatureTable) -> Result<Option<Vec<f32>>> {
        let Some(name) = &self.size_feature else {
            return Ok(None);
        };
        let col = table
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        let [lo, hi] = self.size_range;
        Ok(Some(
            normalize(col.values(), [col.finite_min(), col.finite_max()])
                .into_iter()
                .map(|t| (lo + (hi - lo) * t as f64) as f32)
                .collect(),
        ))
    }

    /// Per-point color-scale positions in [0, 1] from `color_feature`.
    /// NaN marks non-finite inputs so the renderer can grey them out.
    pub fn color_positions(&self, table: &FeatureTable) -> Result<Option<Vec<f32>>> {
        let Some(name) = &self.color_feature else {
            return Ok(None);
        };
        let col = table
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        let range = self
            .color_range
            .unwrap_or([col.finite_min(), col.finite_max()]);
        Ok(Some(
            col.values()
                .iter()
                .zip(normalize(col.values(), range))
                .map(|(v, t)| if v.is_finite() { t } else { f32::NAN })
                .collect(),
        ))
    }
}

fn normalize(values: &[f64], [lo, hi]: [f64; 2]) -> Vec<f32> {
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() || !(span > 0.0) {
                0.0
            } else {
                ((v - lo) / span).clamp(0.0, 1.0) as f32
            }
        })
        .collect()
}
