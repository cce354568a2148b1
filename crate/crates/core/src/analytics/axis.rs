use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cache::cached_projection;
use super::transform::{apply_chain, Transform};
use crate::error::Result;
use crate::model::{DataKind, SystemCollection};

fn yes() -> bool {
    true
}

/// A principal-component coordinate used as a plot axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrincipalAxis {
    pub columns: Vec<String>,
    #[serde(default = "yes")]
    pub standardized: bool,
    /// Zero-based component index.
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSource {
    Column(String),
    Principal(PrincipalAxis),
}

/// One plot axis: a value source plus a transform chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub source: AxisSource,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<Transform>,
}

impl AxisSpec {
    pub fn column(name: impl Into<String>) -> Self {
        AxisSpec {
            source: AxisSource::Column(name.into()),
            transforms: Vec::new(),
        }
    }

    pub fn principal(columns: Vec<String>, standardized: bool, component: usize) -> Self {
        AxisSpec {
            source: AxisSource::Principal(PrincipalAxis {
                columns,
                standardized,
                component,
            }),
            transforms: Vec::new(),
        }
    }

    pub fn with_transforms(mut self, transforms: Vec<Transform>) -> Self {
        self.transforms = transforms;
        self
    }

    pub fn referenced_columns(&self) -> Vec<&str> {
        match &self.source {
            AxisSource::Column(c) => vec![c.as_str()],
            AxisSource::Principal(p) => p.columns.iter().map(String::as_str).collect(),
        }
    }

    pub fn label(&self) -> String {
        let base = match &self.source {
            AxisSource::Column(c) => c.clone(),
            AxisSource::Principal(p) => format!("PC{}", p.component + 1),
        };
        self.transforms.iter().fold(base, |acc, t| format!("{t}({acc})"))
    }
}

enum Part<'a> {
    Borrowed(&'a [f64]),
    Shared(Arc<[f64]>, usize, usize),
}

/// Raw (untransformed) axis values per non-empty segment of a pooled kind.
pub struct AxisValues<'a> {
    parts: Vec<Part<'a>>,
    starts: Vec<usize>,
    transforms: Vec<Transform>,
}

impl AxisValues<'_> {
    pub fn n_parts(&self) -> usize {
        self.parts.len()
    }

    /// Raw values of segment `s`.
    pub fn raw(&self, s: usize) -> &[f64] {
        match &self.parts[s] {
            Part::Borrowed(v) => v,
            Part::Shared(v, a, b) => &v[*a..*b],
        }
    }

    /// Global index of the first point of segment `s`.
    pub fn start(&self, s: usize) -> usize {
        self.starts[s]
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    #[inline]
    pub fn transform(&self, v: f64) -> f64 {
        apply_chain(&self.transforms, v)
    }
}

pub fn resolve_axis<'a>(c: &'a SystemCollection, kind: DataKind, spec: &AxisSpec) -> Result<AxisValues<'a>> {
    let segments = c.segments(kind);
    let starts = segments.iter().map(|s| s.offset).collect();
    let parts = match &spec.source {
        AxisSource::Column(name) => {
            let j = c.column_index(kind, name)?;
            segments
                .iter()
                .map(|s| Part::Borrowed(s.table.column_at(j).values()))
                .collect()
        }
        AxisSource::Principal(p) => {
            let values = cached_projection(c, kind, p)?;
            segments
                .iter()
                .map(|s| Part::Shared(values.clone(), s.offset, s.offset + s.len()))
                .collect()
        }
    };
    Ok(AxisValues {
        parts,
        starts,
        transforms: spec.transforms.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_shape() {
        let a = AxisSpec::column("density").with_transforms(vec![Transform::Log10]);
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(j, r#"{"source":{"column":"density"},"transforms":["log10"]}"#);
        assert_eq!(serde_json::from_str::<AxisSpec>(&j).unwrap(), a);
        let p: AxisSpec = serde_json::from_str(r#"{"source":{"principal":{"columns":["a","b"],"component":1}}}"#).unwrap();
        assert_eq!(p, AxisSpec::principal(vec!["a".into(), "b".into()], true, 1));
        assert_eq!(p.label(), "PC2");
        assert_eq!(a.label(), "log10(density)");
    }
}
