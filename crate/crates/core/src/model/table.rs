use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One named feature column. Values are shared, so cloning a column (or a
/// table holding it) never copies the data.
#[derive(Debug, Clone)]
pub struct Column {
    name: String,
    unit: Option<String>,
    values: Arc<[f64]>,
    finite: usize,
    min: f64,
    max: f64,
}

impl Column {
    pub fn new(name: impl Into<String>, values: impl Into<Arc<[f64]>>) -> Self {
        let values: Arc<[f64]> = values.into();
        let mut finite = 0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values.iter() {
            if v.is_finite() {
                finite += 1;
                min = min.min(v);
                max = max.max(v);
            }
        }
        if finite == 0 {
            min = f64::NAN;
            max = f64::NAN;
        }
        Column {
            name: name.into(),
            unit: None,
            values,
            finite,
            min,
            max,
        }
    }

    pub fn with_unit(mut self, unit: Option<String>) -> Self {
        self.unit = unit;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> Option<&str> {
        self.unit.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shared_values(&self) -> &Arc<[f64]> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn finite_count(&self) -> usize {
        self.finite
    }

    pub fn non_finite_count(&self) -> usize {
        self.values.len() - self.finite
    }

    /// Minimum over finite values (NaN when there are none).
    pub fn finite_min(&self) -> f64 {
        self.min
    }

    pub fn finite_max(&self) -> f64 {
        self.max
    }
}

/// Columnar store of `n_points` rows by named `f64` columns.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    n_points: usize,
    columns: Vec<Column>,
}

impl FeatureTable {
    /// A table with `n_points` rows and no columns.
    pub fn empty(n_points: usize) -> Self {
        FeatureTable {
            n_points,
            columns: Vec::new(),
        }
    }

    pub fn from_columns(n_points: usize, columns: Vec<Column>) -> Result<Self> {
        let mut table = FeatureTable::empty(n_points);
        for c in columns {
            table.push(c)?;
        }
        Ok(table)
    }

    pub fn push(&mut self, column: Column) -> Result<()> {
        if column.len() != self.n_points {
            return Err(Error::Shape {
                context: format!("column `{}`", column.name),
                expected: self.n_points,
                found: column.len(),
            });
        }
        if self.column_index(&column.name).is_some() {
            return Err(Error::Schema(format!(
                "duplicate column name `{}`",
                column.name
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    /// Appends all columns of `other`, sharing their storage. Name
    /// collisions are rejected.
    pub fn merge(&self, other: &FeatureTable) -> Result<FeatureTable> {
        if other.n_points != self.n_points {
            return Err(Error::Shape {
                context: "merged feature table".into(),
                expected: self.n_points,
                found: other.n_points,
            });
        }
        let mine: HashSet<&str> = self.columns.iter().map(|c| c.name()).collect();
        if let Some(c) = other.columns.iter().find(|c| mine.contains(c.name())) {
            return Err(Error::Schema(format!(
                "column `{}` collides with a built-in column",
                c.name()
            )));
        }
        let mut merged = self.clone();
        merged.columns.extend(other.columns.iter().cloned());
        Ok(merged)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_at(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    /// Sets units by column name; names not in the table are ignored.
    pub fn set_unit(&mut self, name: &str, unit: &str) {
        if let Some(c) = self.columns.iter_mut().find(|c| c.name == name) {
            c.unit = Some(unit.to_string());
        }
    }

    /// Row view across all columns, in column order.
    pub fn row(&self, index: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c.values[index]).collect()
    }

    /// Bytes held by column storage (shared storage counted once per table).
    pub fn storage_bytes(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.values.len() * std::mem::size_of::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_are_counted() {
        let c = Column::new("a", vec![1.0, f64::NAN, f64::INFINITY, -2.0]);
        assert_eq!(c.finite_count(), 2);
        assert_eq!(c.non_finite_count(), 2);
        assert_eq!(c.finite_min(), -2.0);
        assert_eq!(c.finite_max(), 1.0);
    }

    #[test]
    fn length_and_name_invariants() {
        let mut t = FeatureTable::empty(3);
        t.push(Column::new("a", vec![1.0, 2.0, 3.0])).unwrap();
        assert!(matches!(
            t.push(Column::new("b", vec![1.0])),
            Err(Error::Shape { expected: 3, found: 1, .. })
        ));
        assert!(matches!(
            t.push(Column::new("a", vec![0.0; 3])),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn merge_shares_storage_and_rejects_collisions() {
        let a = FeatureTable::from_columns(2, vec![Column::new("a", vec![1.0, 2.0])]).unwrap();
        let b = FeatureTable::from_columns(2, vec![Column::new("b", vec![3.0, 4.0])]).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.column_names(), vec!["a", "b"]);
        assert!(Arc::ptr_eq(
            m.column("b").unwrap().shared_values(),
            b.column("b").unwrap().shared_values()
        ));
        assert!(matches!(a.merge(&a), Err(Error::Schema(_))));
    }
}
