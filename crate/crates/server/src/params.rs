//! Query-string decoding shared by the handlers.

use std::collections::HashMap;
use std::str::FromStr;

use featurelens_core::analytics::{parse_chain, AxisSpec, DEFAULT_BINS};
use featurelens_core::model::{DataKind, SystemCollection};

use crate::error::{ApiError, ApiResult};

pub struct Params(pub HashMap<String, String>);

impl Params {
    /// Rejects keys outside `allowed`.
    pub fn allow(&self, allowed: &[&str]) -> ApiResult<()> {
        let mut unknown: Vec<&str> = self.0.keys().map(String::as_str).filter(|k| !allowed.contains(k)).collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort_unstable();
        Err(ApiError::bad_query(format!(
            "unknown query parameter(s) {}; expected one of {}",
            unknown.join(", "),
            allowed.join(", ")
        )))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> ApiResult<&str> {
        self.get(key).ok_or_else(|| ApiError::bad_query(format!("missing query parameter `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> ApiResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| ApiError::bad_query(format!("`{key}={v}`: {e}"))))
            .transpose()
    }

    pub fn flag(&self, key: &str, default: bool) -> ApiResult<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("1" | "true" | "yes") => Ok(true),
            Some("0" | "false" | "no") => Ok(false),
            Some(v) => Err(ApiError::bad_query(format!("`{key}={v}` is not a boolean"))),
        }
    }

    /// Data kind, defaulting to voxels when the collection has any.
    pub fn kind(&self, c: &SystemCollection) -> ApiResult<DataKind> {
        match self.parse::<DataKind>("kind")? {
            Some(k) => Ok(k),
            None if c.total(DataKind::Voxel) > 0 => Ok(DataKind::Voxel),
            None => Ok(DataKind::Atom),
        }
    }

    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
    }

    /// A `lo,hi` pair.
    pub fn pair(&self, key: &str) -> ApiResult<Option<[f64; 2]>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let parts: Vec<&str> = v.split(',').collect();
        let bad = || ApiError::bad_query(format!("`{key}={v}`: expected `lo,hi`"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        Ok(Some([lo, hi]))
    }

    /// `bins=N` or `bins=NX,NY`.
    pub fn bins(&self) -> ApiResult<[usize; 2]> {
        let Some(v) = self.get("bins") else {
            return Ok([DEFAULT_BINS, DEFAULT_BINS]);
        };
        let bad = || ApiError::bad_query(format!("`bins={v}`: expected `N` or `NX,NY` with 1 <= N <= 4096"));
        let parsed: Vec<usize> = v
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<ApiResult<_>>()?;
        let b = match parsed[..] {
            [n] => [n, n],
            [x, y] => [x, y],
            _ => return Err(bad()),
        };
        if b.iter().any(|&n| n == 0 || n > 4096) {
            return Err(bad());
        }
        Ok(b)
    }

    /// Axis `x` (or `y`): a column name, or `pcN` (1-based) over the
    /// `pca` column list; `x_transforms` holds a comma-separated chain.
    pub fn axis(&self, name: &str) -> ApiResult<AxisSpec> {
        let raw = self.required(name)?;
        let spec = match raw.strip_prefix("pc").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if self.get("pca").is_some() => {
                if n == 0 {
                    return Err(ApiError::bad_query(format!("`{name}={raw}`: components are numbered from pc1")));
                }
                let columns = self.list("pca").unwrap_or_default();
                AxisSpec::principal(columns, self.flag("standardized", true)?, n - 1)
            }
            _ => AxisSpec::column(raw),
        };
        let chain = match self.get(&format!("{name}_transforms")) {
            Some(t) => parse_chain(t)?,
            None => Vec::new(),
        };
        Ok(spec.with_transforms(chain))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use featurelens_core::analytics::{AxisSource, Transform};

    fn p(pairs: &[(&str, &str)]) -> Params {
        Params(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    #[test]
    fn axes_and_bins() {
        let q = p(&[("x", "density"), ("x_transforms", "log10"), ("y", "pc2"), ("pca", "a,b,c"), ("bins", "64,32")]);
        let x = q.axis("x").unwrap();
        assert_eq!(x.transforms, vec![Transform::Log10]);
        let y = q.axis("y").unwrap();
        match y.source {
            AxisSource::Principal(pa) => {
                assert_eq!(pa.component, 1);
                assert_eq!(pa.columns, ["a", "b", "c"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(q.bins().unwrap(), [64, 32]);
        assert!(p(&[("bins", "0")]).bins().is_err());
        assert!(p(&[("bins", "a")]).bins().is_err());
        // Without a pca list, `pc2` is an ordinary column name.
        assert!(matches!(p(&[("x", "pc2")]).axis("x").unwrap().source, AxisSource::Column(_)));
    }

    #[test]
    fn unknown_keys_and_pairs() {
        let q = p(&[("x", "a"), ("zz", "1")]);
        assert_eq!(q.allow(&["x"]).unwrap_err().code, "bad_query");
        assert_eq!(p(&[("r", "1, 2")]).pair("r").unwrap(), Some([1.0, 2.0]));
        assert!(p(&[("r", "1")]).pair("r").is_err());
        assert!(p(&[("f", "maybe")]).flag("f", true).is_err());
    }
}
