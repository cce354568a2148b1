use std::collections::{HashMap, VecDeque};
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use super::axis::PrincipalAxis;
use super::pca::{pca_fit, pca_project, PcaModel, PcaSpec};
use crate::error::Result;
use crate::model::{DataKind, SystemCollection};

/// PCA fits and projections memoized on a collection (whose data never
/// changes after load).
#[derive(Debug, Default)]
pub struct ModelCache {
    models: Mutex<HashMap<(DataKind, PcaSpec), Arc<PcaModel>>>,
    projections: Mutex<HashMap<(DataKind, PcaSpec), Arc<[Arc<[f64]>]>>>,
}

pub fn cached_pca(c: &SystemCollection, kind: DataKind, spec: &PcaSpec) -> Result<Arc<PcaModel>> {
    let key = (kind, spec.clone());
    if let Some(m) = c.models.models.lock().unwrap().get(&key) {
        return Ok(m.clone());
    }
    let m = Arc::new(pca_fit(c, kind, spec)?);
    c.models.models.lock().unwrap().insert(key, m.clone());
    Ok(m)
}

/// Pooled values of one principal component (NaN for rows that cannot be projected).
pub fn cached_projection(c: &SystemCollection, kind: DataKind, axis: &PrincipalAxis) -> Result<Arc<[f64]>> {
    let spec = PcaSpec {
        columns: axis.columns.clone(),
        k: axis.component + 1,
        standardized: axis.standardized,
    };
    let key = (kind, spec.clone());
    if let Some(p) = c.models.projections.lock().unwrap().get(&key) {
        return Ok(p[axis.component].clone());
    }
    let model = cached_pca(c, kind, &spec)?;
    let proj = pca_project(&model, c, kind)?;
    let comps: Arc<[Arc<[f64]>]> = (0..proj.k).map(|k| Arc::from(proj.component(k))).collect();
    let out = comps[axis.component].clone();
    c.models.projections.lock().unwrap().insert(key, comps);
    Ok(out)
}

/// Bounded, insertion-ordered cache of plot products keyed by
/// (spec key, data version).
#[derive(Debug)]
pub struct ProductCache<K, V> {
    capacity: usize,
    inner: Mutex<(HashMap<(K, u64), V>, VecDeque<(K, u64)>)>,
}

impl<K: Hash + Eq + Clone, V: Clone> ProductCache<K, V> {
    pub fn new(capacity: usize) -> Self {
        ProductCache {
            capacity: capacity.max(1),
            inner: Mutex::new((HashMap::new(), VecDeque::new())),
        }
    }

    pub fn get(&self, key: &K, data_version: u64) -> Option<V> {
        self.inner.lock().unwrap().0.get(&(key.clone(), data_version)).cloned()
    }

    pub fn get_or_try_insert(&self, key: K, data_version: u64, f: impl FnOnce() -> Result<V>) -> Result<V> {
        if let Some(v) = self.get(&key, data_version) {
            return Ok(v);
        }
        let v = f()?;
        let mut g = self.inner.lock().unwrap();
        let k = (key, data_version);
        if g.0.insert(k.clone(), v.clone()).is_none() {
            g.1.push_back(k);
            while g.1.len() > self.capacity {
                if let Some(old) = g.1.pop_front() {
                    g.0.remove(&old);
                }
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_cache_evicts_oldest() {
        let c: ProductCache<String, u32> = ProductCache::new(2);
        let mut calls = 0;
        for k in ["a", "b", "a", "c", "a"] {
            c.get_or_try_insert(k.to_string(), 1, || {
                calls += 1;
                Ok(1)
            })
            .unwrap();
        }
        // a, b computed; a hit; c evicts a; a recomputed.
        assert_eq!(calls, 4);
        assert_eq!(c.len(), 2);
        assert!(c.get(&"a".to_string(), 2).is_none());
    }
}
