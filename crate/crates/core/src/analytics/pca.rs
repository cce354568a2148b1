use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{complete_row_moments, complete_row_sums, Pooled, BLOCK_ROWS};
use crate::error::{Error, Result};
use crate::model::{DataKind, SystemCollection};
use crate::selection::Bitset;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaSpec {
    pub columns: Vec<String>,
    pub k: usize,
    #[serde(default = "yes")]
    pub standardized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Per-column divisor: standard deviation when standardized, else 1.
    pub scale: Vec<f64>,
    /// k x F, orthonormal rows.
    pub components: Vec<Vec<f64>>,
    /// Descending eigenvalues of the (standardized) covariance matrix.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
    pub standardized: bool,
    pub n_rows: usize,
    /// Rows left out of the fit because a selected value was non-finite.
    pub n_excluded: usize,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }

    /// Coordinates of one row; `None` when any value is non-finite.
    pub fn project_row(&self, row: &[f64]) -> Option<Vec<f64>> {
        if row.len() != self.columns.len() || row.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(
            self.components
                .iter()
                .map(|c| {
                    row.iter()
                        .zip(&self.mean)
                        .zip(&self.scale)
                        .zip(c)
                        .map(|(((x, m), s), w)| (x - m) / s * w)
                        .sum()
                })
                .collect(),
        )
    }
}

/// Projected coordinates of every pooled point, row-major n x k. Rows with
/// non-finite inputs hold NaN and are clear in `valid`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub k: usize,
    pub coords: Vec<f64>,
    pub valid: Bitset,
}

impl Projection {
    pub fn n_invalid(&self) -> usize {
        self.valid.len() - self.valid.count_ones()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.coords.iter().skip(c).step_by(self.k).copied().collect()
    }
}

pub fn pca_fit(c: &SystemCollection, kind: DataKind, spec: &PcaSpec) -> Result<PcaModel> {
    fit(&Pooled::new(c, kind, &spec.columns)?, spec.k, spec.standardized)
}

/// Fits directly on equal-length columns.
pub fn pca_fit_columns(names: &[String], columns: &[&[f64]], k: usize, standardized: bool) -> Result<PcaModel> {
    fit(&direct(names, columns)?, k, standardized)
}

fn direct<'a>(names: &[String], columns: &[&'a [f64]]) -> Result<Pooled<'a>> {
    if names.len() != columns.len() {
        return Err(Error::Dimension(format!(
            "{} names for {} columns",
            names.len(),
            columns.len()
        )));
    }
    let n = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::Shape {
            context: "PCA input".into(),
            expected: n,
            found: c.len(),
        });
    }
    Ok(Pooled {
        names: names.to_vec(),
        parts: vec![columns.to_vec()],
        n,
    })
}

/// Index of the first entry within 1e-12 of the largest magnitude.
fn sign_pivot(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter().position(|x| x.abs() >= max - 1e-12).unwrap_or(0)
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn apply_sign_convention(v: &mut [f64]) {
    if v[sign_pivot(v)] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn fit(p: &Pooled, k: usize, standardized: bool) -> Result<PcaModel> {
    let f = p.width();
    if k == 0 || k > f {
        return Err(Error::Dimension(format!("k = {k} must be in 1..={f}")));
    }
    let (n, sums) = complete_row_sums(p);
    if n < k + 1 {
        return Err(Error::InsufficientData(format!(
            "PCA with k = {k} needs at least {} complete rows, found {n}",
            k + 1
        )));
    }
    let mean: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let m = complete_row_moments(p, &mean);
    let nf = n as f64;
    let mut cov = vec![0.0; f * f];
    for i in 0..f {
        for j in 0..f {
            cov[i * f + j] = (m.gram[i * f + j] - m.sum[i] * m.sum[j] / nf) / (nf - 1.0);
        }
    }
    let mut scale = vec![1.0; f];
    if standardized {
        for j in 0..f {
            let var = cov[j * f + j];
            // A constant column leaves only rounding noise around its mean.
            let noise = 16.0 * (f64::EPSILON * mean[j].abs()).powi(2);
            if !(var > noise) {
                return Err(Error::ZeroVariance(p.names[j].clone()));
            }
            scale[j] = var.sqrt();
        }
        for i in 0..f {
            for j in 0..f {
                cov[i * f + j] /= scale[i] * scale[j];
            }
        }
    }
    let total_variance = (0..f).map(|j| cov[j * f + j]).sum();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(f, f, &cov));
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &o in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(o).iter().copied().collect();
        apply_sign_convention(&mut v);
        components.push(v);
        explained_variance.push(eig.eigenvalues[o].max(0.0));
    }
    Ok(PcaModel {
        columns: p.names.clone(),
        mean,
        scale,
        components,
        explained_variance,
        total_variance,
        standardized,
        n_rows: n,
        n_excluded: p.n - n,
    })
}

pub fn pca_project(model: &PcaModel, c: &SystemCollection, kind: DataKind) -> Result<Projection> {
    Ok(project(model, &Pooled::new(c, kind, &model.columns)?))
}

pub fn pca_project_columns(model: &PcaModel, columns: &[&[f64]]) -> Result<Projection> {
    Ok(project(model, &direct(&model.columns, columns)?))
}

fn project(model: &PcaModel, p: &Pooled) -> Projection {
    let k = model.k();
    let f = p.width();
    let mut coords = vec![f64::NAN; p.n * k];
    let mut rest = coords.as_mut_slice();
    let mut jobs = Vec::new();
    for part in &p.parts {
        let len = part.first().map_or(0, |c| c.len());
        let (head, tail) = rest.split_at_mut(len * k);
        rest = tail;
        for (b, out) in head.chunks_mut(BLOCK_ROWS * k).enumerate() {
            jobs.push((part, b * BLOCK_ROWS, out));
        }
    }
    jobs.into_par_iter().for_each(|(part, start, out)| {
        let mut row = vec![0.0; f];
        for (r, o) in out.chunks_mut(k).enumerate() {
            for (j, c) in part.iter().enumerate() {
                row[j] = (c[start + r] - model.mean[j]) / model.scale[j];
            }
            if row.iter().all(|v| v.is_finite()) {
                for (oc, comp) in o.iter_mut().zip(&model.components) {
                    *oc = row.iter().zip(comp).map(|(x, w)| x * w).sum();
                }
            }
        }
    });
    let valid = Bitset::from_fn(p.n, |g| coords[g * k].is_finite());
    Projection { k, coords, valid }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi eigensolver; returns (eigenvalues, eigenvectors as rows).
    pub(crate) fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut m = a.to_vec();
        let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if m[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let (mrp, mrq) = (m[r][p], m[r][q]);
                        m[r][p] = c * mrp - s * mrq;
                        m[r][q] = s * mrp + c * mrq;
                    }
                    for r in 0..n {
                        let (mpr, mqr) = (m[p][r], m[q][r]);
                        m[p][r] = c * mpr - s * mqr;
                        m[q][r] = s * mpr + c * mqr;
                    }
                    for r in 0..n {
                        let (vrp, vrq) = (v[r][p], v[r][q]);
                        v[r][p] = c * vrp - s * vrq;
                        v[r][q] = s * vrp + c * vrq;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
        let vals = idx.iter().map(|&i| m[i][i]).collect();
        let vecs = idx.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
        (vals, vecs)
    }

    /// Brute-force covariance of row-major data, optionally standardized.
    pub(crate) fn explicit_covariance(rows: &[Vec<f64>], standardized: bool) -> Vec<Vec<f64>> {
        let n = rows.len() as f64;
        let f = rows[0].len();
        let mean: Vec<f64> = (0..f).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let mut cov = vec![vec![0.0; f]; f];
        for i in 0..f {
            for j in 0..f {
                cov[i][j] = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0);
            }
        }
        if standardized {
            let sd: Vec<f64> = (0..f).map(|j| cov[j][j].sqrt()).collect();
            for i in 0..f {
                for j in 0..f {
                    cov[i][j] /= sd[i] * sd[j];
                }
            }
        }
        cov
    }

    pub(crate) fn random_rows(n: usize, f: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Correlated columns with distinct scales.
        let mix: Vec<Vec<f64>> = (0..f).map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
                (0..f)
                    .map(|j| (j + 1) as f64 * (0..f).map(|i| mix[j][i] * z[i]).sum::<f64>() + j as f64)
                    .collect()
            })
            .collect()
    }

    pub(crate) fn fit_rows(rows: &[Vec<f64>], k: usize, standardized: bool) -> PcaModel {
        let f = rows[0].len();
        let cols: Vec<Vec<f64>> = (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let names: Vec<String> = (0..f).map(|j| format!("c{j}")).collect();
        pca_fit_columns(&names, &refs, k, standardized).unwrap()
    }

    /// Max deviation between model and oracle, comparing vectors up to sign.
    pub(crate) fn oracle_deviation(rows: &[Vec<f64>], k: usize, standardized: bool) -> f64 {
        let model = fit_rows(rows, k, standardized);
        let (vals, vecs) = jacobi_eigen(&explicit_covariance(rows, standardized));
        let mut worst = 0.0f64;
        for c in 0..k {
            worst = worst.max((model.explained_variance[c] - vals[c].max(0.0)).abs());
            let d: f64 = model.components[c].iter().zip(&vecs[c]).map(|(a, b)| a * b).sum();
            let s = d.signum();
            for (a, b) in model.components[c].iter().zip(&vecs[c]) {
                worst = worst.max((a - s * b).abs());
            }
        }
        worst
    }

    #[test]
    fn collinear_points() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, i as f64]).collect();
        let m = fit_rows(&rows, 1, true);
        assert!((m.components[0][0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((m.components[0][1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((m.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
        let m = fit_rows(&rows, 2, false);
        assert!((m.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_projects_to_zero() {
        let rows = random_rows(30, 4, 1);
        let m = fit_rows(&rows, 3, true);
        let p = m.project_row(&m.mean).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-12), "{p:?}");
    }

    #[test]
    fn matches_jacobi_oracle_10x5() {
        for seed in 0..20 {
            let rows = random_rows(10, 5, seed);
            for standardized in [true, false] {
                let d = oracle_deviation(&rows, 5, standardized);
                assert!(d < 1e-8, "seed {seed}: {d}");
            }
        }
    }

    #[test]
    fn errors() {
        let rows = random_rows(10, 3, 2);
        let cols: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        assert!(matches!(pca_fit_columns(&names, &refs, 4, true), Err(Error::Dimension(_))));
        assert!(matches!(pca_fit_columns(&names, &refs, 0, true), Err(Error::Dimension(_))));
        let constant = vec![2.5; 10];
        let refs2 = vec![refs[0], constant.as_slice()];
        let names2: Vec<String> = ["a", "flat"].map(String::from).to_vec();
        match pca_fit_columns(&names2, &refs2, 1, true) {
            Err(Error::ZeroVariance(c)) => assert_eq!(c, "flat"),
            other => panic!("{other:?}"),
        }
        assert!(pca_fit_columns(&names2, &refs2, 1, false).is_ok());
        let short = [refs[0][..2].to_vec(), refs[1][..2].to_vec()];
        let refs3: Vec<&[f64]> = short.iter().map(|c| c.as_slice()).collect();
        assert!(matches!(
            pca_fit_columns(&names[..2], &refs3, 2, true),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn non_finite_rows_are_excluded_and_flagged() {
        let mut rows = random_rows(12, 3, 4);
        rows[3][1] = f64::NAN;
        let clean: Vec<Vec<f64>> = rows.iter().enumerate().filter(|(i, _)| *i != 3).map(|(_, r)| r.clone()).collect();
        let a = fit_rows(&rows, 2, true);
        let b = fit_rows(&clean, 2, true);
        assert_eq!(a.n_excluded, 1);
        for (x, y) in a.mean.iter().zip(&b.mean) {
            assert!((x - y).abs() < 1e-12);
        }
        let cols: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let p = pca_project_columns(&a, &refs).unwrap();
        assert_eq!(p.n_invalid(), 1);
        assert!(!p.valid.get(3));
        assert!(p.coords[6].is_nan());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants(seed in any::<u64>(), n in 6usize..40, f in 1usize..6, standardized in any::<bool>()) {
            prop_assume!(n > f);
            let rows = random_rows(n, f, seed);
            let m = fit_rows(&rows, f, standardized);
            for a in 0..f {
                for b in 0..f {
                    let d: f64 = m.components[a].iter().zip(&m.components[b]).map(|(x, y)| x * y).sum();
                    prop_assert!((d - (a == b) as u8 as f64).abs() < 1e-10);
                }
                let c = &m.components[a];
                let piv = sign_pivot(c);
                prop_assert!(c[piv] > 0.0);
            }
            for w in m.explained_variance.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let total: f64 = m.explained_variance.iter().sum();
            prop_assert!((total - m.total_variance).abs() < 1e-10 * m.total_variance.max(1.0));

            let cols: Vec<Vec<f64>> = (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let p = pca_project_columns(&m, &refs).unwrap();
            for c in 0..f {
                let mean: f64 = p.component(c).iter().sum::<f64>() / n as f64;
                prop_assert!(mean.abs() < 1e-10 * m.total_variance.sqrt().max(1.0));
            }
        }
    }
}
