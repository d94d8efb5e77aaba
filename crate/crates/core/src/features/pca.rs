use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of a centred data matrix.
///
/// Covariance uses the population divisor `n`, so the squared reconstruction
/// error over the training rows equals `n` times the sum of the discarded
/// eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One orthonormal row per component, `d_out × d_in`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn explained_ratio(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.explained_variance.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        pca_transform(self, x)
    }

    /// Maps reduced coordinates back to the input space.
    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                found: z.len(),
            });
        }
        let mut x = self.mean.clone();
        for (c, &w) in self.components.iter().zip(z) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += w * ci;
            }
        }
        Ok(x)
    }
}

/// Default output dimensionality for `n` training rows.
pub fn default_target_dim(n_train: usize) -> usize {
    50.min(n_train.saturating_sub(1)).max(1)
}

pub fn pca_fit(rows: &[Vec<f64>], target_dim: usize) -> Result<PcaModel> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 rows, got {n}")));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    if target_dim == 0 || target_dim > (n - 1).min(d) {
        return Err(Error::InvalidInput(format!(
            "target_dim {target_dim} must be in 1..={} for {n} rows of dimension {d}",
            (n - 1).min(d)
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let cov = (centred.transpose() * &centred) / n as f64;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(target_dim);
    let mut explained_variance = Vec::with_capacity(target_dim);
    for &k in order.iter().take(target_dim) {
        let mut c: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = c
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(_, v)| v)
            .unwrap_or(1.0);
        if pivot < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(c);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    Ok(model
        .components
        .iter()
        .map(|c| {
            c.iter()
                .zip(x.iter().zip(&model.mean))
                .map(|(ci, (xi, mi))| ci * (xi - mi))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn rank_one_line_is_fully_explained() {
        let dir = [1.0, -2.0, 0.5];
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| dir.iter().map(|d| d * (i as f64 - 3.0) + 1.0).collect())
            .collect();
        let m = pca_fit(&rows, 1).unwrap();
        assert!((m.explained_ratio() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let m = pca_fit(&rows, 2).unwrap();
        for r in &rows {
            let back = m.inverse(&m.transform(r).unwrap()).unwrap();
            for (a, b) in r.iter().zip(&back) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthonormal_sorted_and_sign_fixed() {
        let rows = random_rows(30, 8, 4);
        let m = pca_fit(&rows, 6).unwrap();
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - want).abs() < 1e-6);
            }
            let big = a.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            assert!(big > 0.0);
        }
        assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn transform_of_mean_and_component() {
        let rows = random_rows(20, 5, 2);
        let m = pca_fit(&rows, 3).unwrap();
        assert!(m.transform(&m.mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        let x: Vec<f64> = m.mean.iter().zip(&m.components[0]).map(|(a, b)| a + b).collect();
        let z = m.transform(&x).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-9);
        assert!(z[1..].iter().all(|v| v.abs() < 1e-9));
        assert!(matches!(m.transform(&[0.0; 4]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_target_dim() {
        let rows = random_rows(4, 10, 1);
        assert!(pca_fit(&rows, 4).is_err());
        assert!(pca_fit(&rows, 0).is_err());
        assert!(pca_fit(&rows[..1], 1).is_err());
        // Rank-deficient input is fine.
        let flat = vec![vec![1.0, 1.0]; 5];
        let m = pca_fit(&flat, 1).unwrap();
        assert_eq!(m.explained_variance, vec![0.0]);
    }
}
