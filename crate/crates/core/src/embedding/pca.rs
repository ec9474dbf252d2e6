use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EmbeddingError;

/// Principal axes of a point cloud, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-length rows, one per component, each of length `d`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Running sum of `explained_variance_ratio`.
    pub cumulative_ratio: Vec<f64>,
    /// Components carrying non-negligible variance.
    pub rank: usize,
}

/// How many components [`pca_reduce`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    Components(usize),
    /// Smallest `k` whose cumulative ratio reaches this fraction.
    Variance(f64),
}

const RANK_TOL: f64 = 1e-10;

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, EmbeddingError> {
    if rows.len() < 2 {
        return Err(EmbeddingError::TooFewPoints { needed: 2, got: rows.len() });
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(EmbeddingError::Shape("rows must share one non-zero length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EmbeddingError::Shape("data contains non-finite values".into()));
    }
    Ok(d)
}

/// Fits on mean-centered data. Uses the `d × d` covariance when `d ≤ n` and
/// the `n × n` Gram matrix otherwise.
pub fn pca_fit(rows: &[Vec<f64>]) -> Result<PcaModel, EmbeddingError> {
    let d = check_rows(rows)?;
    let n = rows.len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    let (variances, components): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = (x.transpose() * &x) / denom;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order
            .iter()
            .map(|&c| (eig.eigenvalues[c].max(0.0), eig.eigenvectors.column(c).iter().copied().collect()))
            .unzip()
    } else {
        let gram = &x * x.transpose();
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        order
            .iter()
            .filter(|&&c| eig.eigenvalues[c] > RANK_TOL * top && top > 0.0)
            .map(|&c| {
                let lambda = eig.eigenvalues[c];
                let v = x.transpose() * eig.eigenvectors.column(c) / lambda.sqrt();
                (lambda / denom, v.iter().copied().collect())
            })
            .unzip()
    };

    let total: f64 = if d <= n {
        variances.iter().sum()
    } else {
        // trace of the covariance, including directions the Gram route drops
        x.iter().map(|v| v * v).sum::<f64>() / denom
    };
    if total <= 0.0 || variances.is_empty() {
        let mut axis = vec![0.0; d];
        axis[0] = 1.0;
        return Ok(PcaModel {
            mean,
            components: vec![axis],
            explained_variance: vec![0.0],
            explained_variance_ratio: vec![0.0],
            cumulative_ratio: vec![0.0],
            rank: 0,
        });
    }
    let ratio: Vec<f64> = variances.iter().map(|v| v / total).collect();
    let mut acc = 0.0;
    let cumulative = ratio
        .iter()
        .map(|r| {
            acc += r;
            acc
        })
        .collect();
    let rank = variances.iter().filter(|&&v| v > RANK_TOL * variances[0]).count();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variances,
        explained_variance_ratio: ratio,
        cumulative_ratio: cumulative,
        rank,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Smallest `k` with cumulative ratio ≥ `fraction` (to 1e-9).
    pub fn components_for_variance(&self, fraction: f64) -> Result<usize, EmbeddingError> {
        self.cumulative_ratio
            .iter()
            .position(|&c| c >= fraction - 1e-9)
            .map(|i| i + 1)
            .filter(|&k| k <= self.rank)
            .ok_or(EmbeddingError::UnreachableVariance(fraction))
    }

    pub fn resolve(&self, target: PcaTarget) -> Result<usize, EmbeddingError> {
        match target {
            PcaTarget::Components(k) if k == 0 || k > self.rank => {
                Err(EmbeddingError::RankExceeded { k, rank: self.rank })
            }
            PcaTarget::Components(k) => Ok(k),
            PcaTarget::Variance(f) => self.components_for_variance(f),
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        if k > self.components.len() {
            return Err(EmbeddingError::RankExceeded { k, rank: self.components.len() });
        }
        rows.iter()
            .map(|r| {
                if r.len() != self.dim() {
                    return Err(EmbeddingError::Shape(format!("row has {} values, model {}", r.len(), self.dim())));
                }
                Ok(self.components[..k]
                    .iter()
                    .map(|c| c.iter().zip(r).zip(&self.mean).map(|((c, v), m)| c * (v - m)).sum())
                    .collect())
            })
            .collect()
    }

    /// Maps projected rows back into the original space.
    pub fn inverse_transform(&self, projected: &[Vec<f64>]) -> Vec<Vec<f64>> {
        projected
            .iter()
            .map(|p| {
                let mut out = self.mean.clone();
                for (coef, c) in p.iter().zip(&self.components) {
                    for (o, v) in out.iter_mut().zip(c) {
                        *o += coef * v;
                    }
                }
                out
            })
            .collect()
    }
}

/// Projects onto the leading components chosen by `target`.
pub fn pca_reduce(model: &PcaModel, rows: &[Vec<f64>], target: PcaTarget) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let k = model.resolve(target)?;
    model.transform(rows, k)
}
