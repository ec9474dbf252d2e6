use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EmbeddingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and initial momentum.
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
    /// Inputs above this size are uniformly subsampled first.
    pub max_points: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
            max_points: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneResult {
    /// One 2-D point per kept input row, centered.
    pub embedding: Vec<[f64; 2]>,
    /// Rows of the input that were embedded, ascending.
    pub indices: Vec<usize>,
    /// KL(P‖Q) against the unexaggerated P, one entry per iteration.
    pub kl: Vec<f64>,
}

const P_FLOOR: f64 = 1e-12;
const BISECTION_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;

fn squared_distances(rows: &[&Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        for j in 0..n {
            out[j] = rows[i].iter().zip(rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    });
    d
}

/// Conditional affinities `p_{j|i}` for one row, by bisection on the
/// Gaussian precision until the entropy matches `ln(perplexity)`.
fn row_affinities(dist: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
    let mut p = vec![0.0; dist.len()];
    for _ in 0..BISECTION_STEPS {
        let mut sum = 0.0;
        for (j, &dj) in dist.iter().enumerate() {
            p[j] = if j == i { 0.0 } else { (-dj * beta).exp() };
            sum += p[j];
        }
        let entropy = if sum > 0.0 {
            let weighted: f64 = dist.iter().zip(&p).map(|(d, p)| d * p).sum();
            sum.ln() + beta * weighted / sum
        } else {
            0.0
        };
        if sum > 0.0 {
            p.iter_mut().for_each(|v| *v /= sum);
        }
        let diff = entropy - target;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
        }
    }
    if p.iter().all(|&v| v == 0.0) {
        // every neighbor coincides or is unreachable: spread evenly
        let n = dist.len() - 1;
        p.iter_mut().enumerate().for_each(|(j, v)| *v = if j == i { 0.0 } else { 1.0 / n as f64 });
    }
    p
}

/// Exact (all pairs) t-SNE into two dimensions.
pub fn tsne(rows: &[Vec<f64>], config: &TsneConfig) -> Result<TsneResult, EmbeddingError> {
    let indices: Vec<usize> = if rows.len() > config.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
        let mut idx = sample(&mut rng, rows.len(), config.max_points).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..rows.len()).collect()
    };
    let pts: Vec<&Vec<f64>> = indices.iter().map(|&i| &rows[i]).collect();
    let n = pts.len();
    if n < 4 {
        return Err(EmbeddingError::TooFewPoints { needed: 4, got: n });
    }
    if !(config.perplexity > 0.0) || config.perplexity >= (n - 1) as f64 / 3.0 {
        return Err(EmbeddingError::Perplexity {
            perplexity: config.perplexity,
            n,
        });
    }
    let d = pts[0].len();
    if pts.iter().any(|r| r.len() != d) || pts.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(EmbeddingError::Shape("rows must share one length and be finite".into()));
    }

    let dist = squared_distances(&pts);
    let cond: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| row_affinities(&dist[i * n..(i + 1) * n], i, config.perplexity))
        .collect();
    let mut p = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = cond[i][j] + cond[j][i];
            p[i * n + j] = v;
            total += v;
        }
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v = if k / n == k % n { 0.0 } else { (*v / total).max(P_FLOOR) };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl = Vec::with_capacity(config.iterations);

    for it in 0..config.iterations {
        let early = it < config.exaggeration_iterations;
        let exaggeration = if early { config.early_exaggeration } else { 1.0 };
        let momentum = if early { config.initial_momentum } else { config.final_momentum };

        let num: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    0.0
                } else {
                    let dx = y[i][0] - y[j][0];
                    let dy = y[i][1] - y[j][1];
                    1.0 / (1.0 + dx * dx + dy * dy)
                }
            })
            .collect();
        let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
        let z: f64 = row_sums.iter().sum();

        let (grad, kl_rows): (Vec<[f64; 2]>, Vec<f64>) = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                let mut kl_i = 0.0;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = num[i * n + j];
                    let q = (w / z).max(P_FLOOR);
                    let pij = p[i * n + j];
                    kl_i += pij * (pij / q).ln();
                    let m = (exaggeration * pij - q) * w;
                    g[0] += 4.0 * m * (y[i][0] - y[j][0]);
                    g[1] += 4.0 * m * (y[i][1] - y[j][1]);
                }
                (g, kl_i)
            })
            .unzip();
        kl.push(kl_rows.iter().sum());

        for i in 0..n {
            for a in 0..2 {
                let same_sign = (grad[i][a] > 0.0) == (velocity[i][a] > 0.0);
                gains[i][a] = if same_sign { gains[i][a] * 0.8 } else { gains[i][a] + 0.2 };
                gains[i][a] = gains[i][a].max(MIN_GAIN);
                velocity[i][a] = momentum * velocity[i][a] - config.learning_rate * gains[i][a] * grad[i][a];
                y[i][a] += velocity[i][a];
            }
        }
        let mean = y.iter().fold([0.0; 2], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        for v in &mut y {
            v[0] -= mean[0] / n as f64;
            v[1] -= mean[1] / n as f64;
        }
        if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(EmbeddingError::Diverged(it));
        }
    }
    Ok(TsneResult {
        embedding: y,
        indices,
        kl,
    })
}

/// Share of points whose nearest embedded neighbor has the same label.
pub fn nearest_neighbor_agreement(embedding: &[[f64; 2]], labels: &[usize]) -> f64 {
    let n = embedding.len();
    let hits = (0..n)
        .filter(|&i| {
            let nearest = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let da = (embedding[a][0] - embedding[i][0]).powi(2) + (embedding[a][1] - embedding[i][1]).powi(2);
                    let db = (embedding[b][0] - embedding[i][0]).powi(2) + (embedding[b][1] - embedding[i][1]).powi(2);
                    da.total_cmp(&db)
                });
            nearest.is_some_and(|j| labels[j] == labels[i])
        })
        .count();
    hits as f64 / n as f64
}
