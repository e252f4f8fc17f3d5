//! Exact t-SNE.
//!
//! Gaussian input affinities calibrated per point to a target perplexity by
//! bisection on the precision, symmetrised and normalised; Student-t output
//! kernel; gradient descent with momentum, per-coordinate gains and early
//! exaggeration. Single-threaded and deterministic for a fixed seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{MetricError, Result};

const PROB_FLOOR: f64 = 1e-12;
const PERPLEXITY_TOL: f64 = 1e-5;
const MAX_BISECTION_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub dims: usize,
    /// Target perplexity; capped at `floor((n - 1) / 3)` for small inputs.
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOutput {
    /// Row-major `n x dims` coordinates.
    pub coords: Vec<f64>,
    pub n: usize,
    pub dims: usize,
    /// KL(P || Q) at the initial layout, without exaggeration.
    pub initial_kl: f64,
    pub final_kl: f64,
}

impl TsneOutput {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }
}

fn squared_distances(points: &[&[f64]]) -> Vec<f64> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = points[i]
                .iter()
                .zip(points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional affinities p(j|i) for one row, bisecting the Gaussian
/// precision until the row entropy matches `ln(perplexity)`.
fn calibrate_row(dist: &[f64], i: usize, perplexity: f64, out: &mut [f64]) {
    let target = perplexity.ln();
    let shift = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut beta = 1.0;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..MAX_BISECTION_STEPS {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &d) in dist.iter().enumerate() {
            if j == i {
                out[j] = 0.0;
                continue;
            }
            let p = (-(d - shift) * beta).exp();
            out[j] = p;
            sum += p;
            weighted += (d - shift) * p;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        for p in out.iter_mut() {
            *p /= sum;
        }
        let diff = entropy - target;
        if diff.abs() < PERPLEXITY_TOL {
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
}

/// Symmetric joint affinities `P`, row-major `n x n`.
fn joint_probabilities(points: &[&[f64]], perplexity: f64) -> Vec<f64> {
    let n = points.len();
    let dist = squared_distances(points);
    let mut cond = vec![0.0; n * n];
    for i in 0..n {
        calibrate_row(&dist[i * n..(i + 1) * n], i, perplexity, &mut cond[i * n..(i + 1) * n]);
    }
    let mut p = vec![0.0; n * n];
    let norm = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / norm).max(PROB_FLOOR);
            }
        }
    }
    p
}

/// Student-t kernel values `1 / (1 + |yi - yj|^2)` (zero diagonal) and their sum.
fn student_kernel(y: &[f64], n: usize, dims: usize, num: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for k in 0..dims {
                let diff = y[i * dims + k] - y[j * dims + k];
                d2 += diff * diff;
            }
            let v = 1.0 / (1.0 + d2);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    sum
}

/// KL(P || Q) for a layout `y`.
pub fn kl_divergence(p: &[f64], y: &[f64], n: usize, dims: usize) -> f64 {
    let mut num = vec![0.0; n * n];
    let sum = student_kernel(y, n, dims, &mut num);
    kl_from(p, &num, sum, n)
}

fn kl_from(p: &[f64], num: &[f64], sum: f64, n: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let qij = (num[i * n + j] / sum).max(PROB_FLOOR);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

/// Embeds `points` into `config.dims` dimensions.
pub fn tsne(points: &[&[f64]], config: &TsneConfig) -> Result<TsneOutput> {
    let n = points.len();
    if n < 4 {
        return Err(MetricError::TooFewPoints { need: 4, have: n });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(MetricError::DimMismatch(dim, p.len()));
    }
    if config.dims == 0 || !(config.perplexity > 0.0) || !(config.learning_rate > 0.0) {
        return Err(MetricError::InvalidParameter("t-SNE dims, perplexity and learning rate must be positive".into()));
    }
    let dims = config.dims;
    let perplexity = config.perplexity.min(((n - 1) / 3) as f64).max(1.0);
    let p = joint_probabilities(points, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y: Vec<f64> = (0..n * dims)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1e-4 * z
        })
        .collect();

    let mut num = vec![0.0; n * n];
    let initial_sum = student_kernel(&y, n, dims, &mut num);
    let initial_kl = kl_from(&p, &num, initial_sum, n);

    let mut gains = vec![1.0f64; n * dims];
    let mut update = vec![0.0; n * dims];
    let mut grad = vec![0.0; n * dims];
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let sum = student_kernel(&y, n, dims, &mut num);
        grad.iter_mut().for_each(|g| *g = 0.0);
        // P and the kernel are symmetric, so each pair contributes equal and
        // opposite forces
        for i in 0..n {
            for j in (i + 1)..n {
                let nij = num[i * n + j];
                let q = (nij / sum).max(PROB_FLOOR);
                let mult = 4.0 * (exaggeration * p[i * n + j] - q) * nij;
                for k in 0..dims {
                    let force = mult * (y[i * dims + k] - y[j * dims + k]);
                    grad[i * dims + k] += force;
                    grad[j * dims + k] -= force;
                }
            }
        }
        for idx in 0..n * dims {
            gains[idx] = if (grad[idx] > 0.0) != (update[idx] > 0.0) {
                gains[idx] + 0.2
            } else {
                (gains[idx] * 0.8).max(0.01)
            };
            update[idx] = momentum * update[idx] - config.learning_rate * gains[idx] * grad[idx];
            y[idx] += update[idx];
        }
        for k in 0..dims {
            let mean = (0..n).map(|i| y[i * dims + k]).sum::<f64>() / n as f64;
            for i in 0..n {
                y[i * dims + k] -= mean;
            }
        }
    }

    let final_sum = student_kernel(&y, n, dims, &mut num);
    let final_kl = kl_from(&p, &num, final_sum, n);
    Ok(TsneOutput {
        coords: y,
        n,
        dims,
        initial_kl,
        final_kl,
    })
}
