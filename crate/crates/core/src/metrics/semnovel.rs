use super::lof::euclidean;
use super::tsne::{tsne, TsneConfig};
use super::{MetricError, Result};

/// Neighbourhood size `max(10, int(0.02 * pool_size))`.
pub fn semnovel_k(pool_size: usize) -> usize {
    ((0.02 * pool_size as f64) as usize).max(10)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / norm).collect()
}

/// Projects focal and pool to 2-D with t-SNE and sums the focal's distances
/// to its K nearest pool points in the projection.
///
/// Inputs are L2-normalised first, so the Gaussian input kernel ranks
/// neighbours by cosine distance. The focal is row 0 and the pool follows
/// in the given order, so pool variants that only append members share the
/// initial layout of their common prefix.
pub fn score_semnovel(focal: &[f64], pool: &[&[f64]], config: &TsneConfig, seed: u64) -> Result<f64> {
    if pool.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(pool.len() + 1);
    rows.push(unit(focal));
    rows.extend(pool.iter().map(|v| unit(v)));
    let points: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let cfg = TsneConfig {
        seed,
        ..config.clone()
    };
    let projected = tsne(&points, &cfg)?;
    let origin = projected.point(0);
    let mut distances: Vec<f64> = (1..=pool.len())
        .map(|i| euclidean(origin, projected.point(i)))
        .collect();
    distances.sort_by(f64::total_cmp);
    let k = semnovel_k(pool.len()).min(pool.len());
    Ok(distances[..k].iter().sum())
}
