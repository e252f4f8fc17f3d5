//! Local Outlier Factor over Euclidean distance.
//!
//! k-distance, reachability `max(k-dist(b), d(a, b))`, local reachability
//! density `1 / (mean reach + eps)` and `LOF(a) = mean lrd(b) / lrd(a)`
//! over the k nearest neighbours `b` of `a` (self excluded, ties by index).

use std::collections::HashMap;

use super::{MetricError, Result};

/// Guard in the lrd denominator; keeps duplicate points finite (LOF = 1).
pub const LRD_EPS: f64 = 1e-12;

pub fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

struct Neighborhood {
    members: Vec<(usize, f64)>,
    k_distance: f64,
}

fn neighborhood(points: &[&[f64]], i: usize, k: usize) -> Neighborhood {
    let mut d: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (j, euclidean(points[i], p)))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
        d.truncate(k);
    }
    d.sort_unstable_by(cmp);
    let k_distance = d[k - 1].1;
    Neighborhood {
        members: d,
        k_distance,
    }
}

fn validate(points: &[&[f64]], k: usize) -> Result<()> {
    if k == 0 {
        return Err(MetricError::InvalidParameter("lof k must be positive".into()));
    }
    if points.len() <= k {
        return Err(MetricError::TooFewPoints {
            need: k + 1,
            have: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(MetricError::DimMismatch(dim, p.len()));
    }
    Ok(())
}

fn lrd(hood: &Neighborhood, k_distance_of: impl Fn(usize) -> f64) -> f64 {
    let mean = hood
        .members
        .iter()
        .map(|&(j, d)| k_distance_of(j).max(d))
        .sum::<f64>()
        / hood.members.len() as f64;
    1.0 / (mean + LRD_EPS)
}

/// LOF score for every point.
pub fn lof(points: &[&[f64]], k: usize) -> Result<Vec<f64>> {
    validate(points, k)?;
    let hoods: Vec<Neighborhood> = (0..points.len())
        .map(|i| neighborhood(points, i, k))
        .collect();
    let lrds: Vec<f64> = hoods
        .iter()
        .map(|h| lrd(h, |j| hoods[j].k_distance))
        .collect();
    Ok(hoods
        .iter()
        .zip(&lrds)
        .map(|(h, &own)| {
            h.members.iter().map(|&(j, _)| lrds[j]).sum::<f64>() / (k as f64 * own)
        })
        .collect())
}

/// LOF score of a single point, touching only the neighbourhoods it needs
/// (its own, its neighbours', and their neighbours').
pub fn lof_at(points: &[&[f64]], index: usize, k: usize) -> Result<f64> {
    validate(points, k)?;
    if index >= points.len() {
        return Err(MetricError::InvalidParameter(format!("index {index} out of range")));
    }
    let mut cache: HashMap<usize, Neighborhood> = HashMap::new();
    let hood_of = |i: usize, cache: &mut HashMap<usize, Neighborhood>| {
        cache.entry(i).or_insert_with(|| neighborhood(points, i, k));
    };
    hood_of(index, &mut cache);
    let first: Vec<usize> = cache[&index].members.iter().map(|&(j, _)| j).collect();
    for &b in &first {
        hood_of(b, &mut cache);
        let second: Vec<usize> = cache[&b].members.iter().map(|&(j, _)| j).collect();
        for c in second {
            hood_of(c, &mut cache);
        }
    }
    let lrd_of = |i: usize| lrd(&cache[&i], |j| cache[&j].k_distance);
    let own = lrd_of(index);
    Ok(first.iter().map(|&b| lrd_of(b)).sum::<f64>() / (k as f64 * own))
}
