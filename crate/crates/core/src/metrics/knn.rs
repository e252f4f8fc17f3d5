use std::cmp::Ordering;

use super::{MetricError, Point, Result};

/// Guard added to mean neighbour distances before inversion, so duplicated
/// points get a large but finite density.
pub const DENSITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the pool slice.
    pub index: usize,
    pub distance: f64,
}

/// `1 - cos(u, v)`, clamped to `[0, 2]`. Identical vectors give exactly 0.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let denom = (nu * nv).sqrt();
    if denom == 0.0 {
        return 1.0;
    }
    (1.0 - dot / denom).clamp(0.0, 2.0)
}

fn by_distance_then_id<'a>(pool: &'a [Point<'a>]) -> impl Fn(&Neighbor, &Neighbor) -> Ordering + 'a {
    move |a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| pool[a.index].id.cmp(pool[b.index].id))
            .then_with(|| a.index.cmp(&b.index))
    }
}

/// Exact k nearest pool members by cosine distance, ascending, ties broken
/// by the smaller id.
pub fn knn(query: &[f64], pool: &[Point<'_>], k: usize) -> Result<Vec<Neighbor>> {
    knn_excluding(query, pool, k, None)
}

pub(crate) fn knn_excluding(
    query: &[f64],
    pool: &[Point<'_>],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<Neighbor>> {
    if pool.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    let available = pool.len() - usize::from(exclude.is_some_and(|e| e < pool.len()));
    if k == 0 || k > available {
        return Err(MetricError::KTooLarge { k, available });
    }
    let mut all: Vec<Neighbor> = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(index, p)| {
            if p.vector.len() != query.len() {
                return Err(MetricError::DimMismatch(query.len(), p.vector.len()));
            }
            Ok(Neighbor {
                index,
                distance: cosine_distance(query, p.vector),
            })
        })
        .collect::<Result<_>>()?;
    let cmp = by_distance_then_id(pool);
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, &cmp);
        all.truncate(k);
    }
    all.sort_unstable_by(&cmp);
    Ok(all)
}

fn density_from(neighbors: &[Neighbor]) -> f64 {
    let mean = neighbors.iter().map(|n| n.distance).sum::<f64>() / neighbors.len() as f64;
    1.0 / (DENSITY_EPS + mean)
}

/// Inverse mean cosine distance to the k nearest pool members.
///
/// With `member = Some(i)`, the point is `pool[i]` and is excluded from its
/// own neighbourhood; with `None`, `query` is an outside point.
pub fn density(query: &[f64], pool: &[Point<'_>], member: Option<usize>, k: usize) -> Result<f64> {
    Ok(density_from(&knn_excluding(query, pool, k, member)?))
}
