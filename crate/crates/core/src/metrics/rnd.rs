use super::knn::{density, knn};
use super::{MetricError, Point, Result};

/// Relative neighbour density for one focal document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RndScore {
    /// `1 - raw`; higher means more novel.
    pub score: f64,
    /// Fraction of the focal's k neighbours whose density is strictly lower
    /// than the focal's.
    pub raw: f64,
    /// Focal and all neighbours share one density (e.g. all points identical).
    pub degenerate: bool,
}

/// Scores the focal by comparing its k-NN density against the densities of
/// its k nearest pool members, each measured inside the pool without itself.
pub fn score_rnd(focal: &[f64], pool: &[Point<'_>], k: usize) -> Result<RndScore> {
    if k == 0 {
        return Err(MetricError::InvalidParameter("k_rnd must be positive".into()));
    }
    if pool.len() < k + 1 {
        return Err(MetricError::PoolTooSmall {
            metric: "rnd",
            need: k + 1,
            have: pool.len(),
        });
    }
    let neighbors = knn(focal, pool, k)?;
    let own = density(focal, pool, None, k)?;
    let mut lower = 0usize;
    let mut all_equal = true;
    for n in &neighbors {
        let d = density(pool[n.index].vector, pool, Some(n.index), k)?;
        if d < own {
            lower += 1;
        }
        all_equal &= d == own;
    }
    let raw = lower as f64 / k as f64;
    Ok(RndScore {
        score: 1.0 - raw,
        raw,
        degenerate: all_equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine_distance;

    fn pool_of<'a>(ids: &'a [String], vs: &'a [Vec<f64>]) -> Vec<Point<'a>> {
        ids.iter().zip(vs).map(|(id, v)| Point { id, vector: v }).collect()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:03}")).collect()
    }

    #[test]
    fn pool_too_small() {
        let vs = vec![vec![1.0, 0.0]; 3];
        let id = ids(3);
        assert!(matches!(
            score_rnd(&[1.0, 0.0], &pool_of(&id, &vs), 3),
            Err(MetricError::PoolTooSmall { need: 4, have: 3, .. })
        ));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let vs = vec![vec![0.2, 0.5, 0.1]; 6];
        let id = ids(6);
        let s = score_rnd(&[0.2, 0.5, 0.1], &pool_of(&id, &vs), 3).unwrap();
        assert_eq!(s.raw, 0.0);
        assert_eq!(s.score, 1.0);
        assert!(s.degenerate);
    }

    #[test]
    fn far_focal_outside_tight_cluster_scores_one() {
        // tight cluster around e1, focal far away at e2-ish
        let vs: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, 0.01 * i as f64, 0.0]).collect();
        let id = ids(8);
        let focal = [0.3, 1.0, 0.0];
        let pool = pool_of(&id, &vs);
        let s = score_rnd(&focal, &pool, 3).unwrap();
        // brute force: every cluster member is denser than the focal
        let dens_f = {
            let mut d: Vec<f64> = vs.iter().map(|v| cosine_distance(&focal, v)).collect();
            d.sort_by(f64::total_cmp);
            3.0 / d[..3].iter().sum::<f64>()
        };
        for (i, v) in vs.iter().enumerate() {
            let mut d: Vec<f64> = vs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| cosine_distance(v, w)).collect();
            d.sort_by(f64::total_cmp);
            assert!(3.0 / d[..3].iter().sum::<f64>() > dens_f);
        }
        assert_eq!(s.score, 1.0);
    }

    #[test]
    fn duplicate_of_focal_lowers_score() {
        // spread pool on a circle; focal sits between points
        let vs: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = 0.15 * i as f64 + 0.01 * ((i * i) % 7) as f64;
                vec![t.cos(), t.sin(), 0.2]
            })
            .collect();
        let focal = vec![0.9f64.cos(), 0.9f64.sin(), 0.6];
        let id = ids(21);
        let base = score_rnd(&focal, &pool_of(&id[..20], &vs), 5).unwrap();
        let mut with = vs.clone();
        with.push(focal.clone());
        let dup = score_rnd(&focal, &pool_of(&id, &with), 5).unwrap();
        assert!(dup.score < base.score, "{dup:?} vs {base:?}");
    }
}
