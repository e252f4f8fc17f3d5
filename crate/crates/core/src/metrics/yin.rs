use super::knn::cosine_distance;
use super::{MetricError, Point, Result};

/// Linear-interpolation percentile (`q` in `[0, 100]`) of an unsorted slice.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(MetricError::InvalidParameter(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return Ok(sorted[lo]);
    }
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// q-th percentile of cosine distances from the focal to every pool member.
pub fn score_yin(focal: &[f64], pool: &[Point<'_>], q: f64) -> Result<f64> {
    if pool.is_empty() {
        return Err(MetricError::EmptyPool);
    }
    let distances: Vec<f64> = pool
        .iter()
        .map(|p| cosine_distance(focal, p.vector))
        .collect();
    if q == 0.0 {
        return Ok(distances.iter().copied().fold(f64::INFINITY, f64::min));
    }
    percentile(&distances, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        let d = [0.9, 0.2, 0.5];
        assert_eq!(percentile(&d, 0.0).unwrap(), 0.2);
        assert_eq!(percentile(&d, 50.0).unwrap(), 0.5);
        assert_eq!(percentile(&d, 100.0).unwrap(), 0.9);
        // oracle: position 0.25*2 = 0.5 between 0.2 and 0.5
        assert!((percentile(&d, 25.0).unwrap() - 0.35).abs() < 1e-15);
        assert!(percentile(&d, 101.0).is_err());
        assert_eq!(percentile(&[], 10.0), Err(MetricError::EmptyPool));
    }

    #[test]
    fn identical_pool_member_gives_zero() {
        let v = vec![0.3, -0.2, 0.9];
        let other = vec![1.0, 0.0, 0.0];
        let pool = [Point { id: "a", vector: &other }, Point { id: "b", vector: &v }];
        assert_eq!(score_yin(&v, &pool, 0.0).unwrap(), 0.0);
        assert_eq!(score_yin(&v, &[], 0.0), Err(MetricError::EmptyPool));
    }
}
