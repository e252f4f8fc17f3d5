//! The four novelty metrics and their numeric kernels.
//!
//! Every metric is oriented so that a higher score means "more novel".
//! Yin, RND and SemNovel read the abstract space; FastTextLOF reads the
//! title space.

mod knn;
mod lof;
mod rnd;
mod semnovel;
mod tsne;
mod yin;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use knn::{cosine_distance, density, knn, Neighbor, DENSITY_EPS};
pub use lof::{euclidean, lof, lof_at, LRD_EPS};
pub use rnd::{score_rnd, RndScore};
pub use semnovel::{score_semnovel, semnovel_k};
pub use tsne::{kl_divergence, tsne, TsneConfig, TsneOutput};
pub use yin::{percentile, score_yin};

use crate::{ABSTRACT_SPACE, TITLE_SPACE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty pool")]
    EmptyPool,
    #[error("k={k} exceeds the {available} available points")]
    KTooLarge { k: usize, available: usize },
    #[error("pool too small for {metric}: need {need}, have {have}")]
    PoolTooSmall {
        metric: &'static str,
        need: usize,
        have: usize,
    },
    #[error("need at least {need} points, have {have}")]
    TooFewPoints { need: usize, have: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// One of the four reference metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Yin,
    Rnd,
    Semnovel,
    Ftlof,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Yin,
        MetricKind::Rnd,
        MetricKind::Semnovel,
        MetricKind::Ftlof,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Yin => "yin",
            MetricKind::Rnd => "rnd",
            MetricKind::Semnovel => "semnovel",
            MetricKind::Ftlof => "ftlof",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Yin => "Yin",
            MetricKind::Rnd => "RND",
            MetricKind::Semnovel => "SemNovel",
            MetricKind::Ftlof => "FastTextLOF",
        }
    }

    pub fn space(self) -> &'static str {
        match self {
            MetricKind::Ftlof => TITLE_SPACE,
            _ => ABSTRACT_SPACE,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yin" => Ok(MetricKind::Yin),
            "rnd" => Ok(MetricKind::Rnd),
            "semnovel" => Ok(MetricKind::Semnovel),
            "ftlof" | "fasttextlof" => Ok(MetricKind::Ftlof),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Metric hyperparameters shared by an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// RND neighbourhood size.
    pub k_rnd: usize,
    /// Yin percentile in [0, 100].
    pub q_yin: f64,
    /// LOF neighbourhood size (library default).
    pub lof_k: usize,
    pub tsne: TsneConfig,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            k_rnd: 10,
            q_yin: 0.0,
            lof_k: 20,
            tsne: TsneConfig::default(),
        }
    }
}

/// A pool member as seen by a metric.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub id: &'a str,
    pub vector: &'a [f64],
}

/// Score of one metric for one pool variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    /// Metric-specific raw value (RND's neighbour-density proportion `r`).
    pub raw: Option<f64>,
    pub degenerate: bool,
}

/// Scores `focal` against `pool` with the given metric.
///
/// `seed` is only consumed by SemNovel's projection.
pub fn score(
    metric: MetricKind,
    focal: &[f64],
    pool: &[Point<'_>],
    config: &MetricConfig,
    seed: u64,
) -> Result<Score> {
    match metric {
        MetricKind::Yin => Ok(Score {
            value: score_yin(focal, pool, config.q_yin)?,
            raw: None,
            degenerate: false,
        }),
        MetricKind::Rnd => {
            let s = score_rnd(focal, pool, config.k_rnd)?;
            Ok(Score {
                value: s.score,
                raw: Some(s.raw),
                degenerate: s.degenerate,
            })
        }
        MetricKind::Semnovel => {
            let vectors: Vec<&[f64]> = pool.iter().map(|p| p.vector).collect();
            Ok(Score {
                value: score_semnovel(focal, &vectors, &config.tsne, seed)?,
                raw: None,
                degenerate: false,
            })
        }
        MetricKind::Ftlof => {
            if pool.len() < config.lof_k {
                return Err(MetricError::PoolTooSmall {
                    metric: "ftlof",
                    need: config.lof_k,
                    have: pool.len(),
                });
            }
            let mut points: Vec<&[f64]> = Vec::with_capacity(pool.len() + 1);
            points.push(focal);
            points.extend(pool.iter().map(|p| p.vector));
            Ok(Score {
                value: lof_at(&points, 0, config.lof_k)?,
                raw: None,
                degenerate: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for m in MetricKind::ALL {
            assert_eq!(m.as_str().parse::<MetricKind>().unwrap(), m);
        }
        assert!("bogus".parse::<MetricKind>().is_err());
        assert_eq!(MetricKind::Ftlof.space(), TITLE_SPACE);
        assert_eq!(MetricKind::Rnd.space(), ABSTRACT_SPACE);
    }
}
