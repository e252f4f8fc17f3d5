//! Shared fixtures for the criterion benchmarks.

use std::collections::BTreeMap;

use novax_core::axioms::Relation;
use novax_core::{CheckId, CheckResult, CheckStatus, MetricKind, ResultTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` unit vectors in `d` dimensions.
pub fn unit_vectors(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Random result table: three domains, two tasks each, `focals` focal
/// papers per task, every metric and check evaluated.
pub fn random_table(seed: u64, focals: usize) -> ResultTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for domain in ["NLP", "CV", "Biomed"] {
        for t in 0..2 {
            let task = format!("{domain}-{t}");
            for f in 0..focals {
                let focal = format!("{task}-{f}");
                for metric in MetricKind::ALL {
                    let base: f64 = rng.random_range(0.0..1.0);
                    for check in CheckId::ALL {
                        let spec = check.spec();
                        let mut scores = BTreeMap::new();
                        scores.insert("base".to_string(), base);
                        for v in spec.variants() {
                            scores
                                .entry(v.to_string())
                                .or_insert_with(|| rng.random_range(0.0..1.0));
                        }
                        let pass = spec.relations.iter().all(|(l, rel, r)| {
                            let (a, b) = (scores[&l.to_string()], scores[&r.to_string()]);
                            match rel {
                                Relation::Less => a < b,
                                Relation::Greater => a > b,
                            }
                        });
                        rows.push(CheckResult {
                            focal: focal.clone(),
                            task: task.clone(),
                            domain: domain.to_string(),
                            metric,
                            check,
                            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
                            reason: None,
                            scores,
                        });
                    }
                }
            }
        }
    }
    ResultTable { rows }
}
