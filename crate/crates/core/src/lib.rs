//! Axiomatic benchmark engine for scientific novelty metrics.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: papers, embedding sets, manifests and their file formats.
//! - [`textops`]: tokenisation, sentence splitting, TF-IDF, ROUGE and small statistics.
//! - [`metrics`]: the four novelty metrics and their kernels (k-NN, density, LOF, t-SNE).
//! - [`axioms`]: pool construction, the nine pool manipulations and pass/fail checks.
//! - [`bench`]: focal sampling, plan emission, evaluation sweeps, aggregation and reports.
//! - [`combine`]: z-scored metric combinations, simplex grid search and cross-validation.
//! - [`synth`]: planted synthetic corpora with known axiom outcomes.

pub mod axioms;
pub mod bench;
pub mod combine;
pub mod corpus;
pub mod metrics;
pub mod synth;
pub mod textops;

mod error;
mod seed;

pub use axioms::{CheckId, SkipReason, VariantKey};
pub use bench::{CheckResult, CheckStatus, Plan, ResultTable, RunConfig};
pub use corpus::{Corpus, EmbeddingSet, EmbeddingStore, Manifest, Paper, TaskSpec};
pub use error::{Error, Result};
pub use metrics::{MetricConfig, MetricKind};
pub use seed::derive_seed;

/// Name of the embedding space built from "title. abstract" text.
pub const ABSTRACT_SPACE: &str = "abstract-embed";
/// Name of the embedding space built from titles only.
pub const TITLE_SPACE: &str = "title-embed";
