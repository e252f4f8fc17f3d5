//! Focal sampling, plan emission, evaluation sweeps, aggregation and reports.
//!
//! The pipeline runs in two phases. [`emit_plan`] samples focal papers and
//! writes a manifest of every document that must be embedded; after the
//! embeddings exist, [`evaluate`] scores every (focal, metric, check) row.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axioms::{CheckId, FocalContext, Gates, SkipReason, VariantKey};
use crate::corpus::{Corpus, EmbeddingStore, Manifest, Requirement, SyntheticEntry, TaskSpec, VariantKind};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricConfig, MetricKind, Point};
use crate::{derive_seed, ABSTRACT_SPACE};

/// Focal papers need at least this many abstract-bearing base pool members.
pub const MIN_BASE_POOL: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tasks: Vec<TaskSpec>,
    pub focal_count: usize,
    pub seed: u64,
    pub metrics: Vec<MetricKind>,
    pub checks: Vec<CheckId>,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub metric_config: MetricConfig,
    #[serde(default = "default_min_pool")]
    pub min_base_pool: usize,
}

fn default_min_pool() -> usize {
    MIN_BASE_POOL
}

impl RunConfig {
    pub fn new(tasks: Vec<TaskSpec>, seed: u64) -> Self {
        Self {
            tasks,
            focal_count: 100,
            seed,
            metrics: MetricKind::ALL.to_vec(),
            checks: CheckId::ALL.to_vec(),
            gates: Gates::default(),
            metric_config: MetricConfig::default(),
            min_base_pool: MIN_BASE_POOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.focal_count == 0 {
            return Err(Error::invalid("focal count must be at least 1"));
        }
        if self.metrics.is_empty() || self.checks.is_empty() {
            return Err(Error::invalid("at least one metric and one check are required"));
        }
        if self.tasks.is_empty() {
            return Err(Error::invalid("no tasks selected"));
        }
        Ok(())
    }

    fn spec_of(&self, task: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.task == task)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedFocal {
    pub id: String,
    pub task: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub corpus_path: String,
    pub config: RunConfig,
    pub focals: Vec<PlannedFocal>,
}

impl Plan {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).expect("value serializes");
    body.push('\n');
    write_file(path, &body)
}

pub(crate) fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Papers of `task` that can serve as focal: an abstract and a base pool of
/// at least `min_pool` abstract-bearing members.
pub fn eligible_focals<'c>(corpus: &'c Corpus, task: &'c str, min_pool: usize) -> Vec<&'c str> {
    let mut out: Vec<&str> = corpus
        .tagged(task)
        .filter(|p| p.has_abstract())
        .filter(|p| {
            crate::axioms::build_base_pool(corpus, &p.id)
                .map(|pool| pool.in_space(corpus, ABSTRACT_SPACE).len() >= min_pool)
                .unwrap_or(false)
        })
        .map(|p| p.id.as_str())
        .collect();
    out.sort_unstable();
    out
}

/// Uniform sample without replacement among eligible papers, sorted by id.
pub fn sample_focals(corpus: &Corpus, task: &str, n: usize, seed: u64, min_pool: usize) -> Result<Vec<String>> {
    let eligible = eligible_focals(corpus, task, min_pool);
    if eligible.len() < n {
        return Err(Error::invalid(format!(
            "task {task}: only {} eligible focal papers, {n} requested",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["sample", task]));
    let mut picked: Vec<String> = eligible
        .choose_multiple(&mut rng, n)
        .map(|s| s.to_string())
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

fn spaces_of(metrics: &[MetricKind]) -> BTreeSet<&'static str> {
    metrics.iter().map(|m| m.space()).collect()
}

fn needs_coverage(config: &RunConfig) -> bool {
    config.checks.iter().any(|c| c.is_coverage())
        && config.metrics.iter().any(|&m| m.space() == ABSTRACT_SPACE && m != MetricKind::Ftlof)
}

fn context<'c>(corpus: &'c Corpus, config: &'c RunConfig, focal: &PlannedFocal, coverage: bool) -> Result<FocalContext<'c>> {
    let spec = config
        .spec_of(&focal.task)
        .ok_or_else(|| Error::invalid(format!("task {} missing from the run's task table", focal.task)))?;
    let ctx = FocalContext::new(corpus, &focal.id, spec, config.gates.clone())?;
    if coverage {
        ctx.with_coverage()
    } else {
        Ok(ctx)
    }
}

/// Every (variant, space) pair evaluation of `plan` will look up.
pub fn requirements(plan: &Plan, corpus: &Corpus) -> Result<BTreeSet<Requirement>> {
    let config = &plan.config;
    let coverage = needs_coverage(config);
    let mut out = BTreeSet::new();
    for focal in &plan.focals {
        let ctx = context(corpus, config, focal, coverage)?;
        for space in spaces_of(&config.metrics) {
            let mut push = |id: &str| {
                out.insert(Requirement {
                    variant_id: id.to_string(),
                    space: space.to_string(),
                });
            };
            push(&focal.id);
            let in_space: Vec<MetricKind> = config.metrics.iter().copied().filter(|m| m.space() == space).collect();
            for &check in &config.checks {
                if !in_space.iter().any(|&m| check.applies_to(m)) || ctx.gate(check).is_some() {
                    continue;
                }
                for key in check.spec().variants() {
                    if let Ok(members) = ctx.variant(key, space) {
                        members.iter().for_each(|id| push(id));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Samples focal papers for every task and lists every document that must
/// be embedded before evaluation.
pub fn emit_plan(config: &RunConfig, corpus: &Corpus, corpus_path: &str) -> Result<(Plan, Manifest)> {
    config.validate()?;
    let mut focals = Vec::new();
    for spec in &config.tasks {
        for id in sample_focals(corpus, &spec.task, config.focal_count, config.seed, config.min_base_pool)? {
            focals.push(PlannedFocal {
                id,
                task: spec.task.clone(),
                domain: spec.domain.clone(),
            });
        }
    }
    let plan = Plan {
        corpus_path: corpus_path.to_string(),
        config: config.clone(),
        focals,
    };

    let coverage = needs_coverage(config);
    let mut synthetic: Vec<SyntheticEntry> = Vec::new();
    for focal in &plan.focals {
        let ctx = context(corpus, config, focal, coverage)?;
        synthetic.extend(ctx.synthetic_entries(&config.checks, coverage));
    }
    let originals: BTreeSet<String> = requirements(&plan, corpus)?
        .into_iter()
        .map(|r| r.variant_id)
        .filter(|id| corpus.get(id).is_some())
        .collect();
    let mut entries: Vec<SyntheticEntry> = originals
        .into_iter()
        .map(|id| SyntheticEntry {
            variant_id: id.clone(),
            kind: VariantKind::Original,
            base_id: id,
            text: String::new(),
        })
        .collect();
    entries.extend(synthetic);
    let manifest = Manifest {
        corpus_path: corpus_path.to_string(),
        spaces: spaces_of(&config.metrics)
            .into_iter()
            .map(|s| (s.to_string(), format!("{s}.jsonl")))
            .collect(),
        entries,
    };
    Ok((plan, manifest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

/// One (focal, metric, check) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub focal: String,
    pub task: String,
    pub domain: String,
    pub metric: MetricKind,
    pub check: CheckId,
    pub status: CheckStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<SkipReason>,
    /// Variant name (`base`, `ax1`, `ax3_2`, ...) to score.
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

impl CheckResult {
    pub fn evaluated(&self) -> bool {
        self.status != CheckStatus::Skip
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CheckResult>,
}

impl ResultTable {
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: CheckResult = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_jsonl())
    }

    pub fn skip_counts(&self) -> BTreeMap<SkipReason, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            if let Some(reason) = r.reason {
                *out.entry(reason).or_default() += 1;
            }
        }
        out
    }
}

fn score_variant(
    ctx: &FocalContext<'_>,
    store: &EmbeddingStore,
    metric: MetricKind,
    key: VariantKey,
    config: &RunConfig,
) -> std::result::Result<f64, SkipReason> {
    let space = metric.space();
    let focal = store.vector(space, &ctx.focal.id).ok_or(SkipReason::MissingEmbedding)?;
    let members = ctx.variant(key, space)?;
    let mut points = Vec::with_capacity(members.len());
    for id in &members {
        let vector = store.vector(space, id).ok_or(SkipReason::MissingEmbedding)?;
        points.push(Point { id, vector });
    }
    let seed = derive_seed(config.seed, &[&ctx.focal.id, &key.to_string()]);
    match metrics::score(metric, focal, &points, &config.metric_config, seed) {
        Ok(s) if s.value.is_finite() => Ok(s.value),
        Ok(_) => Err(SkipReason::PoolTooSmall),
        Err(e) => {
            log::debug!("{} {} {key}: {e}", ctx.focal.id, metric);
            Err(SkipReason::PoolTooSmall)
        }
    }
}

fn evaluate_focal_metric(
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &RunConfig,
    focal: &PlannedFocal,
    metric: MetricKind,
) -> Result<Vec<CheckResult>> {
    let coverage = metric != MetricKind::Ftlof && config.checks.iter().any(|c| c.is_coverage());
    let ctx = context(corpus, config, focal, coverage)?;
    let mut cache: HashMap<VariantKey, std::result::Result<f64, SkipReason>> = HashMap::new();
    let mut rows = Vec::with_capacity(config.checks.len());
    for &check in &config.checks {
        let mut row = CheckResult {
            focal: focal.id.clone(),
            task: focal.task.clone(),
            domain: focal.domain.clone(),
            metric,
            check,
            status: CheckStatus::Skip,
            reason: None,
            scores: BTreeMap::new(),
        };
        let gate = if !check.applies_to(metric) {
            Some(SkipReason::MetricExcluded)
        } else if store.vector(metric.space(), &focal.id).is_none() {
            Some(SkipReason::MissingEmbedding)
        } else {
            ctx.gate(check)
        };
        if let Some(reason) = gate {
            row.reason = Some(reason);
            rows.push(row);
            continue;
        }
        let spec = check.spec();
        let mut values = BTreeMap::new();
        let mut failure = None;
        for key in spec.variants() {
            let got = *cache
                .entry(key)
                .or_insert_with(|| score_variant(&ctx, store, metric, key, config));
            match got {
                Ok(v) => {
                    values.insert(key, v);
                    row.scores.insert(key.to_string(), v);
                }
                Err(r) => {
                    failure.get_or_insert(r);
                }
            }
        }
        match failure.map_or_else(|| crate::axioms::run_check(&spec, &values), Err) {
            Ok(pass) => row.status = if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            Err(reason) => row.reason = Some(reason),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Scores every planned (focal, metric, check) row.
///
/// Work fans out over (focal, metric) pairs on `workers` threads; rows come
/// back in plan order (focal, then metric, then check) whatever the count.
pub fn evaluate(plan: &Plan, corpus: &Corpus, store: &EmbeddingStore, workers: usize) -> Result<ResultTable> {
    plan.config.validate()?;
    let jobs: Vec<(&PlannedFocal, MetricKind)> = plan
        .focals
        .iter()
        .flat_map(|f| plan.config.metrics.iter().map(move |&m| (f, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let chunks: Vec<Result<Vec<CheckResult>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, m)| evaluate_focal_metric(corpus, store, &plan.config, f, m))
            .collect()
    });
    let mut rows = Vec::new();
    for c in chunks {
        rows.extend(c?);
    }
    let table = ResultTable { rows };
    let missing = table.skip_counts().get(&SkipReason::MissingEmbedding).copied().unwrap_or(0);
    if missing > 0 {
        log::warn!("{missing} row(s) skipped for missing embeddings");
    }
    Ok(table)
}

/// Pass rate as a percentage, or `None` when nothing was evaluated.
pub fn pass_rate(passes: usize, evaluated: usize) -> Option<f64> {
    (evaluated > 0).then(|| 100.0 * passes as f64 / evaluated as f64)
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Pass/evaluated counts per (domain, task, check), reduced macro-style:
/// task rates, then unweighted task mean per domain, then unweighted domain
/// mean for "All".
#[derive(Debug, Clone, Default)]
pub struct Tally {
    domains: Vec<String>,
    counts: BTreeMap<(String, String), Vec<(usize, usize)>>,
    width: usize,
}

impl Tally {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            ..Self::default()
        }
    }

    pub fn add(&mut self, domain: &str, task: &str, column: usize, pass: bool) {
        if !self.domains.iter().any(|d| d == domain) {
            self.domains.push(domain.to_string());
        }
        let cell = self
            .counts
            .entry((domain.to_string(), task.to_string()))
            .or_insert_with(|| vec![(0, 0); self.width]);
        cell[column].0 += pass as usize;
        cell[column].1 += 1;
    }

    /// Domains in first-seen order.
    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn domain_rates(&self, domain: &str) -> Vec<Option<f64>> {
        (0..self.width)
            .map(|c| {
                mean(
                    self.counts
                        .iter()
                        .filter(|((d, _), _)| d == domain)
                        .map(|(_, v)| pass_rate(v[c].0, v[c].1)),
                )
            })
            .collect()
    }

    pub fn all_rates(&self) -> Vec<Option<f64>> {
        let per: Vec<Vec<Option<f64>>> = self.domains.iter().map(|d| self.domain_rates(d)).collect();
        (0..self.width).map(|c| mean(per.iter().map(|r| r[c]))).collect()
    }
}

/// Label of the cross-domain block.
pub const ALL_DOMAINS: &str = "All";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub domain: String,
    pub metric: String,
    pub rates: Vec<Option<f64>>,
    pub avg: Option<f64>,
}

/// Pass rates by domain and metric over a fixed list of checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassMatrix {
    pub checks: Vec<CheckId>,
    pub rows: Vec<MatrixRow>,
}

impl PassMatrix {
    pub fn row(&self, domain: &str, metric: &str) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.domain == domain && r.metric == metric)
    }

    pub fn domains(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.domain.as_str()) {
                out.push(&r.domain);
            }
        }
        out
    }
}

/// Row average: unweighted mean of the check columns that have a value.
pub fn row_average(rates: &[Option<f64>]) -> Option<f64> {
    mean(rates.iter().copied())
}

/// Domain x metric x check pass rates, followed by the "All" block.
pub fn aggregate(table: &ResultTable, checks: &[CheckId]) -> PassMatrix {
    let mut metrics: Vec<MetricKind> = Vec::new();
    for r in &table.rows {
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    metrics.sort();
    let mut tallies: BTreeMap<MetricKind, Tally> = BTreeMap::new();
    let mut domains: Vec<String> = Vec::new();
    for r in &table.rows {
        if !domains.contains(&r.domain) {
            domains.push(r.domain.clone());
        }
        let Some(col) = checks.iter().position(|&c| c == r.check) else {
            continue;
        };
        let tally = tallies.entry(r.metric).or_insert_with(|| Tally::new(checks.len()));
        if r.evaluated() {
            tally.add(&r.domain, &r.task, col, r.status == CheckStatus::Pass);
        }
    }
    let empty = Tally::new(checks.len());
    let mut rows = Vec::new();
    let blocks = domains.iter().map(|d| Some(d.as_str())).chain(std::iter::once(None));
    for domain in blocks {
        for &m in &metrics {
            let tally = tallies.get(&m).unwrap_or(&empty);
            let rates = match domain {
                Some(d) => tally.domain_rates(d),
                None => tally.all_rates(),
            };
            rows.push(MatrixRow {
                domain: domain.unwrap_or(ALL_DOMAINS).to_string(),
                metric: m.label().to_string(),
                avg: row_average(&rates),
                rates,
            });
        }
    }
    if table.rows.is_empty() {
        rows.clear();
    }
    PassMatrix {
        checks: checks.to_vec(),
        rows,
    }
}

/// Placeholder for a cell with no evaluated rows.
pub const EMPTY_CELL: &str = "—";

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| EMPTY_CELL.to_string(), |x| format!("{x:.decimals$}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// Renders the matrix. Markdown shows one block per domain with the domain
/// name on its first row; CSV has one row per (domain, metric).
pub fn render(matrix: &PassMatrix, format: ReportFormat) -> String {
    if matrix.rows.is_empty() {
        log::warn!("empty pass-rate matrix; writing header only");
    }
    let heads: Vec<&str> = matrix.checks.iter().map(|c| c.label()).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(out, "| Domain | Metric | {} | Avg |", heads.join(" | "));
            let _ = writeln!(out, "|---|---|{}---:|", "---:|".repeat(heads.len()));
            let mut last: Option<&str> = None;
            for r in &matrix.rows {
                let label = if last == Some(r.domain.as_str()) { "" } else { r.domain.as_str() };
                last = Some(&r.domain);
                let cells: Vec<String> = r.rates.iter().map(|&v| cell(v, 0)).collect();
                let _ = writeln!(out, "| {label} | {} | {} | {} |", r.metric, cells.join(" | "), cell(r.avg, 1));
            }
        }
        ReportFormat::Csv => {
            let _ = writeln!(out, "domain,metric,{},Avg", matrix.checks.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(","));
            for r in &matrix.rows {
                let cells: Vec<String> = r.rates.iter().map(|&v| cell(v, 2)).collect();
                let _ = writeln!(out, "{},{},{},{}", r.domain, r.metric, cells.join(","), cell(r.avg, 2));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(domain: &str, task: &str, metric: MetricKind, check: CheckId, status: CheckStatus) -> CheckResult {
        CheckResult {
            focal: "f".into(),
            task: task.into(),
            domain: domain.into(),
            metric,
            check,
            status,
            reason: (status == CheckStatus::Skip).then_some(SkipReason::PoolTooSmall),
            scores: BTreeMap::new(),
        }
    }

    fn repeated(n: usize, status: CheckStatus) -> Vec<CheckResult> {
        (0..n).map(|_| row("NLP", "t", MetricKind::Yin, CheckId::Ax1, status)).collect()
    }

    #[test]
    fn pass_rate_counts() {
        let mut rows = repeated(73, CheckStatus::Pass);
        rows.extend(repeated(27, CheckStatus::Fail));
        let m = aggregate(&ResultTable { rows }, &[CheckId::Ax1]);
        assert_eq!(m.row("NLP", "Yin").unwrap().rates[0], Some(73.0));

        let mut rows = repeated(50, CheckStatus::Pass);
        rows.extend(repeated(50, CheckStatus::Fail));
        rows.extend(repeated(20, CheckStatus::Skip));
        let m = aggregate(&ResultTable { rows }, &[CheckId::Ax1]);
        assert_eq!(m.row("NLP", "Yin").unwrap().rates[0], Some(50.0));
        assert_eq!(m.row(ALL_DOMAINS, "Yin").unwrap().rates[0], Some(50.0));
    }

    #[test]
    fn macro_average_over_tasks_then_domains() {
        let y = MetricKind::Yin;
        let a = CheckId::Ax1;
        let mut rows = vec![];
        // NLP: task a 100% (1 row), task b 0% (3 rows) -> 50
        rows.push(row("NLP", "a", y, a, CheckStatus::Pass));
        rows.extend((0..3).map(|_| row("NLP", "b", y, a, CheckStatus::Fail)));
        // CV: one task at 100
        rows.push(row("CV", "c", y, a, CheckStatus::Pass));
        let m = aggregate(&ResultTable { rows }, &[a]);
        assert_eq!(m.row("NLP", "Yin").unwrap().rates[0], Some(50.0));
        assert_eq!(m.row("CV", "Yin").unwrap().rates[0], Some(100.0));
        assert_eq!(m.row(ALL_DOMAINS, "Yin").unwrap().rates[0], Some(75.0));
        assert_eq!(m.domains(), vec!["NLP", "CV", "All"]);
    }

    #[test]
    fn excluded_cells_are_dashes() {
        let f = MetricKind::Ftlof;
        let rows = vec![
            row("NLP", "t", f, CheckId::Ax1, CheckStatus::Pass),
            row("NLP", "t", f, CheckId::Ax2, CheckStatus::Fail),
            CheckResult {
                reason: Some(SkipReason::MetricExcluded),
                ..row("NLP", "t", f, CheckId::Ax3Grad, CheckStatus::Skip)
            },
        ];
        let m = aggregate(&ResultTable { rows }, &CheckId::ALL);
        let r = m.row("NLP", "FastTextLOF").unwrap();
        assert_eq!(r.rates[2], None);
        assert_eq!(r.avg, Some(50.0));
        let md = render(&m, ReportFormat::Markdown);
        assert!(md.lines().nth(2).unwrap().contains("| — | — |"), "{md}");
        let csv = render(&m, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("domain,metric,Ax1,Ax2,Ax3_grad,Ax3_ltbase,Ax4,Ax5,Ax6,Ax7,Ax8,Avg\n"));
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = aggregate(&ResultTable::default(), &CheckId::ALL);
        assert!(m.rows.is_empty());
        assert_eq!(render(&m, ReportFormat::Csv).lines().count(), 1);
        assert_eq!(render(&m, ReportFormat::Markdown).lines().count(), 2);
    }

    #[test]
    fn result_rows_round_trip() {
        let mut r = row("NLP", "t", MetricKind::Rnd, CheckId::Ax3Ltbase, CheckStatus::Fail);
        r.scores.insert("base".into(), 0.25);
        r.scores.insert("ax3_1".into(), 0.3);
        let s = CheckResult {
            reason: Some(SkipReason::InsufficientNewer),
            ..row("CV", "u", MetricKind::Semnovel, CheckId::Ax8, CheckStatus::Skip)
        };
        let table = ResultTable { rows: vec![r, s] };
        let text = table.to_jsonl();
        assert!(text.lines().next().unwrap().contains(r#""check":"Ax3_ltbase","status":"fail""#));
        assert!(!text.lines().next().unwrap().contains("reason"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        table.save(&p).unwrap();
        assert_eq!(ResultTable::load(&p).unwrap(), table);
    }

    fn synth_corpus() -> crate::synth::SynthCorpus {
        let cfg = crate::synth::SynthConfig {
            seed: 2,
            size: 60,
            ..Default::default()
        };
        crate::synth::generate(&cfg, &crate::synth::synth_tasks()).unwrap()
    }

    #[test]
    fn sampling_is_seeded_sorted_and_bounded() {
        let s = synth_corpus();
        let a = sample_focals(&s.corpus, "eeg", 5, 7, MIN_BASE_POOL).unwrap();
        assert_eq!(a, sample_focals(&s.corpus, "eeg", 5, 7, MIN_BASE_POOL).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let eligible = eligible_focals(&s.corpus, "eeg", MIN_BASE_POOL);
        assert!(a.iter().all(|f| eligible.contains(&f.as_str())));
        assert!(sample_focals(&s.corpus, "eeg", eligible.len() + 1, 7, MIN_BASE_POOL).is_err());
    }

    #[test]
    fn one_focal_manifest_has_one_rephrase() {
        let s = synth_corpus();
        let mut config = RunConfig::new(s.tasks[..1].to_vec(), 3);
        config.focal_count = 1;
        let (plan, manifest) = emit_plan(&config, &s.corpus, "c.jsonl").unwrap();
        assert_eq!(plan.focals.len(), 1);
        let kinds = |k: VariantKind| manifest.entries.iter().filter(|e| e.kind == k).count();
        assert_eq!(kinds(VariantKind::Rephrase), 1);
        assert_eq!(kinds(VariantKind::SelfCopy), 1);
        assert!(kinds(VariantKind::CoverageChunkHost) > 0);
        assert_eq!(manifest.corpus_path, "c.jsonl");
    }

    #[test]
    fn ftlof_only_plans_no_coverage_and_validates_without_it() {
        let s = synth_corpus();
        let mut config = RunConfig::new(s.tasks.clone(), 4);
        config.focal_count = 2;
        config.metrics = vec![MetricKind::Ftlof];
        let (plan, mut manifest) = emit_plan(&config, &s.corpus, "c.jsonl").unwrap();
        assert!(manifest.entries.iter().all(|e| e.kind != VariantKind::CoverageChunkHost));
        let mut sets = [s.title_space.clone()];
        crate::synth::fill(&mut manifest, &s.corpus, &mut sets, 4, 0.95).unwrap();
        let mut store = EmbeddingStore::new().with_aliases(manifest.aliases());
        store.add(sets[0].clone());
        let report = crate::corpus::validate_manifest(&manifest, &store, requirements(&plan, &s.corpus).unwrap());
        assert!(report.is_empty(), "{report}");
        let table = evaluate(&plan, &s.corpus, &store, 2).unwrap();
        let ax3: Vec<&CheckResult> = table.rows.iter().filter(|r| r.check.is_coverage()).collect();
        assert_eq!(ax3.len(), 2 * 6 * 2);
        assert!(ax3.iter().all(|r| r.reason == Some(SkipReason::MetricExcluded)));
    }

    #[test]
    fn missing_rephrase_is_reported() {
        let s = synth_corpus();
        let mut config = RunConfig::new(s.tasks[..1].to_vec(), 5);
        config.focal_count = 1;
        config.checks = vec![CheckId::Ax2];
        let (plan, manifest) = emit_plan(&config, &s.corpus, "c.jsonl").unwrap();
        let store = s.store().with_aliases(manifest.aliases());
        let report = crate::corpus::validate_manifest(&manifest, &store, requirements(&plan, &s.corpus).unwrap());
        let missing: Vec<&str> = report.missing.iter().map(|r| r.space.as_str()).collect();
        assert_eq!(missing, vec![crate::ABSTRACT_SPACE, crate::TITLE_SPACE]);
        assert!(report.missing.iter().all(|r| r.variant_id.ends_with("#rephrase")));
    }
}
