//! Pool construction, the axiom pool manipulations and their pass/fail
//! comparisons.
//!
//! A base pool holds every same-task paper published strictly before the
//! focal paper plus the focal's own earlier references. Each check compares
//! the focal's score under two or more pool variants with strict
//! inequalities:
//!
//! | check        | relation                          |
//! |--------------|-----------------------------------|
//! | `Ax1`        | `ax1 < base` (self copy added)    |
//! | `Ax2`        | `ax2 < base` (rephrase added)     |
//! | `Ax3_grad`   | `ax3_4 < ax3_2 < ax3_1`           |
//! | `Ax3_ltbase` | `ax3_1 < base`                    |
//! | `Ax4`        | `ax4 > base` (distant task)       |
//! | `Ax5`        | `ax5 > base` (cited removed)      |
//! | `Ax6`        | `ax6 < ax5` (cited only)          |
//! | `Ax7`        | `ax7 > base` (oldest slice)       |
//! | `Ax8`        | `ax8 < base` (newest later slice) |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Paper, SyntheticEntry, TaskSpec, VariantKind};
use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::textops::{split_sentences, TfidfModel};
use crate::ABSTRACT_SPACE;

/// Chunk sizes (in sentences) of the coverage manipulation.
pub const CHUNK_SIZES: [usize; 3] = [1, 2, 4];

/// One of the nine binary checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    Ax1,
    Ax2,
    #[serde(rename = "Ax3_grad")]
    Ax3Grad,
    #[serde(rename = "Ax3_ltbase")]
    Ax3Ltbase,
    Ax4,
    Ax5,
    Ax6,
    Ax7,
    Ax8,
}

impl CheckId {
    pub const ALL: [CheckId; 9] = [
        CheckId::Ax1,
        CheckId::Ax2,
        CheckId::Ax3Grad,
        CheckId::Ax3Ltbase,
        CheckId::Ax4,
        CheckId::Ax5,
        CheckId::Ax6,
        CheckId::Ax7,
        CheckId::Ax8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::Ax1 => "Ax1",
            CheckId::Ax2 => "Ax2",
            CheckId::Ax3Grad => "Ax3_grad",
            CheckId::Ax3Ltbase => "Ax3_ltbase",
            CheckId::Ax4 => "Ax4",
            CheckId::Ax5 => "Ax5",
            CheckId::Ax6 => "Ax6",
            CheckId::Ax7 => "Ax7",
            CheckId::Ax8 => "Ax8",
        }
    }

    /// Column header used in reports.
    pub fn label(self) -> &'static str {
        match self {
            CheckId::Ax3Grad => "Ax3 grad",
            CheckId::Ax3Ltbase => "Ax3 <base",
            other => other.as_str(),
        }
    }

    pub fn is_coverage(self) -> bool {
        matches!(self, CheckId::Ax3Grad | CheckId::Ax3Ltbase)
    }

    /// Whether `metric` is evaluated on this check at all.
    pub fn applies_to(self, metric: MetricKind) -> bool {
        !(self.is_coverage() && metric == MetricKind::Ftlof)
    }

    pub fn spec(self) -> CheckSpec {
        use Relation::{Greater as Gt, Less as Lt};
        use VariantKey as V;
        let relations = match self {
            CheckId::Ax1 => vec![(V::Ax1, Lt, V::Base)],
            CheckId::Ax2 => vec![(V::Ax2, Lt, V::Base)],
            CheckId::Ax3Grad => vec![(V::Ax3(4), Lt, V::Ax3(2)), (V::Ax3(2), Lt, V::Ax3(1))],
            CheckId::Ax3Ltbase => vec![(V::Ax3(1), Lt, V::Base)],
            CheckId::Ax4 => vec![(V::Ax4, Gt, V::Base)],
            CheckId::Ax5 => vec![(V::Ax5, Gt, V::Base)],
            CheckId::Ax6 => vec![(V::Ax6, Lt, V::Ax5)],
            CheckId::Ax7 => vec![(V::Ax7, Gt, V::Base)],
            CheckId::Ax8 => vec![(V::Ax8, Lt, V::Base)],
        };
        CheckSpec {
            check: self,
            relations,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown check {t:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Less,
    Greater,
}

/// Strict relations `left REL right` that must all hold for a pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSpec {
    pub check: CheckId,
    pub relations: Vec<(VariantKey, Relation, VariantKey)>,
}

impl CheckSpec {
    /// Distinct variants the check reads, in first-use order.
    pub fn variants(&self) -> Vec<VariantKey> {
        let mut out = Vec::new();
        for &(l, _, r) in &self.relations {
            for v in [l, r] {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

/// A named pool variant of one focal paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantKey {
    Base,
    Ax1,
    Ax2,
    /// Coverage chunks of the given sentence count.
    Ax3(usize),
    Ax4,
    /// Base pool without cited papers.
    Ax5,
    /// Cited papers only.
    Ax6,
    Ax7,
    Ax8,
}

impl fmt::Display for VariantKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariantKey::Base => f.write_str("base"),
            VariantKey::Ax1 => f.write_str("ax1"),
            VariantKey::Ax2 => f.write_str("ax2"),
            VariantKey::Ax3(n) => write!(f, "ax3_{n}"),
            VariantKey::Ax4 => f.write_str("ax4"),
            VariantKey::Ax5 => f.write_str("ax5"),
            VariantKey::Ax6 => f.write_str("ax6"),
            VariantKey::Ax7 => f.write_str("ax7"),
            VariantKey::Ax8 => f.write_str("ax8"),
        }
    }
}

impl FromStr for VariantKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "base" => VariantKey::Base,
            "ax1" => VariantKey::Ax1,
            "ax2" => VariantKey::Ax2,
            "ax4" => VariantKey::Ax4,
            "ax5" => VariantKey::Ax5,
            "ax6" => VariantKey::Ax6,
            "ax7" => VariantKey::Ax7,
            "ax8" => VariantKey::Ax8,
            other => match other.strip_prefix("ax3_").and_then(|n| n.parse().ok()) {
                Some(n) if CHUNK_SIZES.contains(&n) => VariantKey::Ax3(n),
                _ => return Err(format!("unknown variant {other:?}")),
            },
        })
    }
}

/// Why a (focal, metric, check) row was not evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InsufficientReferences,
    PoolTooSmall,
    InsufficientNewer,
    MetricExcluded,
    MissingEmbedding,
    /// A combined metric had a component that was skipped on this row.
    ComponentSkipped,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SkipReason::InsufficientReferences => "insufficient_references",
            SkipReason::PoolTooSmall => "pool_too_small",
            SkipReason::InsufficientNewer => "insufficient_newer",
            SkipReason::MetricExcluded => "metric_excluded",
            SkipReason::MissingEmbedding => "missing_embedding",
            SkipReason::ComponentSkipped => "component_skipped",
        };
        f.write_str(s)
    }
}

/// Eligibility thresholds. All comparisons are as in the defaults:
/// at least `min_cited` cited pool members, more than `min_pool_oldest`
/// pool members, more than `min_newer` later papers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gates {
    pub min_cited: usize,
    pub min_pool_oldest: usize,
    pub min_newer: usize,
    pub slice: usize,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            min_cited: 20,
            min_pool_oldest: 500,
            min_newer: 300,
            slice: 300,
        }
    }
}

/// Whether a paper can be placed in a pool scored in `space`.
pub fn usable_in(paper: &Paper, space: &str) -> bool {
    space != ABSTRACT_SPACE || paper.has_abstract()
}

/// Variant id of the focal's exact copy.
pub fn self_copy_id(focal: &str) -> String {
    format!("{focal}#self")
}

pub fn rephrase_id(focal: &str) -> String {
    format!("{focal}#rephrase")
}

pub fn coverage_id(focal: &str, chunk: usize, host: &str) -> String {
    format!("{focal}#ax3-{chunk}#{host}")
}

/// Same-task papers published strictly before the focal, plus the focal's
/// earlier references; deduplicated, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub focal_id: String,
    pub task: String,
    pub members: Vec<String>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members usable in `space`, in id order.
    pub fn in_space<'c>(&self, corpus: &'c Corpus, space: &str) -> Vec<&'c Paper> {
        self.members
            .iter()
            .filter_map(|id| corpus.get(id))
            .filter(|p| usable_in(p, space))
            .collect()
    }
}

fn focal_paper<'c>(corpus: &'c Corpus, focal_id: &str) -> Result<&'c Paper> {
    corpus
        .get(focal_id)
        .ok_or_else(|| Error::invalid(format!("unknown focal {focal_id}")))
}

pub fn build_base_pool(corpus: &Corpus, focal_id: &str) -> Result<Pool> {
    let focal = focal_paper(corpus, focal_id)?;
    let task = focal
        .task
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("focal {focal_id} has no task tag")))?;
    let mut members: BTreeSet<&str> = corpus
        .tagged(task)
        .filter(|p| p.year < focal.year && p.id != focal.id)
        .map(|p| p.id.as_str())
        .collect();
    for r in &focal.refs {
        if let Some(p) = corpus.get(r) {
            if p.year < focal.year && p.id != focal.id {
                members.insert(p.id.as_str());
            }
        }
    }
    Ok(Pool {
        focal_id: focal.id.clone(),
        task: task.to_string(),
        members: members.into_iter().map(str::to_string).collect(),
    })
}

/// Synthetic host documents for one chunk size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveragePlan {
    pub chunk: usize,
    /// Consecutive sentence chunks of the focal abstract.
    pub chunks: Vec<String>,
    /// Host id per chunk.
    pub hosts: Vec<String>,
    /// Host id to its modified abstract, chunks appended in order.
    pub modified: BTreeMap<String, String>,
}

/// Splits the focal abstract into chunks of `chunk` sentences and appends
/// each chunk to its most TF-IDF-similar pool abstract.
///
/// `pool` must be the abstract-bearing pool the model was fitted on.
pub fn coverage_plan(
    focal: &Paper,
    pool: &[&Paper],
    chunk: usize,
    model: &TfidfModel,
) -> Result<Option<CoveragePlan>> {
    if chunk == 0 {
        return Err(Error::invalid("chunk size must be positive"));
    }
    let sentences = split_sentences(&focal.abstract_text);
    if sentences.is_empty() || pool.is_empty() {
        return Ok(None);
    }
    let candidates: Vec<&str> = pool.iter().map(|p| p.id.as_str()).collect();
    let by_id: HashMap<&str, &Paper> = pool.iter().map(|p| (p.id.as_str(), *p)).collect();
    let chunks: Vec<String> = sentences.chunks(chunk).map(|c| c.join(" ")).collect();
    let mut hosts = Vec::with_capacity(chunks.len());
    let mut modified: BTreeMap<String, String> = BTreeMap::new();
    for text in &chunks {
        let host = model.nearest(text, &candidates)?;
        let body = modified
            .entry(host.clone())
            .or_insert_with(|| by_id[host.as_str()].abstract_text.clone());
        body.push(' ');
        body.push_str(text);
        hosts.push(host);
    }
    Ok(Some(CoveragePlan {
        chunk,
        chunks,
        hosts,
        modified,
    }))
}

/// Everything needed to build the pool variants of one focal paper.
#[derive(Debug, Clone)]
pub struct FocalContext<'c> {
    pub corpus: &'c Corpus,
    pub focal: &'c Paper,
    pub spec: &'c TaskSpec,
    pub base: Pool,
    pub gates: Gates,
    coverage: BTreeMap<usize, CoveragePlan>,
}

impl<'c> FocalContext<'c> {
    pub fn new(corpus: &'c Corpus, focal_id: &str, spec: &'c TaskSpec, gates: Gates) -> Result<Self> {
        let focal = focal_paper(corpus, focal_id)?;
        let base = build_base_pool(corpus, focal_id)?;
        Ok(Self {
            corpus,
            focal,
            spec,
            base,
            gates,
            coverage: BTreeMap::new(),
        })
    }

    /// Computes the coverage plans; only needed for the abstract space.
    pub fn with_coverage(mut self) -> Result<Self> {
        let pool = self.base.in_space(self.corpus, ABSTRACT_SPACE);
        if pool.is_empty() || !self.focal.has_abstract() {
            return Ok(self);
        }
        let model = TfidfModel::fit(pool.iter().map(|p| (p.id.as_str(), p.abstract_text.as_str())))?;
        for n in CHUNK_SIZES {
            if let Some(plan) = coverage_plan(self.focal, &pool, n, &model)? {
                self.coverage.insert(n, plan);
            }
        }
        Ok(self)
    }

    pub fn coverage(&self, chunk: usize) -> Option<&CoveragePlan> {
        self.coverage.get(&chunk)
    }

    /// Ids of the focal's references that are members of the base pool in `space`.
    pub fn cited_in_pool(&self, space: &str) -> BTreeSet<&'c str> {
        let refs: BTreeSet<&str> = self.focal.refs.iter().map(String::as_str).collect();
        self.base
            .in_space(self.corpus, space)
            .into_iter()
            .map(|p| p.id.as_str())
            .filter(|id| refs.contains(id))
            .collect()
    }

    /// Same-task papers published strictly after the focal.
    fn newer(&self, space: &str) -> Vec<&'c Paper> {
        let task = self.base.task.as_str();
        self.corpus
            .papers()
            .iter()
            .filter(|p| p.task.as_deref() == Some(task))
            .filter(|p| p.year > self.focal.year && usable_in(p, space))
            .collect()
    }

    /// Metric-independent eligibility of a check; gates are counted on the
    /// abstract-bearing view of the pool.
    pub fn gate(&self, check: CheckId) -> Option<SkipReason> {
        let g = &self.gates;
        match check {
            CheckId::Ax5 | CheckId::Ax6 if self.cited_in_pool(ABSTRACT_SPACE).len() < g.min_cited => {
                Some(SkipReason::InsufficientReferences)
            }
            CheckId::Ax7 if self.base.in_space(self.corpus, ABSTRACT_SPACE).len() <= g.min_pool_oldest => {
                Some(SkipReason::PoolTooSmall)
            }
            CheckId::Ax8 if self.newer(ABSTRACT_SPACE).len() <= g.min_newer => Some(SkipReason::InsufficientNewer),
            _ => None,
        }
    }

    /// Member variant ids of one pool variant in `space`.
    pub fn variant(&self, key: VariantKey, space: &str) -> std::result::Result<Vec<String>, SkipReason> {
        let base: Vec<&Paper> = self.base.in_space(self.corpus, space);
        let ids = |ps: &[&Paper]| ps.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        let members = match key {
            VariantKey::Base => ids(&base),
            VariantKey::Ax1 => {
                let mut m = ids(&base);
                m.push(self_copy_id(&self.focal.id));
                m
            }
            VariantKey::Ax2 => {
                let mut m = ids(&base);
                m.push(rephrase_id(&self.focal.id));
                m
            }
            VariantKey::Ax3(n) => {
                let plan = self.coverage.get(&n).ok_or(SkipReason::MissingEmbedding)?;
                base.iter()
                    .map(|p| {
                        if plan.modified.contains_key(&p.id) {
                            coverage_id(&self.focal.id, n, &p.id)
                        } else {
                            p.id.clone()
                        }
                    })
                    .collect()
            }
            VariantKey::Ax4 => {
                let mut m: Vec<String> = self
                    .corpus
                    .tagged(&self.spec.distant_task)
                    .filter(|p| p.year < self.focal.year && usable_in(p, space))
                    .map(|p| p.id.clone())
                    .collect();
                m.sort();
                m
            }
            VariantKey::Ax5 | VariantKey::Ax6 => {
                let cited = self.cited_in_pool(space);
                let keep_cited = key == VariantKey::Ax6;
                base.iter()
                    .filter(|p| cited.contains(p.id.as_str()) == keep_cited)
                    .map(|p| p.id.clone())
                    .collect()
            }
            VariantKey::Ax7 => {
                let mut sorted = base.clone();
                sorted.sort_by(|a, b| a.year.cmp(&b.year).then_with(|| a.id.cmp(&b.id)));
                sorted.truncate(self.gates.slice);
                ids(&sorted)
            }
            VariantKey::Ax8 => {
                let mut newer = self.newer(space);
                newer.sort_by(|a, b| b.year.cmp(&a.year).then_with(|| b.id.cmp(&a.id)));
                newer.truncate(self.gates.slice);
                ids(&newer)
            }
        };
        if members.is_empty() {
            return Err(SkipReason::PoolTooSmall);
        }
        Ok(members)
    }

    /// Synthetic documents the requested checks need embedded.
    pub fn synthetic_entries(&self, checks: &[CheckId], coverage: bool) -> Vec<SyntheticEntry> {
        let id = &self.focal.id;
        let mut out = Vec::new();
        if checks.contains(&CheckId::Ax1) {
            out.push(SyntheticEntry {
                variant_id: self_copy_id(id),
                kind: VariantKind::SelfCopy,
                base_id: id.clone(),
                text: String::new(),
            });
        }
        if checks.contains(&CheckId::Ax2) {
            out.push(SyntheticEntry {
                variant_id: rephrase_id(id),
                kind: VariantKind::Rephrase,
                base_id: id.clone(),
                text: String::new(),
            });
        }
        if coverage && checks.iter().any(|c| c.is_coverage()) {
            for plan in self.coverage.values() {
                for (host, body) in &plan.modified {
                    let paper = self.corpus.get(host).expect("host is a pool member");
                    let text = Paper {
                        abstract_text: body.clone(),
                        ..paper.clone()
                    }
                    .title_and_abstract();
                    out.push(SyntheticEntry {
                        variant_id: coverage_id(id, plan.chunk, host),
                        kind: VariantKind::CoverageChunkHost,
                        base_id: host.clone(),
                        text,
                    });
                }
            }
        }
        out
    }
}

/// Check outcome on a complete score map.
pub fn run_check(spec: &CheckSpec, scores: &BTreeMap<VariantKey, f64>) -> std::result::Result<bool, SkipReason> {
    let mut pass = true;
    for &(l, rel, r) in &spec.relations {
        let (Some(&a), Some(&b)) = (scores.get(&l), scores.get(&r)) else {
            return Err(SkipReason::MissingEmbedding);
        };
        if !a.is_finite() || !b.is_finite() {
            return Err(SkipReason::MissingEmbedding);
        }
        pass &= match rel {
            Relation::Less => a < b,
            Relation::Greater => a > b,
        };
    }
    Ok(pass)
}
