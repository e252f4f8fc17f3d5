//! Papers, embedding sets and the manifest that links them.
//!
//! All three are line-delimited or single JSON documents:
//!
//! - corpus: one `{id, title, abstract, year, task, refs, is_reference_only}` object per line;
//! - embeddings: one `{id, space, vector}` object per line, one file per space;
//! - manifest: a single document `{corpus_path, spaces, entries}` whose entries
//!   register every synthetic document `{variant_id, kind, base_id, text}`.
//!
//! Everything here is immutable after load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("paper {id}: {message}")]
    InvalidPaper { id: String, message: String },
    #[error("{path}:{line}: expected space {expected}, found {found}")]
    SpaceMismatch {
        path: PathBuf,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: dimension mismatch for {id}: expected {expected}, found {found}")]
    DimMismatch {
        path: PathBuf,
        line: usize,
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("zero vector for {0}")]
    ZeroVector(String),
    #[error("non-finite component in vector for {0}")]
    NonFinite(String),
    #[error("embedding file {0} contains no vectors")]
    EmptyEmbeddings(PathBuf),
    #[error("invalid task table: {0}")]
    InvalidTasks(String),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

type Result<T> = std::result::Result<T, CorpusError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One document of the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    /// Calendar year. Date strings such as `"2020-05-01"` are accepted and
    /// truncated to the year.
    #[serde(deserialize_with = "deserialize_year")]
    pub year: i32,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub refs: Vec<String>,
    #[serde(default)]
    pub is_reference_only: bool,
}

impl Paper {
    pub fn has_abstract(&self) -> bool {
        !self.abstract_text.trim().is_empty()
    }

    /// Text used for the abstract embedding space.
    pub fn title_and_abstract(&self) -> String {
        format!("{}. {}", self.title.trim_end_matches('.'), self.abstract_text)
    }
}

fn deserialize_year<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<i32, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(y) => i32::try_from(y).map_err(serde::de::Error::custom),
        Raw::Str(s) => {
            let head: String = s.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
            head.parse::<i32>()
                .map_err(|_| serde::de::Error::custom(format!("unparseable year {s:?}")))
        }
    }
}

/// A loaded corpus; papers keep file order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    papers: Vec<Paper>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, enforcing the per-paper invariants and id uniqueness.
    pub fn from_papers(papers: Vec<Paper>) -> Result<Self> {
        let max_year = chrono::Utc::now().year();
        let mut index = HashMap::with_capacity(papers.len());
        for (i, p) in papers.iter().enumerate() {
            if p.id.is_empty() {
                return Err(CorpusError::InvalidPaper {
                    id: p.id.clone(),
                    message: "empty id".into(),
                });
            }
            if p.year <= 1900 || p.year > max_year {
                return Err(CorpusError::InvalidPaper {
                    id: p.id.clone(),
                    message: format!("year {} outside (1900, {max_year}]", p.year),
                });
            }
            if p.title.trim().is_empty() {
                return Err(CorpusError::InvalidPaper {
                    id: p.id.clone(),
                    message: "empty title".into(),
                });
            }
            if index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self { papers, index })
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn get(&self, id: &str) -> Option<&Paper> {
        self.index.get(id).map(|&i| &self.papers[i])
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    /// Papers carrying the given task tag.
    pub fn tagged<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a Paper> + 'a {
        self.papers
            .iter()
            .filter(move |p| p.task.as_deref() == Some(task))
    }

    pub fn tasks(&self) -> BTreeSet<&str> {
        self.papers.iter().filter_map(|p| p.task.as_deref()).collect()
    }
}

/// Reads a line-delimited corpus file.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut papers = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let paper: Paper = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        papers.push(paper);
    }
    if papers.is_empty() {
        log::warn!("corpus {} is empty", path.display());
    }
    Corpus::from_papers(papers)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = String::new();
    for p in corpus.papers() {
        out.push_str(&serde_json::to_string(p).expect("paper serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// A task, its distant counterpart and its research domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: String,
    pub distant_task: String,
    pub domain: String,
}

/// The ten tasks used in the reference study, tags lowercased.
pub fn default_task_table() -> Vec<TaskSpec> {
    [
        ("NLP", "code generation", "drug discovery"),
        ("NLP", "natural language understanding", "optical flow estimation"),
        ("NLP", "hallucination", "optical flow estimation"),
        ("CV", "scene understanding", "drug discovery"),
        ("CV", "optical flow estimation", "hallucination"),
        ("CV", "novel view synthesis", "eeg"),
        ("CV", "3d object detection", "drug discovery"),
        ("Biomed", "drug discovery", "optical flow estimation"),
        ("Biomed", "medical image analysis", "code generation"),
        ("Biomed", "eeg", "code generation"),
    ]
    .into_iter()
    .map(|(domain, task, distant)| TaskSpec {
        task: task.into(),
        distant_task: distant.into(),
        domain: domain.into(),
    })
    .collect()
}

/// Checks `distant_task != task` and, when the distant task is itself listed,
/// that it belongs to another domain.
pub fn validate_task_specs(specs: &[TaskSpec]) -> Result<()> {
    let domains: HashMap<&str, &str> = specs
        .iter()
        .map(|s| (s.task.as_str(), s.domain.as_str()))
        .collect();
    if domains.len() != specs.len() {
        return Err(CorpusError::InvalidTasks("duplicate task entry".into()));
    }
    for s in specs {
        if s.distant_task == s.task {
            return Err(CorpusError::InvalidTasks(format!(
                "{}: distant task equals task",
                s.task
            )));
        }
        if domains.get(s.distant_task.as_str()) == Some(&s.domain.as_str()) {
            return Err(CorpusError::InvalidTasks(format!(
                "{}: distant task {} is in the same domain {}",
                s.task, s.distant_task, s.domain
            )));
        }
    }
    Ok(())
}

pub fn load_task_specs(path: &Path) -> Result<Vec<TaskSpec>> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let specs: Vec<TaskSpec> = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    validate_task_specs(&specs)?;
    Ok(specs)
}

/// Dense vectors for one named embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub space: String,
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRow<V> {
    id: String,
    space: String,
    vector: V,
}

impl EmbeddingSet {
    pub fn new(space: impl Into<String>, dim: usize) -> Self {
        Self {
            space: space.into(),
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Inserts a vector, checking dimension, finiteness and non-zero norm.
    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(CorpusError::DimMismatch {
                path: PathBuf::new(),
                line: 0,
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        check_vector(&id, &vector)?;
        if self.vectors.insert(id.clone(), vector).is_some() {
            return Err(CorpusError::DuplicateId(id));
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.vectors.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Ids in sorted order.
    pub fn ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }
}

fn check_vector(id: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CorpusError::NonFinite(id.to_string()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(CorpusError::ZeroVector(id.to_string()));
    }
    Ok(())
}

/// Reads one embedding file; every row must declare `expected_space`.
pub fn load_embeddings(path: &Path, expected_space: &str) -> Result<EmbeddingSet> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut set: Option<EmbeddingSet> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow<Vec<f64>> =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.space != expected_space {
            return Err(CorpusError::SpaceMismatch {
                path: path.to_path_buf(),
                line: i + 1,
                expected: expected_space.to_string(),
                found: row.space,
            });
        }
        let set = set.get_or_insert_with(|| EmbeddingSet::new(expected_space, row.vector.len()));
        if row.vector.len() != set.dim {
            return Err(CorpusError::DimMismatch {
                path: path.to_path_buf(),
                line: i + 1,
                id: row.id,
                expected: set.dim,
                found: row.vector.len(),
            });
        }
        set.insert(row.id, row.vector)?;
    }
    match set {
        Some(s) if s.dim > 0 => Ok(s),
        _ => Err(CorpusError::EmptyEmbeddings(path.to_path_buf())),
    }
}

/// Writes an embedding set sorted by id.
pub fn write_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    let mut out = String::new();
    for id in set.ids() {
        let row = EmbeddingRow {
            id: id.to_string(),
            space: set.space.clone(),
            vector: set.get(id).expect("listed id"),
        };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// What a registered document is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Original,
    SelfCopy,
    Rephrase,
    CoverageChunkHost,
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VariantKind::Original => "original",
            VariantKind::SelfCopy => "self_copy",
            VariantKind::Rephrase => "rephrase",
            VariantKind::CoverageChunkHost => "coverage_chunk_host",
        };
        f.write_str(s)
    }
}

/// A document that must be embedded before evaluation.
///
/// Rephrase entries carry an empty `text` until the ingestion side fills it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticEntry {
    pub variant_id: String,
    pub kind: VariantKind,
    pub base_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus_path: String,
    /// Space name to embedding file path.
    #[serde(default)]
    pub spaces: BTreeMap<String, String>,
    #[serde(default)]
    pub entries: Vec<SyntheticEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        let m: Manifest = serde_json::from_str(&raw).map_err(|e| CorpusError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut seen = BTreeSet::new();
        for e in &m.entries {
            if !seen.insert(e.variant_id.as_str()) {
                return Err(CorpusError::Manifest {
                    path: path.to_path_buf(),
                    message: format!("duplicate variant_id {}", e.variant_id),
                });
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(io_err(path))?;
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        f.write_all(body.as_bytes()).map_err(io_err(path))?;
        f.write_all(b"\n").map_err(io_err(path))
    }

    pub fn entry(&self, variant_id: &str) -> Option<&SyntheticEntry> {
        self.entries.iter().find(|e| e.variant_id == variant_id)
    }

    /// Self-copy variants resolve to their base document's vectors.
    pub fn aliases(&self) -> HashMap<String, String> {
        self.entries
            .iter()
            .filter(|e| e.kind == VariantKind::SelfCopy)
            .map(|e| (e.variant_id.clone(), e.base_id.clone()))
            .collect()
    }
}

/// All loaded embedding spaces plus the self-copy alias table.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    spaces: BTreeMap<String, EmbeddingSet>,
    aliases: HashMap<String, String>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_aliases(mut self, aliases: HashMap<String, String>) -> Self {
        self.aliases = aliases;
        self
    }

    pub fn add(&mut self, set: EmbeddingSet) {
        self.spaces.insert(set.space.clone(), set);
    }

    pub fn space(&self, name: &str) -> Option<&EmbeddingSet> {
        self.spaces.get(name)
    }

    pub fn has_space(&self, name: &str) -> bool {
        self.spaces.contains_key(name)
    }

    /// Vector for a variant id, following self-copy aliases.
    pub fn vector(&self, space: &str, variant_id: &str) -> Option<&[f64]> {
        let set = self.spaces.get(space)?;
        set.get(variant_id).or_else(|| {
            self.aliases
                .get(variant_id)
                .and_then(|base| set.get(base))
        })
    }

    /// Loads `<dir>/<space>.jsonl` for every requested space that exists.
    /// Missing files are not an error here; validation reports them.
    pub fn load_dir(dir: &Path, spaces: &[&str]) -> Result<Self> {
        let mut store = Self::new();
        for space in spaces {
            let path = dir.join(format!("{space}.jsonl"));
            if path.exists() {
                store.add(load_embeddings(&path, space)?);
            }
        }
        Ok(store)
    }
}

/// A (variant, space) pair that evaluation will look up.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Requirement {
    pub variant_id: String,
    pub space: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub missing: Vec<Requirement>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} missing embedding(s)", self.missing.len())?;
        for r in &self.missing {
            writeln!(f, "  {} in {}", r.variant_id, r.space)?;
        }
        Ok(())
    }
}

/// Lists every required (variant, space) pair that the store cannot resolve.
///
/// The requirement list comes from the planned checks
/// ([`crate::bench::requirements`]), which already omit checks a metric is
/// excluded from.
pub fn validate_manifest(
    manifest: &Manifest,
    store: &EmbeddingStore,
    required: impl IntoIterator<Item = Requirement>,
) -> ValidationReport {
    let aliases = manifest.aliases();
    let mut missing: BTreeSet<Requirement> = BTreeSet::new();
    for req in required {
        let Some(set) = store.space(&req.space) else {
            missing.insert(req);
            continue;
        };
        let found = set.contains(&req.variant_id)
            || aliases
                .get(&req.variant_id)
                .is_some_and(|base| set.contains(base));
        if !found {
            missing.insert(req);
        }
    }
    ValidationReport {
        missing: missing.into_iter().collect(),
    }
}
