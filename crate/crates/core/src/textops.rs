//! Text and statistics utilities: tokenisation, sentence splitting, TF-IDF
//! nearest-document search, ROUGE, cosine similarity, Pearson correlation
//! and z-scores. Everything here is a pure function.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("no comparable candidates")]
    NoComparableCandidates,
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("undefined correlation")]
    UndefinedCorrelation,
    #[error("series length mismatch or fewer than two points")]
    BadSeries,
    #[error("degenerate scale")]
    DegenerateScale,
}

type Result<T> = std::result::Result<T, TextError>;

/// Lowercases, splits on runs of non-alphanumeric characters and drops
/// tokens shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "al.", "fig.", "figs.", "vs.", "cf.", "eq.", "eqs.", "sec.", "no.", "approx.",
    "resp.", "dr.", "mr.", "ms.", "mrs.", "tab.",
];

fn is_abbreviation(text: &str, period_at: usize) -> bool {
    let start = text[..period_at]
        .rfind(char::is_whitespace)
        .map_or(0, |i| i + 1);
    let word = text[start..=period_at]
        .trim_start_matches(['(', '[', '{', '"', '\''])
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits text at `.`, `!` or `?` followed by whitespace and an uppercase
/// letter or digit, unless the period closes a known abbreviation.
///
/// Sentences are returned trimmed; joining them with whitespace recovers
/// the input modulo whitespace.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    for (pos, &(i, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let Some(&(_, next)) = chars.get(pos + 1) else {
            continue;
        };
        if !next.is_whitespace() {
            continue;
        }
        let Some(&(_, following)) = chars[pos + 1..].iter().find(|(_, ch)| !ch.is_whitespace())
        else {
            continue;
        };
        if !(following.is_uppercase() || following.is_ascii_digit()) {
            continue;
        }
        if c == '.' && is_abbreviation(text, i) {
            continue;
        }
        let end = i + c.len_utf8();
        let sentence = text[start..end].trim();
        if !sentence.is_empty() {
            out.push(sentence.to_string());
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// A sparse vector as sorted `(column, weight)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            let (a, wa) = self.entries[i];
            let (b, wb) = other.entries[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// TF-IDF model with smoothed idf `ln((1+N)/(1+df)) + 1` and L2-normalised
/// raw-count term frequencies.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    ids: Vec<String>,
    id_index: HashMap<String, usize>,
    doc_vectors: Vec<SparseVector>,
}

impl TfidfModel {
    /// Fits the vocabulary and idf on `(id, text)` documents.
    pub fn fit<I, S, T>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let mut ids = Vec::new();
        let mut id_index = HashMap::new();
        let mut tokenized = Vec::new();
        for (id, text) in docs {
            let id = id.into();
            if id_index.insert(id.clone(), ids.len()).is_some() {
                return Err(TextError::DuplicateDocument(id));
            }
            ids.push(id);
            let tokens = tokenize(text.as_ref());
            let mut seen: Vec<usize> = tokens
                .iter()
                .map(|t| {
                    let next = vocabulary.len();
                    let col = *vocabulary.entry(t.clone()).or_insert(next);
                    if col == df.len() {
                        df.push(0);
                    }
                    col
                })
                .collect();
            seen.sort_unstable();
            seen.dedup();
            for col in seen {
                df[col] += 1;
            }
            tokenized.push(tokens);
        }
        let n = ids.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut model = Self {
            vocabulary,
            idf,
            ids,
            id_index,
            doc_vectors: Vec::new(),
        };
        model.doc_vectors = tokenized.iter().map(|t| model.vectorize(t)).collect();
        Ok(model)
    }

    fn vectorize(&self, tokens: &[String]) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            if let Some(&col) = self.vocabulary.get(t) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(col, tf)| (col, tf * self.idf[col]))
            .collect();
        entries.sort_unstable_by_key(|&(col, _)| col);
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        SparseVector { entries }
    }

    pub fn transform(&self, text: &str) -> SparseVector {
        self.vectorize(&tokenize(text))
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&c| self.idf[c])
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_vector(&self, id: &str) -> Option<&SparseVector> {
        self.id_index.get(id).map(|&i| &self.doc_vectors[i])
    }

    /// Ids of fitted documents whose vector is zero (no in-vocabulary terms).
    pub fn zero_documents(&self) -> Vec<&str> {
        self.ids
            .iter()
            .zip(&self.doc_vectors)
            .filter(|(_, v)| v.is_zero())
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Candidate with the highest cosine similarity to `query`; ties go to
    /// the lexicographically smallest id. Zero-vector candidates never win.
    pub fn nearest(&self, query: &str, candidates: &[&str]) -> Result<String> {
        let q = self.transform(query);
        let mut best: Option<(&str, f64)> = None;
        for &cand in candidates {
            let v = self
                .doc_vector(cand)
                .ok_or_else(|| TextError::UnknownCandidate(cand.to_string()))?;
            if v.is_zero() {
                continue;
            }
            let sim = q.dot(v);
            best = match best {
                Some((id, s)) if s > sim || (s == sim && id <= cand) => Some((id, s)),
                _ => Some((cand, sim)),
            };
        }
        best.map(|(id, _)| id.to_string())
            .ok_or(TextError::NoComparableCandidates)
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(TextError::DimMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(TextError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F1 with clipped n-gram overlap.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be positive");
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        log::warn!("rouge_n on empty token list");
        return 0.0;
    }
    let cc = ngram_counts(&c, n);
    let rc = ngram_counts(&r, n);
    let (ct, rt): (usize, usize) = (cc.values().sum(), rc.values().sum());
    if ct == 0 || rt == 0 {
        // too short for this order; identical texts still agree fully
        return if c == r { 1.0 } else { 0.0 };
    }
    let overlap = cc
        .iter()
        .map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0)))
        .sum();
    f1(overlap, ct, rt)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 over the longest common token subsequence.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        log::warn!("rouge_l on empty token list");
        return 0.0;
    }
    f1(lcs_len(&c, &r), c.len(), r.len())
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(TextError::BadSeries);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TextError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Population mean and standard deviation.
pub fn population_stats(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn zscore(values: &[f64], mean: f64, std: f64) -> Result<Vec<f64>> {
    if !(std > 0.0) {
        return Err(TextError::DegenerateScale);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}
