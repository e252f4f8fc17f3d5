//! Synthetic corpora with planted geometry.
//!
//! Every task owns a disjoint block of dimensions, so papers of different
//! tasks are orthogonal. Within a block, task papers ("hubs") scatter around
//! a common centre. Each hub cites a ring of older reference-only papers
//! placed at `normalize(hub + offset * e_i)` along shared orthonormal ring
//! axes, which makes the hub strictly denser than any of its references.
//!
//! [`fill`] then embeds the synthetic entries of a plan manifest: rephrases
//! sit at a fixed cosine to their focal paper, and coverage hosts are pulled
//! toward the focal paper by the share of its sentences they received.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingSet, Manifest, Paper, TaskSpec, VariantKind};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::textops::split_sentences;
use crate::{ABSTRACT_SPACE, TITLE_SPACE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Task-tagged papers per task.
    pub size: usize,
    /// Reference-only papers cited by each task paper.
    pub refs_per_paper: usize,
    pub task_dim: usize,
    /// Largest cosine allowed between two papers of one task.
    pub max_hub_cosine: f64,
    pub ring_offset: f64,
    pub rephrase_cosine: f64,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            size: 200,
            refs_per_paper: 20,
            task_dim: 16,
            max_hub_cosine: 0.9,
            ring_offset: 0.5,
            rephrase_cosine: 0.95,
            first_year: 2000,
            last_year: 2024,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.size == 0 || self.task_dim < 2 {
            return Err(Error::invalid("synth size and task_dim must be positive"));
        }
        if self.first_year > self.last_year || self.first_year <= 1903 {
            return Err(Error::invalid("synth year range is empty or too early"));
        }
        if !(self.rephrase_cosine > 0.0 && self.rephrase_cosine < 1.0) {
            return Err(Error::invalid("rephrase cosine must lie in (0, 1)"));
        }
        if !(self.max_hub_cosine > 0.0 && self.max_hub_cosine < 1.0) {
            return Err(Error::invalid("max hub cosine must lie in (0, 1)"));
        }
        Ok(())
    }

    fn dim(&self, tasks: usize) -> usize {
        tasks * self.task_dim + self.refs_per_paper
    }
}

/// Six tasks in three domains, each paired with a distant task from
/// another domain.
pub fn synth_tasks() -> Vec<TaskSpec> {
    [
        ("NLP", "code generation", "drug discovery"),
        ("NLP", "hallucination", "optical flow estimation"),
        ("CV", "optical flow estimation", "hallucination"),
        ("CV", "novel view synthesis", "eeg"),
        ("Biomed", "drug discovery", "optical flow estimation"),
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

/// A generated corpus with its task table and both embedding spaces.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub tasks: Vec<TaskSpec>,
    pub abstract_space: EmbeddingSet,
    pub title_space: EmbeddingSet,
}

impl SynthCorpus {
    pub fn store(&self) -> crate::corpus::EmbeddingStore {
        let mut store = crate::corpus::EmbeddingStore::new();
        store.add(self.abstract_space.clone());
        store.add(self.title_space.clone());
        store
    }
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "si", "pe", "da", "gu", "ho", "ze", "bi", "ra", "fu",
];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn sentence(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let n = rng.random_range(6..=10);
    let mut words: Vec<String> = (0..n).map(|_| vocab.choose(rng).expect("non-empty").clone()).collect();
    // a private word keeps sentences distinguishable across papers
    words.push(word(rng));
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

fn abstract_text(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let n = rng.random_range(3..=6);
    (0..n).map(|_| sentence(rng, vocab)).collect::<Vec<_>>().join(" ")
}

fn title(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let n = rng.random_range(3..=6);
    let mut t = (0..n).map(|_| vocab.choose(rng).expect("non-empty").clone()).collect::<Vec<_>>().join(" ");
    if let Some(first) = t.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    t
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Six decimals keep the files small; the planted margins are far larger.
fn rounded(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = (*x * 1e6).round() / 1e6);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hub directions of one task: `normalize(centre + noise)` inside the task
/// block, resampled until no two exceed `max_hub_cosine`.
fn hubs(rng: &mut ChaCha8Rng, config: &SynthConfig, block: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    let d = config.task_dim;
    // noise scale putting the typical pairwise cosine near 0.5
    let sigma = (1.0 / (d - 1) as f64).sqrt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(config.size);
    let mut attempts = 0usize;
    while out.len() < config.size {
        attempts += 1;
        if attempts > 1000 * config.size {
            return Err(Error::invalid("cannot place task papers; raise task_dim or max_hub_cosine"));
        }
        let mut v = vec![0.0; dim];
        v[block * d] = 1.0;
        for x in &mut v[block * d + 1..(block + 1) * d] {
            let z: f64 = StandardNormal.sample(rng);
            *x = sigma * z;
        }
        normalize(&mut v);
        if out.iter().all(|h| dot(h, &v) <= config.max_hub_cosine) {
            out.push(v);
        }
    }
    Ok(out)
}

fn ring_point(hub: &[f64], axis: usize, config: &SynthConfig, tasks: usize) -> Vec<f64> {
    let mut v = hub.to_vec();
    v[tasks * config.task_dim + axis] += config.ring_offset;
    normalize(&mut v);
    v
}

fn slug(task: &str) -> String {
    task.split_whitespace().collect::<Vec<_>>().join("-")
}

/// Generates the corpus and both embedding spaces for `tasks`.
pub fn generate(config: &SynthConfig, tasks: &[TaskSpec]) -> Result<SynthCorpus> {
    config.validate()?;
    crate::corpus::validate_task_specs(tasks)?;
    let dim = config.dim(tasks.len());
    let mut papers = Vec::new();
    let mut abs = EmbeddingSet::new(ABSTRACT_SPACE, dim);
    let mut tit = EmbeddingSet::new(TITLE_SPACE, dim);
    for (block, spec) in tasks.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &["synth", &spec.task]));
        let vocab: Vec<String> = (0..60).map(|_| word(&mut rng)).collect();
        let abstract_hubs = hubs(&mut rng, config, block, dim)?;
        let title_hubs = hubs(&mut rng, config, block, dim)?;
        for (i, (ha, ht)) in abstract_hubs.iter().zip(&title_hubs).enumerate() {
            let id = format!("{}-{i:03}", slug(&spec.task));
            let year = rng.random_range(config.first_year..=config.last_year);
            let mut refs = Vec::with_capacity(config.refs_per_paper);
            for j in 0..config.refs_per_paper {
                let rid = format!("{id}-r{j:02}");
                papers.push(Paper {
                    id: rid.clone(),
                    title: title(&mut rng, &vocab),
                    abstract_text: abstract_text(&mut rng, &vocab),
                    year: year - rng.random_range(1..=3),
                    task: None,
                    refs: vec![],
                    is_reference_only: true,
                });
                abs.insert(rid.clone(), rounded(ring_point(ha, j, config, tasks.len())))?;
                tit.insert(rid.clone(), rounded(ring_point(ht, j, config, tasks.len())))?;
                refs.push(rid);
            }
            papers.push(Paper {
                id: id.clone(),
                title: title(&mut rng, &vocab),
                abstract_text: abstract_text(&mut rng, &vocab),
                year,
                task: Some(spec.task.clone()),
                refs,
                is_reference_only: false,
            });
            abs.insert(id.clone(), rounded(ha.clone()))?;
            tit.insert(id, rounded(ht.clone()))?;
        }
    }
    Ok(SynthCorpus {
        corpus: Corpus::from_papers(papers)?,
        tasks: tasks.to_vec(),
        abstract_space: abs,
        title_space: tit,
    })
}

/// Unit vector at cosine `c` to `focal`, in a seeded direction orthogonal
/// to it.
pub fn rephrase_vector(focal: &[f64], c: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = focal.to_vec();
    normalize(&mut f);
    loop {
        let mut u: Vec<f64> = (0..f.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = dot(&u, &f);
        u.iter_mut().zip(&f).for_each(|(x, fi)| *x -= p * fi);
        let n = dot(&u, &u).sqrt();
        if n > 1e-6 {
            let s = (1.0 - c * c).sqrt();
            return f.iter().zip(&u).map(|(fi, ui)| c * fi + s * ui / n).collect();
        }
    }
}

/// What [`fill`] added.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FillReport {
    pub rephrases: usize,
    pub coverage: usize,
}

/// Embeds the manifest's rephrase and coverage entries into `sets` and gives
/// each rephrase a stand-in text (the focal's sentences in reverse order).
pub fn fill(
    manifest: &mut Manifest,
    corpus: &Corpus,
    sets: &mut [EmbeddingSet],
    seed: u64,
    rephrase_cosine: f64,
) -> Result<FillReport> {
    let mut report = FillReport::default();
    for entry in manifest.entries.iter_mut() {
        match entry.kind {
            VariantKind::Original | VariantKind::SelfCopy => continue,
            VariantKind::Rephrase => {
                let focal = corpus
                    .get(&entry.base_id)
                    .ok_or_else(|| Error::invalid(format!("rephrase base {} not in corpus", entry.base_id)))?;
                if entry.text.is_empty() {
                    let mut sentences = split_sentences(&focal.abstract_text);
                    sentences.reverse();
                    entry.text = format!("{}. {}", focal.title, sentences.join(" "));
                }
                for set in sets.iter_mut() {
                    if set.contains(&entry.variant_id) {
                        continue;
                    }
                    let Some(v) = set.get(&entry.base_id) else { continue };
                    let s = derive_seed(seed, &["rephrase", &set.space, &entry.variant_id]);
                    let r = rounded(rephrase_vector(v, rephrase_cosine, s));
                    set.insert(entry.variant_id.clone(), r)?;
                }
                report.rephrases += 1;
            }
            VariantKind::CoverageChunkHost => {
                let focal_id = entry
                    .variant_id
                    .split('#')
                    .next()
                    .filter(|f| corpus.get(f).is_some())
                    .ok_or_else(|| Error::invalid(format!("bad coverage id {}", entry.variant_id)))?;
                let focal = corpus.get(focal_id).expect("checked");
                let sentences = split_sentences(&focal.abstract_text);
                let host = corpus
                    .get(&entry.base_id)
                    .ok_or_else(|| Error::invalid(format!("coverage host {} not in corpus", entry.base_id)))?;
                // only the appended part counts
                let appended = entry.text.strip_prefix(&host.title_and_abstract()).unwrap_or(&entry.text);
                let share = sentences.iter().filter(|s| appended.contains(s.as_str())).count() as f64
                    / sentences.len().max(1) as f64;
                for set in sets.iter_mut().filter(|s| s.space == ABSTRACT_SPACE) {
                    if set.contains(&entry.variant_id) {
                        continue;
                    }
                    let (Some(h), Some(f)) = (set.get(&entry.base_id), set.get(focal_id)) else {
                        continue;
                    };
                    let mut v: Vec<f64> = h.iter().zip(f).map(|(a, b)| a + share * b).collect();
                    normalize(&mut v);
                    set.insert(entry.variant_id.clone(), rounded(v))?;
                }
                report.coverage += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cosine_distance;

    fn small() -> SynthConfig {
        SynthConfig {
            size: 30,
            refs_per_paper: 12,
            seed: 9,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate(&small(), &synth_tasks()).unwrap();
        let b = generate(&small(), &synth_tasks()).unwrap();
        assert_eq!(a.corpus.papers(), b.corpus.papers());
        assert_eq!(a.abstract_space, b.abstract_space);
        let c = generate(&SynthConfig { seed: 10, ..small() }, &synth_tasks()).unwrap();
        assert_ne!(a.corpus.papers(), c.corpus.papers());
    }

    #[test]
    fn sizes_and_tags() {
        let s = generate(&small(), &synth_tasks()).unwrap();
        assert_eq!(s.corpus.tagged("eeg").count(), 30);
        assert_eq!(s.corpus.len(), 6 * 30 * 13);
        assert_eq!(s.abstract_space.len(), s.corpus.len());
        for p in s.corpus.papers().iter().filter(|p| p.task.is_some()) {
            for r in &p.refs {
                assert!(s.corpus.get(r).unwrap().year < p.year);
            }
        }
    }

    #[test]
    fn planted_geometry() {
        let cfg = small();
        let s = generate(&cfg, &synth_tasks()).unwrap();
        let e = &s.abstract_space;
        let hub = e.get("eeg-000").unwrap();
        let ring = 1.0 - 1.0 / (1.0 + cfg.ring_offset * cfg.ring_offset).sqrt();
        assert!((cosine_distance(hub, e.get("eeg-000-r00").unwrap()) - ring).abs() < 1e-5);
        assert!(cosine_distance(hub, e.get("code-generation-003").unwrap()) == 1.0);
        let others: Vec<&str> = s.corpus.tagged("eeg").map(|p| p.id.as_str()).filter(|&id| id != "eeg-000").collect();
        for o in others {
            assert!(cosine_distance(hub, e.get(o).unwrap()) >= 1.0 - cfg.max_hub_cosine - 1e-5);
        }
    }

    #[test]
    fn rephrase_hits_cosine() {
        let f = vec![0.3, -0.2, 0.9, 0.1];
        let r = rephrase_vector(&f, 0.95, 4);
        assert!((cosine_distance(&f, &r) - 0.05).abs() < 1e-12);
        assert_eq!(r, rephrase_vector(&f, 0.95, 4));
    }
}
