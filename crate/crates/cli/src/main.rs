//! `novax`: plan, evaluate, combine and report axiom checks for novelty
//! metrics, and generate synthetic corpora.
//!
//! Exit codes: 0 success, 1 internal error, 2 input or validation error.

mod runlog;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use novax_core::axioms::Gates;
use novax_core::bench::{aggregate, emit_plan, evaluate, render, requirements, ReportFormat};
use novax_core::combine::{
    ablate_metrics, correlate_base_scores, cross_validate, enumerate_simplex, norm_stats, render_report,
    table_metrics, CombineIndex, SearchMode, WeightsFile,
};
use novax_core::corpus::{
    default_task_table, load_corpus, load_embeddings, load_task_specs, validate_manifest, write_corpus,
    write_embeddings, EmbeddingStore,
};
use novax_core::synth::{fill, generate, synth_tasks, SynthConfig};
use novax_core::{CheckId, Manifest, MetricKind, Plan, ResultTable, RunConfig, TaskSpec};

const DEFAULT_OUT: &str = "novax-out";
const MAX_LISTED: usize = 20;

#[derive(Parser)]
#[command(name = "novax", version, about = "Axiomatic benchmark for scientific novelty metrics")]
struct Cli {
    /// Also print info messages to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "NOVAX_OUT", default_value = DEFAULT_OUT)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sample focal papers and write the plan and manipulation manifest.
    Plan {
        #[arg(long)]
        corpus: PathBuf,
        /// Task table JSON file, or a comma-separated list of tasks from the
        /// built-in table.
        #[arg(long)]
        tasks: Option<String>,
        #[arg(long, default_value_t = 100)]
        focal_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<MetricKind>,
        /// Checks such as ax1,ax3_grad; "ax3" selects both coverage checks.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[command(flatten)]
        gates: GateArgs,
        #[arg(long, default_value_t = 50)]
        min_base_pool: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Score every planned check and write results.jsonl.
    Eval {
        #[arg(long)]
        plan: PathBuf,
        /// Manifest path; defaults to manifest.json next to the plan.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Directory holding <space>.jsonl embedding files.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<MetricKind>,
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        /// Worker threads; 0 uses all available cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Search metric weights with leave-one-domain-out cross-validation.
    Combine {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "global")]
        mode: SearchMode,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value = "leave-one-domain-out", value_parser = ["leave-one-domain-out"])]
        cv: String,
        /// Repeat the global search with each metric removed.
        #[arg(long)]
        ablate: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Render the domain x metric x check pass-rate table.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
        #[command(flatten)]
        out: OutDir,
    },
    /// Generate a synthetic corpus, or embed a manifest's synthetic entries.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Task papers per task.
        #[arg(long, default_value_t = 200)]
        size: usize,
        /// Reference-only papers per task paper.
        #[arg(long, default_value_t = 20)]
        refs: usize,
        /// Fill this plan manifest instead of generating a corpus.
        #[arg(long)]
        fill: Option<PathBuf>,
        /// Embedding directory for --fill; defaults to the output directory.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Args)]
struct GateArgs {
    /// Cited pool papers needed for Ax5/Ax6.
    #[arg(long, default_value_t = 20)]
    min_cited: usize,
    /// Pool size that must be exceeded for Ax7.
    #[arg(long, default_value_t = 500)]
    min_pool_oldest: usize,
    /// Newer same-task papers that must be exceeded for Ax8.
    #[arg(long, default_value_t = 300)]
    min_newer: usize,
    /// Size of the Ax7/Ax8 slices.
    #[arg(long, default_value_t = 300)]
    slice: usize,
}

enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn parse_checks(raw: &[String]) -> Result<Vec<CheckId>, Failure> {
    if raw.is_empty() {
        return Ok(CheckId::ALL.to_vec());
    }
    let mut set = BTreeSet::new();
    for r in raw {
        if r.trim().eq_ignore_ascii_case("ax3") {
            set.insert(CheckId::Ax3Grad);
            set.insert(CheckId::Ax3Ltbase);
        } else {
            set.insert(r.parse::<CheckId>().map_err(|e| anyhow!(e)).input()?);
        }
    }
    Ok(set.into_iter().collect())
}

fn metrics_or_all(m: Vec<MetricKind>) -> Vec<MetricKind> {
    if m.is_empty() {
        return MetricKind::ALL.to_vec();
    }
    let set: BTreeSet<MetricKind> = m.into_iter().collect();
    set.into_iter().collect()
}

fn resolve_tasks(arg: Option<&str>) -> Result<Vec<TaskSpec>, Failure> {
    let Some(arg) = arg else {
        return Ok(default_task_table());
    };
    let path = Path::new(arg);
    if path.is_file() {
        return load_task_specs(path).input();
    }
    let table = default_task_table();
    arg.split(',')
        .map(|name| {
            let name = name.trim().to_lowercase();
            table
                .iter()
                .find(|t| t.task == name)
                .cloned()
                .ok_or_else(|| anyhow!("unknown task {name:?}"))
                .input()
        })
        .collect()
}

fn prepare(out: &Path, verbose: bool) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .input()?;
    runlog::init(Some(&out.join("run.log")), verbose).internal()
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body)
        .with_context(|| format!("writing {}", path.display()))
        .internal()
}

fn workers(n: usize) -> usize {
    if n > 0 {
        n
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Plan {
            corpus,
            tasks,
            focal_count,
            seed,
            metrics,
            checks,
            gates,
            min_base_pool,
            out,
        } => {
            prepare(&out.out, cli.verbose)?;
            let tasks = resolve_tasks(tasks.as_deref())?;
            let loaded = load_corpus(&corpus).input()?;
            let mut config = RunConfig::new(tasks, seed);
            config.focal_count = focal_count;
            config.metrics = metrics_or_all(metrics);
            config.checks = parse_checks(&checks)?;
            config.gates = Gates {
                min_cited: gates.min_cited,
                min_pool_oldest: gates.min_pool_oldest,
                min_newer: gates.min_newer,
                slice: gates.slice,
            };
            config.min_base_pool = min_base_pool;
            let (plan, manifest) = emit_plan(&config, &loaded, &corpus.display().to_string()).input()?;
            plan.save(&out.out.join("plan.json")).internal()?;
            manifest.save(&out.out.join("manifest.json")).internal()?;
            log::info!(
                "planned {} focal papers, {} manifest entries",
                plan.focals.len(),
                manifest.entries.len()
            );
        }
        Command::Eval {
            plan,
            manifest,
            embeddings,
            metrics,
            checks,
            workers: n,
            out,
        } => {
            prepare(&out.out, cli.verbose)?;
            let mut loaded = Plan::load(&plan).input()?;
            if !metrics.is_empty() {
                loaded.config.metrics = metrics_or_all(metrics);
            }
            if !checks.is_empty() {
                loaded.config.checks = parse_checks(&checks)?;
            }
            let manifest_path = manifest.unwrap_or_else(|| plan.with_file_name("manifest.json"));
            let manifest = Manifest::load(&manifest_path).input()?;
            let corpus = load_corpus(Path::new(&loaded.corpus_path)).input()?;
            let spaces: BTreeSet<&str> = loaded.config.metrics.iter().map(|m| m.space()).collect();
            let spaces: Vec<&str> = spaces.into_iter().collect();
            let store = EmbeddingStore::load_dir(&embeddings, &spaces)
                .input()?
                .with_aliases(manifest.aliases());
            let report = validate_manifest(&manifest, &store, requirements(&loaded, &corpus).input()?);
            if !report.is_empty() {
                let mut msg = format!("{} missing embedding(s)", report.missing.len());
                for r in report.missing.iter().take(MAX_LISTED) {
                    msg.push_str(&format!("\n  {} in {}", r.variant_id, r.space));
                }
                if report.missing.len() > MAX_LISTED {
                    msg.push_str(&format!("\n  ... and {} more", report.missing.len() - MAX_LISTED));
                }
                return Err(Failure::Input(anyhow!(msg)));
            }
            let table = evaluate(&loaded, &corpus, &store, workers(n)).internal()?;
            table.save(&out.out.join("results.jsonl")).internal()?;
            log::info!("wrote {} result rows", table.rows.len());
        }
        Command::Combine {
            results,
            mode,
            step,
            cv: _,
            ablate,
            out,
        } => {
            prepare(&out.out, cli.verbose)?;
            let table = ResultTable::load(&results).input()?;
            let metrics = table_metrics(&table);
            let candidates = enumerate_simplex(metrics.len().max(1), step).input()?;
            log::info!("{} candidates over {} metrics", candidates.len(), metrics.len());
            let stats = norm_stats(&table);
            let index = CombineIndex::new(&table, &metrics, &stats);
            let report = cross_validate(&index, mode, step).input()?;
            let ablation = if ablate {
                ablate_metrics(&table, &stats, step, &report).input()?
            } else {
                Vec::new()
            };
            let file = WeightsFile {
                cv: report,
                ablation,
                correlations: correlate_base_scores(&table),
            };
            let mut body = serde_json::to_string_pretty(&file).internal()?;
            body.push('\n');
            write(&out.out.join("weights.json"), &body)?;
            write(&out.out.join("folds.md"), &render_report(&file))?;
        }
        Command::Report { results, format, out } => {
            prepare(&out.out, cli.verbose)?;
            let table = ResultTable::load(&results).input()?;
            for (reason, n) in table.skip_counts() {
                log::info!("{n} rows skipped: {reason}");
            }
            let body = render(&aggregate(&table, &CheckId::ALL), format);
            let name = match format {
                ReportFormat::Markdown => "table2.md",
                ReportFormat::Csv => "table2.csv",
            };
            write(&out.out.join(name), &body)?;
            print!("{body}");
        }
        Command::Synth {
            seed,
            fill: Some(manifest_path),
            embeddings,
            out,
            ..
        } => {
            prepare(&out.out, cli.verbose)?;
            let dir = embeddings.unwrap_or_else(|| out.out.clone());
            let mut manifest = Manifest::load(&manifest_path).input()?;
            let corpus = load_corpus(Path::new(&manifest.corpus_path)).input()?;
            let mut sets = Vec::new();
            for space in [novax_core::ABSTRACT_SPACE, novax_core::TITLE_SPACE] {
                let path = dir.join(format!("{space}.jsonl"));
                if path.exists() {
                    sets.push((path.clone(), load_embeddings(&path, space).input()?));
                }
            }
            let mut only: Vec<_> = sets.iter().map(|(_, s)| s.clone()).collect();
            let report = fill(&mut manifest, &corpus, &mut only, seed, SynthConfig::default().rephrase_cosine).input()?;
            for ((path, _), set) in sets.iter().zip(&only) {
                write_embeddings(path, set).internal()?;
            }
            manifest.save(&manifest_path).internal()?;
            log::info!("embedded {} rephrases and {} coverage hosts", report.rephrases, report.coverage);
        }
        Command::Synth {
            seed,
            size,
            refs,
            fill: None,
            out,
            ..
        } => {
            prepare(&out.out, cli.verbose)?;
            let config = SynthConfig {
                seed,
                size,
                refs_per_paper: refs,
                ..SynthConfig::default()
            };
            let s = generate(&config, &synth_tasks()).input()?;
            write_corpus(&out.out.join("corpus.jsonl"), &s.corpus).internal()?;
            write_embeddings(&out.out.join(format!("{}.jsonl", novax_core::ABSTRACT_SPACE)), &s.abstract_space)
                .internal()?;
            write_embeddings(&out.out.join(format!("{}.jsonl", novax_core::TITLE_SPACE)), &s.title_space)
                .internal()?;
            let mut tasks = serde_json::to_string_pretty(&s.tasks).internal()?;
            tasks.push('\n');
            write(&out.out.join("tasks.json"), &tasks)?;
            log::info!("generated {} papers", s.corpus.len());
        }
    }
    Ok(())
}

fn report(e: &anyhow::Error) {
    // before the run log exists there is no logger to echo to stderr
    if log::max_level() == log::LevelFilter::Off {
        eprintln!("error: {e:#}");
    } else {
        log::error!("{e:#}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            report(&e);
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            report(&e);
            ExitCode::from(1)
        }
    }
}
