//! `cadence` command line.
//!
//! Exit codes: 0 on success, 1 when the input data or a runtime step fails,
//! 2 for usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cadence_core::align::{Projected, Tagger};
use cadence_core::analysis::analyze_audio;
use cadence_core::labeler::TechniqueLabel;
use cadence_core::recommend::{recommend, IndexBundle, RecommendationPayload};
use cadence_core::Execution;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::service::{self, AppState};
use crate::workflow::{self, WorkflowError};

#[derive(Debug, Parser)]
#[command(
    name = "cadence",
    version,
    about = "Voice-modulation exemplars and practice feedback"
)]
pub struct Cli {
    /// TOML settings file; CADENCE_* environment variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Run the data-parallel paths on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus maintenance.
    Corpus {
        #[command(subcommand)]
        action: CorpusCommand,
    },
    /// Build the search index for a corpus.
    Reindex {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Label a recording given its word timings.
    Analyze {
        wav: PathBuf,
        #[arg(long)]
        timings: PathBuf,
    },
    /// Recommend exemplar delivery for a sentence of text.
    Recommend {
        text: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(short = 'k', long)]
        k: Option<usize>,
        #[arg(long)]
        k_table: Option<usize>,
        #[arg(long)]
        min_support: Option<f64>,
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Segment every `*.json` transcript in a directory into a corpus file.
    Build {
        dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Overwrite an existing corpus file.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("{0}")]
    Message(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<cadence_core::recommend::RecommendError> for CliError {
    fn from(e: cadence_core::recommend::RecommendError) -> Self {
        CliError::Workflow(e.into())
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if cli.sequential {
        cfg.set_execution(Execution::Sequential);
    }
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Corpus {
            action: CorpusCommand::Build { dir, output, force },
        } => {
            if output.exists() && !force {
                return Err(CliError::Message(format!(
                    "{} already exists; pass --force to overwrite",
                    output.display()
                )));
            }
            let store = workflow::build_corpus(&dir)?;
            store.save(&output).map_err(WorkflowError::from)?;
            let stats = store.stats();
            match cli.format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&stats).expect("stats serialize")
                )?,
                Format::Table => {
                    writeln!(out, "talks      {}", stats.talk_count)?;
                    writeln!(out, "hours      {:.3}", stats.total_duration)?;
                    writeln!(out, "sentences  {}", stats.sentence_count)?;
                    writeln!(out, "words      {}", stats.word_count)?;
                    writeln!(out, "words/sent {:.2}", stats.mean_words_per_sentence)?;
                }
            }
        }
        Command::Reindex { corpus, index } => {
            set_paths(&mut cfg, corpus, index);
            let corpus = require_corpus(&cfg)?;
            let store = workflow::load_corpus(&corpus)?;
            let bundle = workflow::reindex(&store, &cfg)?;
            let path = cfg.index_path().expect("corpus is set");
            bundle.save(&path)?;
            match cli.format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&bundle.header).expect("header serializes")
                )?,
                Format::Table => writeln!(
                    out,
                    "indexed {} sentences into {}",
                    bundle.header.sentence_count,
                    path.display()
                )?,
            }
        }
        Command::Analyze { wav, timings } => {
            let bytes = std::fs::read(&wav).map_err(|source| WorkflowError::Io {
                path: wav.clone(),
                source,
            })?;
            let words = workflow::read_timings(&timings)?;
            let sentences = analyze_audio(&bytes, &words, &cfg.analysis, &cfg.thresholds)
                .map_err(WorkflowError::from)?;
            match cli.format {
                Format::Json => {
                    out.write_all(&workflow::analyze_json(&sentences))?;
                    writeln!(out)?;
                }
                Format::Table => {
                    for s in &sentences {
                        writeln!(out, "{}  {}", s.id, s.text)?;
                        for (w, l) in s.words.iter().zip(&s.labels.labels) {
                            writeln!(out, "  {w:<16} {}", label_text(l))?;
                        }
                    }
                }
            }
        }
        Command::Recommend {
            text,
            corpus,
            index,
            k,
            k_table,
            min_support,
            max_n,
        } => {
            set_paths(&mut cfg, corpus, index);
            require_corpus(&cfg)?;
            let index_path = cfg.index_path().expect("corpus is set");
            if !index_path.exists() {
                return Err(CliError::Message(format!(
                    "no index at {}; run `cadence reindex --corpus {}` first",
                    index_path.display(),
                    cfg.corpus
                        .as_deref()
                        .unwrap_or(Path::new("<corpus>"))
                        .display()
                )));
            }
            let bundle = IndexBundle::load(&index_path)?;
            let mut params = cfg.recommend_params();
            if let Some(k) = k {
                params.k = k;
            }
            if let Some(v) = k_table {
                params.k_table = v;
            }
            if let Some(v) = min_support {
                params.min_support = v;
            }
            if let Some(v) = max_n {
                params.max_n = v;
            }
            let query = workflow::text_query(&text)?;
            let payload = recommend(
                &bundle,
                &Tagger::default(),
                &query,
                &params,
                cfg.execution(),
            )?;
            match cli.format {
                Format::Json => {
                    out.write_all(&serde_json::to_vec(&payload).expect("payload serializes"))?;
                    writeln!(out)?;
                }
                Format::Table => write_table(&mut out, &payload)?,
            }
        }
        Command::Serve {
            bind,
            corpus,
            index,
        } => {
            set_paths(&mut cfg, corpus, index);
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let state = AppState::load(cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(state))?;
        }
    }
    Ok(())
}

fn set_paths(cfg: &mut Config, corpus: Option<PathBuf>, index: Option<PathBuf>) {
    if corpus.is_some() {
        cfg.corpus = corpus;
    }
    if index.is_some() {
        cfg.index = index;
    }
}

fn require_corpus(cfg: &Config) -> Result<PathBuf, CliError> {
    cfg.corpus.clone().ok_or_else(|| {
        CliError::Message("no corpus given; pass --corpus or set CADENCE_CORPUS".into())
    })
}

fn label_text(l: &TechniqueLabel) -> String {
    let ts = l.techniques();
    if ts.is_empty() {
        "-".into()
    } else {
        ts.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("+")
    }
}

fn projected_text(p: &Projected) -> String {
    p.label().map_or_else(|| ".".into(), label_text)
}

fn write_table(out: &mut impl Write, p: &RecommendationPayload) -> std::io::Result<()> {
    writeln!(out, "query: {}", p.query.text)?;
    writeln!(out, "retrieved: {}", p.retrieved)?;
    writeln!(out)?;
    for w in &p.summary.windows {
        if w.combos.is_empty() {
            continue;
        }
        let words = p.query.words[w.window.start..w.window.start + w.window.len].join(" ");
        writeln!(out, "[{words}]  ({} transactions)", w.transactions)?;
        for c in &w.combos {
            let labels: Vec<String> = c.labels.iter().map(label_text).collect();
            writeln!(out, "  {:>5.1}%  {}", c.ratio * 100.0, labels.join(" | "))?;
        }
    }
    writeln!(out)?;
    writeln!(
        out,
        "{:>4} {:>7} {:>7}  example",
        "rank", "hamming", "cosine"
    )?;
    for e in &p.examples {
        let labels: Vec<String> = e.labels.iter().map(projected_text).collect();
        writeln!(
            out,
            "{:>4} {:>7} {:>7.3}  {}",
            e.rank, e.hamming, e.cosine, e.text
        )?;
        writeln!(out, "{:>21}{}", "", labels.join(" | "))?;
    }
    Ok(())
}
