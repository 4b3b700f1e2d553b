//! Operations shared by the CLI and the service, so both produce the same
//! bytes for the same inputs.

use std::path::{Path, PathBuf};

use cadence_core::analysis::{analyze_text, AnalysisError, AnalyzedSentence};
use cadence_core::corpus::{AudioSource, CorpusError, CorpusStore, TimedWord, TranscriptFile};
use cadence_core::dsp::{decode_wav, DspError};
use cadence_core::recommend::{build_bundle, IndexBundle, RecommendError};
use thiserror::Error;

use crate::config::Config;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Audio {
        path: PathBuf,
        #[source]
        source: DspError,
    },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> WorkflowError + '_ {
    move |source| WorkflowError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a transcript JSON file, naming the file and line on failure.
pub fn read_transcript(path: &Path) -> Result<TranscriptFile, WorkflowError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| {
        CorpusError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        }
        .into()
    })
}

/// Resolves a transcript's audio reference against `base` and reads the
/// sample rate from the file.
pub fn audio_source(audio: &str, base: &Path) -> Result<AudioSource, WorkflowError> {
    let path = base.join(audio);
    let path = path.canonicalize().map_err(io(&path))?;
    let bytes = std::fs::read(&path).map_err(io(&path))?;
    let buf = decode_wav(&bytes).map_err(|source| WorkflowError::Audio {
        path: path.clone(),
        source,
    })?;
    Ok(AudioSource {
        path: path.to_string_lossy().into_owned(),
        sample_rate: buf.sample_rate,
    })
}

/// Adds one talk. `base` resolves a relative audio path; the talk id
/// defaults to `fallback_id`.
pub fn ingest_transcript(
    store: &mut CorpusStore,
    t: &TranscriptFile,
    base: &Path,
    fallback_id: Option<&str>,
) -> Result<usize, WorkflowError> {
    let talk_id = t
        .talk_id
        .as_deref()
        .or(fallback_id)
        .ok_or_else(|| WorkflowError::Input("transcript has no talk_id".into()))?;
    if store.contains_talk(talk_id) {
        return Err(CorpusError::DuplicateTalk(talk_id.to_string()).into());
    }
    let audio = t
        .audio
        .as_deref()
        .map(|a| audio_source(a, base))
        .transpose()?;
    Ok(store.ingest_talk(talk_id, &t.words, audio.as_ref())?.len())
}

/// Builds a corpus from every `*.json` transcript in `dir`, in file-name
/// order. Talk ids default to the file stem.
pub fn build_corpus(dir: &Path) -> Result<CorpusStore, WorkflowError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io(dir)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut store = CorpusStore::new();
    for f in files {
        let t = read_transcript(&f)?;
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned());
        ingest_transcript(&mut store, &t, dir, stem.as_deref())?;
    }
    Ok(store)
}

pub fn load_corpus(path: &Path) -> Result<CorpusStore, WorkflowError> {
    if !path.exists() {
        return Err(WorkflowError::Input(format!(
            "corpus file {} does not exist",
            path.display()
        )));
    }
    Ok(CorpusStore::load(path)?)
}

pub fn reindex(store: &CorpusStore, cfg: &Config) -> Result<IndexBundle, WorkflowError> {
    Ok(build_bundle(store, &cfg.search, &cfg.analysis)?)
}

/// Reads a timings file: either a bare array of words or an object with a
/// `words` array.
pub fn read_timings(path: &Path) -> Result<Vec<TimedWord>, WorkflowError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    parse_timings(&text).map_err(|e| {
        CorpusError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        }
        .into()
    })
}

pub fn parse_timings(text: &str) -> Result<Vec<TimedWord>, serde_json::Error> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Timings {
        Bare(Vec<TimedWord>),
        Wrapped { words: Vec<TimedWord> },
    }
    Ok(match serde_json::from_str(text)? {
        Timings::Bare(w) | Timings::Wrapped { words: w } => w,
    })
}

/// The query sentence for a text recommendation: the first sentence of the
/// text.
pub fn text_query(text: &str) -> Result<AnalyzedSentence, WorkflowError> {
    Ok(analyze_text(text)?.remove(0))
}

#[derive(serde::Serialize)]
pub struct AnalyzeResponse<'a> {
    pub sentences: &'a [AnalyzedSentence],
}

pub fn analyze_json(sentences: &[AnalyzedSentence]) -> Vec<u8> {
    serde_json::to_vec(&AnalyzeResponse { sentences }).expect("analysis serializes")
}
