//! The recommendation pipeline: retrieve semantically related corpus
//! sentences, align them to the query, then mine and rank their techniques.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align_pos, project_labels, AlignError, AlignScoring, Projected, Tagger};
use crate::analysis::AnalyzedSentence;
use crate::corpus::{CorpusStore, TimedWord};
use crate::dsp::{
    decode_wav, word_acoustics, AnalysisConfig, DspError, SampleBuffer, WordAcoustics,
};
use crate::exec::Execution;
use crate::labeler::{
    label_sentence, LabelError, Technique, TechniqueLabel, TechniqueSequence, ThresholdConfig,
};
use crate::mining::{build_transactions, mine_frequent, MiningConfig, MiningError, NgramSummary};
use crate::ranking::{
    filter_by_techniques, rank_examples, Candidate, FilterMode, RankError, RankedExample,
};
use crate::semsearch::{
    build_index, AnnIndex, Embedder, ForestConfig, HashedTfIdfEmbedder, SearchError, SentenceVector,
};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("invalid parameter `{field}`: {message}")]
    Param {
        field: &'static str,
        message: String,
    },
    #[error("index file: {0}")]
    Format(String),
    #[error("audio `{path}`: {source}")]
    Audio {
        path: String,
        #[source]
        source: DspError,
    },
    #[error("sentence `{id}`: {source}")]
    Acoustics {
        id: String,
        #[source]
        source: DspError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

fn param(field: &'static str, message: impl Into<String>) -> RecommendError {
    RecommendError::Param {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub dim: usize,
    pub forest: ForestConfig,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            dim: HashedTfIdfEmbedder::DEFAULT_DIM,
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub format_version: u32,
    pub dim: usize,
    pub num_trees: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
    pub sentence_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedSentence {
    pub id: String,
    pub text: String,
    pub words: Vec<TimedWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acoustics: Option<Vec<WordAcoustics>>,
}

impl IndexedSentence {
    /// Labels under `cfg`; sentences without audio are none everywhere.
    pub fn labels(&self, cfg: &ThresholdConfig) -> Result<TechniqueSequence, LabelError> {
        match &self.acoustics {
            Some(a) => label_sentence(&self.id, a, cfg),
            None => Ok(TechniqueSequence {
                sentence_id: self.id.clone(),
                labels: vec![TechniqueLabel::default(); self.words.len()],
            }),
        }
    }
}

/// Everything a query needs: the fitted embedder, the forest, and per-word
/// acoustics for each corpus sentence so labels follow request thresholds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexBundle {
    pub header: IndexHeader,
    pub embedder: HashedTfIdfEmbedder,
    pub ann: AnnIndex,
    pub sentences: Vec<IndexedSentence>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
}

impl IndexBundle {
    fn from_parts(
        embedder: HashedTfIdfEmbedder,
        ann: AnnIndex,
        sentences: Vec<IndexedSentence>,
    ) -> Self {
        let header = IndexHeader {
            format_version: INDEX_FORMAT_VERSION,
            dim: ann.dim(),
            num_trees: ann.num_trees(),
            leaf_capacity: ann.leaf_capacity(),
            seed: ann.seed(),
            sentence_count: sentences.len(),
        };
        let mut b = Self {
            header,
            embedder,
            ann,
            sentences,
            by_id: HashMap::new(),
        };
        b.reindex_ids();
        b
    }

    fn reindex_ids(&mut self) {
        self.by_id = self
            .sentences
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
    }

    pub fn get(&self, id: &str) -> Option<&IndexedSentence> {
        self.by_id.get(id).map(|&i| &self.sentences[i])
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), RecommendError> {
        let json = serde_json::to_vec(self).map_err(|e| RecommendError::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RecommendError> {
        let bytes = std::fs::read(path)?;
        let mut b: IndexBundle =
            serde_json::from_slice(&bytes).map_err(|e| RecommendError::Format(e.to_string()))?;
        if b.header.format_version != INDEX_FORMAT_VERSION {
            return Err(RecommendError::Format(format!(
                "unsupported format version {}",
                b.header.format_version
            )));
        }
        if b.header.sentence_count != b.sentences.len() || b.ann.len() != b.sentences.len() {
            return Err(RecommendError::Format(
                "sentence count does not match header".into(),
            ));
        }
        b.reindex_ids();
        Ok(b)
    }
}

/// Default index location next to a corpus file.
pub fn default_index_path(corpus: &Path) -> std::path::PathBuf {
    let mut s = corpus.as_os_str().to_owned();
    s.push(".index.json");
    s.into()
}

fn load_audio(path: &str) -> Result<SampleBuffer, RecommendError> {
    let bytes = std::fs::read(path).map_err(|e| RecommendError::Audio {
        path: path.to_string(),
        source: DspError::Format(e.to_string()),
    })?;
    decode_wav(&bytes).map_err(|source| RecommendError::Audio {
        path: path.to_string(),
        source,
    })
}

/// Embeds every corpus sentence, builds the forest, and measures per-word
/// acoustics for sentences with audio.
pub fn build_bundle(
    store: &CorpusStore,
    cfg: &IndexConfig,
    analysis: &AnalysisConfig,
) -> Result<IndexBundle, RecommendError> {
    let exec = cfg.forest.execution;
    let records = store.records();
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let embedder = HashedTfIdfEmbedder::fit(cfg.dim, &texts)?;
    let vectors = exec.try_map(records, |r| {
        Ok::<_, SearchError>(SentenceVector {
            id: r.id.clone(),
            vec: embedder.embed(&r.text)?,
        })
    })?;
    let ann = build_index(&vectors, cfg.dim, &cfg.forest)?;

    let paths: Vec<String> = records
        .iter()
        .filter_map(|r| r.audio_ref.as_ref().map(|a| a.path.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let buffers = exec.try_map(&paths, |p| load_audio(p))?;
    let audio: HashMap<&str, &SampleBuffer> = paths
        .iter()
        .map(String::as_str)
        .zip(buffers.iter())
        .collect();
    let inner = AnalysisConfig {
        execution: Execution::Sequential,
        ..analysis.clone()
    };
    let sentences = exec.try_map(records, |r| {
        let acoustics = match &r.audio_ref {
            Some(a) => {
                let buf = audio[a.path.as_str()];
                if buf.sample_rate != a.sample_rate {
                    return Err(RecommendError::Audio {
                        path: a.path.clone(),
                        source: DspError::Format(format!(
                            "sample rate {} differs from the corpus record's {}",
                            buf.sample_rate, a.sample_rate
                        )),
                    });
                }
                Some(word_acoustics(buf, &r.words, &inner).map_err(|source| {
                    RecommendError::Acoustics {
                        id: r.id.clone(),
                        source,
                    }
                })?)
            }
            None => None,
        };
        Ok(IndexedSentence {
            id: r.id.clone(),
            text: r.text.clone(),
            words: r.words.clone(),
            acoustics,
        })
    })?;
    Ok(IndexBundle::from_parts(embedder, ann, sentences))
}

/// Per-request tunables. Missing fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendParams {
    /// Sentences retrieved by semantic search.
    pub k: usize,
    /// Rows kept in the ranked example table.
    pub k_table: usize,
    pub min_support: f64,
    pub max_n: usize,
    pub min_window_transactions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_budget: Option<usize>,
    pub thresholds: ThresholdConfig,
    pub scoring: AlignScoring,
    pub filter: BTreeSet<Technique>,
    pub filter_mode: FilterMode,
}

impl Default for RecommendParams {
    fn default() -> Self {
        let m = MiningConfig::default();
        Self {
            k: 50,
            k_table: 20,
            min_support: m.min_support_ratio,
            max_n: m.max_n,
            min_window_transactions: m.min_window_transactions,
            search_budget: None,
            thresholds: ThresholdConfig::default(),
            scoring: AlignScoring::default(),
            filter: BTreeSet::new(),
            filter_mode: FilterMode::Any,
        }
    }
}

impl RecommendParams {
    pub fn mining(&self) -> MiningConfig {
        MiningConfig {
            min_support_ratio: self.min_support,
            max_n: self.max_n,
            min_window_transactions: self.min_window_transactions,
        }
    }

    pub fn validate(&self) -> Result<(), RecommendError> {
        if self.k == 0 {
            return Err(param("k", "must be at least 1"));
        }
        if self.k_table == 0 {
            return Err(param("k_table", "must be at least 1"));
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return Err(param(
                "min_support",
                format!("must be in (0, 1], got {}", self.min_support),
            ));
        }
        if self.max_n == 0 {
            return Err(param("max_n", "must be at least 1"));
        }
        if self.search_budget == Some(0) {
            return Err(param("search_budget", "must be positive"));
        }
        self.thresholds
            .validate()
            .map_err(|e| param("thresholds", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub id: String,
    pub text: String,
    pub words: Vec<String>,
    pub labels: Vec<TechniqueLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationPayload {
    pub query: QueryView,
    /// Sentences returned by semantic search.
    pub retrieved: usize,
    pub summary: NgramSummary,
    pub examples: Vec<RankedExample>,
    pub params: RecommendParams,
}

pub fn recommend(
    bundle: &IndexBundle,
    tagger: &Tagger,
    query: &AnalyzedSentence,
    params: &RecommendParams,
    exec: Execution,
) -> Result<RecommendationPayload, RecommendError> {
    params.validate()?;
    let mining = params.mining();
    let query_labels = query.labels_with(&params.thresholds)?.labels;
    let n = query.words.len();

    let hits = if bundle.ann.is_empty() {
        Vec::new()
    } else {
        let q = bundle.embedder.embed(&query.text)?;
        bundle.ann.query(&q, params.k, params.search_budget)?
    };

    let query_tags = tagger.tag(&query.words);
    let candidates = exec.try_map(&hits, |(id, cosine)| {
        let s = bundle.get(id).ok_or_else(|| {
            RecommendError::Format(format!("index refers to unknown sentence `{id}`"))
        })?;
        let cand_tags: Vec<_> = s.words.iter().map(|w| tagger.tag_token(&w.text)).collect();
        let alignment = align_pos(&query_tags, &cand_tags, params.scoring)?;
        let labels = project_labels(&alignment, &s.labels(&params.thresholds)?.labels, n)?;
        Ok::<_, RecommendError>(Candidate {
            id: s.id.clone(),
            text: s.text.clone(),
            labels,
            cosine: *cosine,
        })
    })?;

    let projections: Vec<Vec<Projected>> = candidates.iter().map(|c| c.labels.clone()).collect();
    let tx = build_transactions(&projections, n, mining.max_n)?;
    let summary = mine_frequent(&tx, &mining, exec)?;

    let query_proj: Vec<Projected> = query_labels
        .iter()
        .map(|&l| Projected::Aligned(l))
        .collect();
    let mut examples = filter_by_techniques(
        rank_examples(&query_proj, candidates)?,
        &params.filter,
        params.filter_mode,
    );
    examples.truncate(params.k_table);

    Ok(RecommendationPayload {
        query: QueryView {
            id: query.id.clone(),
            text: query.text.clone(),
            words: query.words.clone(),
            labels: query_labels,
        },
        retrieved: hits.len(),
        summary,
        examples,
        params: params.clone(),
    })
}
