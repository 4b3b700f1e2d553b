//! HTTP API over the corpus, analysis, recommendation and practice stream.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/analyze` | multipart `audio` + `transcript`, or `text`; also JSON `{"text"}` |
//! | POST | `/recommend` | `{sentence_id, ...overrides}` |
//! | GET | `/examples/{id}/audio?word_start=&word_end=` | WAV slice |
//! | POST | `/corpus/ingest` | transcript JSON |
//! | POST | `/corpus/reindex` | rebuild and swap the index |
//! | GET | `/corpus/stats` | |
//! | GET | `/practice` | upgrade to the framed practice protocol |

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::{
    DefaultBodyLimit, FromRequest, Multipart, Path as UrlPath, Query, Request, State,
};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cadence_core::align::Tagger;
use cadence_core::analysis::{analyze_audio, analyze_text, AnalysisError, AnalyzedSentence};
use cadence_core::corpus::{CorpusError, CorpusStore, SentenceRecord, TranscriptFile};
use cadence_core::dsp::{decode_wav, encode_wav, SampleBuffer};
use cadence_core::feedback::SessionManager;
use cadence_core::labeler::ThresholdConfig;
use cadence_core::recommend::{recommend, IndexBundle, RecommendError};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::api::ApiError;
use crate::config::{overlay, Config};
use crate::workflow::{self, WorkflowError};

/// Value of the `Upgrade` header that switches `/practice` to the framed protocol.
pub const PRACTICE_PROTOCOL: &str = "cadence-practice";

/// A corpus snapshot with an id lookup. Replaced wholesale on ingest.
#[derive(Debug, Default)]
pub struct CorpusSnapshot {
    store: CorpusStore,
    by_id: HashMap<String, usize>,
}

impl CorpusSnapshot {
    pub fn new(store: CorpusStore) -> Self {
        let by_id = store
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Self { store, by_id }
    }

    pub fn store(&self) -> &CorpusStore {
        &self.store
    }

    pub fn get(&self, id: &str) -> Option<&SentenceRecord> {
        self.by_id.get(id).map(|&i| &self.store.records()[i])
    }
}

#[derive(Debug)]
struct AnalysisStore {
    ttl: Duration,
    entries: HashMap<String, (Instant, Arc<AnalyzedSentence>)>,
}

impl AnalysisStore {
    fn insert(&mut self, s: AnalyzedSentence) {
        let now = Instant::now();
        let ttl = self.ttl;
        self.entries
            .retain(|_, (t, _)| now.duration_since(*t) < ttl);
        self.entries.insert(s.id.clone(), (now, Arc::new(s)));
    }

    fn get(&mut self, id: &str) -> Option<Arc<AnalyzedSentence>> {
        let (t, s) = self.entries.get(id)?;
        if t.elapsed() >= self.ttl {
            self.entries.remove(id);
            return None;
        }
        Some(s.clone())
    }
}

#[derive(Debug)]
pub struct AppState {
    config: Config,
    corpus: RwLock<Arc<CorpusSnapshot>>,
    index: RwLock<Option<Arc<IndexBundle>>>,
    analyses: Mutex<AnalysisStore>,
    reindexing: AtomicBool,
    writes: tokio::sync::Mutex<()>,
    sessions: SessionManager,
    tagger: Tagger,
}

/// Held while a reindex runs; dropping it lets the next one start.
#[derive(Debug)]
pub struct ReindexGuard(Arc<AppState>);

impl Drop for ReindexGuard {
    fn drop(&mut self) {
        self.0.reindexing.store(false, Ordering::Release);
    }
}

impl AppState {
    pub fn new(config: Config, store: CorpusStore, index: Option<IndexBundle>) -> Arc<Self> {
        let ttl = Duration::from_secs(config.analysis_ttl_secs);
        Arc::new(Self {
            config,
            corpus: RwLock::new(Arc::new(CorpusSnapshot::new(store))),
            index: RwLock::new(index.map(Arc::new)),
            analyses: Mutex::new(AnalysisStore {
                ttl,
                entries: HashMap::new(),
            }),
            reindexing: AtomicBool::new(false),
            writes: tokio::sync::Mutex::new(()),
            sessions: SessionManager::new(),
            tagger: Tagger::default(),
        })
    }

    /// Loads the configured corpus and index if their files exist.
    pub fn load(config: Config) -> Result<Arc<Self>, WorkflowError> {
        let store = match &config.corpus {
            Some(p) if p.exists() => workflow::load_corpus(p)?,
            _ => CorpusStore::new(),
        };
        let index = match config.index_path() {
            Some(p) if p.exists() => Some(IndexBundle::load(&p)?),
            _ => None,
        };
        Ok(Self::new(config, store, index))
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn corpus(&self) -> Arc<CorpusSnapshot> {
        self.corpus.read().expect("corpus lock").clone()
    }

    pub fn index(&self) -> Option<Arc<IndexBundle>> {
        self.index.read().expect("index lock").clone()
    }

    pub fn sessions(&self) -> &SessionManager {
        &self.sessions
    }

    pub fn tagger(&self) -> &Tagger {
        &self.tagger
    }

    pub fn try_begin_reindex(self: &Arc<Self>) -> Option<ReindexGuard> {
        self.reindexing
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| ReindexGuard(self.clone()))
    }

    pub fn remember(&self, sentences: &[AnalyzedSentence]) {
        let mut store = self.analyses.lock().expect("analysis lock");
        for s in sentences {
            store.insert(s.clone());
        }
    }

    pub fn analysis(&self, id: &str) -> Option<Arc<AnalyzedSentence>> {
        self.analyses.lock().expect("analysis lock").get(id)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/analyze", post(analyze))
        .route("/recommend", post(recommend_handler))
        .route("/examples/{id}/audio", get(example_audio))
        .route("/corpus/ingest", post(ingest))
        .route("/corpus/reindex", post(reindex))
        .route("/corpus/stats", get(stats))
        .route("/practice", get(practice))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&state.config.bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (
        status,
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        bytes,
    )
        .into_response()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn analysis_error(e: AnalysisError) -> ApiError {
    match e {
        AnalysisError::Empty => ApiError::invalid("transcript", e.to_string()),
        AnalysisError::Corpus(_) => ApiError::invalid("transcript", e.to_string()),
        AnalysisError::Dsp(cadence_core::dsp::DspError::TimingOutOfRange { .. }) => {
            ApiError::invalid("transcript", e.to_string())
        }
        AnalysisError::Dsp(_) => ApiError::invalid("audio", e.to_string()),
        AnalysisError::Label(_) => ApiError::invalid("thresholds", e.to_string()),
    }
}

#[derive(Default)]
struct AnalyzeInput {
    audio: Option<Bytes>,
    transcript: Option<String>,
    text: Option<String>,
    thresholds: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyzeJson {
    text: String,
    #[serde(default)]
    thresholds: Option<Value>,
}

async fn read_multipart(mut mp: Multipart) -> Result<AnalyzeInput, ApiError> {
    let mut input = AnalyzeInput::default();
    let field_err = |e: axum::extract::multipart::MultipartError| {
        ApiError::from_status(e.status(), e.body_text())
    };
    while let Some(field) = mp.next_field().await.map_err(field_err)? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "audio" => input.audio = Some(field.bytes().await.map_err(field_err)?),
            "transcript" => input.transcript = Some(field.text().await.map_err(field_err)?),
            "text" => input.text = Some(field.text().await.map_err(field_err)?),
            "thresholds" => {
                let t = field.text().await.map_err(field_err)?;
                input.thresholds = Some(
                    serde_json::from_str(&t)
                        .map_err(|e| ApiError::invalid("thresholds", e.to_string()))?,
                );
            }
            other => {
                return Err(ApiError::invalid(
                    other,
                    format!("unexpected multipart field `{other}`"),
                ))
            }
        }
    }
    Ok(input)
}

async fn analyze(State(st): State<Arc<AppState>>, req: Request) -> Result<Response, ApiError> {
    let ct = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_ascii_lowercase();
    let input = if ct.starts_with("multipart/form-data") {
        let mp = Multipart::from_request(req, &st)
            .await
            .map_err(|e| ApiError::from_status(e.status(), e.body_text()))?;
        read_multipart(mp).await?
    } else if ct.starts_with("application/json") {
        let Json(body) = Json::<AnalyzeJson>::from_request(req, &st)
            .await
            .map_err(|e| ApiError::from_status(e.status(), e.body_text()))?;
        AnalyzeInput {
            text: Some(body.text),
            thresholds: body.thresholds,
            ..Default::default()
        }
    } else {
        return Err(ApiError::from_status(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "send multipart/form-data or application/json",
        ));
    };

    let thresholds: ThresholdConfig = match input.thresholds {
        Some(v) => overlay(&st.config.thresholds, v)
            .map_err(|e| ApiError::invalid("thresholds", e.to_string()))?,
        None => st.config.thresholds.clone(),
    };
    let sentences = match (input.audio, input.text) {
        (Some(audio), _) => {
            let transcript = input.transcript.ok_or_else(|| {
                ApiError::invalid("transcript", "audio needs a transcript with word timings")
            })?;
            let words = workflow::parse_timings(&transcript)
                .map_err(|e| ApiError::invalid("transcript", format!("malformed timings: {e}")))?;
            let analysis = st.config.analysis.clone();
            blocking(move || analyze_audio(&audio, &words, &analysis, &thresholds))
                .await?
                .map_err(analysis_error)?
        }
        (None, Some(text)) => {
            analyze_text(&text).map_err(|e| ApiError::invalid("text", e.to_string()))?
        }
        (None, None) => {
            return Err(ApiError::bad_request(
                "provide `audio` with `transcript`, or `text`",
            ))
        }
    };
    st.remember(&sentences);
    Ok(json_bytes(
        StatusCode::OK,
        workflow::analyze_json(&sentences),
    ))
}

fn recommend_error(e: RecommendError) -> ApiError {
    match e {
        RecommendError::Param { field, message } => ApiError::invalid(field, message),
        other => ApiError::internal(other.to_string()),
    }
}

async fn recommend_handler(
    State(st): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let mut body: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?;
    let obj = body
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("request body must be a JSON object"))?;
    let id = match obj.remove("sentence_id") {
        Some(Value::String(s)) => s,
        _ => return Err(ApiError::invalid("sentence_id", "missing sentence_id")),
    };
    let query = st.analysis(&id).ok_or_else(|| {
        ApiError::not_found("unknown_sentence", format!("no analyzed sentence `{id}`"))
    })?;
    let params = overlay(&st.config.recommend_params(), body)
        .map_err(|e| ApiError::bad_request(format!("invalid parameters: {e}")))?;
    params.validate().map_err(recommend_error)?;
    let index = st.index().ok_or_else(|| {
        ApiError::conflict(
            "index_not_built",
            "no index loaded; POST /corpus/reindex first",
        )
    })?;
    let exec = st.config.execution();
    let state = st.clone();
    let payload = blocking(move || recommend(&index, state.tagger(), &query, &params, exec))
        .await?
        .map_err(recommend_error)?;
    let bytes = serde_json::to_vec(&payload).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(json_bytes(StatusCode::OK, bytes))
}

/// Sample range for words `first..=last`, padded by 100 ms on each side and
/// clamped to the sentence's own audio span.
pub fn word_slice(rec: &SentenceRecord, first: usize, last: usize) -> Option<(u64, u64)> {
    let a = rec.audio_ref.as_ref()?;
    let rate = a.sample_rate as f64;
    let pad = 0.1;
    let from = ((rec.words[first].start - pad) * rate).round().max(0.0) as u64;
    let to = ((rec.words[last].end + pad) * rate).round().max(0.0) as u64;
    Some((
        from.clamp(a.start_sample, a.end_sample),
        to.clamp(a.start_sample, a.end_sample),
    ))
}

async fn example_audio(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let corpus = st.corpus();
    let rec = corpus
        .get(&id)
        .ok_or_else(|| {
            ApiError::not_found("unknown_sentence", format!("no corpus sentence `{id}`"))
        })?
        .clone();
    let audio = rec
        .audio_ref
        .clone()
        .ok_or_else(|| ApiError::not_found("no_audio", format!("sentence `{id}` has no audio")))?;
    let range_err =
        |m: String| ApiError::new(StatusCode::RANGE_NOT_SATISFIABLE, "bad_word_range", m);
    let parse = |key: &str, default: usize| -> Result<usize, ApiError> {
        q.get(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| range_err(format!("{key} must be a word index, got `{v}`")))
        })
    };
    let last = rec.words.len() - 1;
    let first_w = parse("word_start", 0)?;
    let last_w = parse("word_end", last)?;
    if first_w > last_w || last_w > last {
        return Err(range_err(format!(
            "word range {first_w}..={last_w} is not within 0..={last}"
        )));
    }
    let (from, to) = word_slice(&rec, first_w, last_w).expect("audio present");
    let path = audio.path.clone();
    let wav = blocking(move || -> Result<Vec<u8>, String> {
        let bytes = std::fs::read(&path).map_err(|e| format!("{path}: {e}"))?;
        let buf = decode_wav(&bytes).map_err(|e| format!("{path}: {e}"))?;
        let end = (to as usize).min(buf.samples.len());
        let start = (from as usize).min(end);
        let slice = SampleBuffer::new(buf.samples[start..end].to_vec(), buf.sample_rate)
            .map_err(|e| e.to_string())?;
        Ok(encode_wav(&slice))
    })
    .await?
    .map_err(|m| ApiError::not_found("no_audio", m))?;
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"))],
        wav,
    )
        .into_response())
}

fn check_admin(st: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let Some(token) = &st.config.admin_token else {
        return Ok(());
    };
    let given = headers
        .get("x-admin-token")
        .and_then(|v| v.to_str().ok())
        .or_else(|| {
            headers
                .get(header::AUTHORIZATION)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.strip_prefix("Bearer "))
        });
    if given == Some(token.as_str()) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "admin token required",
        ))
    }
}

fn base_dir(cfg: &Config) -> PathBuf {
    cfg.corpus
        .as_deref()
        .and_then(Path::parent)
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn workflow_error(e: WorkflowError) -> ApiError {
    match e {
        WorkflowError::Corpus(CorpusError::DuplicateTalk(t)) => {
            ApiError::conflict("duplicate_talk", format!("talk `{t}` already ingested"))
        }
        WorkflowError::Corpus(e @ CorpusError::InvalidTiming { .. }) => {
            ApiError::invalid("words", e.to_string())
        }
        e @ (WorkflowError::Audio { .. } | WorkflowError::Io { .. }) => {
            ApiError::invalid("audio", e.to_string())
        }
        WorkflowError::Input(m) => ApiError::bad_request(m),
        other => ApiError::internal(other.to_string()),
    }
}

async fn ingest(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    check_admin(&st, &headers)?;
    let t: TranscriptFile = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid transcript: {e}")))?;
    let talk_id = t
        .talk_id
        .clone()
        .ok_or_else(|| ApiError::invalid("talk_id", "talk_id is required"))?;
    let _write = st.writes.lock().await;
    let state = st.clone();
    let (store, added) = blocking(move || -> Result<(CorpusStore, usize), WorkflowError> {
        let mut store = state.corpus().store().clone();
        let added = workflow::ingest_transcript(&mut store, &t, &base_dir(&state.config), None)?;
        if let Some(p) = &state.config.corpus {
            store.save(p)?;
        }
        Ok((store, added))
    })
    .await?
    .map_err(workflow_error)?;
    let stats = store.stats();
    *st.corpus.write().expect("corpus lock") = Arc::new(CorpusSnapshot::new(store));
    Ok(
        Json(json!({"status": "ingested", "talk_id": talk_id, "sentences": added, "stats": stats}))
            .into_response(),
    )
}

async fn reindex(
    State(st): State<Arc<AppState>>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    check_admin(&st, &headers)?;
    let guard = st
        .try_begin_reindex()
        .ok_or_else(|| ApiError::conflict("reindex_running", "a reindex is already running"))?;
    let snapshot = st.corpus();
    let state = st.clone();
    let bundle = blocking(move || -> Result<IndexBundle, WorkflowError> {
        let _guard = guard;
        let bundle = workflow::reindex(snapshot.store(), &state.config)?;
        if let Some(p) = state.config.index_path() {
            bundle.save(&p)?;
        }
        Ok(bundle)
    })
    .await?
    .map_err(workflow_error)?;
    let header = bundle.header.clone();
    *st.index.write().expect("index lock") = Some(Arc::new(bundle));
    Ok(
        Json(json!({"status": "done", "sentence_count": header.sentence_count, "header": header}))
            .into_response(),
    )
}

async fn stats(State(st): State<Arc<AppState>>) -> Json<cadence_core::corpus::CorpusStats> {
    Json(st.corpus().store().stats())
}

async fn practice(State(st): State<Arc<AppState>>, mut req: Request) -> Response {
    let wants = req
        .headers()
        .get(header::UPGRADE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.eq_ignore_ascii_case(PRACTICE_PROTOCOL));
    if !wants {
        return ApiError::new(
            StatusCode::UPGRADE_REQUIRED,
            "upgrade_required",
            format!("send `Connection: upgrade` and `Upgrade: {PRACTICE_PROTOCOL}`"),
        )
        .into_response();
    }
    let on_upgrade = hyper::upgrade::on(&mut req);
    tokio::spawn(async move {
        if let Ok(upgraded) = on_upgrade.await {
            crate::stream::serve_practice(hyper_util::rt::TokioIo::new(upgraded), st).await;
        }
    });
    Response::builder()
        .status(StatusCode::SWITCHING_PROTOCOLS)
        .header(header::CONNECTION, "upgrade")
        .header(header::UPGRADE, PRACTICE_PROTOCOL)
        .body(Body::empty())
        .expect("static response")
}
