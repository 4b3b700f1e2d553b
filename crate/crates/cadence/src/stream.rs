//! Framed practice protocol, spoken over an upgraded `/practice` connection.
//!
//! Each frame is a 4-byte big-endian length, then a type byte, then the
//! payload. The length counts the type byte and payload.
//!
//! * `0x01` JSON message, tagged by `"type"`.
//! * `0x02` mono PCM16LE audio at the session's sample rate.
//!
//! The client sends `start` once, then audio frames and `finish` for each
//! attempt, optionally `baseline`, and finally `close`. The server answers
//! with `started`, `frames` (live volume/pitch per hop), `result`,
//! `baseline`, `error` for recoverable problems, and `close` before it hangs
//! up.

use std::sync::Arc;

use cadence_core::corpus::TimedWord;
use cadence_core::dsp::{decode_wav, pcm16le_to_samples, LiveFrame, StreamAnalyzer};
use cadence_core::feedback::{
    Baseline, FeedbackError, PracticeResult, PracticeTarget, SharedSession,
};
use cadence_core::labeler::ThresholdConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::config::overlay;
use crate::service::AppState;

pub const FRAME_JSON: u8 = 0x01;
pub const FRAME_PCM: u8 = 0x02;
pub const MAX_FRAME: u32 = 16 * 1024 * 1024;

pub const CLOSE_NORMAL: u16 = 4000;
pub const CLOSE_MALFORMED: u16 = 4001;
pub const CLOSE_ORDER: u16 = 4002;
pub const CLOSE_INVALID_START: u16 = 4003;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Start {
        target: PracticeTarget,
        sample_rate: u32,
        /// Partial overrides on the server's thresholds.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thresholds: Option<Value>,
        /// Frames to show before the first attempt. Computed from the corpus
        /// audio of `target.sentence_id` when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<Vec<LiveFrame>>,
    },
    Finish {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timings: Option<Vec<TimedWord>>,
    },
    Baseline,
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Started {
        session_id: String,
        sample_rate: u32,
        /// Seconds between live frames.
        hop: f64,
    },
    Frames {
        frames: Vec<LiveFrame>,
    },
    Result {
        result: PracticeResult,
    },
    Baseline {
        baseline: Baseline,
    },
    Error {
        code: String,
        message: String,
    },
    Close {
        code: u16,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    Json(Vec<u8>),
    Pcm(Vec<u8>),
    Other(u8, Vec<u8>),
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("frame length {0} is outside 1..={MAX_FRAME}")]
    Length(u32),
}

pub fn encode_frame(kind: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.extend_from_slice(&(payload.len() as u32 + 1).to_be_bytes());
    out.push(kind);
    out.extend_from_slice(payload);
    out
}

pub fn encode_json<T: Serialize>(msg: &T) -> Vec<u8> {
    encode_frame(
        FRAME_JSON,
        &serde_json::to_vec(msg).expect("message serializes"),
    )
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<Frame>, FrameError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len);
    if len == 0 || len > MAX_FRAME {
        return Err(FrameError::Length(len));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).await?;
    let payload = buf.split_off(1);
    Ok(Some(match buf[0] {
        FRAME_JSON => Frame::Json(payload),
        FRAME_PCM => Frame::Pcm(payload),
        k => Frame::Other(k, payload),
    }))
}

fn feedback_code(e: &FeedbackError) -> &'static str {
    match e {
        FeedbackError::Target(_) => "invalid_target",
        FeedbackError::Closed => "session_closed",
        FeedbackError::NoAudio => "no_audio",
        FeedbackError::UnknownSession(_) => "unknown_session",
        FeedbackError::SampleRate { .. } => "sample_rate",
        FeedbackError::Timings(_) | FeedbackError::Corpus(_) => "invalid_timings",
        FeedbackError::Dsp(_) => "audio",
        FeedbackError::Label(_) => "invalid_thresholds",
    }
}

/// Live frames over a corpus sentence's recording.
fn reference_frames(st: &AppState, sentence_id: &str) -> Option<Vec<LiveFrame>> {
    let corpus = st.corpus();
    let rec = corpus.get(sentence_id)?;
    let a = rec.audio_ref.as_ref()?;
    let bytes = std::fs::read(&a.path).ok()?;
    let buf = decode_wav(&bytes).ok()?;
    let end = (a.end_sample as usize).min(buf.samples.len());
    let start = (a.start_sample as usize).min(end);
    let mut analyzer = StreamAnalyzer::new(&st.config().analysis, buf.sample_rate).ok()?;
    Some(analyzer.push(&buf.samples[start..end]))
}

struct Conn<W> {
    out: W,
}

impl<W: AsyncWrite + Unpin> Conn<W> {
    async fn send(&mut self, msg: &ServerMessage) -> std::io::Result<()> {
        self.out.write_all(&encode_json(msg)).await?;
        self.out.flush().await
    }

    async fn error(&mut self, code: &str, message: impl Into<String>) -> std::io::Result<()> {
        self.send(&ServerMessage::Error {
            code: code.into(),
            message: message.into(),
        })
        .await
    }

    async fn close(&mut self, code: u16, reason: impl Into<String>) -> std::io::Result<()> {
        self.send(&ServerMessage::Close {
            code,
            reason: reason.into(),
        })
        .await?;
        self.out.shutdown().await
    }
}

enum Step {
    Continue,
    Close(u16, String),
}

/// Runs one practice connection to completion. The session is removed from
/// the registry when the connection ends, however it ends.
pub async fn serve_practice<S>(io: S, st: Arc<AppState>)
where
    S: AsyncRead + AsyncWrite + Unpin + Send,
{
    let (mut rd, wr) = tokio::io::split(io);
    let mut conn = Conn { out: wr };
    let mut session: Option<(String, SharedSession)> = None;
    let outcome = loop {
        let frame = match read_frame(&mut rd).await {
            Ok(Some(f)) => f,
            Ok(None) => break None,
            Err(FrameError::Io(_)) => break None,
            Err(e) => break Some((CLOSE_MALFORMED, e.to_string())),
        };
        let step = handle_frame(frame, &st, &mut session, &mut conn).await;
        match step {
            Ok(Step::Continue) => {}
            Ok(Step::Close(code, reason)) => break Some((code, reason)),
            Err(_) => break None,
        }
    };
    if let Some((id, _)) = session.take() {
        let _ = st.sessions().end_session(&id);
    }
    if let Some((code, reason)) = outcome {
        let _ = conn.close(code, reason).await;
    }
}

async fn handle_frame<W: AsyncWrite + Unpin>(
    frame: Frame,
    st: &Arc<AppState>,
    session: &mut Option<(String, SharedSession)>,
    conn: &mut Conn<W>,
) -> std::io::Result<Step> {
    let msg = match frame {
        Frame::Other(k, _) => {
            return Ok(Step::Close(
                CLOSE_MALFORMED,
                format!("unknown frame type 0x{k:02x}"),
            ))
        }
        Frame::Pcm(bytes) => {
            let Some((_, shared)) = session else {
                return Ok(Step::Close(CLOSE_ORDER, "audio before start".into()));
            };
            let samples = match pcm16le_to_samples(&bytes) {
                Ok(s) => s,
                Err(e) => return Ok(Step::Close(CLOSE_MALFORMED, e.to_string())),
            };
            let pushed = shared.lock().expect("session lock").push_audio(&samples);
            match pushed {
                Ok(frames) if frames.is_empty() => {}
                Ok(frames) => conn.send(&ServerMessage::Frames { frames }).await?,
                Err(e) => conn.error(feedback_code(&e), e.to_string()).await?,
            }
            return Ok(Step::Continue);
        }
        Frame::Json(bytes) => match serde_json::from_slice::<ClientMessage>(&bytes) {
            Ok(m) => m,
            Err(e) => {
                return Ok(Step::Close(
                    CLOSE_MALFORMED,
                    format!("malformed message: {e}"),
                ))
            }
        },
    };
    match msg {
        ClientMessage::Start {
            target,
            sample_rate,
            thresholds,
            reference,
        } => {
            if session.is_some() {
                return Ok(Step::Close(CLOSE_ORDER, "session already started".into()));
            }
            let thresholds: ThresholdConfig = match thresholds {
                Some(v) => match overlay(&st.config().thresholds, v) {
                    Ok(t) => t,
                    Err(e) => {
                        return Ok(Step::Close(CLOSE_INVALID_START, format!("thresholds: {e}")))
                    }
                },
                None => st.config().thresholds.clone(),
            };
            let reference = match (reference, &target.sentence_id) {
                (Some(r), _) => Some(r),
                (None, Some(id)) => {
                    let (st2, id) = (st.clone(), id.clone());
                    tokio::task::spawn_blocking(move || reference_frames(&st2, &id))
                        .await
                        .ok()
                        .flatten()
                }
                (None, None) => None,
            };
            let started = st.sessions().start_session(
                target,
                thresholds,
                st.config().analysis.clone(),
                sample_rate,
                reference,
            );
            match started {
                Ok((id, shared)) => {
                    let hop = st.config().analysis.rms_hop_ms / 1000.0;
                    conn.send(&ServerMessage::Started {
                        session_id: id.clone(),
                        sample_rate,
                        hop,
                    })
                    .await?;
                    *session = Some((id, shared));
                }
                Err(e) => return Ok(Step::Close(CLOSE_INVALID_START, e.to_string())),
            }
        }
        ClientMessage::Finish { timings } => {
            let Some((_, shared)) = session else {
                return Ok(Step::Close(CLOSE_ORDER, "finish before start".into()));
            };
            let shared = shared.clone();
            let result = tokio::task::spawn_blocking(move || {
                shared
                    .lock()
                    .expect("session lock")
                    .finish_attempt(timings.as_deref())
            })
            .await
            .expect("attempt worker");
            match result {
                Ok(result) => conn.send(&ServerMessage::Result { result }).await?,
                Err(e) => conn.error(feedback_code(&e), e.to_string()).await?,
            }
        }
        ClientMessage::Baseline => {
            let Some((_, shared)) = session else {
                return Ok(Step::Close(CLOSE_ORDER, "baseline before start".into()));
            };
            let baseline = shared.lock().expect("session lock").baseline();
            conn.send(&ServerMessage::Baseline { baseline }).await?;
        }
        ClientMessage::Close => return Ok(Step::Close(CLOSE_NORMAL, "closed by client".into())),
    }
    Ok(Step::Continue)
}
