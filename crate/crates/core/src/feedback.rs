//! Practice sessions: live pitch/volume frames while an attempt is being
//! recorded, then per-focus-word technique checks once it is finished.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{validate_words, CorpusError, TimedWord};
use crate::dsp::{
    word_acoustics, AnalysisConfig, DspError, LiveFrame, SampleBuffer, StreamAnalyzer,
};
use crate::labeler::{
    label_sentence, Channel, LabelError, Pause, Speed, Stress, Technique, TechniqueLabel,
    TechniqueSequence, ThresholdConfig, Volume,
};

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("invalid practice target: {0}")]
    Target(String),
    #[error("session is closed")]
    Closed,
    #[error("no audio recorded for this attempt")]
    NoAudio,
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("sample rate {got} does not match the session's {expected}")]
    SampleRate { expected: u32, got: u32 },
    #[error("word timings: {0}")]
    Timings(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Desired values at one focus word. Channels left `None` are not checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocusTarget {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<Speed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<Volume>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress: Option<Stress>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pause_after: Option<Pause>,
}

impl FocusTarget {
    /// Targets exactly the channels the given techniques touch.
    pub fn with_techniques(index: usize, ts: &[Technique]) -> Self {
        let l = TechniqueLabel::from_techniques(ts);
        let mut f = FocusTarget {
            index,
            ..Default::default()
        };
        for t in ts {
            match t.channel() {
                Channel::Speed => f.speed = Some(l.speed),
                Channel::Volume => f.volume = Some(l.volume),
                Channel::Stress => f.stress = Some(l.stress),
                Channel::Pause => f.pause_after = Some(l.pause_after),
            }
        }
        f
    }

    /// Every channel pinned to `label`, including its `none` values.
    pub fn full(index: usize, label: TechniqueLabel) -> Self {
        FocusTarget {
            index,
            speed: Some(label.speed),
            volume: Some(label.volume),
            stress: Some(label.stress),
            pause_after: Some(label.pause_after),
        }
    }

    pub fn mismatches(&self, achieved: &TechniqueLabel) -> Vec<Channel> {
        let mut out = Vec::new();
        if self.speed.is_some_and(|v| v != achieved.speed) {
            out.push(Channel::Speed);
        }
        if self.volume.is_some_and(|v| v != achieved.volume) {
            out.push(Channel::Volume);
        }
        if self.stress.is_some_and(|v| v != achieved.stress) {
            out.push(Channel::Stress);
        }
        if self.pause_after.is_some_and(|v| v != achieved.pause_after) {
            out.push(Channel::Pause);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PracticeTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_id: Option<String>,
    pub words: Vec<String>,
    #[serde(default)]
    pub focus: Vec<FocusTarget>,
}

impl PracticeTarget {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        if self.words.is_empty() {
            return Err(FeedbackError::Target("script has no words".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.focus {
            if f.index >= self.words.len() {
                return Err(FeedbackError::Target(format!(
                    "focus index {} outside a {}-word script",
                    f.index,
                    self.words.len()
                )));
            }
            if !seen.insert(f.index) {
                return Err(FeedbackError::Target(format!(
                    "focus index {} repeated",
                    f.index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordMismatch {
    pub index: usize,
    pub word: String,
    pub channels: Vec<Channel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PracticeResult {
    /// 1 for the first finished attempt.
    pub attempt_index: usize,
    pub word_timings: Vec<TimedWord>,
    /// True when timings came from the uniform split, not the client.
    pub uniform_timings: bool,
    pub labels: TechniqueSequence,
    /// One entry per focus word, in focus order.
    pub mismatches: Vec<WordMismatch>,
    pub mismatch_count: usize,
    /// Change in mismatch count from the previous attempt; absent on the first.
    pub delta_vs_previous: Option<i64>,
}

/// Series to overlay while recording the next attempt. Frame times are
/// relative to the start of the attempt they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Baseline {
    Empty,
    Reference {
        frames: Vec<LiveFrame>,
    },
    Previous {
        attempt: usize,
        frames: Vec<LiveFrame>,
    },
}

/// Splits `duration` evenly across the script; no pauses between words.
pub fn uniform_timings(words: &[String], duration: f64) -> Vec<TimedWord> {
    let step = duration / words.len() as f64;
    words
        .iter()
        .enumerate()
        .map(|(i, w)| TimedWord::new(w.clone(), i as f64 * step, (i + 1) as f64 * step))
        .collect()
}

fn normalize(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

#[derive(Debug)]
pub struct PracticeSession {
    id: String,
    target: PracticeTarget,
    thresholds: ThresholdConfig,
    analysis: AnalysisConfig,
    sample_rate: u32,
    analyzer: StreamAnalyzer,
    audio: Vec<f64>,
    frames: Vec<LiveFrame>,
    // session time at which the current attempt started
    time_offset: f64,
    reference: Option<Vec<LiveFrame>>,
    history: Vec<PracticeResult>,
    previous_frames: Option<Vec<LiveFrame>>,
    closed: bool,
}

impl PracticeSession {
    pub fn new(
        id: impl Into<String>,
        target: PracticeTarget,
        thresholds: ThresholdConfig,
        analysis: AnalysisConfig,
        sample_rate: u32,
    ) -> Result<Self, FeedbackError> {
        target.validate()?;
        thresholds.validate()?;
        let analyzer = StreamAnalyzer::new(&analysis, sample_rate)?;
        Ok(Self {
            id: id.into(),
            target,
            thresholds,
            analysis,
            sample_rate,
            analyzer,
            audio: Vec::new(),
            frames: Vec::new(),
            time_offset: 0.0,
            reference: None,
            history: Vec::new(),
            previous_frames: None,
            closed: false,
        })
    }

    /// Frames of the original recording, shown before any attempt exists.
    pub fn with_reference(mut self, frames: Vec<LiveFrame>) -> Self {
        self.reference = Some(frames);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn target(&self) -> &PracticeTarget {
        &self.target
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn attempts(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[PracticeResult] {
        &self.history
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Live frames of the attempt in progress, with session-relative times.
    pub fn current_frames(&self) -> &[LiveFrame] {
        &self.frames
    }

    /// Appends samples to the current attempt and returns the frames for
    /// every hop they complete.
    pub fn push_audio(&mut self, chunk: &[f64]) -> Result<Vec<LiveFrame>, FeedbackError> {
        if self.closed {
            return Err(FeedbackError::Closed);
        }
        if let Some(i) = chunk.iter().position(|s| !s.is_finite()) {
            return Err(DspError::Buffer(format!("non-finite sample at {i}")).into());
        }
        self.audio.extend_from_slice(chunk);
        let mut frames = self.analyzer.push(chunk);
        for f in &mut frames {
            f.t += self.time_offset;
        }
        self.frames.extend_from_slice(&frames);
        Ok(frames)
    }

    pub fn push_buffer(&mut self, buf: &SampleBuffer) -> Result<Vec<LiveFrame>, FeedbackError> {
        if buf.sample_rate != self.sample_rate {
            return Err(FeedbackError::SampleRate {
                expected: self.sample_rate,
                got: buf.sample_rate,
            });
        }
        self.push_audio(&buf.samples)
    }

    /// Labels the recorded attempt and compares it with the target. Without
    /// client timings the attempt is split evenly across the script.
    pub fn finish_attempt(
        &mut self,
        timings: Option<&[TimedWord]>,
    ) -> Result<PracticeResult, FeedbackError> {
        if self.closed {
            return Err(FeedbackError::Closed);
        }
        if self.audio.is_empty() {
            return Err(FeedbackError::NoAudio);
        }
        let buf = SampleBuffer::new(std::mem::take(&mut self.audio), self.sample_rate)?;
        let outcome = self.evaluate(&buf, timings);
        if outcome.is_err() {
            // keep the recording so the client can retry with corrected timings
            self.audio = buf.samples;
            return outcome;
        }
        let result = outcome?;
        let attempt_frames: Vec<LiveFrame> = std::mem::take(&mut self.frames)
            .into_iter()
            .map(|f| LiveFrame {
                t: f.t - self.time_offset,
                ..f
            })
            .collect();
        self.time_offset += buf.duration();
        self.previous_frames = Some(attempt_frames);
        self.analyzer = StreamAnalyzer::new(&self.analysis, self.sample_rate)?;
        self.history.push(result.clone());
        Ok(result)
    }

    fn evaluate(
        &self,
        buf: &SampleBuffer,
        timings: Option<&[TimedWord]>,
    ) -> Result<PracticeResult, FeedbackError> {
        let words = &self.target.words;
        let (timings, uniform) = match timings {
            Some(t) => {
                if t.len() != words.len() {
                    return Err(FeedbackError::Timings(format!(
                        "{} timings for a {}-word script",
                        t.len(),
                        words.len()
                    )));
                }
                if let Some(i) = (0..t.len()).find(|&i| {
                    normalize(&t[i].text) != normalize(&words[i]) && !t[i].text.is_empty()
                }) {
                    return Err(FeedbackError::Timings(format!(
                        "word {i} is `{}`, expected `{}`",
                        t[i].text, words[i]
                    )));
                }
                let t: Vec<TimedWord> = t
                    .iter()
                    .zip(words)
                    .map(|(t, w)| TimedWord::new(w.clone(), t.start, t.end))
                    .collect();
                (t, false)
            }
            None => (uniform_timings(words, buf.duration()), true),
        };
        validate_words(&timings)?;
        let acoustics = word_acoustics(buf, &timings, &self.analysis)?;
        let attempt_index = self.history.len() + 1;
        let sentence_id = format!(
            "{}#{attempt_index}",
            self.target.sentence_id.as_deref().unwrap_or(&self.id)
        );
        let labels = label_sentence(&sentence_id, &acoustics, &self.thresholds)?;
        let mismatches: Vec<WordMismatch> = self
            .target
            .focus
            .iter()
            .map(|f| WordMismatch {
                index: f.index,
                word: words[f.index].clone(),
                channels: f.mismatches(&labels.labels[f.index]),
            })
            .collect();
        let mismatch_count = mismatches.iter().map(|m| m.channels.len()).sum();
        Ok(PracticeResult {
            attempt_index,
            word_timings: timings,
            uniform_timings: uniform,
            labels,
            mismatches,
            mismatch_count,
            delta_vs_previous: self
                .history
                .last()
                .map(|p| mismatch_count as i64 - p.mismatch_count as i64),
        })
    }

    /// Frames of the previous attempt, else the reference recording.
    pub fn baseline(&self) -> Baseline {
        match (&self.previous_frames, &self.reference) {
            (Some(frames), _) => Baseline::Previous {
                attempt: self.history.len(),
                frames: frames.clone(),
            },
            (None, Some(frames)) => Baseline::Reference {
                frames: frames.clone(),
            },
            (None, None) => Baseline::Empty,
        }
    }

    /// Drops any unfinished attempt; later pushes and finishes fail.
    pub fn close(&mut self) {
        self.closed = true;
        self.audio.clear();
        self.frames.clear();
    }
}

pub type SharedSession = Arc<Mutex<PracticeSession>>;

/// Registry of live sessions. Each session has its own lock so distinct
/// sessions never contend.
#[derive(Debug, Default)]
pub struct SessionManager {
    next: AtomicU64,
    sessions: Mutex<HashMap<String, SharedSession>>,
}

impl SessionManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_session(
        &self,
        target: PracticeTarget,
        thresholds: ThresholdConfig,
        analysis: AnalysisConfig,
        sample_rate: u32,
        reference: Option<Vec<LiveFrame>>,
    ) -> Result<(String, SharedSession), FeedbackError> {
        let n = self.next.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("p-{n}");
        let mut session =
            PracticeSession::new(id.clone(), target, thresholds, analysis, sample_rate)?;
        if let Some(r) = reference {
            session = session.with_reference(r);
        }
        let shared = Arc::new(Mutex::new(session));
        self.sessions
            .lock()
            .expect("session registry poisoned")
            .insert(id.clone(), shared.clone());
        Ok((id, shared))
    }

    pub fn get(&self, id: &str) -> Result<SharedSession, FeedbackError> {
        self.sessions
            .lock()
            .expect("session registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| FeedbackError::UnknownSession(id.to_string()))
    }

    /// Closes and forgets a session.
    pub fn end_session(&self, id: &str) -> Result<(), FeedbackError> {
        let s = self
            .sessions
            .lock()
            .expect("session registry poisoned")
            .remove(id)
            .ok_or_else(|| FeedbackError::UnknownSession(id.to_string()))?;
        s.lock().expect("session poisoned").close();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions
            .lock()
            .expect("session registry poisoned")
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
