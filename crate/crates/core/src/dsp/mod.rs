//! Audio decoding and acoustic features: frame RMS, f0 tracks, syllable
//! counts, and their per-word aggregates.

mod pitch;
mod stream;
mod syllables;
pub mod synth;
mod wav;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TimedWord;
use crate::exec::Execution;

pub use pitch::{track_pitch, PitchConfig};
pub use stream::{LiveFrame, StreamAnalyzer};
pub use syllables::{count_syllables, SyllableCount};
pub use wav::{decode_wav, encode_wav, pcm16le_to_samples, samples_to_pcm16le};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("audio format: {0}")]
    Format(String),
    #[error("invalid buffer: {0}")]
    Buffer(String),
    #[error("analysis config: {0}")]
    Config(String),
    #[error("word {index} timing [{start}, {end}] s lies outside the {duration:.3} s of audio")]
    TimingOutOfRange {
        index: usize,
        start: f64,
        end: f64,
        duration: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::Buffer("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::Buffer(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples in `[start, end)` seconds, clamped to the buffer.
    pub fn slice_seconds(&self, start: f64, end: f64) -> SampleBuffer {
        let rate = self.sample_rate as f64;
        let a = ((start * rate).floor().max(0.0) as usize).min(self.samples.len());
        let b = ((end * rate).ceil().max(0.0) as usize).clamp(a, self.samples.len());
        SampleBuffer {
            samples: self.samples[a..b].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// One value per analysis frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub values: Vec<f64>,
    pub frame_length: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub start_times: Vec<f64>,
}

impl FrameSeries {
    /// Time of each frame's center, in seconds from the buffer start.
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        let half = self.frame_length as f64 / 2.0 / self.sample_rate as f64;
        self.start_times.iter().map(move |t| t + half)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct FrameLayout {
    pub frame_len: usize,
    pub hop: usize,
    pub count: usize,
}

pub(crate) fn ms_to_samples(ms: f64, rate: u32) -> usize {
    ((ms * rate as f64 / 1000.0).round() as usize).max(1)
}

pub(crate) fn frame_layout(buf: &SampleBuffer, frame_ms: f64, hop_ms: f64) -> FrameLayout {
    let frame_len = ms_to_samples(frame_ms, buf.sample_rate);
    let hop = ms_to_samples(hop_ms, buf.sample_rate);
    let n = buf.samples.len();
    let count = if n <= frame_len {
        1
    } else {
        1 + (n - frame_len) / hop
    };
    FrameLayout {
        frame_len,
        hop,
        count,
    }
}

impl FrameLayout {
    pub(crate) fn into_series(self, values: Vec<f64>, sample_rate: u32) -> FrameSeries {
        let start_times = (0..self.count)
            .map(|i| (i * self.hop) as f64 / sample_rate as f64)
            .collect();
        FrameSeries {
            values,
            frame_length: self.frame_len,
            hop: self.hop,
            sample_rate,
            start_times,
        }
    }
}

pub(crate) fn rms(xs: &[f64], len: usize) -> f64 {
    // `len` may exceed xs.len(): missing samples count as zeros
    (xs.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt()
}

/// Root-mean-square per frame. A buffer shorter than one frame yields a
/// single zero-padded frame.
pub fn frame_rms(buf: &SampleBuffer, frame_ms: f64, hop_ms: f64) -> Result<FrameSeries, DspError> {
    if !(frame_ms >= hop_ms && hop_ms > 0.0) {
        return Err(DspError::Config(format!(
            "rms frame {frame_ms} ms / hop {hop_ms} ms: need frame >= hop > 0"
        )));
    }
    let layout = frame_layout(buf, frame_ms, hop_ms);
    let values = (0..layout.count)
        .map(|i| {
            let from = i * layout.hop;
            let to = (from + layout.frame_len).min(buf.samples.len());
            rms(&buf.samples[from..to], layout.frame_len)
        })
        .collect();
    Ok(layout.into_series(values, buf.sample_rate))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub rms_frame_ms: f64,
    pub rms_hop_ms: f64,
    pub pitch: PitchConfig,
    pub execution: Execution,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rms_frame_ms: 30.0,
            rms_hop_ms: 10.0,
            pitch: PitchConfig::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordAcoustics {
    /// Mean frame RMS over the word span.
    pub mean_volume: f64,
    /// Mean f0 over voiced frames, 0 when none are voiced.
    pub mean_f0: f64,
    pub f0_sd: f64,
    pub duration: f64,
    pub syllables: u32,
    /// Syllables per minute.
    pub spm: f64,
    pub gap_after: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Indices of frames whose center falls in `[start, end)`; when none do,
/// the single frame nearest the span midpoint.
fn frames_in_span(centers: &[f64], start: f64, end: f64) -> Vec<usize> {
    let hit: Vec<usize> = centers
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= start && c < end)
        .map(|(i, _)| i)
        .collect();
    if !hit.is_empty() || centers.is_empty() {
        return hit;
    }
    let mid = (start + end) / 2.0;
    let nearest = centers
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - mid).abs().total_cmp(&(b.1 - mid).abs()))
        .map(|(i, _)| i)
        .unwrap();
    vec![nearest]
}

/// Per-word acoustics for one sentence whose word times are relative to the
/// start of `buf`. Only the sentence span (plus one frame of context) is
/// analyzed.
pub fn word_acoustics(
    buf: &SampleBuffer,
    words: &[TimedWord],
    cfg: &AnalysisConfig,
) -> Result<Vec<WordAcoustics>, DspError> {
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let duration = buf.duration();
    for (index, w) in words.iter().enumerate() {
        if w.start < 0.0 || w.end > duration + 1e-3 || w.end <= w.start {
            return Err(DspError::TimingOutOfRange {
                index,
                start: w.start,
                end: w.end,
                duration,
            });
        }
    }

    let context = cfg.rms_frame_ms.max(cfg.pitch.frame_ms) / 1000.0;
    let rate = buf.sample_rate as f64;
    let offset_sample = ((words[0].start - context) * rate).floor().max(0.0) as usize;
    let offset = offset_sample as f64 / rate;
    let end = words[words.len() - 1].end + context;
    let span = buf.slice_seconds(offset, end);

    let vol = frame_rms(&span, cfg.rms_frame_ms, cfg.rms_hop_ms)?;
    let f0 = track_pitch(&span, &cfg.pitch, cfg.execution)?;
    let vol_centers: Vec<f64> = vol.centers().map(|c| c + offset).collect();
    let f0_centers: Vec<f64> = f0.centers().map(|c| c + offset).collect();

    Ok(words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let vols: Vec<f64> = frames_in_span(&vol_centers, w.start, w.end)
                .into_iter()
                .map(|k| vol.values[k])
                .collect();
            let voiced: Vec<f64> = frames_in_span(&f0_centers, w.start, w.end)
                .into_iter()
                .map(|k| f0.values[k])
                .filter(|&f| f > 0.0)
                .collect();
            let (mean_f0, f0_sd) = mean_sd(&voiced);
            let syllables = count_syllables(&w.text).count;
            let duration = w.duration();
            WordAcoustics {
                mean_volume: mean_sd(&vols).0,
                mean_f0,
                f0_sd,
                duration,
                syllables,
                spm: syllables as f64 / (duration / 60.0),
                gap_after: words.get(i + 1).map_or(0.0, |n| (n.start - w.end).max(0.0)),
            }
        })
        .collect())
}
