use serde::{Deserialize, Serialize};

use super::pitch::YinPlan;
use super::{ms_to_samples, rms, AnalysisConfig, DspError};

/// One live-chart point: volume and f0 for the hop ending at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveFrame {
    /// Seconds since the stream started.
    pub t: f64,
    #[serde(rename = "vol")]
    pub volume: f64,
    pub f0: f64,
}

/// Incremental RMS + f0 over pushed chunks, one frame per completed hop.
///
/// Each frame looks back over the last RMS (resp. pitch) frame length of
/// samples, zero-filled before the first sample.
#[derive(Clone, Debug)]
pub struct StreamAnalyzer {
    sample_rate: u32,
    hop: usize,
    rms_len: usize,
    pitch_len: usize,
    plan: YinPlan,
    history: Vec<f64>,
    // samples received since the last emitted hop boundary
    pending: usize,
    emitted: u64,
}

impl StreamAnalyzer {
    pub fn new(cfg: &AnalysisConfig, sample_rate: u32) -> Result<Self, DspError> {
        cfg.pitch.validate(sample_rate)?;
        if cfg.rms_hop_ms != cfg.pitch.hop_ms {
            return Err(DspError::Config(
                "live frames need equal rms and pitch hops".into(),
            ));
        }
        let rms_len = ms_to_samples(cfg.rms_frame_ms, sample_rate);
        let pitch_len = ms_to_samples(cfg.pitch.frame_ms, sample_rate);
        let max_len = rms_len.max(pitch_len);
        Ok(Self {
            sample_rate,
            hop: ms_to_samples(cfg.rms_hop_ms, sample_rate),
            rms_len,
            pitch_len,
            plan: YinPlan::new(&cfg.pitch, sample_rate, pitch_len),
            history: vec![0.0; max_len],
            pending: 0,
            emitted: 0,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn push(&mut self, chunk: &[f64]) -> Vec<LiveFrame> {
        let mut frames = Vec::with_capacity((self.pending + chunk.len()) / self.hop);
        let mut rest = chunk;
        while !rest.is_empty() {
            let take = (self.hop - self.pending).min(rest.len());
            self.history.extend_from_slice(&rest[..take]);
            self.pending += take;
            rest = &rest[take..];
            if self.pending == self.hop {
                self.pending = 0;
                self.emitted += 1;
                let n = self.history.len();
                let vol = rms(&self.history[n - self.rms_len..], self.rms_len);
                let f0 = self.plan.estimate(&self.history[n - self.pitch_len..]);
                frames.push(LiveFrame {
                    t: self.emitted as f64 * self.hop_seconds(),
                    volume: vol,
                    f0,
                });
                let keep = self.rms_len.max(self.pitch_len);
                if self.history.len() > 4 * keep {
                    self.history.drain(..n - keep);
                }
            }
        }
        frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::synth::sine;

    #[test]
    fn hundred_ms_gives_ten_frames() {
        let mut a = StreamAnalyzer::new(&AnalysisConfig::default(), 16_000).unwrap();
        let frames = a.push(&vec![0.0; 1600]);
        assert_eq!(frames.len(), 10);
        assert!(frames.iter().all(|f| f.volume == 0.0 && f.f0 == 0.0));
    }

    #[test]
    fn odd_chunking_keeps_constant_hop() {
        let mut a = StreamAnalyzer::new(&AnalysisConfig::default(), 16_000).unwrap();
        let mut all = Vec::new();
        for size in [37, 500, 1, 1203, 160, 3999] {
            all.extend(a.push(&vec![0.1; size]));
        }
        assert_eq!(all.len(), (37 + 500 + 1 + 1203 + 160 + 3999) / 160);
        for w in all.windows(2) {
            assert!((w[1].t - w[0].t - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_stream_tracks_pitch() {
        let mut a = StreamAnalyzer::new(&AnalysisConfig::default(), 16_000).unwrap();
        let buf = sine(220.0, 0.5, 0.5, 16_000);
        let frames: Vec<LiveFrame> = buf.samples.chunks(1600).flat_map(|c| a.push(c)).collect();
        // skip the warm-up frames whose window still reaches into the zero fill
        for f in &frames[4..] {
            assert!((f.f0 - 220.0).abs() <= 5.0, "{f:?}");
        }
    }

    #[test]
    fn wire_field_names() {
        let f = LiveFrame {
            t: 0.01,
            volume: 0.5,
            f0: 0.0,
        };
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"t":0.01,"vol":0.5,"f0":0.0}"#
        );
    }
}
