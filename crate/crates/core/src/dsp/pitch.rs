//! Frame-wise f0 estimation with the YIN cumulative-mean-normalized
//! difference function and parabolic refinement of the chosen lag.

use serde::{Deserialize, Serialize};

use super::{frame_layout, DspError, FrameSeries, SampleBuffer};
use crate::exec::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// A frame is voiced when the normalized difference dips below this.
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            frame_ms: 40.0,
            hop_ms: 10.0,
            f_min: 60.0,
            f_max: 500.0,
            voicing_threshold: 0.45,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        if !(self.frame_ms >= self.hop_ms && self.hop_ms > 0.0) {
            return Err(DspError::Config(format!(
                "pitch frame {} ms / hop {} ms: need frame >= hop > 0",
                self.frame_ms, self.hop_ms
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f_min > 0.0 && self.f_min < self.f_max && self.f_max < nyquist) {
            return Err(DspError::Config(format!(
                "pitch range [{}, {}] Hz must satisfy 0 < f_min < f_max < {nyquist}",
                self.f_min, self.f_max
            )));
        }
        if self.voicing_threshold.is_nan() || self.voicing_threshold <= 0.0 {
            return Err(DspError::Config(
                "voicing threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Lag search bounds and integration window for one frame length.
#[derive(Clone, Copy, Debug)]
pub(crate) struct YinPlan {
    min_lag: usize,
    max_lag: usize,
    window: usize,
    sample_rate: f64,
    f_min: f64,
    f_max: f64,
    threshold: f64,
}

impl YinPlan {
    pub(crate) fn new(cfg: &PitchConfig, sample_rate: u32, frame_len: usize) -> Self {
        let sr = sample_rate as f64;
        let min_lag = ((sr / cfg.f_max).floor() as usize).max(2);
        let max_lag = ((sr / cfg.f_min).ceil() as usize)
            .min(frame_len / 2)
            .max(min_lag + 1);
        Self {
            min_lag,
            max_lag,
            window: frame_len.saturating_sub(max_lag + 1).max(1),
            sample_rate: sr,
            f_min: cfg.f_min,
            f_max: cfg.f_max,
            threshold: cfg.voicing_threshold,
        }
    }

    /// f0 in Hz for one frame, or 0 when unvoiced. `frame` must hold at
    /// least `window + max_lag + 1` samples; shorter input is zero-extended.
    pub(crate) fn estimate(&self, frame: &[f64]) -> f64 {
        let need = self.window + self.max_lag + 1;
        let padded;
        let x = if frame.len() >= need {
            frame
        } else {
            let mut v = frame.to_vec();
            v.resize(need, 0.0);
            padded = v;
            &padded[..]
        };
        let energy: f64 = x[..self.window + self.max_lag].iter().map(|s| s * s).sum();
        if energy / ((self.window + self.max_lag) as f64) < 1e-10 {
            return 0.0;
        }

        // cumulative mean normalized difference, cmnd[0] = 1
        let mut cmnd = vec![1.0; self.max_lag + 2];
        let mut running = 0.0;
        for (tau, slot) in cmnd.iter_mut().enumerate().skip(1) {
            let d: f64 = x[..self.window]
                .iter()
                .zip(&x[tau..tau + self.window])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            running += d;
            *slot = if running > 0.0 {
                d * tau as f64 / running
            } else {
                1.0
            };
        }

        let mut tau = match (self.min_lag..=self.max_lag).find(|&t| cmnd[t] < self.threshold) {
            Some(t) => t,
            None => return 0.0,
        };
        while tau < self.max_lag && cmnd[tau + 1] < cmnd[tau] {
            tau += 1;
        }

        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > f64::EPSILON {
            (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let f0 = self.sample_rate / (tau as f64 + shift);
        f0.clamp(self.f_min, self.f_max)
    }
}

/// Per-frame f0 over the buffer; unvoiced frames are exactly 0.
pub fn track_pitch(
    buf: &SampleBuffer,
    cfg: &PitchConfig,
    exec: Execution,
) -> Result<FrameSeries, DspError> {
    cfg.validate(buf.sample_rate)?;
    let layout = frame_layout(buf, cfg.frame_ms, cfg.hop_ms);
    let plan = YinPlan::new(cfg, buf.sample_rate, layout.frame_len);
    let values = exec.map_range(0..layout.count, |i| {
        let from = i * layout.hop;
        let to = (from + layout.frame_len).min(buf.samples.len());
        plan.estimate(&buf.samples[from..to])
    });
    Ok(layout.into_series(values, buf.sample_rate))
}
