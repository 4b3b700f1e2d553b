//! Deterministic test signals for fixtures and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SampleBuffer;

pub fn sine(freq: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> SampleBuffer {
    let n = (seconds * sample_rate as f64).round() as usize;
    let w = 2.0 * std::f64::consts::PI * freq / sample_rate as f64;
    let samples = (0..n).map(|i| amplitude * (w * i as f64).sin()).collect();
    SampleBuffer::new(samples, sample_rate).expect("finite sine")
}

pub fn white_noise(amplitude: f64, seconds: f64, sample_rate: u32, seed: u64) -> SampleBuffer {
    let n = (seconds * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|_| rng.gen_range(-amplitude..amplitude))
        .collect();
    SampleBuffer::new(samples, sample_rate).expect("finite noise")
}

/// A stretch of harmonic tone standing in for a spoken word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub f0: f64,
    pub amplitude: f64,
}

impl Segment {
    pub fn tone(start: f64, end: f64, f0: f64, amplitude: f64) -> Self {
        Self {
            start,
            end,
            f0,
            amplitude,
        }
    }
}

/// Renders segments (pure sines) into silence of length `seconds`.
pub fn tone_sequence(segments: &[Segment], seconds: f64, sample_rate: u32) -> SampleBuffer {
    let rate = sample_rate as f64;
    let mut samples = vec![0.0; (seconds * rate).round() as usize];
    for seg in segments {
        let a = (seg.start * rate).round() as usize;
        let b = ((seg.end * rate).round() as usize).min(samples.len());
        let w = 2.0 * std::f64::consts::PI * seg.f0 / rate;
        for (k, s) in samples[a..b].iter_mut().enumerate() {
            *s += seg.amplitude * (w * k as f64).sin();
        }
    }
    SampleBuffer::new(samples, sample_rate).expect("finite tones")
}
