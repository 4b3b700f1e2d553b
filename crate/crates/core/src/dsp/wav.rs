use std::io::Cursor;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{DspError, SampleBuffer};

/// Decodes a RIFF WAV holding mono 16-bit PCM. Samples are scaled by 1/32768.
pub fn decode_wav(bytes: &[u8]) -> Result<SampleBuffer, DspError> {
    let reader = WavReader::new(Cursor::new(bytes))
        .map_err(|e| DspError::Format(format!("not a readable RIFF/WAVE file: {e}")))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int {
        return Err(DspError::Format(
            "expected PCM samples, found IEEE float".into(),
        ));
    }
    if spec.bits_per_sample != 16 {
        return Err(DspError::Format(format!(
            "expected 16-bit PCM, found {}-bit",
            spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(DspError::Format(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DspError::Format(format!("truncated data chunk: {e}")))?;
    if samples.len() != declared {
        return Err(DspError::Format(format!(
            "truncated data chunk: header declares {declared} samples, found {}",
            samples.len()
        )));
    }
    SampleBuffer::new(samples, spec.sample_rate)
}

/// Encodes a buffer as mono PCM16 at its own sample rate.
pub fn encode_wav(buf: &SampleBuffer) -> Vec<u8> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::with_capacity(44 + buf.samples.len() * 2));
    {
        let mut w = WavWriter::new(&mut out, spec).expect("in-memory writer");
        for &s in &buf.samples {
            w.write_sample(pcm16(s)).expect("in-memory write");
        }
        w.finalize().expect("in-memory finalize");
    }
    out.into_inner()
}

pub fn pcm16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Little-endian PCM16 bytes (the streaming wire payload) to samples.
pub fn pcm16le_to_samples(bytes: &[u8]) -> Result<Vec<f64>, DspError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(DspError::Format("odd byte count in PCM16 chunk".into()));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect())
}

pub fn samples_to_pcm16le(samples: &[f64]) -> Vec<u8> {
    samples
        .iter()
        .flat_map(|&s| pcm16(s).to_le_bytes())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(channels: u16, bits: u16, rate: u32, samples: &[i32]) -> Vec<u8> {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        };
        let mut out = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut out, spec).unwrap();
        for &s in samples {
            if bits == 16 {
                w.write_sample(s as i16).unwrap();
            } else {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
        out.into_inner()
    }

    #[test]
    fn one_second_of_silence() {
        let buf = decode_wav(&wav_bytes(1, 16, 16_000, &vec![0; 16_000])).unwrap();
        assert_eq!(buf.samples.len(), 16_000);
        assert!(buf.samples.iter().all(|&s| s == 0.0));
        assert_eq!(buf.sample_rate, 16_000);
    }

    #[test]
    fn full_scale_scaling_and_44k() {
        let buf = decode_wav(&wav_bytes(1, 16, 44_100, &[32767, -32768])).unwrap();
        assert!((buf.samples[0] - 0.99997).abs() < 1e-5);
        assert_eq!(buf.samples[1], -1.0);
        assert_eq!(buf.sample_rate, 44_100);
    }

    #[test]
    fn rejects_stereo_and_wrong_depth() {
        let err = decode_wav(&wav_bytes(2, 16, 16_000, &[0, 0, 0, 0])).unwrap_err();
        assert!(err.to_string().contains("2 channels"), "{err}");
        let err = decode_wav(&wav_bytes(1, 24, 16_000, &[0, 0])).unwrap_err();
        assert!(err.to_string().contains("24-bit"), "{err}");
        assert!(decode_wav(b"definitely not audio").is_err());
    }

    #[test]
    fn rejects_truncated_data() {
        let mut bytes = wav_bytes(1, 16, 16_000, &vec![100; 1000]);
        bytes.truncate(bytes.len() - 501);
        let err = decode_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn encode_decode_is_lossless_for_pcm_values() {
        let samples: Vec<f64> = (-50..50).map(|i| i as f64 * 300.0 / 32768.0).collect();
        let buf = SampleBuffer::new(samples.clone(), 16_000).unwrap();
        let back = decode_wav(&encode_wav(&buf)).unwrap();
        assert_eq!(back.samples, samples);
        assert_eq!(
            pcm16le_to_samples(&samples_to_pcm16le(&samples)).unwrap(),
            samples
        );
    }
}
