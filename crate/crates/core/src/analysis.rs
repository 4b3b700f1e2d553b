//! Turns a user submission (recorded speech with word timings, or plain
//! text) into labeled query sentences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_text, segment_transcript, validate_words, CorpusError, TimedWord};
use crate::dsp::{decode_wav, word_acoustics, AnalysisConfig, DspError, WordAcoustics};
use crate::exec::Execution;
use crate::labeler::{
    label_sentence, LabelError, TechniqueLabel, TechniqueSequence, ThresholdConfig,
};
use crate::semsearch::fnv1a;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("submission has no words")]
    Empty,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Label(#[from] LabelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedSentence {
    pub id: String,
    pub text: String,
    pub words: Vec<String>,
    /// Present for audio submissions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Vec<TimedWord>>,
    pub labels: TechniqueSequence,
    /// Kept so labels can be recomputed under other thresholds.
    #[serde(skip)]
    pub acoustics: Option<Vec<WordAcoustics>>,
}

impl AnalyzedSentence {
    /// Labels under `cfg`: recomputed from acoustics when available,
    /// otherwise the stored (all-none) labels.
    pub fn labels_with(&self, cfg: &ThresholdConfig) -> Result<TechniqueSequence, LabelError> {
        match &self.acoustics {
            Some(a) => label_sentence(&self.id, a, cfg),
            None => Ok(self.labels.clone()),
        }
    }
}

fn submission_id(parts: &[&[u8]]) -> String {
    let mut bytes = Vec::new();
    for p in parts {
        bytes.extend_from_slice(&(p.len() as u64).to_le_bytes());
        bytes.extend_from_slice(p);
    }
    format!("q-{:016x}", fnv1a(&bytes))
}

/// Text-only input: sentences carry no acoustic evidence, so every word is
/// labeled none on all channels.
pub fn analyze_text(text: &str) -> Result<Vec<AnalyzedSentence>, AnalysisError> {
    let sentences = segment_text(text);
    if sentences.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let sub = submission_id(&[b"text", text.as_bytes()]);
    Ok(sentences
        .into_iter()
        .enumerate()
        .map(|(i, words)| {
            let id = format!("{sub}:{i}");
            AnalyzedSentence {
                text: words.join(" "),
                labels: TechniqueSequence {
                    sentence_id: id.clone(),
                    labels: vec![TechniqueLabel::default(); words.len()],
                },
                id,
                words,
                timings: None,
                acoustics: None,
            }
        })
        .collect())
}

/// Recorded input: the WAV is split into sentences along the word timings
/// (relative to the start of the recording) and each sentence is labeled
/// against its own statistics.
pub fn analyze_audio(
    wav: &[u8],
    words: &[TimedWord],
    analysis: &AnalysisConfig,
    thresholds: &ThresholdConfig,
) -> Result<Vec<AnalyzedSentence>, AnalysisError> {
    thresholds.validate()?;
    if words.is_empty() {
        return Err(AnalysisError::Empty);
    }
    validate_words(words)?;
    let buf = decode_wav(wav)?;
    let words_json = serde_json::to_vec(words).expect("timed words serialize");
    let sub = submission_id(&[b"audio", wav, &words_json]);
    let records = segment_transcript(&sub, words);
    // sentences run in parallel, so the per-sentence pitch tracker stays sequential
    let inner = AnalysisConfig {
        execution: Execution::Sequential,
        ..analysis.clone()
    };
    analysis.execution.try_map(&records, |r| {
        let acoustics = word_acoustics(&buf, &r.words, &inner)?;
        let labels = label_sentence(&r.id, &acoustics, thresholds)?;
        Ok(AnalyzedSentence {
            id: r.id.clone(),
            text: r.text.clone(),
            words: r.words.iter().map(|w| w.text.clone()).collect(),
            timings: Some(r.words.clone()),
            labels,
            acoustics: Some(acoustics),
        })
    })
}
