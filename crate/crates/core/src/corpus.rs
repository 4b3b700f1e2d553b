//! Word-timed transcripts, sentence segmentation and the JSONL corpus store.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("talk `{0}` is already in the corpus")]
    DuplicateTalk(String),
    #[error("word {index}: {reason}")]
    InvalidTiming { index: usize, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate sentence id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One transcript token with its start/end time in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

impl TimedWord {
    pub fn new(text: impl Into<String>, start: f64, end: f64) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    fn ends_sentence(&self) -> bool {
        self.text.trim_end().ends_with(['.', '!', '?'])
    }
}

/// Location of a sentence inside its talk's audio file, in samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioRef {
    pub path: String,
    pub sample_rate: u32,
    pub start_sample: u64,
    pub end_sample: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub talk_id: String,
    pub text: String,
    pub words: Vec<TimedWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<AudioRef>,
}

impl SentenceRecord {
    pub fn word_texts(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.text.as_str()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub talk_count: usize,
    /// Hours.
    pub total_duration: f64,
    pub sentence_count: usize,
    pub word_count: usize,
    pub mean_words_per_sentence: f64,
}

/// The audio file backing a talk, needed to turn word times into sample offsets.
#[derive(Clone, Debug)]
pub struct AudioSource {
    pub path: String,
    pub sample_rate: u32,
}

/// Checks timing invariants: finite, `start >= 0`, `end > start`, and no
/// word starting before the previous one ended.
pub fn validate_words(words: &[TimedWord]) -> Result<(), CorpusError> {
    let mut prev_end = 0.0_f64;
    for (index, w) in words.iter().enumerate() {
        let bad = |reason: String| Err(CorpusError::InvalidTiming { index, reason });
        if !w.start.is_finite() || !w.end.is_finite() {
            return bad("non-finite timing".into());
        }
        if w.start < 0.0 {
            return bad(format!("negative start {}", w.start));
        }
        if w.end <= w.start {
            return bad(format!("end {} is not after start {}", w.end, w.start));
        }
        if index > 0 && w.start < prev_end {
            return bad(format!(
                "starts at {} before previous word ends at {}",
                w.start, prev_end
            ));
        }
        prev_end = w.end;
    }
    Ok(())
}

/// Splits a token stream after every token ending in `.`, `!` or `?`.
/// Returns index ranges into `words`; a trailing unterminated run forms the
/// last group. Abbreviations are not special-cased.
pub fn sentence_spans<T>(words: &[T], ends: impl Fn(&T) -> bool) -> Vec<std::ops::Range<usize>> {
    let mut spans = Vec::new();
    let mut begin = 0;
    for (i, w) in words.iter().enumerate() {
        if ends(w) {
            spans.push(begin..i + 1);
            begin = i + 1;
        }
    }
    if begin < words.len() {
        spans.push(begin..words.len());
    }
    spans
}

/// Segments a talk's words into sentence records with ids `{talk_id}:{index}`.
pub fn segment_transcript(talk_id: &str, words: &[TimedWord]) -> Vec<SentenceRecord> {
    sentence_spans(words, TimedWord::ends_sentence)
        .into_iter()
        .enumerate()
        .map(|(i, span)| {
            let words = words[span].to_vec();
            SentenceRecord {
                id: format!("{talk_id}:{i}"),
                talk_id: talk_id.to_string(),
                text: join_words(&words),
                words,
                audio_ref: None,
            }
        })
        .collect()
}

/// Splits plain text into sentences of whitespace tokens.
pub fn segment_text(text: &str) -> Vec<Vec<String>> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    sentence_spans(&tokens, |t| t.ends_with(['.', '!', '?']))
        .into_iter()
        .map(|span| tokens[span].iter().map(|s| s.to_string()).collect())
        .collect()
}

fn join_words(words: &[TimedWord]) -> String {
    words
        .iter()
        .map(|w| w.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn seconds_to_sample(t: f64, rate: u32) -> u64 {
    (t * rate as f64).round().max(0.0) as u64
}

/// On-disk transcript accepted by `corpus build`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TranscriptFile {
    #[serde(default)]
    pub talk_id: Option<String>,
    pub words: Vec<TimedWord>,
    /// WAV path, relative to the transcript file.
    #[serde(default)]
    pub audio: Option<String>,
}

/// In-memory corpus with JSONL persistence.
///
/// Writes are single-writer; wrap the store in a lock or swap snapshots when
/// sharing it.
#[derive(Clone, Debug, Default)]
pub struct CorpusStore {
    records: Vec<SentenceRecord>,
    // talk id -> talk length in seconds (last word end)
    talks: BTreeMap<String, f64>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&SentenceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn contains_talk(&self, talk_id: &str) -> bool {
        self.talks.contains_key(talk_id)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ingest_talk(
        &mut self,
        talk_id: &str,
        words: &[TimedWord],
        audio: Option<&AudioSource>,
    ) -> Result<&[SentenceRecord], CorpusError> {
        if self.contains_talk(talk_id) {
            return Err(CorpusError::DuplicateTalk(talk_id.to_string()));
        }
        validate_words(words)?;
        let mut sentences = segment_transcript(talk_id, words);
        if let Some(src) = audio {
            for s in &mut sentences {
                let first = &s.words[0];
                let last = &s.words[s.words.len() - 1];
                s.audio_ref = Some(AudioRef {
                    path: src.path.clone(),
                    sample_rate: src.sample_rate,
                    start_sample: seconds_to_sample(first.start, src.sample_rate),
                    end_sample: seconds_to_sample(last.end, src.sample_rate),
                });
            }
        }
        let length = words.last().map_or(0.0, |w| w.end);
        self.talks.insert(talk_id.to_string(), length);
        let from = self.records.len();
        self.records.extend(sentences);
        Ok(&self.records[from..])
    }

    pub fn stats(&self) -> CorpusStats {
        let sentence_count = self.records.len();
        let word_count: usize = self.records.iter().map(|r| r.words.len()).sum();
        CorpusStats {
            talk_count: self.talks.len(),
            total_duration: self.talks.values().sum::<f64>() / 3600.0,
            sentence_count,
            word_count,
            mean_words_per_sentence: if sentence_count == 0 {
                0.0
            } else {
                word_count as f64 / sentence_count as f64
            },
        }
    }

    /// Writes one record per line to `path` and the stats to the sidecar.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let stats = serde_json::to_string_pretty(&self.stats()).map_err(std::io::Error::from)?;
        std::fs::write(stats_path(path), stats + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let reader = BufReader::new(File::open(path)?);
        let mut store = Self::new();
        let mut ids = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SentenceRecord =
                serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if !ids.insert(rec.id.clone()) {
                return Err(CorpusError::DuplicateId(rec.id));
            }
            let end = rec.words.last().map_or(0.0, |w| w.end);
            let talk = store.talks.entry(rec.talk_id.clone()).or_insert(0.0);
            *talk = talk.max(end);
            store.records.push(rec);
        }
        Ok(store)
    }
}

/// Sidecar stats path: `corpus.jsonl` -> `corpus.jsonl.stats.json`.
pub fn stats_path(corpus: &Path) -> PathBuf {
    let mut s = corpus.as_os_str().to_owned();
    s.push(".stats.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(texts: &[&str]) -> Vec<TimedWord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| TimedWord::new(*t, i as f64 * 0.5, i as f64 * 0.5 + 0.4))
            .collect()
    }

    #[test]
    fn one_sentence_per_terminator() {
        let s = segment_transcript("t", &words(&["Hi.", "Go!", "Why?"]));
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|r| r.words.len() == 1));
        assert_eq!(s[2].id, "t:2");
    }

    #[test]
    fn single_terminator_joins_text() {
        let s = segment_transcript("t", &words(&["Tact", "is", "art."]));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "Tact is art.");
    }

    #[test]
    fn trailing_run_and_abbreviation() {
        let s = segment_transcript("t", &words(&["Dr.", "Who", "came", "in"]));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "Dr.");
        assert_eq!(s[1].text, "Who came in");
        assert!(segment_transcript("t", &[]).is_empty());
    }

    #[test]
    fn ingest_assigns_ids_and_rejects_duplicates() {
        let mut store = CorpusStore::new();
        let recs = store
            .ingest_talk("t1", &words(&["a", "b", "c."]), None)
            .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "t1:0");
        let err = store.ingest_talk("t1", &words(&["x."]), None).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateTalk(_)));
    }

    #[test]
    fn ingest_names_bad_word_index() {
        let mut store = CorpusStore::new();
        let mut w = words(&["a", "b", "c."]);
        w[1].end = w[1].start - 0.1;
        match store.ingest_talk("t", &w, None) {
            Err(CorpusError::InvalidTiming { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(store.is_empty());
        let mut w = words(&["a", "b."]);
        w[0].end = w[0].start;
        assert!(matches!(
            store.ingest_talk("t", &w, None),
            Err(CorpusError::InvalidTiming { index: 0, .. })
        ));
    }

    #[test]
    fn audio_ref_in_samples() {
        let mut store = CorpusStore::new();
        let src = AudioSource {
            path: "talk.wav".into(),
            sample_rate: 16_000,
        };
        let recs = store
            .ingest_talk("t", &words(&["a", "b."]), Some(&src))
            .unwrap();
        let r = recs[0].audio_ref.as_ref().unwrap();
        assert_eq!((r.start_sample, r.end_sample), (0, 14_400));
    }

    #[test]
    fn stats_arithmetic() {
        assert_eq!(CorpusStore::new().stats(), CorpusStats::default());
        let mut store = CorpusStore::new();
        store
            .ingest_talk(
                "t",
                &words(&["a", "b", "c.", "d", "e", "f", "g", "h."]),
                None,
            )
            .unwrap();
        let st = store.stats();
        assert_eq!(st.sentence_count, 2);
        assert_eq!(st.word_count, 8);
        assert_eq!(st.mean_words_per_sentence, 4.0);
        assert_eq!(st.talk_count, 1);
        assert!((st.total_duration - 3.9 / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn segment_text_splits_on_terminators() {
        let s = segment_text("Tact is the art. Of making a point!  without enemies");
        assert_eq!(s.len(), 3);
        assert_eq!(s[2], vec!["without", "enemies"]);
    }

    proptest! {
        #[test]
        fn segmentation_is_total_and_ordered(
            toks in proptest::collection::vec("[a-z]{1,5}[.!?,]?", 0..40)
        ) {
            let ws: Vec<TimedWord> = toks.iter().enumerate()
                .map(|(i, t)| TimedWord::new(t.clone(), i as f64, i as f64 + 0.5))
                .collect();
            let sents = segment_transcript("p", &ws);
            let flat: Vec<TimedWord> = sents.iter().flat_map(|s| s.words.clone()).collect();
            prop_assert_eq!(flat, ws);
            let ids: HashSet<_> = sents.iter().map(|s| s.id.clone()).collect();
            prop_assert_eq!(ids.len(), sents.len());
            for s in &sents {
                prop_assert!(!s.words.is_empty());
                prop_assert_eq!(&s.text, &join_words(&s.words));
            }
        }
    }
}
