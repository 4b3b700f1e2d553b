//! Synthetic talks with known delivery, shared by the integration tests.
//!
//! Every sentence has the shape `PRON VERB an enemy ADP DET NOUN.` and is
//! rendered as one continuous tone per word. Word 0 is a soft 80 Hz tone and
//! the last word a loud one, so each sentence has real spread on volume and
//! pitch without a second labeled pair; the rest are 100 Hz at a middle
//! amplitude. Words last 0.25 s per syllable. Planted sentences squeeze `an` into 80 ms and raise `enemy` to
//! 200 Hz, which makes that pair Faster then Stress.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cadence::config::Config;
use cadence::workflow;
use cadence_core::corpus::{CorpusStore, TimedWord, TranscriptFile};
use cadence_core::dsp::synth::{tone_sequence, Segment};
use cadence_core::dsp::{count_syllables, encode_wav, SampleBuffer};
use cadence_core::labeler::{Technique, TechniqueLabel};

pub const RATE: u32 = 16_000;
pub const TALKS: usize = 4;
pub const PER_TALK: usize = 5;
pub const SENTENCES: usize = TALKS * PER_TALK;
/// Planted sentences are indices `0..PLANTED`; index 0 is the query's duplicate.
pub const PLANTED: usize = 14;
/// Query positions of `an enemy`.
pub const PLANTED_WINDOW: (usize, usize) = (2, 2);

const PRON: [&str; 5] = ["we", "they", "you", "she", "he"];
const VERB: [&str; 5] = ["faced", "watched", "followed", "noticed", "reported"];
const ADP: [&str; 5] = ["in", "on", "near", "with", "behind"];
const DET: [&str; 5] = ["the", "this", "that", "every", "each"];
const NOUN: [&str; 5] = ["city", "forest", "village", "market", "harbor"];

pub fn sentence_words(i: usize) -> Vec<String> {
    vec![
        PRON[i % 5].into(),
        VERB[(i / 5 + i) % 5].into(),
        "an".into(),
        "enemy".into(),
        ADP[(i * 3 + i / 5) % 5].into(),
        DET[(i * 2 + i / 10) % 5].into(),
        format!("{}.", NOUN[(i + i / 5 * 2) % 5]),
    ]
}

pub fn query_text() -> String {
    sentence_words(0).join(" ")
}

/// Labels the generator plants for sentence `i`.
pub fn expected_labels(i: usize) -> Vec<TechniqueLabel> {
    let mut out = vec![TechniqueLabel::default(); 7];
    out[0] = TechniqueLabel::from_techniques(&[Technique::Softer]);
    out[6] = TechniqueLabel::from_techniques(&[Technique::Louder]);
    if i < PLANTED {
        out[2] = TechniqueLabel::from_techniques(&[Technique::Faster]);
        out[3] = TechniqueLabel::from_techniques(&[Technique::Stress]);
    }
    out
}

/// Word timings in centiseconds so every boundary lands on a sample.
fn layout(i: usize, start_cs: u64) -> (Vec<TimedWord>, Vec<Segment>, u64) {
    let mut t = start_cs;
    let mut words = Vec::new();
    let mut segs = Vec::new();
    for (j, w) in sentence_words(i).into_iter().enumerate() {
        let planted = i < PLANTED;
        let len = if planted && j == 2 {
            8
        } else {
            25 * count_syllables(&w).count as u64
        };
        let (f0, amp) = match j {
            0 => (80.0, 0.2),
            6 => (100.0, 0.7),
            3 if planted => (200.0, 0.45),
            _ => (100.0, 0.45),
        };
        let (a, b) = (t as f64 / 100.0, (t + len) as f64 / 100.0);
        segs.push(Segment::tone(a, b, f0, amp));
        words.push(TimedWord::new(w, a, b));
        t += len;
    }
    (words, segs, t)
}

/// Trailing tone so the last word's frames see signal, not the file end.
const TAIL_CS: u64 = 20;

fn render(segs: &mut Vec<Segment>, end_cs: u64) -> SampleBuffer {
    let a = end_cs as f64 / 100.0;
    let b = (end_cs + TAIL_CS) as f64 / 100.0;
    segs.push(Segment::tone(a, b, 100.0, 0.45));
    tone_sequence(segs, b, RATE)
}

pub struct Fixture {
    pub root: PathBuf,
    pub transcripts: PathBuf,
    pub corpus: PathBuf,
    /// Sentence texts by generator index.
    pub texts: Vec<String>,
}

impl Fixture {
    /// The query recording: sentence 0 on its own, with its timings.
    pub fn query_recording(&self) -> (Vec<u8>, Vec<TimedWord>) {
        let (words, mut segs, end) = layout(0, 0);
        (encode_wav(&render(&mut segs, end)), words)
    }

    /// Corpus id for generator index `i`.
    pub fn id_of(&self, i: usize) -> String {
        format!("talk-{}:{}", i / PER_TALK, i % PER_TALK)
    }

    pub fn config(&self) -> Config {
        Config {
            corpus: Some(self.corpus.clone()),
            ..Config::default()
        }
    }

    pub fn store(&self) -> CorpusStore {
        workflow::load_corpus(&self.corpus).unwrap()
    }
}

/// Writes the transcripts and WAVs under `root/talks` without building.
pub fn write_talks(root: &Path) -> Fixture {
    let transcripts = root.join("talks");
    std::fs::create_dir_all(&transcripts).unwrap();
    let mut texts = Vec::new();
    for talk in 0..TALKS {
        let mut words = Vec::new();
        let mut segs = Vec::new();
        let mut t = 0;
        for s in 0..PER_TALK {
            let i = talk * PER_TALK + s;
            let (w, sg, end) = layout(i, t);
            texts.push(sentence_words(i).join(" "));
            words.extend(w);
            segs.extend(sg);
            t = end;
        }
        let wav = format!("talk-{talk}.wav");
        std::fs::write(transcripts.join(&wav), encode_wav(&render(&mut segs, t))).unwrap();
        let file = TranscriptFile {
            talk_id: None,
            words,
            audio: Some(wav),
        };
        std::fs::write(
            transcripts.join(format!("talk-{talk}.json")),
            serde_json::to_vec_pretty(&file).unwrap(),
        )
        .unwrap();
    }
    Fixture {
        root: root.to_path_buf(),
        corpus: root.join("corpus.jsonl"),
        transcripts,
        texts,
    }
}

/// Writes the talks, builds the corpus and saves its index.
pub fn build(root: &Path) -> Fixture {
    let fx = write_talks(root);
    let store = workflow::build_corpus(&fx.transcripts).unwrap();
    store.save(&fx.corpus).unwrap();
    let cfg = fx.config();
    let bundle = workflow::reindex(&store, &cfg).unwrap();
    bundle.save(&cfg.index_path().unwrap()).unwrap();
    fx
}
