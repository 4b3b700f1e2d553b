use cadence_core::align::Tagger;
use cadence_core::analysis::analyze_audio;
use cadence_core::corpus::{AudioSource, CorpusStore, TimedWord};
use cadence_core::dsp::synth::{tone_sequence, Segment};
use cadence_core::dsp::{encode_wav, AnalysisConfig, SampleBuffer};
use cadence_core::feedback::{Baseline, FocusTarget, PracticeSession, PracticeTarget};
use cadence_core::labeler::{TechniqueLabel, ThresholdConfig};
use cadence_core::recommend::{build_bundle, recommend, IndexBundle, IndexConfig, RecommendParams};
use cadence_core::Execution;

const RATE: u32 = 16_000;
const SENTENCES: [&str; 6] = [
    "We faced an enemy in the city.",
    "They built a bridge over the river.",
    "People found answers after the storm.",
    "Markets rose in the morning light.",
    "She sang a song to the crowd.",
    "We met an army near the gate.",
];

/// Renders sentences back to back. Word 0 is soft and low, word 3 is high
/// pitched, the last word is loud, word 2 is short; everything else is a
/// plain 100 Hz tone whose periods fit the 10 ms hop.
fn record(sentences: &[&str], flat: bool) -> (SampleBuffer, Vec<TimedWord>) {
    let mut segs = Vec::new();
    let mut words = Vec::new();
    let mut at = 0.1;
    for s in sentences {
        let ws: Vec<&str> = s.split_whitespace().collect();
        for (i, w) in ws.iter().enumerate() {
            let (len, f0, amp) = match (flat, i) {
                (true, _) => (0.3, 100.0, 0.45),
                (false, 0) => (0.3, 80.0, 0.2),
                (false, 2) => (0.08, 100.0, 0.45),
                (false, 3) => (0.3, 200.0, 0.45),
                (false, i) if i == ws.len() - 1 => (0.3, 100.0, 0.7),
                _ => (0.3, 100.0, 0.45),
            };
            segs.push(Segment::tone(at, at + len, f0, amp));
            words.push(TimedWord::new(*w, at, at + len));
            at += len + 0.05;
        }
        at += 0.4;
    }
    (tone_sequence(&segs, at + 0.2, RATE), words)
}

fn corpus(dir: &std::path::Path) -> CorpusStore {
    let mut store = CorpusStore::new();
    for (t, chunk) in SENTENCES.chunks(2).enumerate() {
        let (buf, words) = record(chunk, false);
        let path = dir.join(format!("t{t}.wav"));
        std::fs::write(&path, encode_wav(&buf)).unwrap();
        let src = AudioSource {
            path: path.to_string_lossy().into_owned(),
            sample_rate: RATE,
        };
        store
            .ingest_talk(&format!("t{t}"), &words, Some(&src))
            .unwrap();
    }
    store
}

fn index_config(e: Execution) -> IndexConfig {
    let mut cfg = IndexConfig::default();
    cfg.forest.execution = e;
    cfg
}

#[test]
fn recorded_query_retrieves_itself_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let store = corpus(dir.path());
    let analysis = AnalysisConfig::default();
    let seq = build_bundle(&store, &index_config(Execution::Sequential), &analysis).unwrap();
    let par = build_bundle(&store, &index_config(Execution::Parallel), &analysis).unwrap();
    assert_eq!(
        serde_json::to_string(&seq).unwrap(),
        serde_json::to_string(&par).unwrap()
    );

    let path = dir.path().join("c.index.json");
    seq.save(&path).unwrap();
    let bundle = IndexBundle::load(&path).unwrap();

    let (buf, words) = record(&SENTENCES[..1], false);
    let query = analyze_audio(
        &encode_wav(&buf),
        &words,
        &analysis,
        &ThresholdConfig::default(),
    )
    .unwrap()
    .remove(0);
    let params = RecommendParams {
        k: SENTENCES.len(),
        ..RecommendParams::default()
    };
    let tagger = Tagger::default();
    let a = recommend(&bundle, &tagger, &query, &params, Execution::Sequential).unwrap();
    let b = recommend(&bundle, &tagger, &query, &params, Execution::Parallel).unwrap();
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap()
    );
    assert_eq!(a.retrieved, SENTENCES.len());
    assert_eq!(a.examples[0].id, "t0:0");
    assert_eq!(a.examples[0].hamming, 0);
    assert!(a.examples.windows(2).all(|w| w[0].hamming <= w[1].hamming));
    // the recorded query carries the planted stress on word 3
    assert!(query.labels.labels[3].has(cadence_core::labeler::Technique::Stress));
}

#[test]
fn practice_converges_on_the_target_recording() {
    let (target_buf, words) = record(&SENTENCES[..1], false);
    let (flat_buf, flat_words) = record(&SENTENCES[..1], true);
    let analysis = AnalysisConfig::default();
    let thresholds = ThresholdConfig::default();
    let offline = |buf: &SampleBuffer, w: &[TimedWord]| {
        analyze_audio(&encode_wav(buf), w, &analysis, &thresholds)
            .unwrap()
            .remove(0)
            .labels
            .labels
    };
    let goal: Vec<TechniqueLabel> = offline(&target_buf, &words);
    let focus: Vec<FocusTarget> = goal
        .iter()
        .enumerate()
        .map(|(i, &l)| FocusTarget::full(i, l))
        .collect();
    let target = PracticeTarget {
        sentence_id: None,
        words: words.iter().map(|w| w.text.clone()).collect(),
        focus: focus.clone(),
    };
    let mut s =
        PracticeSession::new("p", target, thresholds.clone(), analysis.clone(), RATE).unwrap();
    assert_eq!(s.baseline(), Baseline::Empty);

    // word timings are relative to the attempt, which starts at the recording start
    s.push_buffer(&flat_buf).unwrap();
    let first = s.finish_attempt(Some(&flat_words)).unwrap();
    let achieved = offline(&flat_buf, &flat_words);
    let expected: usize = focus
        .iter()
        .map(|f| f.mismatches(&achieved[f.index]).len())
        .sum();
    assert_eq!(first.mismatch_count, expected);
    assert!(first.mismatch_count > 0);

    s.push_buffer(&target_buf).unwrap();
    let second = s.finish_attempt(Some(&words)).unwrap();
    assert_eq!(second.labels.labels, goal);
    assert_eq!(second.mismatch_count, 0);
    assert_eq!(
        second.delta_vs_previous,
        Some(-(first.mismatch_count as i64))
    );
    match s.baseline() {
        Baseline::Previous { attempt, frames } => {
            assert_eq!(attempt, 2);
            assert!(frames[0].t < 0.05);
        }
        b => panic!("expected the previous attempt, got {b:?}"),
    }
}
