//! Maps per-word acoustics onto the nine modulation categories.
//!
//! Each word gets a composite [`TechniqueLabel`] with four independent
//! channels. Volume, pitch and speed compare a word against its sentence,
//! either by ratio to the sentence mean or by distance in population standard
//! deviations; both comparisons are strict. Pause comes from the silence
//! after the word, banded left-inclusively.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::WordAcoustics;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("negative gap {0} s")]
    NegativeGap(f64),
    #[error("{channel} sentence mean must be positive, got {mean}")]
    NonPositiveMean { channel: &'static str, mean: f64 },
    #[error("word {index}: {source}")]
    AtWord {
        index: usize,
        #[source]
        source: Box<LabelError>,
    },
    #[error("cannot label an empty sentence")]
    Empty,
    #[error("threshold config: {0}")]
    Config(String),
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    Faster,
    Slower,
    #[default]
    None,
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Volume {
    Louder,
    Softer,
    #[default]
    None,
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Stress {
    Stress,
    #[default]
    None,
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Pause {
    Brief,
    Master,
    Long,
    #[default]
    None,
}

/// The four label channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Speed,
    Volume,
    Stress,
    Pause,
}

/// A single non-`none` channel value; the filter vocabulary of the
/// technique table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Faster,
    Slower,
    Louder,
    Softer,
    Stress,
    Brief,
    Master,
    Long,
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::Faster,
        Technique::Slower,
        Technique::Louder,
        Technique::Softer,
        Technique::Stress,
        Technique::Brief,
        Technique::Master,
        Technique::Long,
    ];

    pub fn channel(self) -> Channel {
        match self {
            Technique::Faster | Technique::Slower => Channel::Speed,
            Technique::Louder | Technique::Softer => Channel::Volume,
            Technique::Stress => Channel::Stress,
            Technique::Brief | Technique::Master | Technique::Long => Channel::Pause,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

impl std::str::FromStr for Technique {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| format!("unknown technique `{s}`"))
    }
}

/// Composite per-word label, one value per channel.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct TechniqueLabel {
    pub speed: Speed,
    pub volume: Volume,
    pub stress: Stress,
    pub pause_after: Pause,
}

impl TechniqueLabel {
    /// Number of distinct labels; `code()` is a bijection onto `0..CARDINALITY`.
    pub const CARDINALITY: u32 = 3 * 3 * 2 * 4;

    pub fn is_none(&self) -> bool {
        *self == TechniqueLabel::default()
    }

    pub fn techniques(&self) -> Vec<Technique> {
        let mut out = Vec::new();
        match self.speed {
            Speed::Faster => out.push(Technique::Faster),
            Speed::Slower => out.push(Technique::Slower),
            Speed::None => {}
        }
        match self.volume {
            Volume::Louder => out.push(Technique::Louder),
            Volume::Softer => out.push(Technique::Softer),
            Volume::None => {}
        }
        if self.stress == Stress::Stress {
            out.push(Technique::Stress);
        }
        match self.pause_after {
            Pause::Brief => out.push(Technique::Brief),
            Pause::Master => out.push(Technique::Master),
            Pause::Long => out.push(Technique::Long),
            Pause::None => {}
        }
        out
    }

    pub fn has(&self, t: Technique) -> bool {
        self.techniques().contains(&t)
    }

    /// Builds a label from a set of techniques; later values on the same
    /// channel overwrite earlier ones.
    pub fn from_techniques(ts: &[Technique]) -> Self {
        let mut l = TechniqueLabel::default();
        for t in ts {
            match t {
                Technique::Faster => l.speed = Speed::Faster,
                Technique::Slower => l.speed = Speed::Slower,
                Technique::Louder => l.volume = Volume::Louder,
                Technique::Softer => l.volume = Volume::Softer,
                Technique::Stress => l.stress = Stress::Stress,
                Technique::Brief => l.pause_after = Pause::Brief,
                Technique::Master => l.pause_after = Pause::Master,
                Technique::Long => l.pause_after = Pause::Long,
            }
        }
        l
    }

    pub fn code(&self) -> u32 {
        let s = self.speed as u32;
        let v = self.volume as u32;
        let t = self.stress as u32;
        let p = self.pause_after as u32;
        ((s * 3 + v) * 2 + t) * 4 + p
    }

    pub fn from_code(code: u32) -> Option<Self> {
        if code >= Self::CARDINALITY {
            return None;
        }
        let p = code % 4;
        let t = (code / 4) % 2;
        let v = (code / 8) % 3;
        let s = code / 24;
        Some(TechniqueLabel {
            speed: [Speed::Faster, Speed::Slower, Speed::None][s as usize],
            volume: [Volume::Louder, Volume::Softer, Volume::None][v as usize],
            stress: [Stress::Stress, Stress::None][t as usize],
            pause_after: [Pause::Brief, Pause::Master, Pause::Long, Pause::None][p as usize],
        })
    }

    /// Channels on which `self` and `other` disagree.
    pub fn differing_channels(&self, other: &TechniqueLabel) -> Vec<Channel> {
        let mut out = Vec::new();
        if self.speed != other.speed {
            out.push(Channel::Speed);
        }
        if self.volume != other.volume {
            out.push(Channel::Volume);
        }
        if self.stress != other.stress {
            out.push(Channel::Stress);
        }
        if self.pause_after != other.pause_after {
            out.push(Channel::Pause);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSequence {
    pub sentence_id: String,
    pub labels: Vec<TechniqueLabel>,
}

/// Half-open band `[min, max)`; `max = None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauseBand {
    pub min: f64,
    pub max: Option<f64>,
}

impl PauseBand {
    pub fn contains(&self, gap: f64) -> bool {
        gap >= self.min && self.max.is_none_or(|m| gap < m)
    }
}

/// Labeling thresholds; every field is individually overridable in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub pause_brief: PauseBand,
    pub pause_master: PauseBand,
    pub pause_long: PauseBand,
    pub vol_louder_ratio: f64,
    pub vol_softer_ratio: f64,
    pub vol_sd: f64,
    pub pitch_ratio: f64,
    pub pitch_sd: f64,
    pub speed_faster_ratio: f64,
    pub speed_slower_ratio: f64,
    pub speed_sd: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            pause_brief: PauseBand {
                min: 0.5,
                max: Some(1.0),
            },
            pause_master: PauseBand {
                min: 1.0,
                max: Some(2.5),
            },
            pause_long: PauseBand {
                min: 2.5,
                max: None,
            },
            vol_louder_ratio: 1.1,
            vol_softer_ratio: 0.67,
            vol_sd: 1.0,
            pitch_ratio: 1.25,
            pitch_sd: 1.0,
            speed_faster_ratio: 1.5,
            speed_slower_ratio: 0.67,
            speed_sd: 1.0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), LabelError> {
        let positive = [
            ("vol_louder_ratio", self.vol_louder_ratio),
            ("vol_softer_ratio", self.vol_softer_ratio),
            ("vol_sd", self.vol_sd),
            ("pitch_ratio", self.pitch_ratio),
            ("pitch_sd", self.pitch_sd),
            ("speed_faster_ratio", self.speed_faster_ratio),
            ("speed_slower_ratio", self.speed_slower_ratio),
            ("speed_sd", self.speed_sd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabelError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let bands = [self.pause_brief, self.pause_master, self.pause_long];
        let mut floor = 0.0;
        for (i, b) in bands.iter().enumerate() {
            let upper = b.max.unwrap_or(f64::INFINITY);
            let last = i == bands.len() - 1;
            if !(b.min >= floor && b.min < upper) || (!last && b.max.is_none()) {
                return Err(LabelError::Config(
                    "pause bands must be ordered, disjoint and non-empty".into(),
                ));
            }
            floor = upper;
        }
        Ok(())
    }
}

pub fn label_pause(gap_after: f64, cfg: &ThresholdConfig) -> Result<Pause, LabelError> {
    if gap_after < 0.0 || gap_after.is_nan() {
        return Err(LabelError::NegativeGap(gap_after));
    }
    Ok(if cfg.pause_long.contains(gap_after) {
        Pause::Long
    } else if cfg.pause_master.contains(gap_after) {
        Pause::Master
    } else if cfg.pause_brief.contains(gap_after) {
        Pause::Brief
    } else {
        Pause::None
    })
}

/// SD below this fraction of the mean is rounding noise from averaging
/// identical values, not real spread.
fn has_spread(mean: f64, sd: f64) -> bool {
    sd > 1e-9 * mean.abs()
}

/// Strict `deviation > k·sd` with a 1e-9 relative margin: in a two-word
/// sentence both words sit exactly one SD out, and rounding must not decide.
fn beyond_sd(deviation: f64, k: f64, sd: f64) -> bool {
    deviation > k * sd * (1.0 + 1e-9)
}

/// Two-sided ratio/SD test shared by volume and speed. Returns
/// (high, low); when both fire the ratio test decides.
fn two_sided(
    word: f64,
    mean: f64,
    sd: f64,
    high_ratio: f64,
    low_ratio: f64,
    k: f64,
) -> (bool, bool) {
    let high_by_ratio = word > high_ratio * mean;
    let low_by_ratio = word < low_ratio * mean;
    let spread = has_spread(mean, sd);
    let high = high_by_ratio || (spread && beyond_sd(word - mean, k, sd));
    let low = low_by_ratio || (spread && beyond_sd(mean - word, k, sd));
    match (high, low) {
        (true, true) if high_by_ratio => (true, false),
        (true, true) if low_by_ratio => (false, true),
        (true, true) => (false, false),
        other => other,
    }
}

pub fn label_volume(
    word_rms: f64,
    sentence_mean: f64,
    sentence_sd: f64,
    cfg: &ThresholdConfig,
) -> Result<Volume, LabelError> {
    if sentence_mean.is_nan() || sentence_mean <= 0.0 {
        return Err(LabelError::NonPositiveMean {
            channel: "volume",
            mean: sentence_mean,
        });
    }
    Ok(
        match two_sided(
            word_rms,
            sentence_mean,
            sentence_sd,
            cfg.vol_louder_ratio,
            cfg.vol_softer_ratio,
            cfg.vol_sd,
        ) {
            (true, _) => Volume::Louder,
            (_, true) => Volume::Softer,
            _ => Volume::None,
        },
    )
}

/// Stress when the word's mean f0 exceeds `pitch_ratio × mean` or
/// `mean + pitch_sd × sd`. Unvoiced words are never stressed.
pub fn label_pitch(
    word_f0: f64,
    sentence_mean: f64,
    sentence_sd: f64,
    cfg: &ThresholdConfig,
) -> Stress {
    if word_f0 <= 0.0 || sentence_mean <= 0.0 {
        return Stress::None;
    }
    let by_sd = has_spread(sentence_mean, sentence_sd)
        && beyond_sd(word_f0 - sentence_mean, cfg.pitch_sd, sentence_sd);
    if word_f0 > cfg.pitch_ratio * sentence_mean || by_sd {
        Stress::Stress
    } else {
        Stress::None
    }
}

pub fn label_speed(
    word_spm: f64,
    sentence_mean: f64,
    sentence_sd: f64,
    cfg: &ThresholdConfig,
) -> Result<Speed, LabelError> {
    if sentence_mean.is_nan() || sentence_mean <= 0.0 {
        return Err(LabelError::NonPositiveMean {
            channel: "speed",
            mean: sentence_mean,
        });
    }
    Ok(
        match two_sided(
            word_spm,
            sentence_mean,
            sentence_sd,
            cfg.speed_faster_ratio,
            cfg.speed_slower_ratio,
            cfg.speed_sd,
        ) {
            (true, _) => Speed::Faster,
            (_, true) => Speed::Slower,
            _ => Speed::None,
        },
    )
}

/// Population mean and standard deviation.
pub fn population_stats(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.into_iter().collect();
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn at(index: usize) -> impl Fn(LabelError) -> LabelError {
    move |e| LabelError::AtWord {
        index,
        source: Box::new(e),
    }
}

/// Labels every word of a sentence against that sentence's statistics.
///
/// Pitch statistics use voiced words only. A channel whose sentence mean is
/// zero (an all-silent sentence) is left `none` for every word, and the
/// sentence-final word never carries a pause.
pub fn label_sentence(
    sentence_id: &str,
    acoustics: &[WordAcoustics],
    cfg: &ThresholdConfig,
) -> Result<TechniqueSequence, LabelError> {
    if acoustics.is_empty() {
        return Err(LabelError::Empty);
    }
    let (vol_mean, vol_sd) = population_stats(acoustics.iter().map(|a| a.mean_volume));
    let (spm_mean, spm_sd) = population_stats(acoustics.iter().map(|a| a.spm));
    let (f0_mean, f0_sd) =
        population_stats(acoustics.iter().map(|a| a.mean_f0).filter(|&f| f > 0.0));
    let last = acoustics.len() - 1;

    let labels = acoustics
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let volume = if vol_mean > 0.0 {
                label_volume(a.mean_volume, vol_mean, vol_sd, cfg).map_err(at(i))?
            } else {
                Volume::None
            };
            let speed = if spm_mean > 0.0 {
                label_speed(a.spm, spm_mean, spm_sd, cfg).map_err(at(i))?
            } else {
                Speed::None
            };
            let pause_after = if i == last {
                Pause::None
            } else {
                label_pause(a.gap_after, cfg).map_err(at(i))?
            };
            Ok(TechniqueLabel {
                speed,
                volume,
                stress: label_pitch(a.mean_f0, f0_mean, f0_sd, cfg),
                pause_after,
            })
        })
        .collect::<Result<Vec<_>, LabelError>>()?;
    Ok(TechniqueSequence {
        sentence_id: sentence_id.to_string(),
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn word(vol: f64, f0: f64, spm: f64, gap: f64) -> WordAcoustics {
        WordAcoustics {
            mean_volume: vol,
            mean_f0: f0,
            f0_sd: 0.0,
            duration: 0.3,
            syllables: 1,
            spm,
            gap_after: gap,
        }
    }

    #[test]
    fn pause_bands() {
        let cfg = ThresholdConfig::default();
        assert_eq!(label_pause(0.7, &cfg), Ok(Pause::Brief));
        assert_eq!(label_pause(1.0, &cfg), Ok(Pause::Master));
        assert_eq!(label_pause(0.3, &cfg), Ok(Pause::None));
        assert_eq!(label_pause(2.5, &cfg), Ok(Pause::Long));
        assert!(matches!(
            label_pause(-0.1, &cfg),
            Err(LabelError::NegativeGap(_))
        ));
    }

    #[test]
    fn volume_examples() {
        let cfg = ThresholdConfig::default();
        assert_eq!(label_volume(1.2, 1.0, 10.0, &cfg), Ok(Volume::Louder));
        assert_eq!(label_volume(1.0, 1.0, 0.0, &cfg), Ok(Volume::None));
        assert_eq!(label_volume(0.5, 1.0, 10.0, &cfg), Ok(Volume::Softer));
        assert_eq!(label_volume(1.05, 1.0, 0.04, &cfg), Ok(Volume::Louder));
        assert!(label_volume(1.0, 0.0, 1.0, &cfg).is_err());
    }

    #[test]
    fn ratio_precedence_when_both_fire() {
        // louder ratio below the softer ratio makes both branches fire
        let cfg = ThresholdConfig {
            vol_louder_ratio: 0.5,
            vol_softer_ratio: 0.9,
            ..ThresholdConfig::default()
        };
        assert_eq!(label_volume(0.8, 1.0, 10.0, &cfg), Ok(Volume::Louder));
    }

    #[test]
    fn pitch_examples() {
        let cfg = ThresholdConfig::default();
        assert_eq!(label_pitch(130.0, 100.0, 50.0, &cfg), Stress::Stress);
        assert_eq!(label_pitch(100.0, 100.0, 0.0, &cfg), Stress::None);
        assert_eq!(label_pitch(0.0, 100.0, 1e-6, &cfg), Stress::None);
        assert_eq!(label_pitch(111.0, 100.0, 10.0, &cfg), Stress::Stress);
    }

    #[test]
    fn speed_examples() {
        let cfg = ThresholdConfig::default();
        assert_eq!(label_speed(160.0, 100.0, 100.0, &cfg), Ok(Speed::Faster));
        assert_eq!(label_speed(60.0, 100.0, 100.0, &cfg), Ok(Speed::Slower));
        assert_eq!(label_speed(100.0, 100.0, 0.0, &cfg), Ok(Speed::None));
    }

    #[test]
    fn single_word_sentence_is_unlabeled() {
        let seq =
            label_sentence("s", &[word(0.3, 150.0, 200.0, 0.0)], &Default::default()).unwrap();
        assert!(seq.labels[0].is_none());
    }

    #[test]
    fn identical_words_are_unlabeled() {
        let ws = vec![word(0.3, 150.0, 200.0, 0.1); 6];
        let seq = label_sentence("s", &ws, &Default::default()).unwrap();
        assert!(seq.labels.iter().all(TechniqueLabel::is_none));
    }

    #[test]
    fn loud_fast_middle_word() {
        // means: vol 0.4/3*... computed by hand:
        // vol [0.2, 0.4, 0.2] mean 0.2667, 1.1*mean 0.2933 < 0.4 -> louder
        //   0.2 vs 0.67*mean 0.1787 no; sd 0.0943, mean-sd 0.1724 no -> none
        // spm [200, 320, 200] mean 240, 0.4 -> 320 > 1.5*240=360? no;
        //   sd 56.57, mean+sd 296.6 < 320 -> faster; 200 > 240-56.57 -> none
        let ws = [
            word(0.2, 150.0, 200.0, 0.1),
            word(0.4, 150.0, 320.0, 0.1),
            word(0.2, 150.0, 200.0, 0.0),
        ];
        let seq = label_sentence("s", &ws, &Default::default()).unwrap();
        assert_eq!(seq.labels[1].volume, Volume::Louder);
        assert_eq!(seq.labels[1].speed, Speed::Faster);
        for i in [0, 2] {
            assert_eq!(seq.labels[i].volume, Volume::None);
            assert_eq!(seq.labels[i].speed, Speed::None);
        }
    }

    #[test]
    fn silent_sentence_is_unlabeled() {
        let ws = vec![word(0.0, 0.0, 200.0, 0.0); 3];
        let seq = label_sentence("s", &ws, &Default::default()).unwrap();
        assert!(seq.labels.iter().all(TechniqueLabel::is_none));
    }

    #[test]
    fn final_word_has_no_pause() {
        let ws = [word(0.2, 0.0, 200.0, 0.8), word(0.2, 0.0, 200.0, 3.0)];
        let seq = label_sentence("s", &ws, &Default::default()).unwrap();
        assert_eq!(seq.labels[0].pause_after, Pause::Brief);
        assert_eq!(seq.labels[1].pause_after, Pause::None);
    }

    #[test]
    fn config_validation_and_partial_json() {
        assert!(ThresholdConfig::default().validate().is_ok());
        let cfg: ThresholdConfig = serde_json::from_str(r#"{"vol_louder_ratio": 1.3}"#).unwrap();
        assert_eq!(cfg.vol_louder_ratio, 1.3);
        assert_eq!(cfg.pitch_ratio, 1.25);
        let bad = ThresholdConfig {
            pause_master: PauseBand {
                min: 0.8,
                max: Some(2.5),
            },
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ThresholdConfig {
            speed_sd: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn wire_vocabulary() {
        let l = TechniqueLabel {
            speed: Speed::Faster,
            volume: Volume::None,
            stress: Stress::Stress,
            pause_after: Pause::Brief,
        };
        assert_eq!(
            serde_json::to_string(&l).unwrap(),
            r#"{"speed":"faster","volume":"none","stress":"stress","pause_after":"brief"}"#
        );
        assert_eq!("Faster".parse::<Technique>(), Ok(Technique::Faster));
        assert_eq!(Technique::Master.to_string(), "master");
    }

    #[test]
    fn label_codes_are_a_bijection() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..TechniqueLabel::CARDINALITY {
            let l = TechniqueLabel::from_code(c).unwrap();
            assert_eq!(l.code(), c);
            assert!(seen.insert(l));
        }
        assert!(TechniqueLabel::from_code(72).is_none());
        assert_eq!(
            TechniqueLabel::from_techniques(&TechniqueLabel::default().techniques()),
            TechniqueLabel::default()
        );
    }

    fn arb_words() -> impl Strategy<Value = Vec<WordAcoustics>> {
        proptest::collection::vec(
            (
                0.01f64..1.0,
                prop_oneof![Just(0.0), 80.0f64..300.0],
                60.0f64..600.0,
                0.0f64..3.0,
            )
                .prop_map(|(v, f, s, g)| word(v, f, s, g)),
            1..12,
        )
    }

    proptest! {
        #[test]
        fn volume_scale_invariant(ws in arb_words(), c in 0.01f64..100.0) {
            let cfg = ThresholdConfig::default();
            let a = label_sentence("s", &ws, &cfg).unwrap();
            let scaled: Vec<_> = ws.iter().map(|w| WordAcoustics { mean_volume: w.mean_volume * c, ..w.clone() }).collect();
            let b = label_sentence("s", &scaled, &cfg).unwrap();
            // ratios are exact under scaling; allow for rounding at a boundary
            let flips = a.labels.iter().zip(&b.labels).filter(|(x, y)| x.volume != y.volume).count();
            prop_assert!(flips == 0, "{} volume labels changed", flips);
        }

        #[test]
        fn channels_are_independent(ws in arb_words(), idx in 0usize..12, v in 0.01f64..1.0) {
            let cfg = ThresholdConfig::default();
            let i = idx % ws.len();
            let a = label_sentence("s", &ws, &cfg).unwrap();
            let mut changed = ws.clone();
            changed[i].mean_volume = v;
            let b = label_sentence("s", &changed, &cfg).unwrap();
            for (x, y) in a.labels.iter().zip(&b.labels) {
                prop_assert_eq!(x.speed, y.speed);
                prop_assert_eq!(x.stress, y.stress);
                prop_assert_eq!(x.pause_after, y.pause_after);
            }
        }

        #[test]
        fn louder_is_monotone(mean in 0.05f64..1.0, sd in 0.0f64..0.5, a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let cfg = ThresholdConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rank = |v: Volume| match v { Volume::Softer => 0, Volume::None => 1, Volume::Louder => 2 };
            let x = label_volume(lo, mean, sd, &cfg).unwrap();
            let y = label_volume(hi, mean, sd, &cfg).unwrap();
            prop_assert!(rank(x) <= rank(y));
        }

        #[test]
        fn deterministic(ws in arb_words()) {
            let cfg = ThresholdConfig::default();
            prop_assert_eq!(label_sentence("s", &ws, &cfg).unwrap(), label_sentence("s", &ws, &cfg).unwrap());
        }
    }
}
