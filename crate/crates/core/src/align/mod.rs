//! Structural alignment of a query sentence against retrieved sentences.
//!
//! Both sentences are reduced to coarse part-of-speech sequences and aligned
//! globally (Needleman-Wunsch). The alignment then carries the candidate's
//! technique labels over to query word positions.

mod tagger;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeler::TechniqueLabel;

pub use tagger::{PosTag, SuffixRule, Tagger};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("cannot align an empty tag sequence")]
    Empty,
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("alignment does not match sequence: {0}")]
    Mismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignScoring {
    #[serde(rename = "match")]
    pub match_score: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for AlignScoring {
    fn default() -> Self {
        Self {
            match_score: 2,
            mismatch: -1,
            gap: -1,
        }
    }
}

/// Pairs of (query index, candidate index); `None` is a gap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<(Option<usize>, Option<usize>)>,
    pub score: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Diag,
    // candidate word against a gap in the query
    QueryGap,
    // query word against a gap in the candidate
    CandGap,
}

/// Global alignment maximizing the total score. On equal scores the
/// traceback prefers a diagonal step, then a gap in the query, then a gap in
/// the candidate.
pub fn align_pos(
    query: &[PosTag],
    cand: &[PosTag],
    scoring: AlignScoring,
) -> Result<Alignment, AlignError> {
    if query.is_empty() || cand.is_empty() {
        return Err(AlignError::Empty);
    }
    let (n, m) = (query.len(), cand.len());
    let w = m + 1;
    let mut score = vec![0i32; (n + 1) * w];
    for i in 1..=n {
        score[i * w] = i as i32 * scoring.gap;
    }
    for (j, s) in score.iter_mut().enumerate().take(w).skip(1) {
        *s = j as i32 * scoring.gap;
    }
    let sub = |i: usize, j: usize| {
        if query[i - 1] == cand[j - 1] {
            scoring.match_score
        } else {
            scoring.mismatch
        }
    };
    for i in 1..=n {
        for j in 1..=m {
            let diag = score[(i - 1) * w + j - 1] + sub(i, j);
            let up = score[(i - 1) * w + j] + scoring.gap;
            let left = score[i * w + j - 1] + scoring.gap;
            score[i * w + j] = diag.max(up).max(left);
        }
    }

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = score[i * w + j];
        let step = if i > 0 && j > 0 && here == score[(i - 1) * w + j - 1] + sub(i, j) {
            Step::Diag
        } else if j > 0 && here == score[i * w + j - 1] + scoring.gap {
            Step::QueryGap
        } else {
            Step::CandGap
        };
        match step {
            Step::Diag => {
                pairs.push((Some(i - 1), Some(j - 1)));
                i -= 1;
                j -= 1;
            }
            Step::QueryGap => {
                pairs.push((None, Some(j - 1)));
                j -= 1;
            }
            Step::CandGap => {
                pairs.push((Some(i - 1), None));
                i -= 1;
            }
        }
    }
    pairs.reverse();
    Ok(Alignment {
        pairs,
        score: score[n * w + m],
    })
}

/// A query position's view of one retrieved sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Option<TechniqueLabel>", into = "Option<TechniqueLabel>")]
pub enum Projected {
    Aligned(TechniqueLabel),
    NotAligned,
}

impl Projected {
    pub fn label(&self) -> Option<&TechniqueLabel> {
        match self {
            Projected::Aligned(l) => Some(l),
            Projected::NotAligned => None,
        }
    }
}

impl From<Option<TechniqueLabel>> for Projected {
    fn from(v: Option<TechniqueLabel>) -> Self {
        v.map_or(Projected::NotAligned, Projected::Aligned)
    }
}

impl From<Projected> for Option<TechniqueLabel> {
    fn from(p: Projected) -> Self {
        p.label().copied()
    }
}

/// Carries candidate labels over to query positions through `alignment`.
pub fn project_labels(
    alignment: &Alignment,
    cand_labels: &[TechniqueLabel],
    query_len: usize,
) -> Result<Vec<Projected>, AlignError> {
    let mut out = vec![None; query_len];
    let mut next_q = 0;
    let mut next_c = 0;
    for &(q, c) in &alignment.pairs {
        if let Some(c) = c {
            if c != next_c || c >= cand_labels.len() {
                return Err(AlignError::Mismatch(format!(
                    "candidate index {c} out of order or beyond {} labels",
                    cand_labels.len()
                )));
            }
            next_c += 1;
        }
        if let Some(q) = q {
            if q != next_q || q >= query_len {
                return Err(AlignError::Mismatch(format!(
                    "query index {q} out of order or beyond length {query_len}"
                )));
            }
            next_q += 1;
            out[q] = Some(match c {
                Some(c) => Projected::Aligned(cand_labels[c]),
                None => Projected::NotAligned,
            });
        }
    }
    if next_q != query_len || next_c != cand_labels.len() {
        return Err(AlignError::Mismatch(format!(
            "alignment covers {next_q}/{query_len} query and {next_c}/{} candidate words",
            cand_labels.len()
        )));
    }
    Ok(out
        .into_iter()
        .map(|p| p.expect("every query index seen"))
        .collect())
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Best score over every global alignment, by exhaustive recursion.
    pub fn best_score(a: &[PosTag], b: &[PosTag], s: AlignScoring) -> i32 {
        if a.is_empty() {
            return b.len() as i32 * s.gap;
        }
        if b.is_empty() {
            return a.len() as i32 * s.gap;
        }
        let m = if a[0] == b[0] {
            s.match_score
        } else {
            s.mismatch
        };
        let diag = m + best_score(&a[1..], &b[1..], s);
        let ga = s.gap + best_score(&a[1..], b, s);
        let gb = s.gap + best_score(a, &b[1..], s);
        diag.max(ga).max(gb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::{Speed, Stress};
    use proptest::prelude::*;
    use PosTag::*;

    fn rescore(al: &Alignment, a: &[PosTag], b: &[PosTag], s: AlignScoring) -> i32 {
        al.pairs
            .iter()
            .map(|p| match *p {
                (Some(i), Some(j)) if a[i] == b[j] => s.match_score,
                (Some(_), Some(_)) => s.mismatch,
                _ => s.gap,
            })
            .sum()
    }

    #[test]
    fn identical_sequences_align_diagonally() {
        let a = [Det, Noun, Verb, Adv];
        let al = align_pos(&a, &a, AlignScoring::default()).unwrap();
        assert_eq!(al.score, 8);
        assert!(al
            .pairs
            .iter()
            .enumerate()
            .all(|(k, p)| *p == (Some(k), Some(k))));
    }

    #[test]
    fn one_matching_candidate_tag() {
        let q = [Det, Noun, Verb, Adv];
        let al = align_pos(&q, &[Verb], AlignScoring::default()).unwrap();
        assert_eq!(al.score, 2 - 3);
        let matched: Vec<_> = al
            .pairs
            .iter()
            .filter(|p| p.0.is_some() && p.1.is_some())
            .collect();
        assert_eq!(matched, vec![&(Some(2), Some(0))]);
    }

    #[test]
    fn inserted_adjective_goes_to_gap() {
        let q = [Det, Noun, Verb];
        let c = [Det, Adj, Noun, Verb];
        let s = AlignScoring::default();
        let al = align_pos(&q, &c, s).unwrap();
        assert_eq!(al.score, 5);
        assert_eq!(oracle::best_score(&q, &c, s), 5);
        assert_eq!(
            al.pairs,
            vec![
                (Some(0), Some(0)),
                (None, Some(1)),
                (Some(1), Some(2)),
                (Some(2), Some(3))
            ]
        );
        let faster = TechniqueLabel {
            speed: Speed::Faster,
            ..Default::default()
        };
        let stress = TechniqueLabel {
            stress: Stress::Stress,
            ..Default::default()
        };
        let labels = [TechniqueLabel::default(), faster, stress, faster];
        let p = project_labels(&al, &labels, 3).unwrap();
        assert_eq!(
            p,
            vec![
                Projected::Aligned(labels[0]),
                Projected::Aligned(labels[2]),
                Projected::Aligned(labels[3])
            ]
        );
    }

    #[test]
    fn projection_edge_cases() {
        let labels = [TechniqueLabel::default(); 3];
        let id = align_pos(
            &[Noun, Verb, Noun],
            &[Noun, Verb, Noun],
            AlignScoring::default(),
        )
        .unwrap();
        assert_eq!(
            project_labels(&id, &labels, 3).unwrap(),
            vec![Projected::Aligned(labels[0]); 3]
        );
        let gaps = Alignment {
            pairs: vec![(Some(0), None), (Some(1), None), (None, Some(0))],
            score: -3,
        };
        assert_eq!(
            project_labels(&gaps, &labels[..1], 2).unwrap(),
            vec![Projected::NotAligned; 2]
        );
        assert!(project_labels(&id, &labels[..2], 3).is_err());
        assert!(project_labels(&id, &labels, 4).is_err());
        assert!(align_pos(&[], &[Noun], AlignScoring::default()).is_err());
    }

    #[test]
    fn projected_serializes_as_nullable_label() {
        let v = vec![
            Projected::NotAligned,
            Projected::Aligned(TechniqueLabel::default()),
        ];
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with("[null,{"));
        let back: Vec<Projected> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    fn tags(max: usize) -> impl Strategy<Value = Vec<PosTag>> {
        proptest::collection::vec(
            prop_oneof![Just(Noun), Just(Verb), Just(Det), Just(Adj)],
            1..=max,
        )
    }

    proptest! {
        #[test]
        fn dp_matches_exhaustive(a in tags(6), b in tags(6)) {
            let s = AlignScoring::default();
            let al = align_pos(&a, &b, s).unwrap();
            prop_assert_eq!(al.score, oracle::best_score(&a, &b, s));
            prop_assert_eq!(rescore(&al, &a, &b, s), al.score);
            prop_assert_eq!(project_labels(&al, &vec![TechniqueLabel::default(); b.len()], a.len()).unwrap().len(), a.len());
        }

        #[test]
        fn self_alignment_is_identity(a in tags(12)) {
            let al = align_pos(&a, &a, AlignScoring::default()).unwrap();
            prop_assert_eq!(al.score, 2 * a.len() as i32);
            prop_assert!(al.pairs.iter().enumerate().all(|(k, p)| *p == (Some(k), Some(k))));
        }
    }
}
