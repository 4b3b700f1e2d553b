//! Ranks retrieved sentences by how closely their projected technique
//! sequence matches the query's, and filters them by technique.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::Projected;
use crate::labeler::Technique;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("sequence lengths differ: {0} vs {1}")]
    Length(usize, usize),
}

/// Positions whose composite labels differ. `NotAligned` only equals itself.
pub fn hamming(a: &[Projected], b: &[Projected]) -> Result<usize, RankError> {
    if a.len() != b.len() {
        return Err(RankError::Length(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub text: String,
    pub labels: Vec<Projected>,
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedExample {
    pub id: String,
    pub text: String,
    pub labels: Vec<Projected>,
    pub hamming: usize,
    pub cosine: f64,
    pub rank: usize,
}

/// Hamming ascending, then cosine descending, then id ascending. Ranks are
/// 1-based and unique.
pub fn rank_examples(
    query: &[Projected],
    candidates: Vec<Candidate>,
) -> Result<Vec<RankedExample>, RankError> {
    let mut out = candidates
        .into_iter()
        .map(|c| {
            Ok(RankedExample {
                hamming: hamming(query, &c.labels)?,
                id: c.id,
                text: c.text,
                labels: c.labels,
                cosine: c.cosine,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>, RankError>>()?;
    out.sort_by(|a, b| {
        a.hamming
            .cmp(&b.hamming)
            .then_with(|| b.cosine.total_cmp(&a.cosine))
            .then_with(|| a.id.cmp(&b.id))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    #[default]
    Any,
    All,
}

/// Keeps examples using any (or all) of `required` at some aligned
/// position. An empty requirement keeps everything.
pub fn filter_by_techniques(
    ranked: Vec<RankedExample>,
    required: &BTreeSet<Technique>,
    mode: FilterMode,
) -> Vec<RankedExample> {
    if required.is_empty() {
        return ranked;
    }
    ranked
        .into_iter()
        .filter(|r| {
            let present = |t: &Technique| {
                r.labels
                    .iter()
                    .any(|p| p.label().is_some_and(|l| l.has(*t)))
            };
            match mode {
                FilterMode::Any => required.iter().any(present),
                FilterMode::All => required.iter().all(present),
            }
        })
        .collect()
}
