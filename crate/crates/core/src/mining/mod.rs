//! Frequent contiguous label combinations over aligned retrieved sentences.
//!
//! Every contiguous query span up to `max_n` words is a window. A retrieved
//! sentence contributes one transaction to a window when all of the window's
//! positions are aligned; the transaction's items are `(offset, label)`
//! pairs, so each full-length frequent itemset is one label tuple.

mod fpgrowth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::Projected;
use crate::exec::Execution;
use crate::labeler::TechniqueLabel;

pub use fpgrowth::frequent_itemsets;

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("projection {index} has length {got}, expected {expected}")]
    Length {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("invalid mining config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub min_support_ratio: f64,
    pub max_n: usize,
    /// Windows with fewer transactions than this are flagged.
    pub min_window_transactions: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            min_support_ratio: 0.05,
            max_n: 3,
            min_window_transactions: 5,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), MiningError> {
        if !(self.min_support_ratio > 0.0 && self.min_support_ratio <= 1.0) {
            return Err(MiningError::Config(format!(
                "min_support_ratio must be in (0, 1], got {}",
                self.min_support_ratio
            )));
        }
        if self.max_n == 0 {
            return Err(MiningError::Config("max_n must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

/// Per-word tally of how retrieved sentences cover a query position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub not_aligned: usize,
    pub none: usize,
    pub tech: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowTransactions {
    pub window: Window,
    pub tuples: Vec<Vec<TechniqueLabel>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionSet {
    pub query_len: usize,
    pub max_n: usize,
    /// Ordered by window length, then start.
    pub windows: Vec<WindowTransactions>,
    pub conditions: Vec<ConditionCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub labels: Vec<TechniqueLabel>,
    pub count: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: Window,
    pub transactions: usize,
    pub insufficient_support: bool,
    pub combos: Vec<Combo>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NgramSummary {
    pub windows: Vec<WindowSummary>,
    pub conditions: Vec<ConditionCounts>,
}

/// All contiguous windows of a query, by length then start.
pub fn windows(query_len: usize, max_n: usize) -> Vec<Window> {
    (1..=max_n.min(query_len))
        .flat_map(|len| (0..=query_len - len).map(move |start| Window { start, len }))
        .collect()
}

fn check_lengths(projections: &[Vec<Projected>], query_len: usize) -> Result<(), MiningError> {
    match projections.iter().position(|p| p.len() != query_len) {
        Some(index) => Err(MiningError::Length {
            index,
            got: projections[index].len(),
            expected: query_len,
        }),
        None => Ok(()),
    }
}

pub fn summarize_conditions(
    projections: &[Vec<Projected>],
    query_len: usize,
) -> Result<Vec<ConditionCounts>, MiningError> {
    check_lengths(projections, query_len)?;
    let mut out = vec![ConditionCounts::default(); query_len];
    for proj in projections {
        for (c, p) in out.iter_mut().zip(proj) {
            match p {
                Projected::NotAligned => c.not_aligned += 1,
                Projected::Aligned(l) if l.is_none() => c.none += 1,
                Projected::Aligned(_) => c.tech += 1,
            }
        }
    }
    Ok(out)
}

pub fn build_transactions(
    projections: &[Vec<Projected>],
    query_len: usize,
    max_n: usize,
) -> Result<TransactionSet, MiningError> {
    let conditions = summarize_conditions(projections, query_len)?;
    let windows = windows(query_len, max_n)
        .into_iter()
        .map(|window| {
            let tuples = projections
                .iter()
                .filter_map(|p| {
                    p[window.start..window.start + window.len]
                        .iter()
                        .map(|x| x.label().copied())
                        .collect::<Option<Vec<_>>>()
                })
                .collect();
            WindowTransactions { window, tuples }
        })
        .collect();
    Ok(TransactionSet {
        query_len,
        max_n,
        windows,
        conditions,
    })
}

/// Smallest count whose ratio over `total` passes `count / total >= ratio`,
/// evaluated in floating point exactly as the report does.
fn min_count(total: usize, ratio: f64) -> usize {
    let mut c = ((ratio * total as f64).floor() as usize).max(1);
    while c > 1 && (c - 1) as f64 / total as f64 >= ratio {
        c -= 1;
    }
    while c <= total && (c as f64 / total as f64) < ratio {
        c += 1;
    }
    c
}

fn sort_combos(combos: &mut [Combo]) {
    combos.sort_by(|a, b| {
        b.ratio
            .total_cmp(&a.ratio)
            .then_with(|| a.labels.cmp(&b.labels))
    });
}

fn mine_window(wt: &WindowTransactions, cfg: &MiningConfig) -> WindowSummary {
    let total = wt.tuples.len();
    let n = wt.window.len;
    let mut combos = Vec::new();
    if total > 0 {
        let card = TechniqueLabel::CARDINALITY;
        let tx: Vec<(Vec<u32>, usize)> = wt
            .tuples
            .iter()
            .map(|t| {
                let items = t
                    .iter()
                    .enumerate()
                    .map(|(off, l)| off as u32 * card + l.code())
                    .collect();
                (items, 1)
            })
            .collect();
        let min = min_count(total, cfg.min_support_ratio);
        for (items, count) in frequent_itemsets(&tx, min, n) {
            if items.len() != n {
                continue;
            }
            // items are sorted, and the offset prefix makes that positional order
            let labels = items
                .iter()
                .map(|&i| TechniqueLabel::from_code(i % card).expect("valid code"))
                .collect();
            combos.push(Combo {
                labels,
                count,
                ratio: count as f64 / total as f64,
            });
        }
        sort_combos(&mut combos);
    }
    WindowSummary {
        window: wt.window,
        transactions: total,
        insufficient_support: total < cfg.min_window_transactions,
        combos,
    }
}

pub fn mine_frequent(
    tx: &TransactionSet,
    cfg: &MiningConfig,
    exec: Execution,
) -> Result<NgramSummary, MiningError> {
    cfg.validate()?;
    Ok(NgramSummary {
        windows: exec.map(&tx.windows, |w| mine_window(w, cfg)),
        conditions: tx.conditions.clone(),
    })
}
