//! Semantic retrieval: sentence embeddings and an approximate nearest
//! neighbour forest over them.

mod embed;
mod forest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{fnv1a, Embedder, HashedTfIdfEmbedder};
pub use forest::{build_index, AnnIndex, ForestConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("text has no words to embed")]
    EmptyText,
    #[error("vector `{id}` has dimension {got}, expected {expected}")]
    Dimension {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid search config: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub id: String,
    pub vec: Vec<f64>,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
