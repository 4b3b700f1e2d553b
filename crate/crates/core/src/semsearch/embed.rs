use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::SearchError;

/// Turns text into a unit-norm vector of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, SearchError>;
}

/// 64-bit FNV-1a. Stable across platforms and toolchains, unlike std's hasher.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Hashed feature ids with term counts: word unigrams plus character
/// trigrams of each word padded with boundary marks.
fn features(text: &str) -> BTreeMap<u64, u32> {
    let mut out = BTreeMap::new();
    for tok in tokens(text) {
        *out.entry(fnv1a(format!("w:{tok}").as_bytes())).or_default() += 1;
        let chars: Vec<char> = format!("<{tok}>").chars().collect();
        for tri in chars.windows(3) {
            let s: String = tri.iter().collect();
            *out.entry(fnv1a(format!("c:{s}").as_bytes())).or_default() += 1;
        }
    }
    out
}

/// TF-IDF over signed hashed features. Document frequencies are fitted on
/// a corpus; features never seen there get the largest idf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashedTfIdfEmbedder {
    dim: usize,
    doc_count: u64,
    df: BTreeMap<u64, u32>,
}

impl HashedTfIdfEmbedder {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Result<Self, SearchError> {
        if dim == 0 {
            return Err(SearchError::Config("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            doc_count: 0,
            df: BTreeMap::new(),
        })
    }

    pub fn fit<S: AsRef<str>>(dim: usize, docs: &[S]) -> Result<Self, SearchError> {
        let mut e = Self::new(dim)?;
        for d in docs {
            let feats: BTreeSet<u64> = features(d.as_ref()).into_keys().collect();
            for f in feats {
                *e.df.entry(f).or_default() += 1;
            }
            e.doc_count += 1;
        }
        Ok(e)
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn idf(&self, feature: u64) -> f64 {
        let df = self.df.get(&feature).copied().unwrap_or(0) as f64;
        ((1.0 + self.doc_count as f64) / (1.0 + df)).ln() + 1.0
    }
}

impl Embedder for HashedTfIdfEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, SearchError> {
        let feats = features(text);
        if feats.is_empty() {
            return Err(SearchError::EmptyText);
        }
        let mut v = vec![0.0; self.dim];
        for (f, tf) in feats {
            let sign = if f >> 63 == 1 { -1.0 } else { 1.0 };
            v[(f % self.dim as u64) as usize] += sign * tf as f64 * self.idf(f);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // every feature cancelled out; fall back to a fixed direction
            v[0] = 1.0;
            return Ok(v);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_case_folded_unit() {
        let e = HashedTfIdfEmbedder::new(256).unwrap();
        let a = e.embed("a b c").unwrap();
        let b = e.embed("A b C").unwrap();
        assert!((cos(&a, &b) - 1.0).abs() < 1e-12);
        assert!((cos(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(a, e.embed("a b c").unwrap());
    }

    #[test]
    fn related_text_scores_higher() {
        let docs = [
            "the cat sat",
            "the dog ran",
            "quarterly revenue grew",
            "the market fell",
        ];
        let e = HashedTfIdfEmbedder::fit(256, &docs).unwrap();
        let q = e.embed("the cat sat").unwrap();
        let near = e.embed("the cat sat down").unwrap();
        let far = e.embed("quarterly revenue grew").unwrap();
        assert!(cos(&q, &near) > cos(&q, &far));
    }

    #[test]
    fn empty_text_rejected() {
        let e = HashedTfIdfEmbedder::new(16).unwrap();
        assert_eq!(e.embed("   "), Err(SearchError::EmptyText));
        assert_eq!(e.embed(""), Err(SearchError::EmptyText));
        assert!(HashedTfIdfEmbedder::new(0).is_err());
    }

    #[test]
    fn idf_prefers_rare_features() {
        let e = HashedTfIdfEmbedder::fit(64, &["the cat", "the dog", "the end"]).unwrap();
        let the = fnv1a(b"w:the");
        let cat = fnv1a(b"w:cat");
        assert!(e.idf(cat) > e.idf(the));
        assert!(e.idf(fnv1a(b"w:unseen")) > e.idf(cat));
        assert!((e.idf(the) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_roundtrip() {
        let e = HashedTfIdfEmbedder::fit(32, &["one two", "two three"]).unwrap();
        let back: HashedTfIdfEmbedder =
            serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}
