use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SearchError, SentenceVector};
use crate::exec::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub leaf_capacity: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            num_trees: 16,
            leaf_capacity: 32,
            seed: 42,
            execution: Execution::default(),
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.num_trees == 0 || self.leaf_capacity == 0 {
            return Err(SearchError::Config(
                "num_trees and leaf_capacity must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Vec<u32>),
    /// Points with `normal · x >= 0` go right.
    Split {
        normal: Vec<f32>,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
    root: u32,
}

/// Forest of random hyperplane trees over unit vectors. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnIndex {
    dim: usize,
    num_trees: usize,
    leaf_capacity: usize,
    seed: u64,
    ids: Vec<String>,
    vectors: Vec<f32>,
    trees: Vec<Tree>,
}

fn dot32(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn dot_mixed(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y).sum()
}

struct Builder<'a> {
    dim: usize,
    vectors: &'a [f32],
    leaf_capacity: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn vec(&self, i: u32) -> &[f32] {
        &self.vectors[i as usize * self.dim..(i as usize + 1) * self.dim]
    }

    fn split_normal(&mut self, items: &[u32]) -> Option<Vec<f32>> {
        for _ in 0..8 {
            let a = items[self.rng.gen_range(0..items.len())];
            let b = items[self.rng.gen_range(0..items.len())];
            let d: Vec<f64> = self
                .vec(a)
                .iter()
                .zip(self.vec(b))
                .map(|(&x, &y)| x as f64 - y as f64)
                .collect();
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return Some(d.iter().map(|x| (x / norm) as f32).collect());
            }
        }
        None
    }

    fn build(&mut self, mut items: Vec<u32>) -> u32 {
        if items.len() <= self.leaf_capacity {
            self.nodes.push(Node::Leaf(items));
            return (self.nodes.len() - 1) as u32;
        }
        let normal = match self.split_normal(&items) {
            Some(n) => n,
            None => vec![0.0; self.dim],
        };
        let (mut left, mut right): (Vec<u32>, Vec<u32>) = items
            .iter()
            .partition(|&&i| dot32(&normal, self.vec(i)) < 0.0);
        if left.is_empty() || right.is_empty() {
            // degenerate split (duplicates): halve at random so recursion terminates
            items.shuffle(&mut self.rng);
            right = items.split_off(items.len() / 2);
            left = items;
        }
        let left_id = self.build(left);
        let right_id = self.build(right);
        self.nodes.push(Node::Split {
            normal,
            left: left_id,
            right: right_id,
        });
        (self.nodes.len() - 1) as u32
    }
}

#[derive(PartialEq)]
struct Pending(f64, u32);

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(other.1.cmp(&self.1))
    }
}

/// Builds the forest. Trees are seeded independently from `(seed, tree)`,
/// so the result does not depend on the execution mode.
pub fn build_index(
    vectors: &[SentenceVector],
    dim: usize,
    cfg: &ForestConfig,
) -> Result<AnnIndex, SearchError> {
    cfg.validate()?;
    if dim == 0 {
        return Err(SearchError::Config("dimension must be positive".into()));
    }
    if let Some(v) = vectors.iter().find(|v| v.vec.len() != dim) {
        return Err(SearchError::Dimension {
            id: v.id.clone(),
            expected: dim,
            got: v.vec.len(),
        });
    }
    let flat: Vec<f32> = vectors
        .iter()
        .flat_map(|v| v.vec.iter().map(|&x| x as f32))
        .collect();
    let all: Vec<u32> = (0..vectors.len() as u32).collect();
    let trees = if vectors.is_empty() {
        Vec::new()
    } else {
        cfg.execution.map_range(0..cfg.num_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let mut b = Builder {
                dim,
                vectors: &flat,
                leaf_capacity: cfg.leaf_capacity,
                rng,
                nodes: Vec::new(),
            };
            let root = b.build(all.clone());
            Tree {
                nodes: b.nodes,
                root,
            }
        })
    };
    Ok(AnnIndex {
        dim,
        num_trees: cfg.num_trees,
        leaf_capacity: cfg.leaf_capacity,
        seed: cfg.seed,
        ids: vectors.iter().map(|v| v.id.clone()).collect(),
        vectors: flat,
        trees,
    })
}

impl AnnIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn num_trees(&self) -> usize {
        self.num_trees
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn default_budget(&self, k: usize) -> usize {
        4 * k * self.num_trees
    }

    /// Up to `k` items most similar to `q`, cosine descending then id.
    /// `budget` caps the number of tree nodes expanded across the forest;
    /// candidates found are re-scored exactly.
    pub fn query(
        &self,
        q: &[f64],
        k: usize,
        budget: Option<usize>,
    ) -> Result<Vec<(String, f64)>, SearchError> {
        if k == 0 {
            return Err(SearchError::Config("k must be at least 1".into()));
        }
        if q.len() != self.dim {
            return Err(SearchError::Dimension {
                id: "<query>".into(),
                expected: self.dim,
                got: q.len(),
            });
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let budget = budget.unwrap_or_else(|| self.default_budget(k)).max(1);
        let mut heap = BinaryHeap::new();
        // (tree, node) packed so one heap serves the whole forest
        for (t, tree) in self.trees.iter().enumerate() {
            heap.push((Pending(f64::INFINITY, tree.root), t));
        }
        let mut seen = HashSet::new();
        let mut popped = 0;
        while let Some((Pending(pri, node), t)) = heap.pop() {
            if popped >= budget && seen.len() >= k {
                break;
            }
            popped += 1;
            match &self.trees[t].nodes[node as usize] {
                Node::Leaf(items) => seen.extend(items.iter().copied()),
                Node::Split {
                    normal,
                    left,
                    right,
                } => {
                    let m = dot_mixed(normal, q);
                    heap.push((Pending(pri.min(m), *right), t));
                    heap.push((Pending(pri.min(-m), *left), t));
                }
            }
        }
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut scored: Vec<(String, f64)> = seen
            .into_iter()
            .map(|i| {
                let v = self.vector(i as usize);
                let vn = dot32(v, v).sqrt();
                let c = if vn == 0.0 || qn == 0.0 {
                    0.0
                } else {
                    dot_mixed(v, q) / (vn * qn)
                };
                (self.ids[i as usize].clone(), c)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }
}
