//! FP-growth over integer items.

use std::collections::HashMap;

type Item = u32;

#[derive(Debug)]
struct Node {
    item: Option<Item>,
    count: usize,
    parent: Option<usize>,
    children: HashMap<Item, usize>,
}

/// Prefix tree with per-item node lists (the header table).
#[derive(Debug)]
struct FpTree {
    nodes: Vec<Node>,
    header: HashMap<Item, Vec<usize>>,
    // frequent items, most frequent first
    order: Vec<Item>,
}

impl FpTree {
    fn build(transactions: &[(Vec<Item>, usize)], min_count: usize) -> Self {
        let mut support: HashMap<Item, usize> = HashMap::new();
        for (items, count) in transactions {
            for &i in items {
                *support.entry(i).or_default() += count;
            }
        }
        let mut order: Vec<Item> = support
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(&i, _)| i)
            .collect();
        order.sort_by(|a, b| support[b].cmp(&support[a]).then(a.cmp(b)));
        let rank: HashMap<Item, usize> = order.iter().enumerate().map(|(r, &i)| (i, r)).collect();

        let mut tree = FpTree {
            nodes: vec![Node {
                item: None,
                count: 0,
                parent: None,
                children: HashMap::new(),
            }],
            header: HashMap::new(),
            order,
        };
        let mut path = Vec::new();
        for (items, count) in transactions {
            path.clear();
            path.extend(items.iter().copied().filter(|i| rank.contains_key(i)));
            path.sort_by_key(|i| rank[i]);
            path.dedup();
            tree.insert(&path, *count);
        }
        tree
    }

    fn insert(&mut self, path: &[Item], count: usize) {
        let mut cur = 0;
        for &item in path {
            cur = match self.nodes[cur].children.get(&item) {
                Some(&child) => child,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node {
                        item: Some(item),
                        count: 0,
                        parent: Some(cur),
                        children: HashMap::new(),
                    });
                    self.nodes[cur].children.insert(item, idx);
                    self.header.entry(item).or_default().push(idx);
                    idx
                }
            };
            self.nodes[cur].count += count;
        }
    }

    /// Root-ward prefix paths of every node holding `item`, with that node's count.
    fn prefix_paths(&self, item: Item) -> Vec<(Vec<Item>, usize)> {
        self.header
            .get(&item)
            .into_iter()
            .flatten()
            .filter_map(|&idx| {
                let node = &self.nodes[idx];
                let mut path = Vec::new();
                let mut cur = node.parent;
                while let Some(p) = cur {
                    if let Some(it) = self.nodes[p].item {
                        path.push(it);
                    }
                    cur = self.nodes[p].parent;
                }
                path.reverse();
                (!path.is_empty()).then_some((path, node.count))
            })
            .collect()
    }

    fn item_support(&self, item: Item) -> usize {
        self.header
            .get(&item)
            .map_or(0, |ns| ns.iter().map(|&n| self.nodes[n].count).sum())
    }
}

fn mine(
    tree: &FpTree,
    suffix: &[Item],
    min_count: usize,
    max_len: usize,
    out: &mut Vec<(Vec<Item>, usize)>,
) {
    for &item in tree.order.iter().rev() {
        let support = tree.item_support(item);
        if support < min_count {
            continue;
        }
        let mut itemset = Vec::with_capacity(suffix.len() + 1);
        itemset.push(item);
        itemset.extend_from_slice(suffix);
        if itemset.len() < max_len {
            let base = tree.prefix_paths(item);
            if !base.is_empty() {
                let cond = FpTree::build(&base, min_count);
                if !cond.order.is_empty() {
                    mine(&cond, &itemset, min_count, max_len, out);
                }
            }
        }
        let mut sorted = itemset;
        sorted.sort_unstable();
        out.push((sorted, support));
    }
}

/// Every itemset of at most `max_len` items whose weighted support reaches
/// `min_count`, with exact support. Items within a set are sorted ascending;
/// the output order is unspecified.
pub fn frequent_itemsets(
    transactions: &[(Vec<Item>, usize)],
    min_count: usize,
    max_len: usize,
) -> Vec<(Vec<Item>, usize)> {
    let min_count = min_count.max(1);
    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    let tree = FpTree::build(transactions, min_count);
    mine(&tree, &[], min_count, max_len, &mut out);
    out
}
