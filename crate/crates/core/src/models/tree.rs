//! CART classification trees (Gini) and bagged random forests.
//!
//! Trees are grown with presorted index lists: every feature keeps its row
//! order sorted by value, and a split stably partitions each list, so no node
//! ever re-sorts. Split candidates are midpoints between consecutive distinct
//! values; `x <= threshold` goes left. A node becomes a leaf when it is pure
//! or when every feature is constant inside it.
//!
//! Candidate features are visited in an order shuffled by a generator keyed
//! on `(seed, tree index, node index)`. The first strictly best split wins,
//! so equal-gain ties are resolved by that shuffle and then by the lowest
//! threshold.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;

const NODE_STREAM: u64 = 0x6e6f_6465;
const BOOTSTRAP_STREAM: u64 = 0x626f_6f74;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: Vec<u32>,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
        counts: Vec<u32>,
    },
}

impl Node {
    /// Class counts (bootstrap-weighted) of the training rows reaching this node.
    pub fn counts(&self) -> &[u32] {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub n_features: usize,
    pub n_classes: usize,
    pub nodes: Vec<Node>,
}

fn argmax_lowest(counts: &[u32]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                leaf => return leaf,
            }
        }
    }

    /// Majority class of the reached leaf; ties go to the lowest class index.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax_lowest(self.leaf_for(x).counts())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Column-major training data with per-feature sorted row orders, shared by
/// every tree of a forest.
pub struct TrainingMatrix {
    cols: Vec<Vec<f64>>,
    y: Vec<usize>,
    n_classes: usize,
    sorted: Vec<Vec<u32>>,
}

impl TrainingMatrix {
    /// `x` is row-major with `p` columns; labels are class indices.
    pub fn new(x: &[f64], p: usize, y: &[usize], n_classes: usize) -> Self {
        let n = y.len();
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|j| (0..n).map(|i| x[i * p + j]).collect())
            .collect();
        let sorted = cols
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b))
                });
                idx
            })
            .collect();
        TrainingMatrix {
            cols,
            y: y.to_vec(),
            n_classes,
            sorted,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowParams {
    /// Non-constant features evaluated per split.
    pub max_features: usize,
    pub seed: u64,
    pub tree_index: u64,
}

struct Best {
    proxy: f64,
    feature: usize,
    threshold: f64,
}

/// Grow one tree on rows weighted by `weights` (bootstrap multiplicities;
/// zero excludes a row).
pub fn grow_tree(m: &TrainingMatrix, weights: &[u32], params: GrowParams) -> Tree {
    let p = m.n_features();
    let c = m.n_classes;
    let max_features = params.max_features.clamp(1, p.max(1));

    let mut orders: Vec<Vec<u32>> = m
        .sorted
        .iter()
        .map(|s| s.iter().copied().filter(|&r| weights[r as usize] > 0).collect())
        .collect();
    let active = orders.first().map_or(0, Vec::len);

    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    let mut stack: Vec<(usize, usize, usize)> = vec![(0, 0, active)];
    let mut goes_left = vec![false; m.n_rows()];
    let mut scratch: Vec<u32> = Vec::with_capacity(active);
    let mut perm: Vec<usize> = (0..p).collect();
    let mut cl = vec![0u64; c];
    let mut cr = vec![0u64; c];

    while let Some((id, start, end)) = stack.pop() {
        let mut counts = vec![0u32; c];
        for &r in &orders[0][start..end] {
            counts[m.y[r as usize]] += weights[r as usize];
        }
        let total: u64 = counts.iter().map(|&v| v as u64).sum();
        let pure = counts.iter().filter(|&&v| v > 0).count() <= 1;
        if pure {
            nodes[id] = Node::Leaf { counts };
            continue;
        }

        let mut rng = seed::rng(params.seed, &[NODE_STREAM, params.tree_index, id as u64]);
        perm.iter_mut().enumerate().for_each(|(i, f)| *f = i);
        let mut best: Option<Best> = None;
        let mut visited = 0;
        for i in 0..p {
            let j = rng.random_range(i..p);
            perm.swap(i, j);
            let f = perm[i];
            let seg = &orders[f][start..end];
            let col = &m.cols[f];
            if col[seg[0] as usize] == col[seg[seg.len() - 1] as usize] {
                continue;
            }
            visited += 1;

            cl.iter_mut().for_each(|v| *v = 0);
            for (r, &v) in cr.iter_mut().zip(&counts) {
                *r = v as u64;
            }
            let (mut nl, mut nr) = (0u64, total);
            let mut sql = 0u64;
            let mut sqr: u64 = cr.iter().map(|v| v * v).sum();
            for k in 0..seg.len() - 1 {
                let r = seg[k] as usize;
                let w = weights[r] as u64;
                let y = m.y[r];
                sql += 2 * cl[y] * w + w * w;
                cl[y] += w;
                sqr -= 2 * cr[y] * w - w * w;
                cr[y] -= w;
                nl += w;
                nr -= w;
                let (v, next) = (col[r], col[seg[k + 1] as usize]);
                if v < next {
                    let proxy = sql as f64 / nl as f64 + sqr as f64 / nr as f64;
                    if best.as_ref().is_none_or(|b| proxy > b.proxy) {
                        let mut thr = v + (next - v) * 0.5;
                        if !(thr < next) {
                            thr = v;
                        }
                        best = Some(Best {
                            proxy,
                            feature: f,
                            threshold: thr,
                        });
                    }
                }
            }
            if visited == max_features {
                break;
            }
        }

        let Some(best) = best else {
            nodes[id] = Node::Leaf { counts };
            continue;
        };

        let col = &m.cols[best.feature];
        for &r in &orders[0][start..end] {
            goes_left[r as usize] = col[r as usize] <= best.threshold;
        }
        let mut n_left = 0;
        for order in orders.iter_mut() {
            let seg = &mut order[start..end];
            scratch.clear();
            let mut w = 0;
            for k in 0..seg.len() {
                let r = seg[k];
                if goes_left[r as usize] {
                    seg[w] = r;
                    w += 1;
                } else {
                    scratch.push(r);
                }
            }
            seg[w..].copy_from_slice(&scratch);
            n_left = w;
        }

        let left = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[id] = Node::Split {
            feature: best.feature as u32,
            threshold: best.threshold,
            left: left as u32,
            right: left as u32 + 1,
            counts,
        };
        stack.push((left + 1, start + n_left, end));
        stack.push((left, start, start + n_left));
    }

    Tree {
        n_features: p,
        n_classes: c,
        nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    pub max_features: usize,
    pub seed: u64,
}

/// Bootstrap multiplicities for tree `t`: `n` draws with replacement.
pub fn bootstrap_weights(n: usize, seed: u64, t: u64) -> Vec<u32> {
    let mut rng = seed::rng(seed, &[BOOTSTRAP_STREAM, t]);
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1;
    }
    w
}

pub fn grow_forest(m: &TrainingMatrix, params: ForestParams) -> Forest {
    let n = m.n_rows();
    let trees = (0..params.n_estimators as u64)
        .into_par_iter()
        .map(|t| {
            let weights = if params.bootstrap {
                bootstrap_weights(n, params.seed, t)
            } else {
                vec![1; n]
            };
            grow_tree(
                m,
                &weights,
                GrowParams {
                    max_features: params.max_features,
                    seed: params.seed,
                    tree_index: t,
                },
            )
        })
        .collect();
    Forest {
        n_classes: m.n_classes,
        trees,
    }
}

impl Forest {
    /// Per-class vote counts over all trees.
    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict_index(x)] += 1;
        }
        votes
    }

    /// Hard majority vote; ties go to the lowest class index.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        argmax_lowest(&self.votes(x))
    }
}
