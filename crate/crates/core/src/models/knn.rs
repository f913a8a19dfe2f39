//! Brute-force k-nearest-neighbours with Euclidean distance.
//!
//! Neighbours are ordered by (distance, training row index), so distance ties
//! at the k-th boundary keep the earlier training row. Vote ties go to the
//! lowest class index, i.e. the lowest SF.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub n_features: usize,
    pub n_classes: usize,
    pub k: usize,
    /// Row-major training matrix (already standardized when enabled).
    pub x: Vec<f64>,
    pub y: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest training rows to `query` as `(squared distance, row)`,
/// ascending.
pub fn nearest(x: &[f64], p: usize, query: &[f64], k: usize) -> Vec<(f64, u32)> {
    let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
    for (i, row) in x.chunks_exact(p).enumerate() {
        let d = dist2(row, query);
        if best.len() < k || d < best[best.len() - 1].0 {
            // rows arrive in index order, so equal distances queue behind
            let pos = best.partition_point(|e| e.0 <= d);
            best.insert(pos, (d, i as u32));
            best.truncate(k);
        }
    }
    best
}

/// Majority label among the first `k` neighbours.
pub fn vote(neighbours: &[(f64, u32)], y: &[usize], k: usize, n_classes: usize) -> usize {
    let mut counts = vec![0u32; n_classes];
    for &(_, i) in neighbours.iter().take(k) {
        counts[y[i as usize]] += 1;
    }
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate().skip(1) {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

impl Knn {
    pub fn predict_index(&self, query: &[f64]) -> usize {
        let nb = nearest(&self.x, self.n_features, query, self.k);
        vote(&nb, &self.y, self.k, self.n_classes)
    }

    /// Predictions for every `k` in `ks` from a single neighbour search per
    /// query. Returns one prediction vector per `k`.
    pub fn predict_for_ks(&self, queries: &[f64], ks: &[usize]) -> Vec<Vec<usize>> {
        let kmax = ks.iter().copied().max().unwrap_or(1);
        let per_query: Vec<Vec<usize>> = queries
            .par_chunks(self.n_features)
            .map(|q| {
                let nb = nearest(&self.x, self.n_features, q, kmax);
                ks.iter()
                    .map(|&k| vote(&nb, &self.y, k, self.n_classes))
                    .collect()
            })
            .collect();
        (0..ks.len())
            .map(|j| per_query.iter().map(|v| v[j]).collect())
            .collect()
    }
}
