//! The k most probable subsets of independent keep/drop choices.
//!
//! Choosing each item independently with probability `w_i` makes the cost of
//! a subset separable, so the k best subsets are the k smallest sums of the
//! per-item cost differences relative to the best subset. These are
//! enumerated with a heap over sorted differences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub const WEIGHT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSolution {
    /// Indices of kept items, ascending.
    pub kept: Vec<usize>,
    /// `-ln(prod_kept w * prod_dropped (1 - w))`.
    pub cost: f64,
}

struct Entry {
    sum: f64,
    seq: usize,
    flips: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.sum.total_cmp(&self.sum).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// The `k` highest-probability subsets in nonincreasing probability order.
/// Weights are clamped to `[1e-12, 1 - 1e-12]`. Returns all `2^n` subsets
/// when `k` exceeds that.
pub fn kbest_subsets(weights: &[f64], k: usize) -> Vec<SubsetSolution> {
    let n = weights.len();
    if k == 0 {
        return Vec::new();
    }
    let w: Vec<f64> = weights.iter().map(|w| w.clamp(WEIGHT_CLAMP, 1.0 - WEIGHT_CLAMP)).collect();
    let keep_cost: Vec<f64> = w.iter().map(|w| -w.ln()).collect();
    let drop_cost: Vec<f64> = w.iter().map(|w| -(1.0 - w).ln()).collect();
    let base_keep: Vec<bool> = (0..n).map(|i| keep_cost[i] <= drop_cost[i]).collect();
    let base: f64 = (0..n).map(|i| keep_cost[i].min(drop_cost[i])).sum();
    let mut order: Vec<usize> = (0..n).collect();
    let delta: Vec<f64> = (0..n).map(|i| (keep_cost[i] - drop_cost[i]).abs()).collect();
    order.sort_by(|&a, &b| delta[a].total_cmp(&delta[b]).then(a.cmp(&b)));
    let d: Vec<f64> = order.iter().map(|&i| delta[i]).collect();

    let materialize = |flips: &[usize], sum: f64| {
        let mut keep = base_keep.clone();
        for &pos in flips {
            let item = order[pos];
            keep[item] = !keep[item];
        }
        SubsetSolution { kept: (0..n).filter(|&i| keep[i]).collect(), cost: base + sum }
    };

    let mut out = vec![materialize(&[], 0.0)];
    if n == 0 {
        return out;
    }
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { sum: d[0], seq, flips: vec![0] });
    while out.len() < k {
        let Some(e) = heap.pop() else { break };
        out.push(materialize(&e.flips, e.sum));
        let last = *e.flips.last().expect("flip sets are never empty");
        if last + 1 < n {
            let mut add = e.flips.clone();
            add.push(last + 1);
            seq += 1;
            heap.push(Entry { sum: e.sum + d[last + 1], seq, flips: add });
            let mut swap = e.flips;
            *swap.last_mut().expect("nonempty") = last + 1;
            seq += 1;
            heap.push(Entry { sum: e.sum - d[last] + d[last + 1], seq, flips: swap });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_likely_labels() {
        let s = kbest_subsets(&[0.9, 0.9], 1);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kept, vec![0, 1]);
        assert!(((-s[0].cost).exp() - 0.81).abs() < 1e-12);
    }

    #[test]
    fn all_subsets_when_k_is_large() {
        let s = kbest_subsets(&[0.3, 0.6, 0.8], 100);
        assert_eq!(s.len(), 8);
        let total: f64 = s.iter().map(|x| (-x.cost).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(s.windows(2).all(|p| p[0].cost <= p[1].cost + 1e-15));
    }

    #[test]
    fn ties_are_deterministic() {
        let a = kbest_subsets(&[0.5; 4], 16);
        let b = kbest_subsets(&[0.5; 4], 16);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        let mut seen: Vec<Vec<usize>> = a.iter().map(|s| s.kept.clone()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn empty_item_list() {
        let s = kbest_subsets(&[], 3);
        assert_eq!(s, vec![SubsetSolution { kept: vec![], cost: 0.0 }]);
    }
}
