//! Murty's ranked assignment: the k cheapest complete assignments.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lsap::solve;
use super::CostMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedAssignments {
    /// Column per row and total cost, in nondecreasing cost order.
    pub solutions: Vec<(Vec<usize>, f64)>,
    /// True when fewer than the requested number of feasible assignments exist.
    pub exhausted: bool,
}

struct Node {
    cost: f64,
    seq: usize,
    cols: Vec<usize>,
    forced: Vec<(usize, usize)>,
    forbidden: Vec<(usize, usize)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that the max-heap pops the cheapest, earliest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn constrained(base: &CostMatrix, forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> CostMatrix {
    let mut m = base.clone();
    for &(r, c) in forbidden {
        m.set(r, c, f64::INFINITY);
    }
    for &(r, c) in forced {
        let keep = base.get(r, c);
        for cc in 0..m.cols {
            m.set(r, cc, f64::INFINITY);
        }
        for rr in 0..m.rows {
            m.set(rr, c, f64::INFINITY);
        }
        m.set(r, c, keep);
    }
    m
}

/// The `k` cheapest assignments of every row to a distinct column.
pub fn ranked_assignments(cost: &CostMatrix, k: usize) -> RankedAssignments {
    let mut out = Vec::new();
    if k == 0 {
        return RankedAssignments { solutions: out, exhausted: false };
    }
    let first = match solve(cost) {
        Some(a) => a,
        None => return RankedAssignments { solutions: out, exhausted: true },
    };
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Node { cost: first.cost, seq, cols: first.cols, forced: Vec::new(), forbidden: Vec::new() });

    while let Some(node) = heap.pop() {
        out.push((node.cols.clone(), cost.cost_of(&node.cols)));
        if out.len() == k {
            return RankedAssignments { solutions: out, exhausted: false };
        }
        let free_rows: Vec<usize> = (0..cost.rows).filter(|r| !node.forced.iter().any(|(fr, _)| fr == r)).collect();
        let mut forced = node.forced.clone();
        for (idx, &row) in free_rows.iter().enumerate() {
            let mut forbidden = node.forbidden.clone();
            forbidden.push((row, node.cols[row]));
            let m = constrained(cost, &forced, &forbidden);
            if let Some(a) = solve(&m) {
                seq += 1;
                let c = cost.cost_of(&a.cols);
                heap.push(Node { cost: c, seq, cols: a.cols, forced: forced.clone(), forbidden });
            }
            if idx + 1 < free_rows.len() {
                forced.push((row, node.cols[row]));
            }
        }
    }
    RankedAssignments { solutions: out, exhausted: true }
}
