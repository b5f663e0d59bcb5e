//! Rectangular linear sum assignment by shortest augmenting paths with
//! dual variables (Jonker-Volgenant style).

use super::CostMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub cols: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column. Requires
/// `rows <= cols`. Returns `None` when every complete assignment uses an
/// infinite entry. Ties go to the lowest column index.
pub fn solve(cost: &CostMatrix) -> Option<Assignment> {
    let (nr, nc) = (cost.rows, cost.cols);
    if nr == 0 {
        return Some(Assignment { cols: Vec::new(), cost: 0.0 });
    }
    if nr > nc {
        return None;
    }
    let mut u = vec![0.0; nr];
    let mut v = vec![0.0; nc];
    let mut shortest = vec![f64::INFINITY; nc];
    let mut path = vec![usize::MAX; nc];
    let mut col4row = vec![usize::MAX; nr];
    let mut row4col = vec![usize::MAX; nc];
    let mut sr = vec![false; nr];
    let mut sc = vec![false; nc];
    let mut remaining: Vec<usize> = Vec::with_capacity(nc);

    for cur_row in 0..nr {
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);
        sr.iter_mut().for_each(|s| *s = false);
        sc.iter_mut().for_each(|s| *s = false);
        remaining.clear();
        remaining.extend(0..nc);

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink;
        loop {
            sr[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = usize::MAX;
            for (it, &j) in remaining.iter().enumerate() {
                let c = cost.get(i, j);
                if c.is_finite() {
                    let r = min_val + c - u[i] - v[j];
                    if r < shortest[j] {
                        path[j] = i;
                        shortest[j] = r;
                    }
                }
                let s = shortest[j];
                let prefer_free = s == lowest
                    && s.is_finite()
                    && row4col[j] == usize::MAX
                    && row4col[remaining[index]] != usize::MAX;
                if s < lowest || prefer_free {
                    lowest = s;
                    index = it;
                }
            }
            if !lowest.is_finite() {
                return None;
            }
            min_val = lowest;
            let j = remaining.remove(index);
            sc[j] = true;
            if row4col[j] == usize::MAX {
                sink = j;
                break;
            }
            i = row4col[j];
        }

        u[cur_row] += min_val;
        for r in 0..nr {
            if sr[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..nc {
            if sc[c] {
                v[c] -= min_val - shortest[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    let total = cost.cost_of(&col4row);
    if !total.is_finite() {
        return None;
    }
    Some(Assignment { cols: col4row, cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &CostMatrix) -> Option<f64> {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.rows {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            for c in 0..cost.cols {
                if !used[c] && cost.get(row, c).is_finite() {
                    used[c] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, c), best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.cols], 0.0, &mut best);
        best.is_finite().then_some(best)
    }

    #[test]
    fn small_known_case() {
        let c = CostMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]);
        let a = solve(&c).unwrap();
        assert_eq!(a.cols, vec![1, 0, 2]);
        assert_eq!(a.cost, 5.0);
    }

    #[test]
    fn infeasible_and_rectangular() {
        let inf = f64::INFINITY;
        let c = CostMatrix::from_rows(&[vec![1.0, inf], vec![2.0, inf]]);
        assert!(solve(&c).is_none());
        let c = CostMatrix::from_rows(&[vec![5.0, inf, 1.0, 9.0]]);
        assert_eq!(solve(&c).unwrap().cols, vec![2]);
        let c = CostMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]);
        assert_eq!(solve(&c).unwrap().cols, vec![0]);
    }

    #[test]
    fn matches_brute_force_on_pseudo_random_matrices() {
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..300 {
            let rows = 1 + trial % 4;
            let cols = rows + (trial / 4) % 3;
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| {
                    let x = next();
                    if x < 0.15 {
                        f64::INFINITY
                    } else {
                        (x * 10.0).floor()
                    }
                })
                .collect();
            let c = CostMatrix::new(rows, cols, data);
            match (solve(&c), brute(&c)) {
                (Some(a), Some(b)) => assert!((a.cost - b).abs() < 1e-9, "{c:?}"),
                (None, None) => {}
                (a, b) => panic!("mismatch {a:?} {b:?} on {c:?}"),
            }
        }
    }
}
