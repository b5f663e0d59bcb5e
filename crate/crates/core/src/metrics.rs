//! OSPA distance, RMS errors and Monte Carlo aggregation.
//!
//! OSPA of order `p` with cut-off `c` between position sets `X` (size `n`)
//! and `Y` (size `m`), `n <= m`:
//!
//! ```text
//! d(X, Y) = ( (min_pi sum_i min(c, |x_i - y_pi(i)|)^p + c^p (m - n)) / m )^(1/p)
//! ```
//!
//! with `d = 0` when both sets are empty. The localization and cardinality
//! components are the two terms inside the bracket taken separately, so
//! `total^p = localization^p + cardinality^p`.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub c: f64,
    pub p: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { c: 5000.0, p: 2.0 }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.p >= 1.0) {
            return Err(Error::invalid(format!("ospa needs c > 0 and p >= 1, got c={} p={}", self.c, self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaResult {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: OspaParams) -> OspaResult {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (n, m) = (small.len(), large.len());
    if m == 0 {
        return OspaResult { total: 0.0, localization: 0.0, cardinality: 0.0 };
    }
    let OspaParams { c, p } = params;
    let mut cost = CostMatrix::filled(n, m, 0.0);
    for (i, a) in small.iter().enumerate() {
        for (j, b) in large.iter().enumerate() {
            cost.set(i, j, dist(a, b).min(c).powf(p));
        }
    }
    let loc_sum = solve(&cost).map_or(0.0, |a| a.cost);
    let card_sum = c.powf(p) * (m - n) as f64;
    let mf = m as f64;
    OspaResult {
        total: ((loc_sum + card_sum) / mf).powf(1.0 / p),
        localization: (loc_sum / mf).powf(1.0 / p),
        cardinality: (card_sum / mf).powf(1.0 / p),
    }
}

/// Squared position and velocity errors of a 4-d state `(x, y, vx, vy)`.
pub fn squared_errors(truth: &[f64; 4], estimate: &[f64; 4]) -> [f64; 2] {
    let dp = (truth[0] - estimate[0]).powi(2) + (truth[1] - estimate[1]).powi(2);
    let dv = (truth[2] - estimate[2]).powi(2) + (truth[3] - estimate[3]).powi(2);
    [dp, dv]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPoint {
    pub position: f64,
    pub velocity: f64,
    pub count: usize,
}

/// Per-step RMS over runs. `per_run[r][k]` holds the squared errors of run
/// `r` at step `k`, or `None` when the run produced no estimate there. A
/// step with no estimate in any run is `None`, not zero.
pub fn rms_errors(per_run: &[Vec<Option<[f64; 2]>>]) -> Result<Vec<Option<RmsPoint>>> {
    let len = equal_length(per_run.iter().map(Vec::len))?;
    Ok((0..len)
        .map(|k| {
            let mut sum = [0.0; 2];
            let mut count = 0;
            for e in per_run.iter().filter_map(|r| r[k]) {
                sum[0] += e[0];
                sum[1] += e[1];
                count += 1;
            }
            (count > 0).then(|| RmsPoint {
                position: (sum[0] / count as f64).sqrt(),
                velocity: (sum[1] / count as f64).sqrt(),
                count,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStat {
    pub mean: f64,
    /// Standard error of the mean; NaN with fewer than two values.
    pub se: f64,
    pub count: usize,
}

/// Element-wise mean over runs, skipping NaN entries.
pub fn mc_aggregate(per_run: &[Vec<f64>]) -> Result<Vec<SeriesStat>> {
    let len = equal_length(per_run.iter().map(Vec::len))?;
    Ok((0..len)
        .map(|k| {
            let vals: Vec<f64> = per_run.iter().map(|r| r[k]).filter(|v| !v.is_nan()).collect();
            let count = vals.len();
            if count == 0 {
                return SeriesStat { mean: f64::NAN, se: f64::NAN, count };
            }
            let mean = vals.iter().sum::<f64>() / count as f64;
            let se = if count > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
                (var / count as f64).sqrt()
            } else {
                f64::NAN
            };
            SeriesStat { mean, se, count }
        })
        .collect())
}

fn equal_length(mut lens: impl Iterator<Item = usize>) -> Result<usize> {
    let first = lens.next().unwrap_or(0);
    if lens.any(|l| l != first) {
        return Err(Error::invalid("series have different lengths"));
    }
    Ok(first)
}
