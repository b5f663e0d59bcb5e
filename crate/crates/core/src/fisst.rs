//! FISST multi-object densities on one-dimensional test spaces.
//!
//! All evaluations are done in log space; [`eval_density`] exponentiates at
//! the end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gauss_legendre, ln_factorial, log_add_exp, log_sum_exp, LN_2PI};

pub const DEFAULT_N_MAX: usize = 20;

/// Single-object density on a bounded interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Density1D {
    Uniform { a: f64, b: f64 },
    /// Gaussian restricted to `mean ± 12 std`, where the neglected mass is
    /// below 1e-30.
    Gaussian { mean: f64, std: f64 },
    /// `6 (x-a)(b-x) / (b-a)^3` on `[a, b]`.
    Parabolic { a: f64, b: f64 },
}

impl Density1D {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density1D::Uniform { a, b } | Density1D::Parabolic { a, b } => (a, b),
            Density1D::Gaussian { mean, std } => (mean - 12.0 * std, mean + 12.0 * std),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        match *self {
            Density1D::Uniform { a, b } => -(b - a).ln(),
            Density1D::Gaussian { mean, std } => {
                let u = (x - mean) / std;
                -0.5 * u * u - std.ln() - 0.5 * LN_2PI
            }
            Density1D::Parabolic { a, b } => (6.0 * (x - a) * (b - x)).ln() - 3.0 * (b - a).ln(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Density1D::Uniform { a, b } | Density1D::Parabolic { a, b } => a.is_finite() && b.is_finite() && b > a,
            Density1D::Gaussian { mean, std } => mean.is_finite() && std > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed density {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardinalityDistribution {
    pub probs: Vec<f64>,
}

impl CardinalityDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::invalid("cardinality probabilities must be nonnegative"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("cardinality probabilities sum to {s}")));
        }
        Ok(Self { probs })
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (n, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = n;
            }
        }
        best
    }
}

/// Truncated cardinality with the mass beyond `n_max` reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCardinality {
    pub probs: Vec<f64>,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RfsFamily {
    Bernoulli { r: f64, p: Density1D },
    IidCluster { rho: CardinalityDistribution, p: Density1D },
    Poisson { lambda: f64, p: Density1D },
    MultiBernoulli { components: Vec<(f64, Density1D)> },
}

impl RfsFamily {
    pub fn validate(&self) -> Result<()> {
        let prob = |r: f64| {
            if (0.0..=1.0).contains(&r) {
                Ok(())
            } else {
                Err(Error::invalid(format!("existence probability {r} outside [0, 1]")))
            }
        };
        match self {
            RfsFamily::Bernoulli { r, p } => {
                prob(*r)?;
                p.validate()
            }
            RfsFamily::IidCluster { rho, p } => {
                CardinalityDistribution::new(rho.probs.clone())?;
                p.validate()
            }
            RfsFamily::Poisson { lambda, p } => {
                if !(*lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Error::invalid(format!("negative Poisson rate {lambda}")));
                }
                p.validate()
            }
            RfsFamily::MultiBernoulli { components } => {
                for (r, p) in components {
                    prob(*r)?;
                    p.validate()?;
                }
                Ok(())
            }
        }
    }
}

/// Log FISST density `ln f(X)`.
pub fn log_density(family: &RfsFamily, x: &[f64]) -> Result<f64> {
    family.validate()?;
    let n = x.len();
    Ok(match family {
        RfsFamily::Bernoulli { r, p } => match n {
            0 => (1.0 - r).ln(),
            1 => r.ln() + p.ln_pdf(x[0]),
            _ => f64::NEG_INFINITY,
        },
        RfsFamily::IidCluster { rho, p } => {
            let pn = rho.get(n);
            if pn == 0.0 {
                f64::NEG_INFINITY
            } else {
                ln_factorial(n) + pn.ln() + x.iter().map(|xi| p.ln_pdf(*xi)).sum::<f64>()
            }
        }
        RfsFamily::Poisson { lambda, p } => {
            if n > 0 && *lambda == 0.0 {
                f64::NEG_INFINITY
            } else {
                -lambda + x.iter().map(|xi| lambda.ln() + p.ln_pdf(*xi)).sum::<f64>()
            }
        }
        RfsFamily::MultiBernoulli { components } => multi_bernoulli_log_density(components, x),
    })
}

pub fn eval_density(family: &RfsFamily, x: &[f64]) -> Result<f64> {
    log_density(family, x).map(f64::exp)
}

/// Sum over injective assignments of set elements to components, carried as
/// a dynamic programme over the subset of elements already assigned. Avoids
/// the `r / (1 - r)` ratios so components with `r = 1` are handled exactly.
fn multi_bernoulli_log_density(components: &[(f64, Density1D)], x: &[f64]) -> f64 {
    let n = x.len();
    if n > components.len() {
        return f64::NEG_INFINITY;
    }
    if n > 20 {
        return f64::NAN;
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![f64::NEG_INFINITY; full + 1];
    dp[0] = 0.0;
    for (r, p) in components {
        let miss = (1.0 - r).ln();
        let hit: Vec<f64> = x.iter().map(|xi| r.ln() + p.ln_pdf(*xi)).collect();
        let mut next = vec![f64::NEG_INFINITY; full + 1];
        for mask in 0..=full {
            let cur = dp[mask];
            if cur == f64::NEG_INFINITY {
                continue;
            }
            next[mask] = log_add_exp(next[mask], cur + miss);
            for (i, h) in hit.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    let m2 = mask | (1 << i);
                    next[m2] = log_add_exp(next[m2], cur + h);
                }
            }
        }
        dp = next;
    }
    dp[full]
}

pub fn cardinality_of(family: &RfsFamily, n_max: usize) -> Result<TruncatedCardinality> {
    family.validate()?;
    let mut probs = match family {
        RfsFamily::Bernoulli { r, .. } => vec![1.0 - r, *r],
        RfsFamily::IidCluster { rho, .. } => rho.probs.clone(),
        RfsFamily::Poisson { lambda, .. } => (0..=n_max)
            .map(|n| {
                if *lambda == 0.0 {
                    if n == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (-lambda + n as f64 * lambda.ln() - ln_factorial(n)).exp()
                }
            })
            .collect(),
        RfsFamily::MultiBernoulli { components } => {
            let mut conv = vec![1.0];
            for (r, _) in components {
                let mut next = vec![0.0; conv.len() + 1];
                for (k, c) in conv.iter().enumerate() {
                    next[k] += c * (1.0 - r);
                    next[k + 1] += c * r;
                }
                conv = next;
            }
            conv
        }
    };
    let kept: f64 = probs.iter().take(n_max + 1).sum();
    let total: f64 = match family {
        RfsFamily::Poisson { .. } => 1.0,
        _ => probs.iter().sum(),
    };
    probs.resize(n_max + 1, 0.0);
    Ok(TruncatedCardinality { probs, tail: (total - kept).max(0.0) })
}

/// Intensity (first moment density) at `x`.
pub fn phd_of(family: &RfsFamily, x: f64) -> Result<f64> {
    family.validate()?;
    Ok(match family {
        RfsFamily::Bernoulli { r, p } => r * p.pdf(x),
        RfsFamily::IidCluster { rho, p } => p.pdf(x) * rho.mean(),
        RfsFamily::Poisson { lambda, p } => lambda * p.pdf(x),
        RfsFamily::MultiBernoulli { components } => components.iter().map(|(r, p)| r * p.pdf(x)).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
}

/// `f(∅) + Σ_{n=1}^{n_max} (1/n!) ∫ f({x_1..x_n}) dx_1..dx_n` on a tensor
/// Gauss-Legendre grid.
pub fn set_integral_quadrature(family: &RfsFamily, n_max: usize, grid: QuadratureGrid) -> Result<f64> {
    if grid.nodes < 2 {
        return Err(Error::invalid("quadrature grid needs at least 2 nodes"));
    }
    if !(grid.b > grid.a) {
        return Err(Error::invalid("quadrature interval is empty"));
    }
    family.validate()?;
    let (nodes, weights) = gauss_legendre(grid.nodes, grid.a, grid.b);
    let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut total = eval_density(family, &[])?;
    for n in 1..=n_max {
        let points = grid.nodes.checked_pow(n as u32).ok_or_else(|| Error::invalid("tensor grid too large"))?;
        if points > 50_000_000 {
            return Err(Error::invalid("tensor grid too large"));
        }
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        let mut terms = Vec::with_capacity(points.min(1 << 20));
        let mut acc = f64::NEG_INFINITY;
        loop {
            let mut lw = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                x[k] = nodes[i];
                lw += ln_w[i];
            }
            let lf = log_density(family, &x)?;
            if lf > f64::NEG_INFINITY {
                terms.push(lf + lw);
            }
            if terms.len() >= 1 << 20 {
                acc = log_add_exp(acc, log_sum_exp(&terms));
                terms.clear();
            }
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < grid.nodes {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        acc = log_add_exp(acc, log_sum_exp(&terms));
        total += (acc - ln_factorial(n)).exp();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    const U01: Density1D = Density1D::Uniform { a: 0.0, b: 1.0 };

    #[test]
    fn density_examples() {
        let b = RfsFamily::Bernoulli { r: 0.3, p: U01 };
        assert!((eval_density(&b, &[]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(eval_density(&b, &[0.1, 0.2]).unwrap(), 0.0);

        let mb = RfsFamily::MultiBernoulli { components: vec![(0.5, U01), (0.25, U01)] };
        assert!((eval_density(&mb, &[]).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(eval_density(&mb, &[0.1, 0.2, 0.3]).unwrap(), 0.0);

        let p0 = RfsFamily::Poisson { lambda: 0.0, p: U01 };
        assert_eq!(eval_density(&p0, &[]).unwrap(), 1.0);

        let p2 = RfsFamily::Poisson { lambda: 2.0, p: U01 };
        let expect = 2.0 * ((-2.0f64).exp() * 4.0 / 2.0);
        assert!((eval_density(&p2, &[0.5, 0.7]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn malformed_families_are_rejected() {
        assert!(eval_density(&RfsFamily::Bernoulli { r: 1.2, p: U01 }, &[]).is_err());
        assert!(eval_density(&RfsFamily::Poisson { lambda: -1.0, p: U01 }, &[]).is_err());
        let grid = QuadratureGrid { a: 0.0, b: 1.0, nodes: 1 };
        assert!(set_integral_quadrature(&RfsFamily::Bernoulli { r: 0.3, p: U01 }, 2, grid).is_err());
    }

    #[test]
    fn cardinality_examples() {
        let c = cardinality_of(&RfsFamily::Bernoulli { r: 0.3, p: U01 }, 3).unwrap();
        assert_eq!(&c.probs[..2], &[0.7, 0.3]);
        let c = cardinality_of(&RfsFamily::Poisson { lambda: 1.0, p: U01 }, 20).unwrap();
        assert!((c.probs[1] - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(c.tail < 1e-15);
        let c = cardinality_of(&RfsFamily::MultiBernoulli { components: vec![(0.5, U01), (0.5, U01)] }, 2).unwrap();
        assert_eq!(c.probs, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn phd_examples() {
        assert!((phd_of(&RfsFamily::Bernoulli { r: 0.4, p: U01 }, 0.5).unwrap() - 0.4).abs() < 1e-15);
        assert!((phd_of(&RfsFamily::Poisson { lambda: 3.0, p: U01 }, 0.2).unwrap() - 3.0).abs() < 1e-15);
        let zero = RfsFamily::MultiBernoulli { components: vec![(0.0, U01), (0.0, U01)] };
        assert_eq!(phd_of(&zero, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn set_integrals_of_simple_families() {
        let grid = QuadratureGrid { a: 0.0, b: 1.0, nodes: 4 };
        let b = set_integral_quadrature(&RfsFamily::Bernoulli { r: 0.3, p: U01 }, 2, grid).unwrap();
        assert!((b - 1.0).abs() < 1e-6);
        let p = set_integral_quadrature(&RfsFamily::Poisson { lambda: 0.5, p: U01 }, 8, grid).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
        let empty = RfsFamily::Poisson { lambda: 0.0, p: U01 };
        assert_eq!(set_integral_quadrature(&empty, 3, grid).unwrap(), eval_density(&empty, &[]).unwrap());
    }

    #[test]
    fn multi_bernoulli_dp_matches_ratio_form() {
        // Direct form: prod(1-r) * sum over ordered distinct index tuples of prod r p / (1-r).
        let comps = vec![
            (0.3, Density1D::Parabolic { a: 0.0, b: 1.0 }),
            (0.6, U01),
            (0.45, Density1D::Gaussian { mean: 0.4, std: 0.2 }),
        ];
        let fam = RfsFamily::MultiBernoulli { components: comps.clone() };
        let x = [0.2, 0.75];
        let base: f64 = comps.iter().map(|(r, _)| 1.0 - r).product();
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let (ri, pi) = comps[i];
                    let (rj, pj) = comps[j];
                    sum += ri * pi.pdf(x[0]) / (1.0 - ri) * rj * pj.pdf(x[1]) / (1.0 - rj);
                }
            }
        }
        let v = eval_density(&fam, &x).unwrap();
        assert!((v - base * sum).abs() < 1e-12 * v.abs().max(1.0));
        let swapped = eval_density(&fam, &[x[1], x[0]]).unwrap();
        assert!((v - swapped).abs() < 1e-14);
    }
}
