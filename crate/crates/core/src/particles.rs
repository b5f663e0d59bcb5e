//! Weighted particle sets, systematic resampling, the random-walk Metropolis
//! move and point estimates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::LN_2PI;
use crate::rng::SimRng;

/// A point in a single-object state space with a fixed number of coordinates.
pub trait ParticleState: Clone + Send + Sync + std::fmt::Debug + 'static {
    const DIM: usize;

    fn coords(&self) -> &[f64];

    fn from_coords(c: &[f64]) -> Self;

    /// Planar position used by set distances. One-dimensional states put
    /// their coordinate on the first axis.
    fn position(&self) -> [f64; 2];
}

impl ParticleState for f64 {
    const DIM: usize = 1;

    fn coords(&self) -> &[f64] {
        std::slice::from_ref(self)
    }

    fn from_coords(c: &[f64]) -> Self {
        c[0]
    }

    fn position(&self) -> [f64; 2] {
        [*self, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedParticleSet<S> {
    pub particles: Vec<S>,
    pub weights: Vec<f64>,
}

impl<S: ParticleState> WeightedParticleSet<S> {
    pub fn new(particles: Vec<S>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("particle set must not be empty"));
        }
        if particles.len() != weights.len() {
            return Err(Error::invalid("particle and weight counts differ"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { particles, weights })
    }

    pub fn uniform(particles: Vec<S>) -> Self {
        let n = particles.len();
        Self { particles, weights: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_weight() - 1.0).abs() < 1e-12
    }

    pub fn normalize(&mut self) -> Result<()> {
        let s = self.total_weight();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::invalid("cannot normalize a set with zero total weight"));
        }
        for w in &mut self.weights {
            *w /= s;
        }
        Ok(())
    }

    pub fn ess(&self) -> f64 {
        let s = self.total_weight();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        s * s / s2
    }

    /// Weighted mean (weights need not be normalized).
    pub fn mean(&self) -> S {
        S::from_coords(&weighted_mean(&self.particles, &self.weights))
    }

    pub fn std(&self) -> Vec<f64> {
        weighted_std(&self.particles, &self.weights)
    }

    pub fn estimate(&self, mode: EstimateMode) -> S {
        match mode {
            EstimateMode::Eap => self.mean(),
            EstimateMode::Map => map_estimate(&self.particles, &self.weights),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMode {
    #[default]
    Eap,
    Map,
}

pub fn weighted_mean<S: ParticleState>(particles: &[S], weights: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; S::DIM];
    let mut total = 0.0;
    for (p, w) in particles.iter().zip(weights) {
        for (acc, c) in m.iter_mut().zip(p.coords()) {
            *acc += w * c;
        }
        total += w;
    }
    for v in &mut m {
        *v /= total;
    }
    m
}

pub fn weighted_std<S: ParticleState>(particles: &[S], weights: &[f64]) -> Vec<f64> {
    let m = weighted_mean(particles, weights);
    let mut var = vec![0.0; S::DIM];
    let mut total = 0.0;
    for (p, w) in particles.iter().zip(weights) {
        for ((acc, c), mu) in var.iter_mut().zip(p.coords()).zip(&m) {
            *acc += w * (c - mu) * (c - mu);
        }
        total += w;
    }
    var.iter().map(|v| (v / total).max(0.0).sqrt()).collect()
}

/// Systematic resampling: `count` indices drawn with one uniform offset.
pub fn systematic_resample(weights: &[f64], count: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::invalid("cannot resample an empty weight vector"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights must be normalized, sum is {total}")));
    }
    let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    let u: f64 = rng.random();
    let mut out = Vec::with_capacity(count);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..count {
        let pos = (i as f64 + u) / count as f64;
        while j < last_positive && pos > cum {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    Ok(out)
}

/// Deterministic equal-weight subsample by systematic selection with a fixed
/// offset of one half. Used where a draw-free thinning is needed.
pub fn deterministic_subsample(weights: &[f64], count: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let n = weights.len();
    if n == 0 || total <= 0.0 {
        return Vec::new();
    }
    let count = count.min(n);
    let mut out = Vec::with_capacity(count);
    let mut cum = weights[0] / total;
    let mut j = 0;
    for i in 0..count {
        let pos = (i as f64 + 0.5) / count as f64;
        while j + 1 < n && pos > cum {
            j += 1;
            cum += weights[j] / total;
        }
        out.push(j);
    }
    out
}

/// Gaussian kernel density estimate with a diagonal Silverman bandwidth.
#[derive(Debug, Clone)]
pub struct Kde {
    dim: usize,
    centers: Vec<f64>,
    inv_bw: Vec<f64>,
    log_norm: f64,
}

impl Kde {
    pub const DEFAULT_CENTERS: usize = 32;
    pub const MAX_CENTERS: usize = 256;

    /// Builds the estimate from at most `max_centers` deterministically chosen
    /// centres. The bandwidth uses the spread of the full weighted set.
    pub fn from_weighted<S: ParticleState>(particles: &[S], weights: &[f64], max_centers: usize) -> Option<Self> {
        if particles.is_empty() {
            return None;
        }
        let idx = deterministic_subsample(weights, max_centers.min(Self::MAX_CENTERS));
        if idx.is_empty() {
            return None;
        }
        let dim = S::DIM;
        let k = idx.len() as f64;
        let factor = (4.0 / ((dim as f64 + 2.0) * k)).powf(1.0 / (dim as f64 + 4.0));
        let std = weighted_std(particles, weights);
        let mean = weighted_mean(particles, weights);
        let bw: Vec<f64> = std
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s * factor).max(1e-9 * m.abs().max(1.0)))
            .collect();
        let mut centers = Vec::with_capacity(idx.len() * dim);
        for i in idx {
            centers.extend_from_slice(particles[i].coords());
        }
        let log_norm = -k.ln() - bw.iter().map(|h| h.ln()).sum::<f64>() - 0.5 * dim as f64 * LN_2PI;
        Some(Self { dim, centers, inv_bw: bw.iter().map(|h| 1.0 / h).collect(), log_norm })
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; Self::MAX_CENTERS];
        let mut q_min = f64::INFINITY;
        for (q, c) in buf.iter_mut().zip(self.centers.chunks_exact(self.dim)) {
            let mut s = 0.0;
            for d in 0..self.dim {
                let u = (x[d] - c[d]) * self.inv_bw[d];
                s += u * u;
            }
            *q = 0.5 * s;
            q_min = q_min.min(*q);
        }
        if !q_min.is_finite() {
            return f64::NEG_INFINITY;
        }
        // Terms below e^-50 of the largest one cannot change the sum.
        let k = self.centers.len() / self.dim;
        let sum: f64 = buf[..k].iter().map(|q| q - q_min).filter(|r| *r < 50.0).map(|r| (-r).exp()).sum();
        sum.ln() - q_min + self.log_norm
    }
}

fn map_estimate<S: ParticleState>(particles: &[S], weights: &[f64]) -> S {
    if particles.len() == 1 {
        return particles[0].clone();
    }
    let kde = match Kde::from_weighted(particles, weights, 256) {
        Some(k) => k,
        None => return particles[0].clone(),
    };
    let candidates = deterministic_subsample(weights, 256);
    let mut best = candidates[0];
    let mut best_val = f64::NEG_INFINITY;
    for &i in &candidates {
        let v = kde.log_density(particles[i].coords());
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    particles[best].clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveConfig {
    pub steps: usize,
    /// Proposal std per dimension as a multiple of the particle spread.
    pub scale_factor: f64,
}

impl Default for MoveConfig {
    fn default() -> Self {
        Self { steps: 1, scale_factor: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MoveStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl MoveStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: MoveStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

/// Random-walk Metropolis with a diagonal Gaussian proposal. `target(i, x)`
/// is the unnormalized log-density for particle `i`.
pub fn mcmc_move<S, F>(particles: &mut [S], target: F, steps: usize, scale: &[f64], rng: &mut SimRng) -> MoveStats
where
    S: ParticleState,
    F: Fn(usize, &S) -> f64,
{
    if steps == 0 || scale.iter().all(|s| *s == 0.0) {
        return MoveStats::default();
    }
    let current: Vec<f64> = particles.iter().enumerate().map(|(i, p)| target(i, p)).collect();
    mcmc_move_from(particles, current, target, steps, scale, rng)
}

/// As [`mcmc_move`], with the target already evaluated at the start points.
pub fn mcmc_move_from<S, F>(
    particles: &mut [S],
    mut current: Vec<f64>,
    target: F,
    steps: usize,
    scale: &[f64],
    rng: &mut SimRng,
) -> MoveStats
where
    S: ParticleState,
    F: Fn(usize, &S) -> f64,
{
    let mut stats = MoveStats::default();
    if steps == 0 || scale.iter().all(|s| *s == 0.0) {
        return stats;
    }
    let mut buf = vec![0.0; S::DIM];
    for (i, p) in particles.iter_mut().enumerate() {
        for _ in 0..steps {
            for ((b, c), s) in buf.iter_mut().zip(p.coords()).zip(scale) {
                let e: f64 = rng.sample(StandardNormal);
                *b = c + s * e;
            }
            let proposal = S::from_coords(&buf);
            let lp = target(i, &proposal);
            let u: f64 = rng.random();
            stats.proposed += 1;
            if lp.is_finite() && (lp >= current[i] || u.ln() < lp - current[i]) {
                *p = proposal;
                current[i] = lp;
                stats.accepted += 1;
            }
        }
    }
    stats
}
