//! Particle marginal Metropolis-Hastings over static model parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filters::standard::pf_loglik;
use crate::math::quantile;
use crate::models::{BearingsModel, MultiObjectModel};
use crate::particles::MoveConfig;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationChain {
    pub samples: Vec<Vec<f64>>,
    pub logliks: Vec<f64>,
    pub accepted: usize,
}

impl CalibrationChain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.accepted as f64 / self.samples.len() as f64
        }
    }

    /// Central credible interval of coordinate `dim` after discarding the
    /// first `burn_in` fraction of the chain.
    pub fn credible_interval(&self, dim: usize, burn_in: f64, level: f64) -> Option<(f64, f64)> {
        let start = ((self.samples.len() as f64) * burn_in.clamp(0.0, 1.0)).floor() as usize;
        let mut v: Vec<f64> = self.samples.get(start..)?.iter().map(|s| s[dim]).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        Some((quantile(&v, tail), quantile(&v, 1.0 - tail)))
    }

    pub fn posterior_mean(&self, dim: usize, burn_in: f64) -> Option<f64> {
        let start = ((self.samples.len() as f64) * burn_in.clamp(0.0, 1.0)).floor() as usize;
        let tail = self.samples.get(start..)?;
        (!tail.is_empty()).then(|| tail.iter().map(|s| s[dim]).sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub initial: Vec<f64>,
    /// Random-walk proposal std per coordinate.
    pub proposal_scale: Vec<f64>,
    pub iterations: usize,
}

/// Random-walk Metropolis-Hastings where `loglik` is a particle estimate of
/// the marginal likelihood, run afresh for every proposal. Proposals with
/// zero prior density are rejected without running the filter.
pub fn mh_calibrate<P, L>(log_prior: P, mut loglik: L, cfg: &MhConfig, rng: &mut SimRng) -> Result<CalibrationChain>
where
    P: Fn(&[f64]) -> f64,
    L: FnMut(&[f64], &mut SimRng) -> Result<f64>,
{
    if cfg.iterations == 0 {
        return Err(Error::invalid("calibration needs at least one iteration"));
    }
    if cfg.initial.len() != cfg.proposal_scale.len() {
        return Err(Error::invalid("initial value and proposal scale differ in dimension"));
    }
    let mut theta = cfg.initial.clone();
    let mut lp = log_prior(&theta);
    if !lp.is_finite() {
        return Err(Error::invalid("initial parameter has zero prior density"));
    }
    let mut ll = loglik(&theta, rng)?;
    let mut chain = CalibrationChain { samples: Vec::with_capacity(cfg.iterations), logliks: Vec::new(), accepted: 0 };
    for _ in 0..cfg.iterations {
        let proposal: Vec<f64> = theta
            .iter()
            .zip(&cfg.proposal_scale)
            .map(|(t, s)| {
                let e: f64 = rng.sample(StandardNormal);
                t + s * e
            })
            .collect();
        let lp_new = log_prior(&proposal);
        let u: f64 = rng.random();
        if lp_new.is_finite() {
            let ll_new = loglik(&proposal, rng)?;
            let log_ratio = ll_new + lp_new - ll - lp;
            if ll_new.is_finite() && (log_ratio >= 0.0 || u.ln() < log_ratio) {
                theta = proposal;
                lp = lp_new;
                ll = ll_new;
                chain.accepted += 1;
            }
        }
        chain.samples.push(theta.clone());
        chain.logliks.push(ll);
    }
    Ok(chain)
}

/// Log-density of a uniform prior on `[lo, hi]`.
pub fn uniform_log_prior(lo: f64, hi: f64) -> impl Fn(&[f64]) -> f64 {
    move |t: &[f64]| {
        if t.iter().all(|v| (lo..=hi).contains(v)) {
            -(hi - lo).ln() * t.len() as f64
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Particle estimate of the log-likelihood of single-target bearings data
/// for a bearing noise of `sigma_w_deg`. `scans[k]` is the scan at step `k`
/// of the model's time line. The scans must hold exactly one measurement on
/// a contiguous run of steps; the first one initializes the cloud from the
/// birth density and the rest are scored.
pub fn sigma_w_loglik_pf(
    model: &BearingsModel,
    scans: &[Vec<f64>],
    sigma_w_deg: f64,
    particles: usize,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<f64> {
    let detected: Vec<(usize, f64)> =
        scans.iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(k, s)| (k, s[0])).collect();
    if scans.iter().any(|s| s.len() > 1) {
        return Err(Error::invalid("the PF calibration backend needs at most one measurement per scan"));
    }
    let Some(&(first, z0)) = detected.first() else {
        return Err(Error::invalid("no measurements to calibrate on"));
    };
    if detected.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
        return Err(Error::invalid("the PF calibration backend needs measurements on consecutive steps"));
    }
    let m = model.with_sigma_w(sigma_w_deg.to_radians());
    let initial: Vec<_> = (0..particles).map(|_| m.sample_birth(first, z0, rng)).collect();
    let zs: Vec<f64> = detected[1..].iter().map(|(_, z)| *z).collect();
    Ok(pf_loglik(&m, &initial, first + 1, &zs, moves, rng)?.loglik)
}
