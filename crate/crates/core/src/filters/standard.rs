//! Bootstrap particle filter for a single object that is always detected.

use crate::error::{Error, Result};
use crate::filters::{resample_move, Estimate, FilterSettings, Predicted, StepOutput, TrackingFilter};
use crate::math::normalize_weighted;
use crate::models::{Model, MultiObjectModel};
use crate::particles::{MoveConfig, MoveStats, WeightedParticleSet};
use crate::rng::SimRng;

#[derive(Debug, Clone)]
pub struct BootstrapStep<S> {
    pub predicted: Vec<S>,
    /// Normalized weights of the predicted particles.
    pub weights: Vec<f64>,
    /// Resampled and moved particles.
    pub particles: Vec<S>,
    /// `ln((1/N) sum_i g(z | x_i))`.
    pub log_mean_lik: f64,
    pub moves: MoveStats,
}

/// Propagate, weight, normalize, resample and move.
pub fn bootstrap_step<M: Model>(
    model: &M,
    step: usize,
    particles: &[M::State],
    z: f64,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<BootstrapStep<M::State>> {
    let n = particles.len();
    if n == 0 {
        return Err(Error::invalid("bootstrap step needs at least one particle"));
    }
    let predicted: Vec<M::State> = particles.iter().map(|x| model.propagate(step, x, rng)).collect();
    let loglik: Vec<f64> = predicted.iter().map(|x| model.log_likelihood(step, z, x)).collect();
    let (weights, log_sum) = normalize_weighted(None, &loglik).ok_or_else(|| Error::DegenerateUpdate {
        step,
        detail: format!("all {n} likelihoods are zero for z={z}"),
    })?;
    let prior = vec![1.0 / n as f64; n];
    let pred = Predicted { particles: &predicted, parents: particles, weights: &prior };
    let (out, stats) = resample_move(model, step, &pred, &weights, n, |x| model.log_likelihood(step, z, x), moves, rng)?;
    Ok(BootstrapStep { predicted, weights, particles: out, log_mean_lik: log_sum - (n as f64).ln(), moves: stats })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfLikelihood {
    /// Sum over steps of `ln((1/N) sum_i g)`; minus infinity after a failure.
    pub loglik: f64,
    pub failed_step: Option<usize>,
}

/// Particle estimate of `ln p(z_{1:K})`. `initial` represents the prior at
/// step `first_step - 1`; `scans[j]` is observed at `first_step + j`.
pub fn pf_loglik<M: Model>(
    model: &M,
    initial: &[M::State],
    first_step: usize,
    scans: &[f64],
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<PfLikelihood> {
    let mut particles = initial.to_vec();
    let mut total = 0.0;
    for (j, &z) in scans.iter().enumerate() {
        let step = first_step + j;
        match bootstrap_step(model, step, &particles, z, moves, rng) {
            Ok(s) => {
                total += s.log_mean_lik;
                particles = s.particles;
            }
            Err(Error::DegenerateUpdate { .. }) => {
                return Ok(PfLikelihood { loglik: f64::NEG_INFINITY, failed_step: Some(step) });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PfLikelihood { loglik: total, failed_step: None })
}

/// Tracks one always-detected object. The particle cloud is drawn from the
/// birth density of the first measurement and dropped when scans go empty.
pub struct StandardFilter<S> {
    settings: FilterSettings,
    particles: Vec<S>,
}

impl<S> StandardFilter<S> {
    pub fn new(settings: &FilterSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self { settings: settings.clone(), particles: Vec::new() })
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for StandardFilter<M::State> {
    fn name(&self) -> &'static str {
        "std"
    }

    fn requires_ideal_sensor(&self) -> bool {
        true
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let z = match scan {
            [] => {
                self.particles.clear();
                return Ok(StepOutput::empty());
            }
            [z] => *z,
            _ => {
                return Err(Error::invalid(format!(
                    "the standard filter needs one measurement per scan, got {} at step {step}",
                    scan.len()
                )))
            }
        };
        let mut moves = MoveStats::default();
        if self.particles.is_empty() {
            self.particles = (0..self.settings.particles).map(|_| model.sample_birth(step, z, rng)).collect();
        } else {
            let s = bootstrap_step(model, step, &self.particles, z, &self.settings.moves, rng)?;
            self.particles = s.particles;
            moves = s.moves;
        }
        let state = WeightedParticleSet::uniform(self.particles.clone()).estimate(self.settings.estimate);
        Ok(StepOutput {
            estimates: vec![Estimate { state, label: None, existence: 1.0 }],
            existence: None,
            cardinality: 1.0,
            hypotheses: None,
            moves,
        })
    }
}
