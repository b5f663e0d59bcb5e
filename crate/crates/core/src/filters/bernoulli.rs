//! Bernoulli particle filter: joint detection and tracking of at most one
//! object, with births driven by the previous scan.

use crate::error::{Error, Result};
use crate::filters::{resample_move, Estimate, FilterSettings, Predicted, StepOutput, TrackingFilter};
use crate::math::{log_sum_exp, normalize_weighted};
use crate::models::MultiObjectModel;
use crate::particles::{MoveConfig, MoveStats, WeightedParticleSet};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliConfig {
    pub p_birth: f64,
    pub p_survive: f64,
    /// Particles kept after resampling (N).
    pub particles: usize,
    /// Birth particles per previous measurement (N_m).
    pub birth_particles: usize,
    pub moves: MoveConfig,
}

impl BernoulliConfig {
    pub fn from_settings(s: &FilterSettings) -> Self {
        Self {
            p_birth: s.p_birth,
            p_survive: s.p_survive,
            particles: s.particles,
            birth_particles: s.birth_particles,
            moves: s.moves,
        }
    }
}

/// Existence probability and an equally weighted spatial particle set.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliBelief<S> {
    pub r: f64,
    pub particles: Vec<S>,
}

impl<S> BernoulliBelief<S> {
    pub fn empty() -> Self {
        Self { r: 0.0, particles: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliPrediction<S> {
    pub r: f64,
    /// Persistent particles first, then births.
    pub particles: Vec<S>,
    pub parents: Vec<S>,
    /// Mixture weights; sum to one unless the set is empty.
    pub weights: Vec<f64>,
    pub persistent: usize,
}

impl<S> BernoulliPrediction<S> {
    pub fn birth_mass(&self) -> f64 {
        self.weights[self.persistent..].iter().sum()
    }
}

/// Predicted existence and spatial mixture. Births are drawn at `step - 1`
/// from the birth density of each previous measurement and propagated with
/// the persistent particles. No births are drawn when their mass is zero or
/// the previous scan is empty.
pub fn bernoulli_predict<M: MultiObjectModel>(
    model: &M,
    step: usize,
    belief: &BernoulliBelief<M::State>,
    prev_scan: &[f64],
    cfg: &BernoulliConfig,
    rng: &mut SimRng,
) -> Result<BernoulliPrediction<M::State>> {
    let r = belief.r;
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("existence probability {r} outside [0, 1]")));
    }
    let persist_mass = cfg.p_survive * r;
    let birth_mass = cfg.p_birth * (1.0 - r);
    let r_pred = birth_mass + persist_mass;

    let keep_persistent = persist_mass > 0.0 && !belief.particles.is_empty();
    let births: Vec<M::State> = if birth_mass > 0.0 && step > 0 {
        prev_scan
            .iter()
            .flat_map(|&z| (0..cfg.birth_particles).map(move |_| z))
            .map(|z| model.sample_birth(step - 1, z, rng))
            .collect()
    } else {
        Vec::new()
    };

    let mut parents: Vec<M::State> = Vec::with_capacity(belief.particles.len() + births.len());
    if keep_persistent {
        parents.extend_from_slice(&belief.particles);
    }
    let persistent = parents.len();
    parents.extend(births);
    let particles: Vec<M::State> = parents.iter().map(|x| model.propagate(step, x, rng)).collect();

    let nb = particles.len() - persistent;
    let weights = match (persistent > 0, nb > 0) {
        (true, true) => {
            let wp = persist_mass / (persistent as f64 * r_pred);
            let wb = birth_mass / (nb as f64 * r_pred);
            let mut w = vec![wp; persistent];
            w.extend(std::iter::repeat_n(wb, nb));
            w
        }
        (true, false) => vec![1.0 / persistent as f64; persistent],
        (false, true) => vec![1.0 / nb as f64; nb],
        (false, false) => Vec::new(),
    };
    Ok(BernoulliPrediction { r: r_pred, particles, parents, weights, persistent })
}

/// `I(z) = sum_i w_i g(z | x_i)` over the predicted mixture.
pub fn predicted_intensity<M: MultiObjectModel>(model: &M, step: usize, pred: &BernoulliPrediction<M::State>, z: f64) -> f64 {
    pred.particles.iter().zip(&pred.weights).map(|(x, w)| w * model.log_likelihood(step, z, x).exp()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliUpdate<S> {
    pub belief: BernoulliBelief<S>,
    /// Normalized updated weights of the predicted particles.
    pub weights: Vec<f64>,
    pub moves: MoveStats,
}

/// Log of the per-particle update factor `1 - p_D + p_D sum_z g(z|x) / kappa(z)`.
/// When some clutter intensities are zero only those measurements count and
/// constants are dropped, since they are then infinitely more informative.
fn log_factor<M: MultiObjectModel>(model: &M, step: usize, scan: &[f64], kappa: &[f64], x: &M::State) -> f64 {
    let p_d = model.p_detect();
    if kappa.iter().any(|k| *k == 0.0) && p_d > 0.0 {
        let terms: Vec<f64> =
            scan.iter().zip(kappa).filter(|(_, k)| **k == 0.0).map(|(z, _)| model.log_likelihood(step, *z, x)).collect();
        return log_sum_exp(&terms);
    }
    let mut terms = Vec::with_capacity(scan.len() + 1);
    terms.push((1.0 - p_d).ln());
    if p_d > 0.0 {
        for (z, k) in scan.iter().zip(kappa) {
            terms.push(p_d.ln() + model.log_likelihood(step, *z, x) - k.ln());
        }
    }
    log_sum_exp(&terms)
}

/// Updated existence probability from the predicted one and the predicted
/// intensities `I(z)` of the scan.
pub fn updated_existence(p_d: f64, r_pred: f64, intensities: &[f64], kappa: &[f64], step: usize) -> Result<f64> {
    if p_d > 0.0 && kappa.iter().zip(intensities).any(|(k, i)| *k == 0.0 && *i > 0.0) {
        return Ok(1.0);
    }
    let ratio: f64 = intensities.iter().zip(kappa).filter(|(_, k)| **k > 0.0).map(|(i, k)| i / k).sum();
    let delta = p_d * (1.0 - ratio);
    let denom = 1.0 - r_pred * delta;
    if !(denom > 0.0) {
        return Err(Error::NumericBlowUp {
            step,
            detail: format!("existence update denominator {denom} (r_pred={r_pred}, delta={delta})"),
        });
    }
    Ok(((1.0 - delta) * r_pred / denom).clamp(0.0, 1.0))
}

/// Existence and spatial update against `scan`, with clutter intensity
/// `kappa[j]` for measurement `j`, followed by resampling to `count`
/// particles and a move.
pub fn bernoulli_update<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &BernoulliPrediction<M::State>,
    scan: &[f64],
    kappa: &[f64],
    count: usize,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<BernoulliUpdate<M::State>> {
    let intensities: Vec<f64> = scan.iter().map(|&z| predicted_intensity(model, step, pred, z)).collect();
    let r_new = updated_existence(model.p_detect(), pred.r, &intensities, kappa, step)?;
    update_spatial(model, step, pred, scan, kappa, r_new, count, moves, rng)
}

/// Spatial part of the update for an already computed existence `r_new`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn update_spatial<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &BernoulliPrediction<M::State>,
    scan: &[f64],
    kappa: &[f64],
    r_new: f64,
    count: usize,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<BernoulliUpdate<M::State>> {
    debug_assert_eq!(scan.len(), kappa.len());
    if pred.particles.is_empty() {
        return Ok(BernoulliUpdate { belief: BernoulliBelief { r: r_new, particles: Vec::new() }, weights: Vec::new(), moves: MoveStats::default() });
    }
    let lf: Vec<f64> = pred.particles.iter().map(|x| log_factor(model, step, scan, kappa, x)).collect();
    let (weights, _) = normalize_weighted(Some(&pred.weights), &lf).ok_or_else(|| Error::DegenerateUpdate {
        step,
        detail: format!("all {} Bernoulli particle weights vanished", pred.particles.len()),
    })?;
    let p = Predicted { particles: &pred.particles, parents: &pred.parents, weights: &pred.weights };
    let (particles, stats) =
        resample_move(model, step, &p, &weights, count, |x| log_factor(model, step, scan, kappa, x), moves, rng)?;
    Ok(BernoulliUpdate { belief: BernoulliBelief { r: r_new, particles }, weights, moves: stats })
}

pub struct BernoulliFilter<S> {
    cfg: BernoulliConfig,
    report_threshold: f64,
    estimate: crate::particles::EstimateMode,
    belief: BernoulliBelief<S>,
    prev_scan: Vec<f64>,
}

impl<S> BernoulliFilter<S> {
    pub fn new(settings: &FilterSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            cfg: BernoulliConfig::from_settings(settings),
            report_threshold: settings.report_threshold,
            estimate: settings.estimate,
            belief: BernoulliBelief::empty(),
            prev_scan: Vec::new(),
        })
    }

    pub fn belief(&self) -> &BernoulliBelief<S> {
        &self.belief
    }

    pub fn with_belief(mut self, belief: BernoulliBelief<S>) -> Self {
        self.belief = belief;
        self
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for BernoulliFilter<M::State> {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let pred = bernoulli_predict(model, step, &self.belief, &self.prev_scan, &self.cfg, rng)?;
        let kappa: Vec<f64> = scan.iter().map(|&z| model.clutter_intensity(z)).collect();
        let upd = bernoulli_update(model, step, &pred, scan, &kappa, self.cfg.particles, &self.cfg.moves, rng)?;
        self.belief = upd.belief;
        self.prev_scan = scan.to_vec();
        let r = self.belief.r;
        let mut estimates = Vec::new();
        if r > self.report_threshold && !self.belief.particles.is_empty() {
            let state = WeightedParticleSet::uniform(self.belief.particles.clone()).estimate(self.estimate);
            estimates.push(Estimate { state, label: None, existence: r });
        }
        Ok(StepOutput { estimates, existence: Some(r), cardinality: r, hypotheses: None, moves: upd.moves })
    }
}
