//! Particle filters behind one [`TrackingFilter`] interface, selected by name
//! through a [`FilterRegistry`].

pub mod bernoulli;
pub mod calibration;
pub mod glmb;
pub mod lm_bernoulli;
pub mod phd;
pub mod rfs_optimal;
pub mod standard;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, MultiObjectModel};
use crate::particles::{systematic_resample, weighted_std, EstimateMode, Kde, MoveConfig, MoveStats, ParticleState};
use crate::rng::SimRng;

/// Track label: the step a track was born at and its index among that
/// step's births.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub birth_step: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<S> {
    pub state: S,
    pub label: Option<Label>,
    /// Existence probability of the estimated object, 1 when the filter has
    /// no such notion.
    pub existence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<S> {
    pub estimates: Vec<Estimate<S>>,
    /// Existence probability of single-object filters.
    pub existence: Option<f64>,
    /// Expected number of objects.
    pub cardinality: f64,
    pub hypotheses: Option<usize>,
    pub moves: MoveStats,
}

impl<S> StepOutput<S> {
    pub fn empty() -> Self {
        Self { estimates: Vec::new(), existence: None, cardinality: 0.0, hypotheses: None, moves: MoveStats::default() }
    }
}

pub trait TrackingFilter<M: MultiObjectModel>: Send {
    fn name(&self) -> &'static str;

    /// Processes the scan received at `step`.
    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>>;

    /// Filters that need exactly one measurement per scan while the target
    /// exists and none otherwise.
    fn requires_ideal_sensor(&self) -> bool {
        false
    }
}

/// Tuning shared by all filters. Defaults follow the bearings-only demos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    /// Persistent particles (N).
    pub particles: usize,
    /// Birth particles per previous measurement (N_m).
    pub birth_particles: usize,
    pub p_birth: f64,
    pub p_survive: f64,
    pub estimate: EstimateMode,
    pub moves: MoveConfig,
    /// Bernoulli filter reports an estimate when r exceeds this.
    pub report_threshold: f64,
    pub lm_confirm: f64,
    pub lm_delete: f64,
    /// A measurement spawns an LM track when less than this fraction of it
    /// was explained by existing tracks.
    pub lm_unexplained: f64,
    /// Expected births per step in the PHD filters.
    pub nu_b: f64,
    /// Particles per updated PHD cluster (L).
    pub cluster_particles: usize,
    pub eta: f64,
    /// Elimination threshold for undetected PHD particles. Derived from
    /// the other settings when absent.
    pub xi: Option<f64>,
    pub kmeans_restarts: usize,
    pub nu_max: usize,
    pub mu0: f64,
    pub association_bound: u64,
    pub hyp_max: usize,
    pub pred_hypotheses: usize,
    pub upd_hypotheses: usize,
    pub birth_subsets: usize,
    pub r_birth: f64,
    pub track_particles: usize,
    pub glmb_move: bool,
    pub gate: bool,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            particles: 5000,
            birth_particles: 2500,
            p_birth: 0.01,
            p_survive: 0.98,
            estimate: EstimateMode::Eap,
            moves: MoveConfig::default(),
            report_threshold: 0.2,
            lm_confirm: 0.5,
            lm_delete: 0.05,
            lm_unexplained: 0.5,
            nu_b: 0.1,
            cluster_particles: 5000,
            eta: 0.5,
            xi: None,
            kmeans_restarts: 10,
            nu_max: 4,
            mu0: 0.1,
            association_bound: 100_000,
            hyp_max: 100,
            pred_hypotheses: 1000,
            upd_hypotheses: 4000,
            birth_subsets: 8,
            r_birth: 0.02,
            track_particles: 5000,
            glmb_move: true,
            gate: true,
        }
    }
}

impl FilterSettings {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_birth", self.p_birth),
            ("p_survive", self.p_survive),
            ("report_threshold", self.report_threshold),
            ("lm_confirm", self.lm_confirm),
            ("lm_delete", self.lm_delete),
            ("lm_unexplained", self.lm_unexplained),
            ("eta", self.eta),
            ("r_birth", self.r_birth),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("filter.{name} must lie in [0, 1], got {v}")));
            }
        }
        let counts = [
            ("particles", self.particles),
            ("birth_particles", self.birth_particles),
            ("cluster_particles", self.cluster_particles),
            ("hyp_max", self.hyp_max),
            ("pred_hypotheses", self.pred_hypotheses),
            ("upd_hypotheses", self.upd_hypotheses),
            ("birth_subsets", self.birth_subsets),
            ("track_particles", self.track_particles),
            ("kmeans_restarts", self.kmeans_restarts),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("filter.{name} must be at least 1")));
            }
        }
        if !(self.nu_b >= 0.0) || !(self.mu0 >= 0.0) {
            return Err(Error::invalid("filter.nu_b and filter.mu0 must be nonnegative"));
        }
        if let Some(xi) = self.xi {
            if !(xi >= 0.0) {
                return Err(Error::invalid("filter.xi must be nonnegative"));
            }
        }
        if !(self.moves.scale_factor >= 0.0) {
            return Err(Error::invalid("filter.moves.scale_factor must be nonnegative"));
        }
        Ok(())
    }
}

pub type FilterFactory<M> = fn(&FilterSettings) -> Result<Box<dyn TrackingFilter<M>>>;

/// Filters registered by name.
pub struct FilterRegistry<M: MultiObjectModel> {
    entries: BTreeMap<&'static str, FilterFactory<M>>,
}

impl<M: MultiObjectModel + 'static> FilterRegistry<M> {
    pub fn empty() -> Self {
        Self { entries: BTreeMap::new() }
    }

    /// All filters shipped with the crate.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register("std", |s| Ok(Box::new(standard::StandardFilter::new(s)?)));
        r.register("bernoulli", |s| Ok(Box::new(bernoulli::BernoulliFilter::new(s)?)));
        r.register("lm-bernoulli", |s| Ok(Box::new(lm_bernoulli::LmBernoulliFilter::new(s)?)));
        r.register("phd", |s| Ok(Box::new(phd::PhdFilter::new(s, phd::PhdUpdate::Partition)?)));
        r.register("phd-plu", |s| Ok(Box::new(phd::PhdFilter::new(s, phd::PhdUpdate::PseudoLikelihood)?)));
        r.register("rfs-optimal", |s| Ok(Box::new(rfs_optimal::RfsOptimalFilter::new(s)?)));
        r.register("glmb", |s| Ok(Box::new(glmb::GlmbFilter::new(s)?)));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: FilterFactory<M>) {
        self.entries.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn create(&self, name: &str, settings: &FilterSettings) -> Result<Box<dyn TrackingFilter<M>>> {
        settings.validate()?;
        let factory = self
            .entries
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown filter '{name}', known: {}", self.names().join(", "))))?;
        factory(settings)
    }
}

/// Bitwise-uniform weights are replaced by exact `1/n` so that equal-weight
/// inputs give identical results however the common value was computed.
fn canonical_weights(w: &[f64]) -> Vec<f64> {
    if w.iter().all(|x| x.to_bits() == w[0].to_bits()) {
        vec![1.0 / w.len() as f64; w.len()]
    } else {
        w.to_vec()
    }
}

/// A weighted predicted particle set together with each particle's state
/// at the previous step.
pub(crate) struct Predicted<'a, S> {
    pub particles: &'a [S],
    pub parents: &'a [S],
    pub weights: &'a [f64],
}

/// Resamples `count` particles from `posterior` weights over a predicted set
/// and applies the random-walk move. The move targets `log_factor(x)` times
/// the predicted density: the exact transition density from the particle's
/// parent when the model has one, a kernel estimate otherwise.
pub(crate) fn resample_move<M, F>(
    model: &M,
    step: usize,
    predicted: &Predicted<'_, M::State>,
    posterior: &[f64],
    count: usize,
    log_factor: F,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<(Vec<M::State>, MoveStats)>
where
    M: Model,
    F: Fn(&M::State) -> f64,
{
    let idx = systematic_resample(posterior, count, rng)?;
    let mut out: Vec<M::State> = idx.iter().map(|&i| predicted.particles[i].clone()).collect();
    if moves.steps == 0 || out.len() < 2 {
        return Ok((out, MoveStats::default()));
    }
    let uniform = vec![1.0 / out.len() as f64; out.len()];
    let scale: Vec<f64> = weighted_std(&out, &uniform).iter().map(|s| s * moves.scale_factor).collect();
    let stats = if model.has_transition_density() {
        let parents: Vec<&M::State> = idx.iter().map(|&i| &predicted.parents[i]).collect();
        crate::particles::mcmc_move(
            &mut out,
            |i, x| log_factor(x) + model.transition_logdensity(step, parents[i], x).unwrap_or(f64::NEG_INFINITY),
            moves.steps,
            &scale,
            rng,
        )
    } else {
        let w = canonical_weights(predicted.weights);
        match Kde::from_weighted(predicted.particles, &w, Kde::DEFAULT_CENTERS) {
            Some(kde) => {
                let target = |x: &M::State| log_factor(x) + kde.log_density(x.coords());
                // Resampled copies share their starting value.
                let mut cache: HashMap<usize, f64> = HashMap::new();
                let current = idx.iter().map(|&i| *cache.entry(i).or_insert_with(|| target(&predicted.particles[i]))).collect();
                crate::particles::mcmc_move_from(&mut out, current, |_, x| target(x), moves.steps, &scale, rng)
            }
            None => MoveStats::default(),
        }
    };
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::BearingsModel;

    #[test]
    fn registry_knows_every_filter() {
        let r = FilterRegistry::<BearingsModel>::with_builtin();
        assert_eq!(r.names(), vec!["bernoulli", "glmb", "lm-bernoulli", "phd", "phd-plu", "rfs-optimal", "std"]);
        assert!(r.create("kalman", &FilterSettings::default()).is_err());
        for name in r.names() {
            assert_eq!(r.create(name, &FilterSettings::default()).unwrap().name(), name);
        }
    }

    #[test]
    fn settings_are_checked() {
        let s = FilterSettings { p_survive: 1.5, ..Default::default() };
        assert!(s.validate().is_err());
        let s = FilterSettings { particles: 0, ..Default::default() };
        assert!(s.validate().is_err());
    }
}
