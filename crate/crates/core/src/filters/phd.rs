//! PHD particle filter. The default update partitions the predicted
//! particles among the measurements by sampling each particle's association
//! probabilities and runs a particle-filter update per cluster. The
//! pseudo-likelihood update reweights all particles at once and recovers
//! estimates by k-means clustering.

use rand::Rng;

use crate::error::{Error, Result};
use crate::filters::{resample_move, Estimate, FilterSettings, Predicted, StepOutput, TrackingFilter};
use crate::math::normalize_weighted;
use crate::models::MultiObjectModel;
use crate::particles::{
    deterministic_subsample, weighted_mean, EstimateMode, MoveConfig, MoveStats, ParticleState, WeightedParticleSet,
};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhdUpdate {
    Partition,
    PseudoLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhdConfig {
    pub nu_b: f64,
    pub p_survive: f64,
    pub birth_particles: usize,
    /// Particles per updated cluster (L).
    pub cluster_particles: usize,
    pub eta: f64,
    pub xi: Option<f64>,
    pub moves: MoveConfig,
    pub estimate: EstimateMode,
    pub kmeans_restarts: usize,
}

impl PhdConfig {
    pub fn from_settings(s: &FilterSettings) -> Self {
        Self {
            nu_b: s.nu_b,
            p_survive: s.p_survive,
            birth_particles: s.birth_particles,
            cluster_particles: s.cluster_particles,
            eta: s.eta,
            xi: s.xi,
            moves: s.moves,
            estimate: s.estimate,
            kmeans_restarts: s.kmeans_restarts,
        }
    }

    /// Elimination threshold for particles left without a measurement.
    pub fn xi(&self, p_d: f64) -> f64 {
        self.xi.unwrap_or((1.0 - p_d) * self.nu_b / (4.0 * self.birth_particles as f64))
    }
}

/// Unnormalized particle approximation of an intensity function. The
/// weight sum estimates the expected number of objects.
#[derive(Debug, Clone, PartialEq)]
pub struct PhdSystem<S> {
    pub particles: Vec<S>,
    pub weights: Vec<f64>,
}

impl<S> PhdSystem<S> {
    pub fn empty() -> Self {
        Self { particles: Vec::new(), weights: Vec::new() }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhdPrediction<S> {
    pub particles: Vec<S>,
    pub parents: Vec<S>,
    pub weights: Vec<f64>,
}

/// Appends `N_m` birth particles of total mass `nu_b` per previous
/// measurement (drawn at `step - 1`), propagates everything and scales the
/// weights by the survival probability.
pub fn phd_predict<M: MultiObjectModel>(
    model: &M,
    step: usize,
    system: &PhdSystem<M::State>,
    prev_scan: &[f64],
    cfg: &PhdConfig,
    rng: &mut SimRng,
) -> PhdPrediction<M::State> {
    let mut parents = system.particles.clone();
    let mut weights = system.weights.clone();
    if cfg.nu_b > 0.0 && step > 0 && !prev_scan.is_empty() {
        let b = cfg.birth_particles * prev_scan.len();
        let wb = cfg.nu_b / b as f64;
        for &z in prev_scan {
            for _ in 0..cfg.birth_particles {
                parents.push(model.sample_birth(step - 1, z, rng));
                weights.push(wb);
            }
        }
    }
    let particles = parents.iter().map(|x| model.propagate(step, x, rng)).collect();
    for w in &mut weights {
        *w *= cfg.p_survive;
    }
    PhdPrediction { particles, parents, weights }
}

/// Measurement likelihoods of a predicted system and the per-measurement
/// sums `S_j = sum_i g(z_j | x_i) w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLikelihoods {
    /// `g[i][j]`, linear scale.
    pub g: Vec<Vec<f64>>,
    pub sums: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub fn scan_likelihoods<M: MultiObjectModel>(model: &M, step: usize, pred: &PhdPrediction<M::State>, scan: &[f64]) -> ScanLikelihoods {
    let g: Vec<Vec<f64>> =
        pred.particles.iter().map(|x| scan.iter().map(|&z| model.log_likelihood(step, z, x).exp()).collect()).collect();
    let sums = (0..scan.len()).map(|j| g.iter().zip(&pred.weights).map(|(row, w)| row[j] * w).sum()).collect();
    let kappa = scan.iter().map(|&z| model.clutter_intensity(z)).collect();
    ScanLikelihoods { g, sums, kappa }
}

/// Rows `p_i(j)`, `j = 0..=m`, where column 0 is the missed-detection tag.
/// A row with zero total goes entirely to the missed-detection tag.
pub fn association_probabilities(p_d: f64, weights: &[f64], lik: &ScanLikelihoods) -> Vec<Vec<f64>> {
    let m = lik.sums.len();
    weights
        .iter()
        .zip(&lik.g)
        .map(|(&w, g)| {
            let mut row = Vec::with_capacity(m + 1);
            row.push((1.0 - p_d) * w);
            for j in 0..m {
                let denom = lik.kappa[j] + p_d * lik.sums[j];
                row.push(if denom > 0.0 { p_d * g[j] * w / denom } else { 0.0 });
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 && total.is_finite() {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[0] = 1.0;
            }
            row
        })
        .collect()
}

/// Samples one tag per row. Rows with a single nonzero entry take it
/// without drawing.
pub fn partition(rows: &[Vec<f64>], rng: &mut SimRng) -> Vec<usize> {
    rows.iter()
        .map(|row| {
            let mut nonzero = row.iter().enumerate().filter(|(_, p)| **p > 0.0);
            let first = nonzero.next().map_or(0, |(j, _)| j);
            if nonzero.next().is_none() {
                return first;
            }
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let last = row.iter().rposition(|p| *p > 0.0).unwrap_or(0);
            for (j, p) in row.iter().enumerate() {
                cum += p;
                if u < cum {
                    return j;
                }
            }
            last
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhdCluster<S> {
    /// Index of the measurement the cluster was updated with.
    pub measurement: usize,
    pub particles: Vec<S>,
    pub existence: f64,
    /// Normalized updated weights of the cluster's predicted members.
    pub weights: Vec<f64>,
}

/// Bootstrap particle-filter update of one cluster with measurement `z`.
/// Returns `None` when the cluster's existence probability is zero.
#[allow(clippy::too_many_arguments)]
pub fn pfu_bootstrap<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &PhdPrediction<M::State>,
    members: &[usize],
    z: f64,
    kappa: f64,
    count: usize,
    moves: &MoveConfig,
    rng: &mut SimRng,
) -> Result<Option<(Vec<M::State>, f64, Vec<f64>, MoveStats)>> {
    let p_d = model.p_detect();
    let particles: Vec<M::State> = members.iter().map(|&i| pred.particles[i].clone()).collect();
    let parents: Vec<M::State> = members.iter().map(|&i| pred.parents[i].clone()).collect();
    let prior: Vec<f64> = members.iter().map(|&i| pred.weights[i]).collect();
    let loglik: Vec<f64> = particles.iter().map(|x| model.log_likelihood(step, z, x)).collect();
    let s: f64 = loglik.iter().zip(&prior).map(|(l, w)| l.exp() * w).sum();
    let p_e = if kappa + p_d * s > 0.0 { p_d * s / (kappa + p_d * s) } else { 0.0 };
    if !(p_e > 0.0) {
        return Ok(None);
    }
    let Some((weights, _)) = normalize_weighted(Some(&prior), &loglik) else {
        return Ok(None);
    };
    let p = Predicted { particles: &particles, parents: &parents, weights: &prior };
    let (out, stats) = resample_move(model, step, &p, &weights, count, |x| model.log_likelihood(step, z, x), moves, rng)?;
    Ok(Some((out, p_e.min(1.0), weights, stats)))
}

/// `-p_D sum_i w_i + sum_z ln(kappa(z) + p_D sum_i g(z|x_i) w_i)` for a
/// predicted system: the scan log-likelihood up to a constant.
pub fn phd_scan_loglik<M: MultiObjectModel>(model: &M, step: usize, pred: &PhdPrediction<M::State>, scan: &[f64]) -> f64 {
    let p_d = model.p_detect();
    let mass: f64 = pred.weights.iter().sum();
    let mut ll = -p_d * mass;
    for &z in scan {
        let s: f64 = pred.particles.iter().zip(&pred.weights).map(|(x, w)| model.log_likelihood(step, z, x).exp() * w).sum();
        ll += (model.clutter_intensity(z) + p_d * s).ln();
    }
    ll
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhdStep<S> {
    pub system: PhdSystem<S>,
    pub estimates: Vec<Estimate<S>>,
    pub clusters: Vec<PhdCluster<S>>,
    pub moves: MoveStats,
}

/// Partition-based update (one particle-filter update per measurement).
pub fn phd_update_partition<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &PhdPrediction<M::State>,
    scan: &[f64],
    cfg: &PhdConfig,
    rng: &mut SimRng,
) -> Result<PhdStep<M::State>> {
    let p_d = model.p_detect();
    let lik = scan_likelihoods(model, step, pred, scan);
    let rows = association_probabilities(p_d, &pred.weights, &lik);
    let tags = partition(&rows, rng);
    let mut members = vec![Vec::new(); scan.len() + 1];
    for (i, &t) in tags.iter().enumerate() {
        members[t].push(i);
    }

    let mut system = PhdSystem::empty();
    let mut estimates = Vec::new();
    let mut clusters = Vec::new();
    let mut moves = MoveStats::default();
    for (j, &z) in scan.iter().enumerate() {
        if members[j + 1].is_empty() {
            continue;
        }
        let updated =
            pfu_bootstrap(model, step, pred, &members[j + 1], z, lik.kappa[j], cfg.cluster_particles, &cfg.moves, rng)?;
        let Some((particles, p_e, weights, stats)) = updated else {
            continue;
        };
        moves.merge(stats);
        let w = p_e / particles.len() as f64;
        if p_e > cfg.eta {
            let state = WeightedParticleSet::uniform(particles.clone()).estimate(cfg.estimate);
            estimates.push(Estimate { state, label: None, existence: p_e });
        }
        system.weights.extend(std::iter::repeat_n(w, particles.len()));
        system.particles.extend(particles.iter().cloned());
        clusters.push(PhdCluster { measurement: j, particles, existence: p_e, weights });
    }
    let xi = cfg.xi(p_d);
    for &i in &members[0] {
        let w = pred.weights[i];
        let kept = (1.0 - p_d) * w;
        if w > xi && kept > 0.0 {
            system.particles.push(pred.particles[i].clone());
            system.weights.push(kept);
        }
    }
    Ok(PhdStep { system, estimates, clusters, moves })
}

/// Pseudo-likelihood update: every particle is reweighted by the bracketed
/// PHD update factor, the set is resampled to `L * max(1, round(nu))`
/// particles and estimates come from k-means with `round(nu)` centres.
pub fn phd_update_plu<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &PhdPrediction<M::State>,
    scan: &[f64],
    cfg: &PhdConfig,
    rng: &mut SimRng,
) -> Result<PhdStep<M::State>> {
    let p_d = model.p_detect();
    if pred.particles.is_empty() {
        return Ok(PhdStep { system: PhdSystem::empty(), estimates: Vec::new(), clusters: Vec::new(), moves: MoveStats::default() });
    }
    let lik = scan_likelihoods(model, step, pred, scan);
    let factor = |g: &[f64]| -> f64 {
        let mut f = 1.0 - p_d;
        for j in 0..g.len() {
            let denom = lik.kappa[j] + p_d * lik.sums[j];
            if denom > 0.0 {
                f += p_d * g[j] / denom;
            }
        }
        f
    };
    let log_factors: Vec<f64> = lik.g.iter().map(|g| factor(g).ln()).collect();
    let nu: f64 = log_factors.iter().zip(&pred.weights).map(|(l, w)| l.exp() * w).sum();
    let Some((weights, _)) = normalize_weighted(Some(&pred.weights), &log_factors) else {
        return Ok(PhdStep { system: PhdSystem::empty(), estimates: Vec::new(), clusters: Vec::new(), moves: MoveStats::default() });
    };
    let k = nu.round() as usize;
    let count = cfg.cluster_particles * k.max(1);
    let p = Predicted { particles: &pred.particles, parents: &pred.parents, weights: &pred.weights };
    let log_factor = |x: &M::State| {
        let g: Vec<f64> = scan.iter().map(|&z| model.log_likelihood(step, z, x).exp()).collect();
        factor(&g).ln()
    };
    let (particles, moves) = resample_move(model, step, &p, &weights, count, log_factor, &cfg.moves, rng)?;
    let mut estimates = Vec::new();
    if k > 0 {
        let positions: Vec<[f64; 2]> = particles.iter().map(|x| x.position()).collect();
        let centres = kmeans(&positions, k, cfg.kmeans_restarts, rng);
        let labels = nearest(&positions, &centres);
        for c in 0..centres.len() {
            let members: Vec<M::State> = particles.iter().zip(&labels).filter(|(_, l)| **l == c).map(|(x, _)| x.clone()).collect();
            if members.is_empty() {
                continue;
            }
            let uniform = vec![1.0; members.len()];
            let state = M::State::from_coords(&weighted_mean(&members, &uniform));
            estimates.push(Estimate { state, label: None, existence: 1.0 });
        }
    }
    let w = nu / particles.len() as f64;
    let n = particles.len();
    Ok(PhdStep { system: PhdSystem { particles, weights: vec![w; n] }, estimates, clusters: Vec::new(), moves })
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(points: &[[f64; 2]], centres: &[[f64; 2]]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, q) in centres.iter().enumerate() {
                let d = sq_dist(p, q);
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

const KMEANS_SAMPLE: usize = 1000;
const KMEANS_ITERS: usize = 100;

/// k-means with k-means++ seeding, fitted on a deterministic subsample of at
/// most 1000 points. Returns the centres of the restart with the lowest
/// within-cluster sum of squares.
pub fn kmeans(points: &[[f64; 2]], k: usize, restarts: usize, rng: &mut SimRng) -> Vec<[f64; 2]> {
    if points.is_empty() || k == 0 {
        return Vec::new();
    }
    let idx = deterministic_subsample(&vec![1.0; points.len()], KMEANS_SAMPLE);
    let sample: Vec<[f64; 2]> = idx.iter().map(|&i| points[i]).collect();
    let k = k.min(sample.len());
    let mut best: Option<(f64, Vec<[f64; 2]>)> = None;
    for _ in 0..restarts.max(1) {
        let mut centres = seed_plus_plus(&sample, k, rng);
        let mut labels = nearest(&sample, &centres);
        for _ in 0..KMEANS_ITERS {
            let mut sums = vec![[0.0; 3]; k];
            for (p, &l) in sample.iter().zip(&labels) {
                sums[l][0] += p[0];
                sums[l][1] += p[1];
                sums[l][2] += 1.0;
            }
            for (c, s) in centres.iter_mut().zip(&sums) {
                if s[2] > 0.0 {
                    *c = [s[0] / s[2], s[1] / s[2]];
                }
            }
            let next = nearest(&sample, &centres);
            if next == labels {
                break;
            }
            labels = next;
        }
        let inertia: f64 = sample.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centres[l])).sum();
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, centres));
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

fn seed_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut SimRng) -> Vec<[f64; 2]> {
    let mut centres = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u: f64 = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = d2.iter().rposition(|d| *d > 0.0).unwrap_or(0);
            for (i, d) in d2.iter().enumerate() {
                cum += d;
                if u < cum {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centres.push(points[next]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    centres
}

pub struct PhdFilter<S> {
    cfg: PhdConfig,
    mode: PhdUpdate,
    system: PhdSystem<S>,
    prev_scan: Vec<f64>,
}

impl<S> PhdFilter<S> {
    pub fn new(settings: &FilterSettings, mode: PhdUpdate) -> Result<Self> {
        settings.validate()?;
        Ok(Self { cfg: PhdConfig::from_settings(settings), mode, system: PhdSystem::empty(), prev_scan: Vec::new() })
    }

    pub fn system(&self) -> &PhdSystem<S> {
        &self.system
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for PhdFilter<M::State> {
    fn name(&self) -> &'static str {
        match self.mode {
            PhdUpdate::Partition => "phd",
            PhdUpdate::PseudoLikelihood => "phd-plu",
        }
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let pred = phd_predict(model, step, &self.system, &self.prev_scan, &self.cfg, rng);
        let out = match self.mode {
            PhdUpdate::Partition => phd_update_partition(model, step, &pred, scan, &self.cfg, rng)?,
            PhdUpdate::PseudoLikelihood => phd_update_plu(model, step, &pred, scan, &self.cfg, rng)?,
        };
        if out.system.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NumericBlowUp { step, detail: "non-finite PHD weight".into() });
        }
        self.system = out.system;
        self.prev_scan = scan.to_vec();
        Ok(StepOutput {
            estimates: out.estimates,
            existence: None,
            cardinality: self.system.mass(),
            hypotheses: None,
            moves: out.moves,
        })
    }
}

/// PHD-filter estimate of the scan log-likelihood summed over all steps,
/// for calibration. Constants that do not depend on the model parameters
/// are dropped.
pub fn phd_sequence_loglik<M: MultiObjectModel>(model: &M, scans: &[Vec<f64>], cfg: &PhdConfig, rng: &mut SimRng) -> Result<f64> {
    let mut system = PhdSystem::empty();
    let mut prev: &[f64] = &[];
    let mut total = 0.0;
    for (k, scan) in scans.iter().enumerate() {
        let pred = phd_predict(model, k, &system, prev, cfg, rng);
        total += phd_scan_loglik(model, k, &pred, scan);
        system = phd_update_partition(model, k, &pred, scan, cfg, rng)?.system;
        prev = scan;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearGaussian1d, Model};
    use crate::rng::{stream, Stage};

    fn cfg() -> PhdConfig {
        PhdConfig::from_settings(&FilterSettings { birth_particles: 100, cluster_particles: 200, ..Default::default() })
    }

    #[test]
    fn birth_mass_of_an_empty_system() {
        let model = LinearGaussian1d::new(1.0, 1.0, 1.0);
        let mut rng = stream(0, Stage::Filter);
        let pred = phd_predict(&model, 1, &PhdSystem::empty(), &[3.0], &cfg(), &mut rng);
        assert_eq!(pred.particles.len(), 100);
        let mass: f64 = pred.weights.iter().sum();
        assert!((mass - 0.98 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_particle_association() {
        let mut model = LinearGaussian1d::new(1.0, 1.0, 1.0);
        model.p_d = 0.9;
        model.lambda_c = 2.0;
        let pred = PhdPrediction { particles: vec![0.5], parents: vec![0.5], weights: vec![0.7] };
        let lik = scan_likelihoods(&model, 1, &pred, &[0.0]);
        let g = model.log_likelihood(1, 0.0, &0.5).exp();
        let kappa = model.clutter_intensity(0.0);
        let p11 = 0.9 * g * 0.7 / (kappa + 0.9 * g * 0.7);
        let p10 = 0.1 * 0.7;
        let rows = association_probabilities(0.9, &pred.weights, &lik);
        assert!((rows[0][1] - p11 / (p11 + p10)).abs() < 1e-12);
        let expected_ll = -0.9 * 0.7 + (kappa + 0.9 * g * 0.7).ln();
        assert!((phd_scan_loglik(&model, 1, &pred, &[0.0]) - expected_ll).abs() < 1e-12);
    }

    #[test]
    fn empty_system_scan_loglik_is_clutter_only() {
        let mut model = LinearGaussian1d::new(1.0, 1.0, 1.0);
        model.lambda_c = 2.0;
        let pred = PhdPrediction::<f64> { particles: vec![], parents: vec![], weights: vec![] };
        let expected = 2.0 * (model.clutter_intensity(0.0)).ln();
        assert!((phd_scan_loglik(&model, 1, &pred, &[0.0, 1.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn partition_conserves_particles_and_skips_draws_on_certain_rows() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let mut a = stream(1, Stage::Filter);
        let b = a.clone();
        assert_eq!(partition(&rows, &mut a), vec![0, 1, 0]);
        assert_eq!(a, b);
    }

    #[test]
    fn pfu_existence_is_one_without_clutter() {
        let model = LinearGaussian1d::new(1.0, 1.0, 1.0);
        let mut rng = stream(2, Stage::Filter);
        let pred = PhdPrediction { particles: vec![0.0, 0.5, 1.0], parents: vec![0.0, 0.5, 1.0], weights: vec![0.2; 3] };
        let (out, p_e, _, _) =
            pfu_bootstrap(&model, 1, &pred, &[0, 1, 2], 0.4, 0.0, 7, &MoveConfig::default(), &mut rng).unwrap().unwrap();
        assert_eq!(out.len(), 7);
        assert!((p_e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kmeans_finds_two_blobs() {
        let mut rng = stream(3, Stage::Filter);
        let mut pts = Vec::new();
        for i in 0..50 {
            let d = i as f64 * 0.01;
            pts.push([d, -d]);
            pts.push([100.0 + d, 50.0 - d]);
        }
        let mut c = kmeans(&pts, 2, 10, &mut rng);
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!(c[0][0] < 1.0 && (c[1][0] - 100.0).abs() < 1.0);
    }
}
