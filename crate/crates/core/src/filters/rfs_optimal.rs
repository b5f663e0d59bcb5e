//! Bootstrap filter on the multi-object state space. Each particle is a
//! finite set of target states stored as a stacked vector and weighted by
//! the full multi-object likelihood, which sums over all associations of
//! targets to measurements.
//!
//! The state estimate averages stacked entries position by position, so it
//! depends on the order of the constituents (mixed labelling). OSPA is the
//! order-free way to evaluate it.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::filters::{Estimate, FilterSettings, StepOutput, TrackingFilter};
use crate::fisst::CardinalityDistribution;
use crate::math::{log_sum_exp, normalize_weighted};
use crate::models::MultiObjectModel;
use crate::particles::{systematic_resample, weighted_mean, MoveStats, ParticleState};
use crate::rng::SimRng;

/// Number of maps from `n` targets into `{0, 1..m}` that are injective on
/// the nonzero part: `sum_j C(n,j) C(m,j) j!`.
pub fn association_count(n: usize, m: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for j in 0..=n.min(m) {
        if j > 0 {
            // C(n,j) C(m,j) j! = C(n,j-1) C(m,j-1) (j-1)! (n-j+1)(m-j+1)/j
            term = term * (n - j + 1) as u128 * (m - j + 1) as u128 / j as u128;
        }
        total += term;
    }
    total
}

/// Every association map. Entry `i` is 0 when target `i` is undetected and
/// `j + 1` when it generated measurement `j`.
pub fn enumerate_associations(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        cur.push(0);
        rec(i + 1, n, used, cur, out);
        cur.pop();
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j + 1);
                rec(i + 1, n, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, &mut vec![false; m], &mut Vec::with_capacity(n), &mut out);
    out
}

/// `ln` of the multi-object likelihood `g(Z | X)` under Poisson clutter,
/// written without dividing by the clutter intensity:
/// `e^{-lambda} sum_theta prod_{undetected} (1 - p_D) prod_{detected} p_D g(z|x)
/// prod_{unassigned z} kappa(z)`.
pub fn multiobject_loglik<M: MultiObjectModel>(model: &M, step: usize, x: &[M::State], scan: &[f64], bound: u64) -> Result<f64> {
    let count = association_count(x.len(), scan.len());
    if count > bound as u128 {
        return Err(Error::ComplexityExceeded { count, bound: bound as u128 });
    }
    let p_d = model.p_detect();
    let ln_miss = (1.0 - p_d).ln();
    let ln_pd = p_d.ln();
    let ln_g: Vec<Vec<f64>> = x.iter().map(|s| scan.iter().map(|&z| model.log_likelihood(step, z, s)).collect()).collect();
    let ln_kappa: Vec<f64> = scan.iter().map(|&z| model.clutter_intensity(z).ln()).collect();
    let mut terms = Vec::new();
    let mut used = vec![false; scan.len()];
    assoc_terms(0, 0.0, &ln_g, ln_miss, ln_pd, &ln_kappa, &mut used, &mut terms);
    Ok(-model.clutter_rate() + log_sum_exp(&terms))
}

#[allow(clippy::too_many_arguments)]
fn assoc_terms(
    i: usize,
    acc: f64,
    ln_g: &[Vec<f64>],
    ln_miss: f64,
    ln_pd: f64,
    ln_kappa: &[f64],
    used: &mut [bool],
    out: &mut Vec<f64>,
) {
    if acc == f64::NEG_INFINITY {
        return;
    }
    if i == ln_g.len() {
        let clutter: f64 = ln_kappa.iter().zip(used.iter()).filter(|(_, u)| !**u).map(|(k, _)| k).sum();
        let t = acc + clutter;
        if t > f64::NEG_INFINITY {
            out.push(t);
        }
        return;
    }
    assoc_terms(i + 1, acc + ln_miss, ln_g, ln_miss, ln_pd, ln_kappa, used, out);
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            assoc_terms(i + 1, acc + ln_pd + ln_g[i][j], ln_g, ln_miss, ln_pd, ln_kappa, used, out);
            used[j] = false;
        }
    }
}

/// Fraction of particles of each cardinality `0..=nu_max`.
pub fn estimate_cardinality<S>(cloud: &[Vec<S>], nu_max: usize) -> Result<CardinalityDistribution> {
    if cloud.is_empty() {
        return Err(Error::invalid("cardinality of an empty cloud"));
    }
    let mut counts = vec![0usize; nu_max + 1];
    for x in cloud {
        if x.len() > nu_max {
            return Err(Error::invalid(format!("particle with {} targets exceeds {nu_max}", x.len())));
        }
        counts[x.len()] += 1;
    }
    let n = cloud.len();
    let mut probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    // Keep the sum at one after rounding by folding the residual into the mode.
    let residual = 1.0 - probs.iter().sum::<f64>();
    if let Some(mode) = (0..probs.len()).max_by(|a, b| probs[*a].total_cmp(&probs[*b])) {
        probs[mode] += residual;
    }
    CardinalityDistribution::new(probs)
}

/// Weighted mean of the stacked states over the particles holding `n_hat`
/// targets.
pub fn estimate_state<S: ParticleState>(cloud: &[Vec<S>], weights: &[f64], n_hat: usize) -> Result<Vec<S>> {
    let matching: Vec<usize> = (0..cloud.len()).filter(|&i| cloud[i].len() == n_hat).collect();
    if matching.is_empty() {
        return Err(Error::EmptyEstimate(n_hat));
    }
    let w: Vec<f64> = matching.iter().map(|&i| weights[i]).collect();
    Ok((0..n_hat)
        .map(|k| {
            let col: Vec<S> = matching.iter().map(|&i| cloud[i][k].clone()).collect();
            S::from_coords(&weighted_mean(&col, &w))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfsConfig {
    pub particles: usize,
    pub p_survive: f64,
    pub mu0: f64,
    pub nu_max: usize,
    pub association_bound: u64,
}

impl RfsConfig {
    pub fn from_settings(s: &FilterSettings) -> Self {
        Self {
            particles: s.particles,
            p_survive: s.p_survive,
            mu0: s.mu0,
            nu_max: s.nu_max,
            association_bound: s.association_bound,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RfsStep<S> {
    pub cloud: Vec<Vec<S>>,
    pub dropped_births: usize,
}

/// Predict every multi-object particle, weight it by the multi-object
/// likelihood and resample. Births are Poisson(`mu0`) per particle, each
/// drawn from the birth density of a uniformly chosen previous measurement.
pub fn rfs_bootstrap_step<M: MultiObjectModel>(
    model: &M,
    step: usize,
    cloud: &[Vec<M::State>],
    scan: &[f64],
    prev_scan: &[f64],
    cfg: &RfsConfig,
    rng: &mut SimRng,
) -> Result<RfsStep<M::State>> {
    let births = if cfg.mu0 > 0.0 && step > 0 && !prev_scan.is_empty() {
        Some(Poisson::new(cfg.mu0).map_err(|e| Error::invalid(format!("birth rate: {e}")))?)
    } else {
        None
    };
    let mut dropped = 0;
    let mut predicted = Vec::with_capacity(cloud.len());
    for x in cloud {
        let mut parents: Vec<M::State> = if cfg.p_survive >= 1.0 {
            x.clone()
        } else if cfg.p_survive <= 0.0 {
            Vec::new()
        } else {
            x.iter().filter(|_| rng.random::<f64>() < cfg.p_survive).cloned().collect()
        };
        if let Some(poisson) = &births {
            let nb = poisson.sample(rng) as usize;
            for _ in 0..nb {
                let z = prev_scan[rng.random_range(0..prev_scan.len())];
                let b = model.sample_birth(step - 1, z, rng);
                if parents.len() < cfg.nu_max {
                    parents.push(b);
                } else {
                    dropped += 1;
                }
            }
        }
        predicted.push(parents.iter().map(|s| model.propagate(step, s, rng)).collect::<Vec<_>>());
    }
    let loglik = predicted
        .iter()
        .map(|x| multiobject_loglik(model, step, x, scan, cfg.association_bound))
        .collect::<Result<Vec<f64>>>()?;
    let (weights, _) = normalize_weighted(None, &loglik).ok_or_else(|| Error::DegenerateUpdate {
        step,
        detail: "every multi-object particle has zero likelihood".into(),
    })?;
    let idx = systematic_resample(&weights, cfg.particles, rng)?;
    Ok(RfsStep { cloud: idx.into_iter().map(|i| predicted[i].clone()).collect(), dropped_births: dropped })
}

pub struct RfsOptimalFilter<S> {
    cfg: RfsConfig,
    cloud: Vec<Vec<S>>,
    prev_scan: Vec<f64>,
    dropped_births: usize,
}

impl<S: Clone> RfsOptimalFilter<S> {
    pub fn new(settings: &FilterSettings) -> Result<Self> {
        settings.validate()?;
        let cfg = RfsConfig::from_settings(settings);
        Ok(Self { cfg, cloud: vec![Vec::new(); cfg.particles], prev_scan: Vec::new(), dropped_births: 0 })
    }

    /// Starts from a given cloud instead of the empty set.
    pub fn with_cloud(mut self, cloud: Vec<Vec<S>>) -> Self {
        self.cloud = cloud;
        self
    }

    pub fn cloud(&self) -> &[Vec<S>] {
        &self.cloud
    }

    /// Births discarded because their particle already held `nu_max` targets.
    pub fn dropped_births(&self) -> usize {
        self.dropped_births
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for RfsOptimalFilter<M::State> {
    fn name(&self) -> &'static str {
        "rfs-optimal"
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let out = rfs_bootstrap_step(model, step, &self.cloud, scan, &self.prev_scan, &self.cfg, rng)?;
        self.cloud = out.cloud;
        self.dropped_births += out.dropped_births;
        self.prev_scan = scan.to_vec();
        let rho = estimate_cardinality(&self.cloud, self.cfg.nu_max)?;
        let n_hat = rho.argmax();
        let uniform = vec![1.0; self.cloud.len()];
        let estimates = if n_hat == 0 {
            Vec::new()
        } else {
            estimate_state(&self.cloud, &uniform, n_hat)?
                .into_iter()
                .map(|state| Estimate { state, label: None, existence: rho.get(n_hat) })
                .collect()
        };
        Ok(StepOutput { estimates, existence: None, cardinality: rho.mean(), hypotheses: None, moves: MoveStats::default() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearGaussian1d, Model};
    use crate::rng::{stream, Stage};

    #[test]
    fn association_counts() {
        assert_eq!(enumerate_associations(2, 3).len(), 13);
        assert_eq!(enumerate_associations(0, 4), vec![Vec::<usize>::new()]);
        assert_eq!(enumerate_associations(3, 3).len(), 34);
        for n in 0..=5 {
            for m in 0..=5 {
                assert_eq!(enumerate_associations(n, m).len() as u128, association_count(n, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn maps_are_injective_on_detections() {
        for map in enumerate_associations(3, 4) {
            let mut hits: Vec<usize> = map.iter().copied().filter(|&j| j > 0).collect();
            let n = hits.len();
            hits.sort_unstable();
            hits.dedup();
            assert_eq!(hits.len(), n);
        }
    }

    fn cluttered() -> LinearGaussian1d {
        let mut m = LinearGaussian1d::new(1.0, 1.0, 1.0);
        m.p_d = 0.8;
        m.lambda_c = 1.5;
        m
    }

    #[test]
    fn empty_set_and_empty_scan() {
        let m = cluttered();
        let kappa = m.clutter_intensity(0.3);
        let ll = multiobject_loglik(&m, 1, &[], &[0.3], 100).unwrap();
        assert!((ll - (-1.5 + kappa.ln())).abs() < 1e-12);
        let ll = multiobject_loglik(&m, 1, &[0.0], &[], 100).unwrap();
        assert!((ll - (-1.5 + 0.2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn single_target_single_measurement_by_hand() {
        let m = cluttered();
        let g = m.log_likelihood(1, 0.3, &0.1).exp();
        let kappa = m.clutter_intensity(0.3);
        let expected = (-1.5f64).exp() * (0.2 * kappa + 0.8 * g);
        let ll = multiobject_loglik(&m, 1, &[0.1], &[0.3], 100).unwrap();
        assert!((ll - expected.ln()).abs() < 1e-12);
    }

    #[test]
    fn complexity_guard() {
        let m = cluttered();
        let err = multiobject_loglik(&m, 1, &[0.0; 4], &[0.0; 4], 100).unwrap_err();
        assert!(matches!(err, Error::ComplexityExceeded { count: 209, bound: 100 }));
    }

    #[test]
    fn cardinality_and_state_estimates() {
        let cloud = vec![vec![1.0], vec![], vec![3.0], vec![]];
        let rho = estimate_cardinality(&cloud, 4).unwrap();
        assert_eq!(rho.probs, vec![0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(estimate_state(&cloud, &[0.25; 4], 1).unwrap(), vec![2.0]);
        assert!(matches!(estimate_state(&cloud, &[0.25; 4], 2), Err(Error::EmptyEstimate(2))));
    }

    #[test]
    fn prediction_without_birth_keeps_or_clears_cardinality() {
        let m = LinearGaussian1d::new(1.0, 1.0, 1.0);
        let mut rng = stream(4, Stage::Filter);
        let cloud = vec![vec![0.0, 5.0]; 20];
        let cfg = RfsConfig { particles: 20, p_survive: 1.0, mu0: 0.0, nu_max: 4, association_bound: 1000 };
        let mut ideal = m.clone();
        ideal.p_d = 0.5;
        ideal.lambda_c = 1.0;
        let out = rfs_bootstrap_step(&ideal, 1, &cloud, &[0.0], &[0.0], &cfg, &mut rng).unwrap();
        assert!(out.cloud.iter().all(|x| x.len() == 2));
        let cfg = RfsConfig { p_survive: 0.0, ..cfg };
        let out = rfs_bootstrap_step(&ideal, 1, &cloud, &[0.0], &[0.0], &cfg, &mut rng).unwrap();
        assert!(out.cloud.iter().all(|x| x.is_empty()));
    }
}
