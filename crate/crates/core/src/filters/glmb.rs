//! Delta-GLMB particle filter. The labelled multi-object density is a
//! weighted list of hypotheses, each a set of labelled tracks with their own
//! particle clouds. Tracks are shared between hypotheses by reference, so a
//! track is propagated once per step and updated once per measurement no
//! matter how many hypotheses contain it.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::assignment::{kbest_subsets, ranked_assignments, CostMatrix};
use crate::error::{Error, Result};
use crate::filters::{resample_move, Estimate, FilterSettings, Label, Predicted, StepOutput, TrackingFilter};
use crate::fisst::CardinalityDistribution;
use crate::math::{log_sum_exp, normalize_weighted};
use crate::models::MultiObjectModel;
use crate::particles::{EstimateMode, MoveConfig, MoveStats, WeightedParticleSet};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Track<S> {
    pub label: Label,
    /// Equally weighted particles.
    pub particles: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct GlmbHypothesis<S> {
    /// Sorted by label.
    pub tracks: Vec<Arc<Track<S>>>,
    pub log_weight: f64,
}

impl<S> GlmbHypothesis<S> {
    pub fn labels(&self) -> Vec<Label> {
        self.tracks.iter().map(|t| t.label).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GlmbDensity<S> {
    pub hypotheses: Vec<GlmbHypothesis<S>>,
}

impl<S> GlmbDensity<S> {
    /// The density of the empty set.
    pub fn empty() -> Self {
        Self { hypotheses: vec![GlmbHypothesis { tracks: Vec::new(), log_weight: 0.0 }] }
    }

    pub fn single(tracks: Vec<Track<S>>) -> Self {
        let mut tracks: Vec<Arc<Track<S>>> = tracks.into_iter().map(Arc::new).collect();
        tracks.sort_by_key(|t| t.label);
        Self { hypotheses: vec![GlmbHypothesis { tracks, log_weight: 0.0 }] }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.hypotheses.iter().map(|h| h.log_weight.exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmbConfig {
    pub p_survive: f64,
    pub r_birth: f64,
    pub birth_subsets: usize,
    pub pred_hypotheses: usize,
    pub upd_hypotheses: usize,
    pub hyp_max: usize,
    pub track_particles: usize,
    pub moves: MoveConfig,
    pub move_tracks: bool,
    pub gate: bool,
    pub estimate: EstimateMode,
}

impl GlmbConfig {
    pub fn from_settings(s: &FilterSettings) -> Self {
        Self {
            p_survive: s.p_survive,
            r_birth: s.r_birth,
            birth_subsets: s.birth_subsets,
            pred_hypotheses: s.pred_hypotheses,
            upd_hypotheses: s.upd_hypotheses,
            hyp_max: s.hyp_max,
            track_particles: s.track_particles,
            moves: s.moves,
            move_tracks: s.glmb_move,
            gate: s.gate,
            estimate: s.estimate,
        }
    }
}

/// Per-parent budget `max(1, round(phi * total))`.
pub fn budget(phi: f64, total: usize) -> usize {
    ((phi * total as f64).round() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct PredTrack<S> {
    pub track: Arc<Track<S>>,
    pub parents: Vec<S>,
}

/// Predicted density. Hypotheses index into a shared pool of predicted
/// tracks.
#[derive(Debug, Clone)]
pub struct GlmbPrediction<S> {
    pub tracks: Vec<PredTrack<S>>,
    pub hypotheses: Vec<(Vec<usize>, f64)>,
}

/// Survival and birth subsets per hypothesis. Every existing track is
/// propagated once; newborn tracks come one per previous measurement with
/// existence `r_birth`.
pub fn glmb_predict<M: MultiObjectModel>(
    model: &M,
    step: usize,
    density: &GlmbDensity<M::State>,
    prev_scan: &[f64],
    cfg: &GlmbConfig,
    rng: &mut SimRng,
) -> Result<GlmbPrediction<M::State>> {
    let mut pool: Vec<PredTrack<M::State>> = Vec::new();
    let mut index: HashMap<*const Track<M::State>, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(density.hypotheses.len());
    for h in &density.hypotheses {
        let mut ids = Vec::with_capacity(h.tracks.len());
        for t in &h.tracks {
            let key = Arc::as_ptr(t);
            let id = match index.get(&key) {
                Some(&id) => id,
                None => {
                    let particles = t.particles.iter().map(|x| model.propagate(step, x, rng)).collect();
                    pool.push(PredTrack {
                        track: Arc::new(Track { label: t.label, particles }),
                        parents: t.particles.clone(),
                    });
                    index.insert(key, pool.len() - 1);
                    pool.len() - 1
                }
            };
            ids.push(id);
        }
        members.push(ids);
    }

    let mut birth_ids = Vec::new();
    if cfg.r_birth > 0.0 && step > 0 {
        for (j, &z) in prev_scan.iter().enumerate() {
            let parents: Vec<M::State> = (0..cfg.track_particles).map(|_| model.sample_birth(step - 1, z, rng)).collect();
            let particles = parents.iter().map(|x| model.propagate(step, x, rng)).collect();
            pool.push(PredTrack { track: Arc::new(Track { label: Label { birth_step: step, index: j }, particles }), parents });
            birth_ids.push(pool.len() - 1);
        }
    }
    let births = if birth_ids.is_empty() {
        vec![(Vec::new(), 0.0)]
    } else {
        kbest_subsets(&vec![cfg.r_birth; birth_ids.len()], cfg.birth_subsets)
            .into_iter()
            .map(|s| (s.kept.iter().map(|&k| birth_ids[k]).collect::<Vec<usize>>(), s.cost))
            .collect()
    };

    let mut hypotheses = Vec::new();
    for (h, ids) in density.hypotheses.iter().zip(&members) {
        let k = budget(h.log_weight.exp(), cfg.pred_hypotheses).div_ceil(births.len()).max(1);
        let survivals = if ids.is_empty() || cfg.p_survive >= 1.0 {
            vec![(ids.clone(), 0.0)]
        } else if cfg.p_survive <= 0.0 {
            vec![(Vec::new(), 0.0)]
        } else {
            kbest_subsets(&vec![cfg.p_survive; ids.len()], k)
                .into_iter()
                .map(|s| (s.kept.iter().map(|&i| ids[i]).collect::<Vec<usize>>(), s.cost))
                .collect()
        };
        for (kept, cs) in &survivals {
            for (born, cb) in &births {
                let mut set = kept.clone();
                set.extend(born.iter().copied());
                hypotheses.push((set, h.log_weight - cs - cb));
            }
        }
    }
    normalize_log_weights(&mut hypotheses, step)?;
    Ok(GlmbPrediction { tracks: pool, hypotheses })
}

fn normalize_log_weights<T>(items: &mut [(T, f64)], step: usize) -> Result<()> {
    let lw: Vec<f64> = items.iter().map(|(_, w)| *w).collect();
    let total = log_sum_exp(&lw);
    if !total.is_finite() {
        return Err(Error::DegenerateUpdate { step, detail: "every hypothesis has zero weight".into() });
    }
    for (_, w) in items.iter_mut() {
        *w -= total;
    }
    Ok(())
}

/// Per-track measurement log-likelihoods `ln g(z_j | x_i)` and the gate.
pub struct TrackScores {
    pub loglik: Vec<Vec<f64>>,
    /// `ln theta(l, z_j)`: `ln(p_D mean_i g(z_j|x_i) / kappa(z_j))`, without
    /// the division when there is no clutter. Minus infinity when gated out.
    pub log_theta: Vec<f64>,
}

pub fn score_track<M: MultiObjectModel>(model: &M, step: usize, track: &Track<M::State>, scan: &[f64], gate: bool) -> TrackScores {
    let n = track.particles.len() as f64;
    let p_d = model.p_detect();
    let mut loglik = Vec::with_capacity(scan.len());
    let mut log_theta = Vec::with_capacity(scan.len());
    for &z in scan {
        let ll: Vec<f64> = track.particles.iter().map(|x| model.log_likelihood(step, z, x)).collect();
        let gated_out = gate && !track.particles.iter().any(|x| model.in_gate(step, z, x));
        let kappa = model.clutter_intensity(z);
        let mut lt = p_d.ln() + log_sum_exp(&ll) - n.ln();
        if kappa > 0.0 {
            lt -= kappa.ln();
        }
        log_theta.push(if gated_out { f64::NEG_INFINITY } else { lt });
        loglik.push(ll);
    }
    TrackScores { loglik, log_theta }
}

/// The `n x (m + n)` assignment cost matrix: detection costs
/// `-ln theta(l, z)` on the left, misdetection costs `-ln(1 - p_D)` on the
/// diagonal of the right block and infinity elsewhere.
pub fn build_cost_matrix(p_d: f64, scores: &[&TrackScores], m: usize) -> CostMatrix {
    let n = scores.len();
    let mut c = CostMatrix::filled(n, m + n, f64::INFINITY);
    let miss = -(1.0 - p_d).ln();
    for (i, s) in scores.iter().enumerate() {
        for j in 0..m {
            c.set(i, j, -s.log_theta[j]);
        }
        c.set(i, m + i, miss);
    }
    c
}

/// Ranked assignments per predicted hypothesis, truncation to `hyp_max`
/// and the particle update of every (track, measurement) pair in use.
pub fn glmb_update<M: MultiObjectModel>(
    model: &M,
    step: usize,
    pred: &GlmbPrediction<M::State>,
    scan: &[f64],
    cfg: &GlmbConfig,
    rng: &mut SimRng,
) -> Result<(GlmbDensity<M::State>, MoveStats)> {
    let m = scan.len();
    let p_d = model.p_detect();
    let clutter_free = scan.iter().any(|&z| model.clutter_intensity(z) <= 0.0);
    let mut scores: Vec<Option<TrackScores>> = (0..pred.tracks.len()).map(|_| None).collect();
    for (ids, _) in &pred.hypotheses {
        for &id in ids {
            if scores[id].is_none() {
                scores[id] = Some(score_track(model, step, &pred.tracks[id].track, scan, cfg.gate));
            }
        }
    }

    // (parent, assignment, log weight); assignment[i] is a measurement index or m for a miss.
    let mut children: Vec<(usize, Vec<usize>, f64)> = Vec::new();
    for (h, (ids, lw)) in pred.hypotheses.iter().enumerate() {
        if ids.is_empty() {
            if m == 0 || !clutter_free {
                children.push((h, Vec::new(), *lw));
            }
            continue;
        }
        let s: Vec<&TrackScores> = ids.iter().map(|&id| scores[id].as_ref().expect("scored")).collect();
        let cost = build_cost_matrix(p_d, &s, m);
        let ranked = ranked_assignments(&cost, budget(lw.exp(), cfg.upd_hypotheses));
        for (cols, c) in ranked.solutions {
            let assignment: Vec<usize> = cols.iter().map(|&col| if col < m { col } else { m }).collect();
            if clutter_free && assignment.iter().filter(|&&a| a < m).count() < m {
                continue;
            }
            children.push((h, assignment, lw - c));
        }
    }
    if children.is_empty() {
        return Err(Error::DegenerateUpdate { step, detail: "no feasible hypothesis after the update".into() });
    }
    children.sort_by(|a, b| b.2.total_cmp(&a.2));
    children.truncate(cfg.hyp_max);
    let mut weighted: Vec<((usize, Vec<usize>), f64)> = children.into_iter().map(|(h, a, w)| ((h, a), w)).collect();
    normalize_log_weights(&mut weighted, step)?;

    let mut updated: HashMap<(usize, usize), Arc<Track<M::State>>> = HashMap::new();
    let mut moves = MoveStats::default();
    let mut hypotheses = Vec::with_capacity(weighted.len());
    let no_moves = MoveConfig { steps: 0, ..cfg.moves };
    for ((h, assignment), lw) in weighted {
        let ids = &pred.hypotheses[h].0;
        let mut tracks = Vec::with_capacity(ids.len());
        for (&id, &j) in ids.iter().zip(&assignment) {
            let pt = &pred.tracks[id];
            if j == m {
                tracks.push(pt.track.clone());
                continue;
            }
            if let Some(t) = updated.get(&(id, j)) {
                tracks.push(t.clone());
                continue;
            }
            let ll = &scores[id].as_ref().expect("scored").loglik[j];
            let (w, _) = normalize_weighted(None, ll)
                .ok_or_else(|| Error::DegenerateUpdate { step, detail: format!("track {:?} cannot explain z={}", pt.track.label, scan[j]) })?;
            let n = pt.track.particles.len();
            let prior = vec![1.0 / n as f64; n];
            let p = Predicted { particles: &pt.track.particles, parents: &pt.parents, weights: &prior };
            let z = scan[j];
            let mv = if cfg.move_tracks { &cfg.moves } else { &no_moves };
            let (particles, stats) =
                resample_move(model, step, &p, &w, cfg.track_particles, |x| model.log_likelihood(step, z, x), mv, rng)?;
            moves.merge(stats);
            let t = Arc::new(Track { label: pt.track.label, particles });
            updated.insert((id, j), t.clone());
            tracks.push(t);
        }
        debug_assert!(tracks.windows(2).all(|w| w[0].label < w[1].label), "labels must be distinct");
        hypotheses.push(GlmbHypothesis { tracks, log_weight: lw });
    }
    Ok((GlmbDensity { hypotheses }, moves))
}

#[derive(Debug, Clone)]
pub struct GlmbExtraction<S> {
    pub cardinality: CardinalityDistribution,
    pub n_hat: usize,
    /// Index of the reported hypothesis.
    pub hypothesis: usize,
    pub tracks: Vec<(Label, S)>,
    pub existence: BTreeMap<Label, f64>,
}

/// MAP cardinality, then the heaviest hypothesis of that cardinality.
pub fn extract_tracks<S: crate::particles::ParticleState>(density: &GlmbDensity<S>, mode: EstimateMode) -> Result<GlmbExtraction<S>> {
    let weights = density.weights();
    let total: f64 = weights.iter().sum();
    let n_max = density.hypotheses.iter().map(|h| h.tracks.len()).max().unwrap_or(0);
    let mut rho = vec![0.0; n_max + 1];
    let mut existence = BTreeMap::new();
    for (h, w) in density.hypotheses.iter().zip(&weights) {
        let w = w / total;
        rho[h.tracks.len()] += w;
        for t in &h.tracks {
            *existence.entry(t.label).or_insert(0.0) += w;
        }
    }
    let s: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|p| *p /= s);
    let cardinality = CardinalityDistribution::new(rho)?;
    let n_hat = cardinality.argmax();
    let hypothesis = (0..density.hypotheses.len())
        .filter(|&i| density.hypotheses[i].tracks.len() == n_hat)
        .max_by(|a, b| weights[*a].total_cmp(&weights[*b]).then(b.cmp(a)))
        .ok_or(Error::EmptyEstimate(n_hat))?;
    let tracks = density.hypotheses[hypothesis]
        .tracks
        .iter()
        .map(|t| (t.label, WeightedParticleSet::uniform(t.particles.clone()).estimate(mode)))
        .collect();
    for r in existence.values_mut() {
        *r = r.min(1.0);
    }
    Ok(GlmbExtraction { cardinality, n_hat, hypothesis, tracks, existence })
}

pub struct GlmbFilter<S> {
    cfg: GlmbConfig,
    density: GlmbDensity<S>,
    prev_scan: Vec<f64>,
}

impl<S> GlmbFilter<S> {
    pub fn new(settings: &FilterSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self { cfg: GlmbConfig::from_settings(settings), density: GlmbDensity::empty(), prev_scan: Vec::new() })
    }

    pub fn with_density(mut self, density: GlmbDensity<S>) -> Self {
        self.density = density;
        self
    }

    pub fn density(&self) -> &GlmbDensity<S> {
        &self.density
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for GlmbFilter<M::State> {
    fn name(&self) -> &'static str {
        "glmb"
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let pred = glmb_predict(model, step, &self.density, &self.prev_scan, &self.cfg, rng)?;
        let (density, moves) = glmb_update(model, step, &pred, scan, &self.cfg, rng)?;
        self.density = density;
        self.prev_scan = scan.to_vec();
        let ex = extract_tracks(&self.density, self.cfg.estimate)?;
        let estimates = ex
            .tracks
            .into_iter()
            .map(|(label, state)| Estimate { state, label: Some(label), existence: ex.existence[&label] })
            .collect();
        Ok(StepOutput {
            estimates,
            existence: None,
            cardinality: ex.cardinality.mean(),
            hypotheses: Some(self.density.hypotheses.len()),
            moves,
        })
    }
}
