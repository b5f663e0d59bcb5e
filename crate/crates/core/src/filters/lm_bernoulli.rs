//! Multi-target tracking with one Bernoulli filter per track. Detections of
//! the other tracks enter each track's update as extra clutter with
//! intensity `p_D r_j I_j(z)`, where `I_j(z)` is track `j`'s predicted
//! measurement density.

use crate::error::Result;
use crate::filters::bernoulli::{
    bernoulli_predict, predicted_intensity, update_spatial, updated_existence, BernoulliBelief, BernoulliConfig,
    BernoulliPrediction,
};
use crate::filters::{Estimate, FilterSettings, Label, StepOutput, TrackingFilter};
use crate::models::MultiObjectModel;
use crate::particles::{EstimateMode, MoveStats, WeightedParticleSet};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct LmTrack<S> {
    pub label: Label,
    pub belief: BernoulliBelief<S>,
}

pub struct LmBernoulliFilter<S> {
    cfg: BernoulliConfig,
    confirm: f64,
    delete: f64,
    unexplained: f64,
    estimate: EstimateMode,
    tracks: Vec<LmTrack<S>>,
    prev_scan: Vec<f64>,
    /// Fraction of each previous measurement explained by the tracks.
    prev_explained: Vec<f64>,
}

impl<S> LmBernoulliFilter<S> {
    pub fn new(settings: &FilterSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            cfg: BernoulliConfig::from_settings(settings),
            confirm: settings.lm_confirm,
            delete: settings.lm_delete,
            unexplained: settings.lm_unexplained,
            estimate: settings.estimate,
            tracks: Vec::new(),
            prev_scan: Vec::new(),
            prev_explained: Vec::new(),
        })
    }

    pub fn tracks(&self) -> &[LmTrack<S>] {
        &self.tracks
    }
}

impl<M: MultiObjectModel> TrackingFilter<M> for LmBernoulliFilter<M::State> {
    fn name(&self) -> &'static str {
        "lm-bernoulli"
    }

    fn step(&mut self, model: &M, step: usize, scan: &[f64], rng: &mut SimRng) -> Result<StepOutput<M::State>> {
        let survive_only = BernoulliConfig { p_birth: 0.0, ..self.cfg };
        let mut labels = Vec::new();
        let mut preds: Vec<BernoulliPrediction<M::State>> = Vec::new();
        for t in &self.tracks {
            preds.push(bernoulli_predict(model, step, &t.belief, &[], &survive_only, rng)?);
            labels.push(t.label);
        }
        if step > 0 {
            let mut index = 0;
            for (&z, &e) in self.prev_scan.iter().zip(&self.prev_explained) {
                if e >= self.unexplained {
                    continue;
                }
                let parents: Vec<M::State> =
                    (0..self.cfg.birth_particles).map(|_| model.sample_birth(step - 1, z, rng)).collect();
                let particles: Vec<M::State> = parents.iter().map(|x| model.propagate(step, x, rng)).collect();
                let n = particles.len();
                preds.push(BernoulliPrediction {
                    r: self.cfg.p_birth,
                    particles,
                    parents,
                    weights: vec![1.0 / n as f64; n],
                    persistent: 0,
                });
                labels.push(Label { birth_step: step, index });
                index += 1;
            }
        }

        let p_d = model.p_detect();
        let intensity: Vec<Vec<f64>> =
            preds.iter().map(|p| scan.iter().map(|&z| predicted_intensity(model, step, p, z)).collect()).collect();
        // detected[i][j] = p_D r_i I_i(z_j)
        let detected: Vec<Vec<f64>> =
            preds.iter().zip(&intensity).map(|(p, row)| row.iter().map(|v| p_d * p.r * v).collect()).collect();
        let clutter: Vec<f64> = scan.iter().map(|&z| model.clutter_intensity(z)).collect();
        let totals: Vec<f64> = (0..scan.len()).map(|j| detected.iter().map(|d| d[j]).sum()).collect();

        let mut tracks = Vec::new();
        let mut moves = MoveStats::default();
        for (i, pred) in preds.iter().enumerate() {
            let kappa: Vec<f64> = (0..scan.len()).map(|j| clutter[j] + totals[j] - detected[i][j]).collect();
            let r_new = updated_existence(p_d, pred.r, &intensity[i], &kappa, step)?;
            if r_new < self.delete {
                continue;
            }
            let upd = update_spatial(model, step, pred, scan, &kappa, r_new, self.cfg.particles, &self.cfg.moves, rng)?;
            moves.merge(upd.moves);
            tracks.push(LmTrack { label: labels[i], belief: upd.belief });
        }
        self.prev_explained = (0..scan.len())
            .map(|j| {
                let denom = clutter[j] + totals[j];
                if denom > 0.0 {
                    totals[j] / denom
                } else {
                    0.0
                }
            })
            .collect();
        self.prev_scan = scan.to_vec();
        self.tracks = tracks;

        let estimates = self
            .tracks
            .iter()
            .filter(|t| t.belief.r > self.confirm && !t.belief.particles.is_empty())
            .map(|t| Estimate {
                state: WeightedParticleSet::uniform(t.belief.particles.clone()).estimate(self.estimate),
                label: Some(t.label),
                existence: t.belief.r,
            })
            .collect();
        let cardinality = self.tracks.iter().map(|t| t.belief.r).sum();
        Ok(StepOutput { estimates, existence: None, cardinality, hypotheses: Some(self.tracks.len()), moves })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearGaussian1d;
    use crate::rng::{stream, Stage};

    fn model() -> LinearGaussian1d {
        let mut m = LinearGaussian1d::new(1.0, 0.1, 0.5);
        m.p_d = 0.95;
        m.lambda_c = 0.5;
        m
    }

    fn settings() -> FilterSettings {
        FilterSettings { particles: 300, birth_particles: 300, ..Default::default() }
    }

    #[test]
    fn two_separated_targets_become_two_tracks() {
        let m = model();
        let mut f = LmBernoulliFilter::new(&settings()).unwrap();
        let mut rng = stream(5, Stage::Filter);
        let mut last = None;
        for k in 0..8 {
            let out = TrackingFilter::<LinearGaussian1d>::step(&mut f, &m, k, &[-40.0, 40.0], &mut rng).unwrap();
            last = Some(out);
        }
        let out = last.unwrap();
        assert_eq!(out.estimates.len(), 2);
        let mut xs: Vec<f64> = out.estimates.iter().map(|e| e.state).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 40.0).abs() < 1.0 && (xs[1] - 40.0).abs() < 1.0, "{xs:?}");
        assert!(out.estimates[0].label != out.estimates[1].label);
    }

    #[test]
    fn tracks_die_without_measurements() {
        let m = model();
        let mut f = LmBernoulliFilter::new(&settings()).unwrap();
        let mut rng = stream(6, Stage::Filter);
        for k in 0..6 {
            TrackingFilter::<LinearGaussian1d>::step(&mut f, &m, k, &[10.0], &mut rng).unwrap();
        }
        assert!(!f.tracks().is_empty());
        for k in 6..12 {
            TrackingFilter::<LinearGaussian1d>::step(&mut f, &m, k, &[], &mut rng).unwrap();
        }
        assert!(f.tracks().is_empty());
    }
}
