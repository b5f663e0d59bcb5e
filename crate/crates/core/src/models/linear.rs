use rand::Rng;
use rand_distr::StandardNormal;

use super::{Model, MultiObjectModel};
use crate::math::normal_logpdf;
use crate::rng::SimRng;

/// Scalar linear-Gaussian model `x_k = a x_{k-1} + v`, `z_k = x_k + w`,
/// with uniform clutter on `[clutter_lo, clutter_hi]`. Test bed for filters
/// that have closed-form answers.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian1d {
    pub a: f64,
    pub q_std: f64,
    pub r_std: f64,
    pub p_d: f64,
    pub lambda_c: f64,
    pub clutter_lo: f64,
    pub clutter_hi: f64,
    pub birth_halfwidth: f64,
}

impl LinearGaussian1d {
    pub fn new(a: f64, q_std: f64, r_std: f64) -> Self {
        Self {
            a,
            q_std,
            r_std,
            p_d: 1.0,
            lambda_c: 0.0,
            clutter_lo: -100.0,
            clutter_hi: 100.0,
            birth_halfwidth: 3.0 * r_std,
        }
    }
}

impl Model for LinearGaussian1d {
    type State = f64;

    fn propagate(&self, _step: usize, x: &f64, rng: &mut SimRng) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.a * x + self.q_std * e
    }

    fn log_likelihood(&self, _step: usize, z: f64, x: &f64) -> f64 {
        normal_logpdf(z - x, self.r_std)
    }

    fn transition_logdensity(&self, _step: usize, from: &f64, to: &f64) -> Option<f64> {
        Some(normal_logpdf(to - self.a * from, self.q_std))
    }

    fn has_transition_density(&self) -> bool {
        true
    }
}

impl MultiObjectModel for LinearGaussian1d {
    fn p_detect(&self) -> f64 {
        self.p_d
    }

    fn clutter_rate(&self) -> f64 {
        self.lambda_c
    }

    fn clutter_density(&self, z: f64) -> f64 {
        if z >= self.clutter_lo && z <= self.clutter_hi {
            1.0 / (self.clutter_hi - self.clutter_lo)
        } else {
            0.0
        }
    }

    fn sample_birth(&self, _step: usize, z: f64, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        z + self.birth_halfwidth * (2.0 * u - 1.0)
    }

    fn in_gate(&self, _step: usize, z: f64, x: &f64) -> bool {
        (z - x).abs() <= 5.0 * self.r_std
    }
}
