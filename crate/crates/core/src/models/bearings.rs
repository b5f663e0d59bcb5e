//! Bearings-only tracking from a moving observer.
//!
//! States are observer-relative `[x, y, vx, vy]`; bearings are measured
//! clockwise from the y axis, `h(x) = atan2(x, y)`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Model, MultiObjectModel};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normal_logpdf, wrap_angle};
use crate::particles::ParticleState;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState(pub [f64; 4]);

impl TargetState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self([x, y, vx, vy])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn vx(&self) -> f64 {
        self.0[2]
    }

    pub fn vy(&self) -> f64 {
        self.0[3]
    }

    pub fn range(&self) -> f64 {
        self.x().hypot(self.y())
    }

    pub fn speed(&self) -> f64 {
        self.vx().hypot(self.vy())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl ParticleState for TargetState {
    const DIM: usize = 4;

    fn coords(&self) -> &[f64] {
        &self.0
    }

    fn from_coords(c: &[f64]) -> Self {
        Self([c[0], c[1], c[2], c[3]])
    }

    fn position(&self) -> [f64; 2] {
        [self.0[0], self.0[1]]
    }
}

/// Nearly constant velocity motion with white acceleration noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvDynamics {
    /// Sampling interval, s.
    pub t: f64,
    /// Acceleration noise std, m/s^2.
    pub sigma_v: f64,
}

/// `F x - U + Gamma v` for one sampling interval.
pub fn cv_step(state: &TargetState, dynamics: &CvDynamics, u: &[f64; 4], noise: [f64; 2]) -> TargetState {
    let t = dynamics.t;
    let h = 0.5 * t * t;
    let [x, y, vx, vy] = state.0;
    TargetState([
        x + t * vx - u[0] + h * noise[0],
        y + t * vy - u[1] + h * noise[1],
        vx - u[2] + t * noise[0],
        vy - u[3] + t * noise[1],
    ])
}

pub fn bearing_of(state: &TargetState) -> Result<f64> {
    if state.x() == 0.0 && state.y() == 0.0 {
        return Err(Error::UndefinedBearing);
    }
    Ok(state.x().atan2(state.y()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

/// Observer path through waypoints with constant velocity on each leg.
/// Velocity is right-continuous: at a waypoint the new leg applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverTrack {
    pub waypoints: Vec<Waypoint>,
}

impl ObserverTrack {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::invalid("observer needs at least one waypoint"));
        }
        if waypoints.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
            return Err(Error::invalid("observer waypoint times must increase strictly"));
        }
        Ok(Self { waypoints })
    }

    /// Absolute `[x, y, vx, vy]` at time `t`.
    pub fn state_at(&self, t: f64) -> [f64; 4] {
        let w = &self.waypoints;
        if w.len() == 1 {
            return [w[0].x_m, w[0].y_m, 0.0, 0.0];
        }
        let leg = match w.iter().rposition(|p| p.t_s <= t) {
            None => 0,
            Some(i) => i.min(w.len() - 2),
        };
        let (a, b) = (&w[leg], &w[leg + 1]);
        let dt = b.t_s - a.t_s;
        let vx = (b.x_m - a.x_m) / dt;
        let vy = (b.y_m - a.y_m) / dt;
        [a.x_m + vx * (t - a.t_s), a.y_m + vy * (t - a.t_s), vx, vy]
    }
}

/// `U_{k+1,k}` from two consecutive observer states.
pub fn observer_correction(prev: &[f64; 4], next: &[f64; 4], t: f64) -> [f64; 4] {
    [
        next[0] - prev[0] - t * prev[2],
        next[1] - prev[1] - t * prev[3],
        next[2] - prev[2],
        next[3] - prev[3],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingSensor {
    /// Bearing noise std, rad.
    pub sigma_w: f64,
    pub p_d: f64,
    /// Mean clutter count per scan.
    pub lambda_c: f64,
    pub r_max: f64,
}

impl BearingSensor {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0) {
            return Err(Error::invalid("sigma_w must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(Error::invalid("p_d must lie in [0, 1]"));
        }
        if !(self.lambda_c >= 0.0) {
            return Err(Error::invalid("lambda_c must be nonnegative"));
        }
        Ok(())
    }

    /// Uniform clutter density on the circle, rad^-1.
    pub fn clutter_density(&self) -> f64 {
        1.0 / (2.0 * PI)
    }

    /// Gaussian log-density of the wrapped bearing residual.
    pub fn loglik(&self, z: f64, state: &TargetState) -> Result<f64> {
        let h = bearing_of(state)?;
        Ok(normal_logpdf(wrap_angle(z - h), self.sigma_w))
    }

    /// Detections with probability `p_d` plus Poisson clutter, shuffled.
    pub fn generate_scan(&self, truth: &[TargetState], rng: &mut SimRng) -> Vec<f64> {
        let mut scan = Vec::new();
        for s in truth {
            let u: f64 = rng.random();
            if u < self.p_d {
                let e: f64 = rng.sample(StandardNormal);
                let h = bearing_of(s).unwrap_or(0.0);
                scan.push(wrap_angle(h + self.sigma_w * e));
            }
        }
        if self.lambda_c > 0.0 {
            let count = Poisson::new(self.lambda_c).map(|p| p.sample(rng) as usize).unwrap_or(0);
            for _ in 0..count {
                let u: f64 = rng.random();
                scan.push(PI - 2.0 * PI * u);
            }
        }
        scan.shuffle(rng);
        scan
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RadialSampling {
    /// Range uniform on (0, r_max].
    #[default]
    Radius,
    /// Position uniform over the sector area.
    Area,
}

/// Sector ("pizza slice") birth density around a bearing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthSpec {
    pub r_max: f64,
    pub v_max: f64,
    /// Half-width of the sector in multiples of sigma_w.
    pub halfwidth_sigmas: f64,
    #[serde(default)]
    pub radial: RadialSampling,
}

impl BirthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) || !(self.v_max > 0.0) || !(self.halfwidth_sigmas >= 0.0) {
            return Err(Error::invalid("birth r_max, v_max must be positive and halfwidth nonnegative"));
        }
        Ok(())
    }

    fn halfwidth(&self, sigma_w: f64) -> f64 {
        (self.halfwidth_sigmas * sigma_w).min(PI)
    }

    fn sample_range(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        match self.radial {
            RadialSampling::Radius => self.r_max * (1.0 - u),
            RadialSampling::Area => self.r_max * (1.0 - u).sqrt(),
        }
    }

    /// Observer-relative newborn state for bearing `z`. Absolute velocity is
    /// uniform on the square `[-v_max, v_max]^2`.
    pub fn sample(&self, z: f64, observer: &[f64; 4], sigma_w: f64, rng: &mut SimRng) -> TargetState {
        let a = self.halfwidth(sigma_w);
        let u: f64 = rng.random();
        let angle = wrap_angle(z + a * (2.0 * u - 1.0));
        self.sample_at_angle(angle, observer, rng)
    }

    /// Newborn state anywhere in the full disc of radius `r_max`.
    pub fn sample_annulus(&self, observer: &[f64; 4], rng: &mut SimRng) -> TargetState {
        let u: f64 = rng.random();
        self.sample_at_angle(PI - 2.0 * PI * u, observer, rng)
    }

    fn sample_at_angle(&self, angle: f64, observer: &[f64; 4], rng: &mut SimRng) -> TargetState {
        let r = self.sample_range(rng);
        let vx: f64 = rng.random_range(-self.v_max..=self.v_max);
        let vy: f64 = rng.random_range(-self.v_max..=self.v_max);
        TargetState([r * angle.sin(), r * angle.cos(), vx - observer[2], vy - observer[3]])
    }

    fn log_position_density(&self, r: f64, angular_width: f64) -> f64 {
        match self.radial {
            RadialSampling::Radius => -(angular_width * self.r_max * r).ln(),
            RadialSampling::Area => -(0.5 * angular_width * self.r_max * self.r_max).ln(),
        }
    }

    fn log_velocity_density(&self, x: &TargetState, observer: &[f64; 4]) -> f64 {
        let vx = x.vx() + observer[2];
        let vy = x.vy() + observer[3];
        if vx.abs() <= self.v_max && vy.abs() <= self.v_max {
            -2.0 * (2.0 * self.v_max).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Log-density of one sector component at the relative state `x`.
    pub fn log_density(&self, x: &TargetState, z: f64, observer: &[f64; 4], sigma_w: f64) -> f64 {
        let r = x.range();
        if r <= 0.0 || r > self.r_max {
            return f64::NEG_INFINITY;
        }
        let a = self.halfwidth(sigma_w);
        let phi = x.x().atan2(x.y());
        if wrap_angle(phi - z).abs() > a {
            return f64::NEG_INFINITY;
        }
        self.log_position_density(r, 2.0 * a) + self.log_velocity_density(x, observer)
    }

    /// Log of the equal-weight mixture over the previous scan; an empty scan
    /// falls back to the full disc.
    pub fn mixture_logdensity(&self, x: &TargetState, prev_scan: &[f64], observer: &[f64; 4], sigma_w: f64) -> f64 {
        if prev_scan.is_empty() {
            let r = x.range();
            if r <= 0.0 || r > self.r_max {
                return f64::NEG_INFINITY;
            }
            return self.log_position_density(r, 2.0 * PI) + self.log_velocity_density(x, observer);
        }
        let terms: Vec<f64> = prev_scan.iter().map(|z| self.log_density(x, *z, observer, sigma_w)).collect();
        log_sum_exp(&terms) - (prev_scan.len() as f64).ln()
    }
}

/// The complete bearings-only model on a fixed time grid `t_k = k T`.
#[derive(Debug, Clone)]
pub struct BearingsModel {
    pub dynamics: CvDynamics,
    pub sensor: BearingSensor,
    pub birth: BirthSpec,
    observer: ObserverTrack,
    observer_states: Vec<[f64; 4]>,
}

impl BearingsModel {
    pub fn new(dynamics: CvDynamics, sensor: BearingSensor, birth: BirthSpec, observer: ObserverTrack, n_steps: usize) -> Self {
        let observer_states = (0..n_steps).map(|k| observer.state_at(k as f64 * dynamics.t)).collect();
        Self { dynamics, sensor, birth, observer, observer_states }
    }

    pub fn observer_state(&self, step: usize) -> [f64; 4] {
        match self.observer_states.get(step) {
            Some(s) => *s,
            None => self.observer.state_at(step as f64 * self.dynamics.t),
        }
    }

    /// `U_{k,k-1}` for the transition into step `k`.
    pub fn correction(&self, step: usize) -> [f64; 4] {
        let prev = self.observer_state(step.saturating_sub(1));
        let next = self.observer_state(step);
        observer_correction(&prev, &next, self.dynamics.t)
    }

    pub fn with_sigma_w(&self, sigma_w: f64) -> Self {
        let mut m = self.clone();
        m.sensor.sigma_w = sigma_w;
        m
    }

    pub fn birth_mixture_logdensity(&self, step: usize, x: &TargetState, prev_scan: &[f64]) -> f64 {
        self.birth.mixture_logdensity(x, prev_scan, &self.observer_state(step), self.sensor.sigma_w)
    }
}

impl Model for BearingsModel {
    type State = TargetState;

    fn propagate(&self, step: usize, x: &TargetState, rng: &mut SimRng) -> TargetState {
        let n0: f64 = rng.sample(StandardNormal);
        let n1: f64 = rng.sample(StandardNormal);
        let s = self.dynamics.sigma_v;
        cv_step(x, &self.dynamics, &self.correction(step), [s * n0, s * n1])
    }

    fn log_likelihood(&self, _step: usize, z: f64, x: &TargetState) -> f64 {
        self.sensor.loglik(z, x).unwrap_or(f64::NEG_INFINITY)
    }
}

impl MultiObjectModel for BearingsModel {
    fn p_detect(&self) -> f64 {
        self.sensor.p_d
    }

    fn clutter_rate(&self) -> f64 {
        self.sensor.lambda_c
    }

    fn clutter_density(&self, _z: f64) -> f64 {
        self.sensor.clutter_density()
    }

    fn sample_birth(&self, step: usize, z: f64, rng: &mut SimRng) -> TargetState {
        self.birth.sample(z, &self.observer_state(step), self.sensor.sigma_w, rng)
    }

    fn in_gate(&self, _step: usize, z: f64, x: &TargetState) -> bool {
        match bearing_of(x) {
            Ok(h) => wrap_angle(z - h).abs() <= 5.0 * self.sensor.sigma_w,
            Err(_) => false,
        }
    }
}
