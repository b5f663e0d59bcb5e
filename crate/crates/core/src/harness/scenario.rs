//! Scenario files and the built-in bearings-only geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{BearingSensor, BearingsModel, BirthSpec, CvDynamics, ObserverTrack, RadialSampling, TargetState, Waypoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub birth_s: f64,
    pub death_s: f64,
    /// Absolute `[x, y, vx, vy]` at `birth_s`, m and m/s.
    pub state: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub sigma_w_deg: f64,
    pub p_d: f64,
    pub lambda_c: f64,
    pub r_max_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Acceleration noise std, m/s^2.
    pub sigma_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthConfig {
    pub v_max_mps: f64,
    #[serde(default = "default_halfwidth")]
    pub halfwidth_sigmas: f64,
    #[serde(default)]
    pub radial: RadialSampling,
}

fn default_halfwidth() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    pub dt_s: f64,
    pub observer: Vec<Waypoint>,
    pub targets: Vec<TargetSpec>,
    pub sensor: SensorConfig,
    pub dynamics: DynamicsConfig,
    pub birth: BirthConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// One target alive from 200 s to 2400 s, sigma_w = 0.3 deg.
    Single,
    /// Four targets over 3000 s, sigma_w = 1 deg.
    FourTarget,
}

const OBSERVER: [(f64, f64, f64); 6] = [
    (0.0, 0.0, 0.0),
    (600.0, 1800.0, 600.0),
    (1200.0, 0.0, 1200.0),
    (1800.0, 1800.0, 1800.0),
    (2400.0, 0.0, 2400.0),
    (3000.0, 1800.0, 3000.0),
];

/// Anchor time at which target ranges and bearings are specified.
const ANCHOR_S: f64 = 1650.0;

/// (range m, bearing offset deg, vx, vy, birth s, death s)
const TARGETS: [(f64, f64, f64, f64, f64, f64); 4] = [
    (3400.0, -2.6, 0.3, 0.15, 0.0, 3000.0),
    (3700.0, -1.8, 1.2, 0.0, 100.0, 2500.0),
    (4100.0, -0.9, 2.3, -0.2, 200.0, 2400.0),
    (4700.0, 1.5, 3.9, -0.15, 400.0, 2200.0),
];

/// The built-in geometry. The observer zig-zags across the line of sight to
/// targets north of it, which move left to right and cross each other in
/// bearing between 1540 s and 1620 s.
pub fn paper_scenario(variant: Variant) -> ScenarioConfig {
    let observer: Vec<Waypoint> = OBSERVER.iter().map(|&(t_s, x_m, y_m)| Waypoint { t_s, x_m, y_m }).collect();
    let track = ObserverTrack::new(observer.clone()).expect("static waypoints");
    let o = track.state_at(ANCHOR_S);
    let targets: Vec<TargetSpec> = TARGETS
        .iter()
        .map(|&(r, d, vx, vy, birth_s, death_s)| {
            let b = d.to_radians();
            let (xa, ya) = (o[0] + r * b.sin(), o[1] + r * b.cos());
            let dt = birth_s - ANCHOR_S;
            // Rounded to 0.1 m so that the geometry is exact in decimal files.
            let round = |v: f64| (v * 10.0).round() / 10.0;
            TargetSpec { birth_s, death_s, state: [round(xa + vx * dt), round(ya + vy * dt), vx, vy] }
        })
        .collect();
    let (name, targets, sigma_w_deg) = match variant {
        Variant::Single => ("single", vec![targets[2].clone()], 0.3),
        Variant::FourTarget => ("four_target", targets, 1.0),
    };
    ScenarioConfig {
        name: name.into(),
        duration_s: 3000.0,
        dt_s: 20.0,
        observer,
        targets,
        sensor: SensorConfig { sigma_w_deg, p_d: 0.95, lambda_c: 1.0, r_max_m: 10_000.0 },
        dynamics: DynamicsConfig { sigma_v: 0.005 },
        birth: BirthConfig { v_max_mps: 7.5, halfwidth_sigmas: 3.0, radial: RadialSampling::Radius },
        seed: 0,
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0) || !(self.duration_s >= self.dt_s) {
            return Err(Error::invalid("need dt_s > 0 and duration_s >= dt_s"));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(0.0 <= t.birth_s && t.birth_s < t.death_s && t.death_s <= self.duration_s) {
                return Err(Error::invalid(format!("target {i}: need 0 <= birth_s < death_s <= duration_s")));
            }
            if t.state.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("target {i}: non-finite state")));
            }
        }
        if !(self.dynamics.sigma_v >= 0.0) {
            return Err(Error::invalid("dynamics.sigma_v must be nonnegative"));
        }
        if !(self.sensor.r_max_m > 0.0) {
            return Err(Error::invalid("sensor.r_max_m must be positive"));
        }
        ObserverTrack::new(self.observer.clone())?;
        self.sensor().validate()?;
        self.birth_spec().validate()
    }

    /// Number of scans: `t_k = k dt` for `k = 0..n_steps`.
    pub fn n_steps(&self) -> usize {
        (self.duration_s / self.dt_s).round() as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt_s
    }

    pub fn sensor(&self) -> BearingSensor {
        BearingSensor {
            sigma_w: self.sensor.sigma_w_deg.to_radians(),
            p_d: self.sensor.p_d,
            lambda_c: self.sensor.lambda_c,
            r_max: self.sensor.r_max_m,
        }
    }

    pub fn birth_spec(&self) -> BirthSpec {
        BirthSpec {
            r_max: self.sensor.r_max_m,
            v_max: self.birth.v_max_mps,
            halfwidth_sigmas: self.birth.halfwidth_sigmas,
            radial: self.birth.radial,
        }
    }

    pub fn model(&self) -> Result<BearingsModel> {
        self.validate()?;
        let observer = ObserverTrack::new(self.observer.clone())?;
        Ok(BearingsModel::new(
            CvDynamics { t: self.dt_s, sigma_v: self.dynamics.sigma_v },
            self.sensor(),
            self.birth_spec(),
            observer,
            self.n_steps(),
        ))
    }

    /// Absolute states of the targets alive at `step`, with their indices.
    /// Targets move in straight lines.
    pub fn truth(&self, step: usize) -> Vec<(usize, TargetState)> {
        let t = self.time(step);
        self.targets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.birth_s <= t && t <= s.death_s)
            .map(|(i, s)| {
                let dt = t - s.birth_s;
                let [x, y, vx, vy] = s.state;
                (i, TargetState([x + vx * dt, y + vy * dt, vx, vy]))
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Observer-relative state from an absolute one.
pub fn to_relative(abs: &TargetState, observer: &[f64; 4]) -> TargetState {
    TargetState(std::array::from_fn(|i| abs.0[i] - observer[i]))
}

pub fn to_absolute(rel: &TargetState, observer: &[f64; 4]) -> TargetState {
    TargetState(std::array::from_fn(|i| rel.0[i] + observer[i]))
}
