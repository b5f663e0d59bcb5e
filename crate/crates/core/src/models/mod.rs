//! State-space models used by the filters.

mod bearings;
mod linear;

pub use bearings::{
    bearing_of, cv_step, observer_correction, BearingSensor, BearingsModel, BirthSpec, CvDynamics, ObserverTrack, RadialSampling,
    TargetState, Waypoint,
};
pub use linear::LinearGaussian1d;

use crate::particles::ParticleState;
use crate::rng::SimRng;

/// Single-object dynamics and scalar measurement model.
///
/// `step` is the index of the time the result refers to: `propagate(k, x)`
/// moves a state from step `k-1` to step `k`.
pub trait Model: Send + Sync {
    type State: ParticleState;

    fn propagate(&self, step: usize, x: &Self::State, rng: &mut SimRng) -> Self::State;

    fn log_likelihood(&self, step: usize, z: f64, x: &Self::State) -> f64;

    /// Log transition density from step `step-1` to `step`, if it exists in
    /// closed form. Models without one get a kernel surrogate in the move step.
    fn transition_logdensity(&self, _step: usize, _from: &Self::State, _to: &Self::State) -> Option<f64> {
        None
    }

    fn has_transition_density(&self) -> bool {
        false
    }
}

/// Detection, clutter and measurement-driven birth on top of [`Model`].
pub trait MultiObjectModel: Model {
    fn p_detect(&self) -> f64;

    /// Mean clutter count per scan.
    fn clutter_rate(&self) -> f64;

    fn clutter_density(&self, z: f64) -> f64;

    fn clutter_intensity(&self, z: f64) -> f64 {
        self.clutter_rate() * self.clutter_density(z)
    }

    /// A newborn state at `step`, drawn from the birth density built on `z`.
    fn sample_birth(&self, step: usize, z: f64, rng: &mut SimRng) -> Self::State;

    /// Whether `x` could plausibly have produced `z`.
    fn in_gate(&self, _step: usize, _z: f64, _x: &Self::State) -> bool {
        true
    }
}
