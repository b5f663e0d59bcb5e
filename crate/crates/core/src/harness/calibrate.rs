//! Bearing-noise calibration on simulated or recorded scans.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filters::calibration::{mh_calibrate, sigma_w_loglik_pf, uniform_log_prior, CalibrationChain, MhConfig};
use crate::filters::phd::{phd_sequence_loglik, PhdConfig};
use crate::filters::FilterSettings;
use crate::models::BearingsModel;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Bootstrap particle filter; needs single-target, clutter-free scans.
    Pf,
    /// PHD filter scan likelihood; works on cluttered multi-target scans.
    Phd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaWCalibration {
    /// Uniform prior bounds, degrees.
    pub prior_deg: (f64, f64),
    pub initial_deg: f64,
    pub proposal_deg: f64,
    pub iterations: usize,
    pub burn_in: f64,
    pub level: f64,
}

impl Default for SigmaWCalibration {
    fn default() -> Self {
        Self { prior_deg: (0.05, 2.0), initial_deg: 0.5, proposal_deg: 0.02, iterations: 400, burn_in: 0.2, level: 0.9 }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    /// Samples in degrees.
    pub chain: CalibrationChain,
    pub mean_deg: f64,
    pub interval_deg: (f64, f64),
}

pub fn calibrate_sigma_w(
    model: &BearingsModel,
    scans: &[Vec<f64>],
    backend: Backend,
    settings: &FilterSettings,
    cal: &SigmaWCalibration,
    rng: &mut SimRng,
) -> Result<CalibrationResult> {
    let mh = MhConfig { initial: vec![cal.initial_deg], proposal_scale: vec![cal.proposal_deg], iterations: cal.iterations };
    let prior = uniform_log_prior(cal.prior_deg.0, cal.prior_deg.1);
    let phd = PhdConfig::from_settings(settings);
    let chain = mh_calibrate(
        prior,
        |theta: &[f64], rng: &mut SimRng| match backend {
            Backend::Pf => sigma_w_loglik_pf(model, scans, theta[0], settings.particles, &settings.moves, rng),
            Backend::Phd => phd_sequence_loglik(&model.with_sigma_w(theta[0].to_radians()), scans, &phd, rng),
        },
        &mh,
        rng,
    )?;
    let mean_deg = chain.posterior_mean(0, cal.burn_in).unwrap_or(f64::NAN);
    let interval_deg = chain.credible_interval(0, cal.burn_in, cal.level).unwrap_or((f64::NAN, f64::NAN));
    Ok(CalibrationResult { chain, mean_deg, interval_deg })
}
