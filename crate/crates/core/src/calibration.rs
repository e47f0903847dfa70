//! Calibration of the stage-1 prior.
//!
//! `ρ01` and `ρ10` share one beta prior with fixed concentration `a + b`; its
//! mean is found by bisection so that the prior mean DLT probability at a
//! reference combination equals the target. The expectation is estimated by
//! Monte Carlo over prior draws with a fixed seed.

use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::model::{ToxParams, ToxPriorConfig};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Output of [`calibrate_prior`] with the default [`CalibrationSpec`], frozen.
pub const DEFAULT_CALIBRATED_PRIOR: ToxPriorConfig = ToxPriorConfig {
    rho01: (2.01236272938235, 4.98763727061765),
    rho10: (2.01236272938235, 4.98763727061765),
    rho00_ratio: (1.0, 3.0),
    eta3: (0.8, 0.2),
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub theta: f64,
    /// Standardized reference combination.
    pub x: f64,
    pub y: f64,
    /// `a + b` of the shared `ρ01`/`ρ10` prior.
    pub concentration: f64,
    pub rho00_ratio: (f64, f64),
    pub eta3: (f64, f64),
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        CalibrationSpec {
            theta: 0.33,
            x: 1.0 / 3.0,
            y: 0.5,
            concentration: 7.0,
            rho00_ratio: DEFAULT_CALIBRATED_PRIOR.rho00_ratio,
            eta3: DEFAULT_CALIBRATED_PRIOR.eta3,
            n_draws: 20_000,
            seed: 20_190_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub prior: ToxPriorConfig,
    /// Monte Carlo estimate of the prior mean DLT probability at the
    /// reference combination under `prior`.
    pub prior_mean_prob: f64,
}

/// Monte Carlo estimate of `E[P(DLT | x, y)]` under `prior`.
pub fn prior_mean_prob_dlt(prior: &ToxPriorConfig, x: f64, y: f64, n_draws: usize, seed: u64) -> Result<f64> {
    prior.validate()?;
    let beta = |(a, b): (f64, f64)| Beta::new(a, b).map_err(|e| Error::config(e.to_string()));
    let d01 = beta(prior.rho01)?;
    let d10 = beta(prior.rho10)?;
    let d00 = beta(prior.rho00_ratio)?;
    let eta = Gamma::new(prior.eta3.0, 1.0 / prior.eta3.1).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut sum = 0.0;
    let mut used = 0usize;
    for _ in 0..n_draws {
        let rho01: f64 = d01.sample(&mut rng);
        let rho10: f64 = d10.sample(&mut rng);
        let ratio: f64 = d00.sample(&mut rng);
        let eta3: f64 = eta.sample(&mut rng);
        let p = ToxParams {
            rho00: ratio * rho01.min(rho10),
            rho10,
            rho01,
            eta3,
        };
        // draws on the closed boundary (underflow) carry no probability mass
        if p.in_support() {
            sum += p.prob_dlt_unchecked(x, y);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::domain("no prior draws inside the support"));
    }
    Ok(sum / used as f64)
}

pub fn calibrate_prior(spec: &CalibrationSpec) -> Result<CalibrationResult> {
    if !(spec.theta > 0.0 && spec.theta < 1.0) {
        return Err(Error::config(format!("theta {} not in (0,1)", spec.theta)));
    }
    if !(spec.concentration > 0.0) || spec.n_draws == 0 {
        return Err(Error::config("concentration and n_draws must be positive"));
    }
    let prior_for = |m: f64| {
        let hyper = (m * spec.concentration, (1.0 - m) * spec.concentration);
        ToxPriorConfig {
            rho01: hyper,
            rho10: hyper,
            rho00_ratio: spec.rho00_ratio,
            eta3: spec.eta3,
        }
    };
    let eval = |m: f64| prior_mean_prob_dlt(&prior_for(m), spec.x, spec.y, spec.n_draws, spec.seed);
    let (mut lo, mut hi) = (1e-3, 1.0 - 1e-3);
    if eval(lo)? > spec.theta || eval(hi)? < spec.theta {
        return Err(Error::config(format!(
            "target {} unreachable by varying the corner prior mean",
            spec.theta
        )));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < spec.theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = 0.5 * (lo + hi);
    let prior = prior_for(m);
    Ok(CalibrationResult {
        prior,
        prior_mean_prob: eval(m)?,
    })
}
