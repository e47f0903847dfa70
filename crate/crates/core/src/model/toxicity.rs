use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::link::{Link, Logistic};
use crate::{Error, Result};

/// Parameter names, in the order used by posterior chains.
pub const TOX_PARAM_NAMES: [&str; 4] = ["rho00", "rho10", "rho01", "eta3"];

/// Dose-toxicity parameters in the clinician-facing parameterization.
///
/// `rho00`, `rho10` and `rho01` are the DLT probabilities at the standardized
/// corners (0,0), (1,0) and (0,1); `eta3 > 0` is the interaction on the link
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToxParams {
    pub rho00: f64,
    pub rho10: f64,
    pub rho01: f64,
    pub eta3: f64,
}

/// Coefficients of the linear predictor `F⁻¹(P(DLT)) = b0 + b1 x + b2 y + b3 x y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinearPredictor {
    pub intercept: f64,
    pub slope_x: f64,
    pub slope_y: f64,
    pub interaction: f64,
}

impl LinearPredictor {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.intercept + self.slope_x * x + self.slope_y * y + self.interaction * x * y
    }
}

impl ToxParams {
    pub fn new(rho00: f64, rho10: f64, rho01: f64, eta3: f64) -> Result<Self> {
        let p = ToxParams {
            rho00,
            rho10,
            rho01,
            eta3,
        };
        p.validate()?;
        Ok(p)
    }

    /// Corner probabilities with the interaction chosen so that
    /// `P(DLT | x, y) = theta`.
    pub fn through_point(rho00: f64, rho10: f64, rho01: f64, x: f64, y: f64, theta: f64) -> Result<Self> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::domain(format!("({x}, {y}) must be interior")));
        }
        let lp = ToxParams {
            rho00,
            rho10,
            rho01,
            eta3: 1.0,
        }
        .predictor();
        let eta3 = (Logistic::quantile(theta) - lp.intercept - lp.slope_x * x - lp.slope_y * y) / (x * y);
        ToxParams::new(rho00, rho10, rho01, eta3)
    }

    pub fn in_support(&self) -> bool {
        self.rho00 > 0.0
            && self.rho00 < self.rho10.min(self.rho01)
            && self.rho10 < 1.0
            && self.rho01 < 1.0
            && self.eta3 > 0.0
            && self.eta3.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_support() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "toxicity parameters out of support: {self:?}"
            )))
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        ToxParams {
            rho00: v[0],
            rho10: v[1],
            rho01: v[2],
            eta3: v[3],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.rho00, self.rho10, self.rho01, self.eta3]
    }

    /// The original `(η0, η1, η2, η3)` of the link-scale predictor.
    pub fn etas(&self) -> [f64; 4] {
        let lp = self.predictor();
        [lp.intercept, lp.slope_x, lp.slope_y, lp.interaction]
    }

    pub(crate) fn predictor(&self) -> LinearPredictor {
        let base = Logistic::quantile(self.rho00);
        LinearPredictor {
            intercept: base,
            slope_x: Logistic::quantile(self.rho10) - base,
            slope_y: Logistic::quantile(self.rho01) - base,
            interaction: self.eta3,
        }
    }

    /// DLT probability without argument checks.
    #[inline]
    pub fn prob_dlt_unchecked(&self, x: f64, y: f64) -> f64 {
        Logistic::cdf(self.predictor().eval(x, y))
    }
}

/// Probability of a DLT at standardized combination `(x, y)`.
pub fn prob_dlt(params: &ToxParams, x: f64, y: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!(
            "dose ({x}, {y}) outside the unit square"
        )));
    }
    Ok(params.prob_dlt_unchecked(x, y))
}

/// Beta hyperparameters `(a, b)`.
pub type BetaHyper = (f64, f64);

/// Prior on [`ToxParams`].
///
/// `rho01 ~ Beta(a1, b1)`, `rho10 ~ Beta(a2, b2)`,
/// `rho00 / min(rho01, rho10) ~ Beta(a3, b3)` and `eta3 ~ Gamma(a, b)` with
/// shape `a` and rate `b` (mean `a/b`, variance `a/b²`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToxPriorConfig {
    pub rho01: BetaHyper,
    pub rho10: BetaHyper,
    pub rho00_ratio: BetaHyper,
    pub eta3: (f64, f64),
}

impl Default for ToxPriorConfig {
    /// Calibrated so that the prior mean DLT probability at the standardized
    /// start dose (1/3, 1/2) equals 0.33; see [`crate::calibration`].
    fn default() -> Self {
        crate::calibration::DEFAULT_CALIBRATED_PRIOR
    }
}

impl ToxPriorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rho01.0,
            self.rho01.1,
            self.rho10.0,
            self.rho10.1,
            self.rho00_ratio.0,
            self.rho00_ratio.1,
            self.eta3.0,
            self.eta3.1,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "toxicity prior hyperparameters must be positive: {self:?}"
            )))
        }
    }

    /// Normalized log prior density; `-inf` outside the support.
    pub fn log_density(&self, p: &ToxParams) -> f64 {
        if !p.in_support() {
            return f64::NEG_INFINITY;
        }
        let m = p.rho10.min(p.rho01);
        beta_ln_pdf(p.rho01, self.rho01)
            + beta_ln_pdf(p.rho10, self.rho10)
            + beta_ln_pdf(p.rho00 / m, self.rho00_ratio)
            - m.ln()
            + gamma_ln_pdf(p.eta3, self.eta3)
    }
}

pub(crate) fn beta_ln_pdf(p: f64, (a, b): BetaHyper) -> f64 {
    (a - 1.0) * p.ln() + (b - 1.0) * (-p).ln_1p() - ln_beta(a, b)
}

fn gamma_ln_pdf(v: f64, (shape, rate): (f64, f64)) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * v.ln() - rate * v
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// A stage-1 observation: one patient's dose and DLT outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Record {
    pub x: f64,
    pub y: f64,
    pub dlt: bool,
}

/// The stage-1 posterior for a fixed data set, evaluated on the natural
/// parameter vector `[rho00, rho10, rho01, eta3]`.
#[derive(Debug, Clone)]
pub struct Stage1Posterior<'a> {
    prior: ToxPriorConfig,
    records: &'a [Stage1Record],
}

impl<'a> Stage1Posterior<'a> {
    pub fn new(records: &'a [Stage1Record], prior: ToxPriorConfig) -> Self {
        Stage1Posterior { prior, records }
    }

    pub fn log_likelihood(&self, p: &ToxParams) -> f64 {
        let lp = p.predictor();
        self.records
            .iter()
            .map(|r| {
                let u = lp.eval(r.x, r.y);
                if r.dlt {
                    Logistic::ln_cdf(u)
                } else {
                    Logistic::ln_ccdf(u)
                }
            })
            .sum()
    }

    pub fn log_density(&self, v: &[f64]) -> f64 {
        let p = ToxParams::from_slice(v);
        let prior = self.prior.log_density(&p);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        prior + self.log_likelihood(&p)
    }
}

/// Log posterior of the stage-1 parameters up to an additive constant.
///
/// Returns `-inf` when `params` lies outside the prior support.
pub fn log_posterior_stage1(
    params: &ToxParams,
    data: &[Stage1Record],
    prior: &ToxPriorConfig,
) -> f64 {
    Stage1Posterior::new(data, *prior).log_density(&params.to_vec())
}
