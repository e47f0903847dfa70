//! Dose-toxicity and dose-efficacy models.

mod curve;
mod dose;
mod efficacy;
mod link;
mod toxicity;

pub use curve::{ContourCurve, MtdCurve};
pub use dose::{DoseCombination, DoseSpace};
pub use efficacy::{
    lambda_spline, log_posterior_stage2, weibull_cdf, weibull_log_pdf, weibull_median,
    Stage2Posterior, TtpParams, TtpPriorConfig, TTP_PARAM_NAMES,
};
pub use link::{Link, Logistic};
pub use toxicity::{
    log_posterior_stage1, prob_dlt, Stage1Posterior, Stage1Record, ToxParams, ToxPriorConfig,
    TOX_PARAM_NAMES,
};
