//! Two-stage Bayesian dose finding for combinations of two continuously dosed
//! agents.
//!
//! Stage 1 escalates cohorts of two patients with conditional escalation with
//! overdose control (EWOC) and ends with an estimated maximum-tolerated-dose
//! (MTD) contour. Stage 2 holds that contour fixed, parameterizes it by a single
//! coordinate `z ∈ [0, 1]`, and adaptively randomizes cohorts along it toward
//! combinations with long median time to progression (TTP).
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: dose-toxicity and Weibull/spline efficacy models, the MTD curve
//!   and both log-posteriors.
//! - [`mcmc`]: adaptive random-walk Metropolis-within-Gibbs sampling.
//! - [`stage1`]: EWOC escalation and safety stopping.
//! - [`stage2`]: rejection-sampled adaptive randomization, futility and
//!   toxicity monitoring.
//! - [`harness`]: scenarios, replicate campaigns and operating characteristics.
//! - [`report`]: JSON/CSV report emission and the prior-predictive table.

pub mod calibration;
pub mod error;
pub mod harness;
pub mod mcmc;
pub mod model;
pub mod report;
pub mod rng;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
pub use mcmc::{McmcConfig, PosteriorChain};
pub use model::{
    DoseCombination, DoseSpace, MtdCurve, Stage1Record, ToxParams, ToxPriorConfig, TtpParams,
    TtpPriorConfig,
};
pub use stage1::{Stage1Config, Stage1Result};
pub use stage2::{ProbCurve, Stage2Config, Stage2Record, Stage2Result};
