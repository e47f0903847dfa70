//! Stage 1: conditional EWOC escalation in cohorts of two.
//!
//! In each cohort after the first, patient 1 receives a new dose of agent A
//! with agent B held at the level patient 1 of the previous cohort received,
//! and patient 2 receives a new dose of agent B with agent A held at the level
//! patient 2 of the previous cohort received. Each new dose is the α-quantile
//! of the posterior distribution of the conditional MTD, where the feasibility
//! bound α rises linearly with enrollment until it reaches its cap at half the
//! planned sample size.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mcmc::{self, McmcConfig, PosteriorChain, ToxTransform};
use crate::model::{
    DoseCombination, DoseSpace, Link, Logistic, MtdCurve, Stage1Posterior, Stage1Record,
    ToxParams, ToxPriorConfig, TOX_PARAM_NAMES,
};
use crate::rng::{child_seed, label, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Config {
    pub n_max: usize,
    pub theta: f64,
    pub dose_space: DoseSpace,
    pub start_dose: DoseCombination,
    pub alpha_start: f64,
    pub alpha_cap: f64,
    pub prior: ToxPriorConfig,
    /// Stop when `P(ρ00 > θ | data)` exceeds this.
    pub safety_threshold: f64,
    pub mcmc: McmcConfig,
}

impl Default for Stage1Config {
    fn default() -> Self {
        let dose_space = DoseSpace::default();
        Stage1Config {
            n_max: 30,
            theta: 0.33,
            start_dose: dose_space.raw(15.0, 75.0).expect("start dose inside default space"),
            dose_space,
            alpha_start: 0.25,
            alpha_cap: 0.5,
            prior: ToxPriorConfig::default(),
            safety_threshold: 0.8,
            mcmc: McmcConfig::default(),
        }
    }
}

impl Stage1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::config(format!("theta {} not in (0,1)", self.theta)));
        }
        if !(self.alpha_start > 0.0
            && self.alpha_start <= self.alpha_cap
            && self.alpha_cap <= 0.5)
        {
            return Err(Error::config(format!(
                "need 0 < alpha_start <= alpha_cap <= 0.5, got {} and {}",
                self.alpha_start, self.alpha_cap
            )));
        }
        if self.n_max < 2 || self.n_max % 2 != 0 {
            return Err(Error::config(format!(
                "n_max must be a positive even number, got {}",
                self.n_max
            )));
        }
        if !(self.safety_threshold > 0.0 && self.safety_threshold < 1.0) {
            return Err(Error::config("safety_threshold must be in (0,1)"));
        }
        self.dose_space.validate()?;
        let s = &self.start_dose;
        if !(0.0..=1.0).contains(&s.x) || !(0.0..=1.0).contains(&s.y) {
            return Err(Error::config("start dose outside the unit square"));
        }
        self.prior.validate()?;
        self.mcmc.validate()
    }

    pub fn cohorts(&self) -> usize {
        self.n_max / 2
    }
}

/// Feasibility bound after `n_enrolled` patients:
/// `min(cap, start + (cap − start) · n / (n_max / 2))`.
pub fn alpha_schedule(n_enrolled: usize, config: &Stage1Config) -> f64 {
    let half = config.n_max as f64 / 2.0;
    let a = config.alpha_start
        + (config.alpha_cap - config.alpha_start) * n_enrolled as f64 / half;
    a.min(config.alpha_cap)
}

/// Dose of agent A solving `P(DLT | x, y) = θ`, clipped to `[0, 1]`.
pub fn conditional_mtd_x(params: &ToxParams, y: f64, theta: f64) -> f64 {
    let lp = params.predictor();
    let x = (Logistic::quantile(theta) - lp.intercept - lp.slope_y * y)
        / (lp.slope_x + lp.interaction * y);
    x.clamp(0.0, 1.0)
}

/// Dose of agent B solving `P(DLT | x, y) = θ`, clipped to `[0, 1]`.
pub fn conditional_mtd_y(params: &ToxParams, x: f64, theta: f64) -> f64 {
    let lp = params.predictor();
    let y = (Logistic::quantile(theta) - lp.intercept - lp.slope_x * x)
        / (lp.slope_y + lp.interaction * x);
    y.clamp(0.0, 1.0)
}

fn conditional_quantile(
    chain: &PosteriorChain,
    alpha: f64,
    solve: impl Fn(&ToxParams) -> f64,
) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mtds: Vec<f64> = chain.iter().map(|d| solve(&ToxParams::from_slice(d))).collect();
    mcmc::empirical_quantile(&mtds, alpha)
}

/// EWOC dose of agent A given agent B at `y`: the α-quantile of the posterior
/// of the conditional MTD.
pub fn next_dose_x_given_y(chain: &PosteriorChain, y: f64, alpha: f64, theta: f64) -> Result<f64> {
    conditional_quantile(chain, alpha, |p| conditional_mtd_x(p, y, theta))
}

/// EWOC dose of agent B given agent A at `x`.
pub fn next_dose_y_given_x(chain: &PosteriorChain, x: f64, alpha: f64, theta: f64) -> Result<f64> {
    conditional_quantile(chain, alpha, |p| conditional_mtd_y(p, x, theta))
}

/// Posterior probability that the DLT rate at the lowest combination
/// exceeds `theta`.
pub fn prob_min_dose_too_toxic(chain: &PosteriorChain, theta: f64) -> f64 {
    let n = chain.len();
    if n == 0 {
        return 0.0;
    }
    chain.iter().filter(|d| d[0] > theta).count() as f64 / n as f64
}

/// Safety rule: stop when `P(ρ00 > θ | data) > safety_threshold`.
pub fn safety_stop(chain: &PosteriorChain, theta: f64, config: &Stage1Config) -> bool {
    prob_min_dose_too_toxic(chain, theta) > config.safety_threshold
}

/// Starting point for the sampler: prior means.
fn prior_center(prior: &ToxPriorConfig) -> ToxParams {
    let mean = |(a, b): (f64, f64)| a / (a + b);
    let rho10 = mean(prior.rho10);
    let rho01 = mean(prior.rho01);
    ToxParams {
        rho00: mean(prior.rho00_ratio) * rho10.min(rho01),
        rho10,
        rho01,
        eta3: prior.eta3.0 / prior.eta3.1,
    }
}

/// Sample the stage-1 posterior.
pub fn fit_posterior(
    records: &[Stage1Record],
    prior: &ToxPriorConfig,
    mcmc: &McmcConfig,
) -> Result<PosteriorChain> {
    let post = Stage1Posterior::new(records, *prior);
    let start = prior_center(prior).to_vec();
    mcmc::sample(
        |v: &[f64]| post.log_density(v),
        &ToxTransform,
        &TOX_PARAM_NAMES,
        &start,
        mcmc,
    )
}

/// Posterior medians of the four parameters.
pub fn posterior_medians(chain: &PosteriorChain) -> Result<ToxParams> {
    Ok(ToxParams {
        rho00: chain.median(0)?,
        rho10: chain.median(1)?,
        rho01: chain.median(2)?,
        eta3: chain.median(3)?,
    })
}

/// Estimated MTD curve from posterior medians.
pub fn estimate_curve(chain: &PosteriorChain, theta: f64) -> Result<MtdCurve> {
    let medians = posterior_medians(chain)?;
    MtdCurve::new(medians, theta)
}

/// Mutable escalation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1State {
    pub records: Vec<Stage1Record>,
    pub cohort_index: usize,
    pub alpha: f64,
    pub stopped_for_safety: bool,
}

impl Stage1State {
    pub fn new(config: &Stage1Config) -> Self {
        Stage1State {
            records: Vec::new(),
            cohort_index: 0,
            alpha: config.alpha_start,
            stopped_for_safety: false,
        }
    }
}

/// The recommendation issued after a cohort's outcomes are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Recommendation {
    /// Doses for patient 1 (new x at the y last assigned) and patient 2 (new y
    /// at the x last assigned).
    pub doses: [DoseCombination; 2],
    pub alpha: f64,
    pub safety_stop: bool,
    pub prob_min_dose_too_toxic: f64,
}

/// Refit the posterior on `records` and compute the next cohort's doses.
///
/// `previous` holds the doses of the cohort just completed (patient 1,
/// patient 2). Patient 1 of the next cohort keeps the y given to the previous
/// patient 2; patient 2 keeps the x given to the previous patient 1.
pub fn recommend(
    records: &[Stage1Record],
    previous: [(f64, f64); 2],
    config: &Stage1Config,
    mcmc_seed: u64,
) -> Result<(Stage1Recommendation, PosteriorChain)> {
    let chain = fit_posterior(records, &config.prior, &config.mcmc.with_seed(mcmc_seed))?;
    let alpha = alpha_schedule(records.len().min(config.n_max), config);
    let stop = safety_stop(&chain, config.theta, config);
    let y1 = previous[1].1;
    let x1 = next_dose_x_given_y(&chain, y1, alpha, config.theta)?;
    let x2 = previous[0].0;
    let y2 = next_dose_y_given_x(&chain, x2, alpha, config.theta)?;
    let space = &config.dose_space;
    let rec = Stage1Recommendation {
        doses: [space.standardized(x1, y1)?, space.standardized(x2, y2)?],
        alpha,
        safety_stop: stop,
        prob_min_dose_too_toxic: prob_min_dose_too_toxic(&chain, config.theta),
    };
    Ok((rec, chain))
}

/// One treated patient in a simulated or live escalation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Patient {
    pub patient_id: usize,
    pub cohort: usize,
    pub dose: DoseCombination,
    pub dlt: bool,
    /// Feasibility bound in force when the dose was assigned.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub patients: Vec<Stage1Patient>,
    pub stopped_for_safety: bool,
    pub posterior_medians: Option<ToxParams>,
    /// `None` when the trial stopped for safety or the medians give no curve
    /// inside the unit square.
    pub curve: Option<MtdCurve>,
}

impl Stage1Result {
    pub fn records(&self) -> Vec<Stage1Record> {
        self.patients
            .iter()
            .map(|p| Stage1Record {
                x: p.dose.x,
                y: p.dose.y,
                dlt: p.dlt,
            })
            .collect()
    }

    pub fn dlt_rate(&self) -> f64 {
        if self.patients.is_empty() {
            return 0.0;
        }
        self.patients.iter().filter(|p| p.dlt).count() as f64 / self.patients.len() as f64
    }

    /// Trajectory CSV: `patient_id,cohort,x,y,raw_x,raw_y,dlt,alpha`.
    pub fn write_trajectory_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["patient_id", "cohort", "x", "y", "raw_x", "raw_y", "dlt", "alpha"])?;
        for p in &self.patients {
            w.write_record([
                p.patient_id.to_string(),
                p.cohort.to_string(),
                format!("{:.17e}", p.dose.x),
                format!("{:.17e}", p.dose.y),
                format!("{:.17e}", p.dose.raw_x),
                format!("{:.17e}", p.dose.raw_y),
                u8::from(p.dlt).to_string(),
                format!("{:.17e}", p.alpha),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulate a stage-1 escalation under the generative toxicity model `truth`.
pub fn run_stage1(truth: &ToxParams, config: &Stage1Config, seed: u64) -> Result<Stage1Result> {
    truth.validate()?;
    config.validate()?;
    let mut outcome_rng = rng_from_seed(child_seed(seed, label::OUTCOMES));
    let mcmc_root = child_seed(seed, label::MCMC);
    let mut state = Stage1State::new(config);
    let mut patients = Vec::with_capacity(config.n_max);
    let mut doses = [config.start_dose, config.start_dose];
    let mut chain = None;

    for cohort in 1..=config.cohorts() {
        state.cohort_index = cohort;
        for dose in doses {
            let p = truth.prob_dlt_unchecked(dose.x, dose.y);
            let dlt = outcome_rng.random::<f64>() < p;
            patients.push(Stage1Patient {
                patient_id: patients.len() + 1,
                cohort,
                dose,
                dlt,
                alpha: state.alpha,
            });
            state.records.push(Stage1Record {
                x: dose.x,
                y: dose.y,
                dlt,
            });
        }
        let previous = [(doses[0].x, doses[0].y), (doses[1].x, doses[1].y)];
        let (rec, c) = recommend(&state.records, previous, config, child_seed(mcmc_root, cohort as u64))?;
        chain = Some(c);
        if rec.safety_stop {
            state.stopped_for_safety = true;
            break;
        }
        state.alpha = rec.alpha;
        doses = rec.doses;
    }

    let (posterior_medians, curve) = match (&chain, state.stopped_for_safety) {
        (Some(c), false) => {
            let med = posterior_medians(c)?;
            (Some(med), MtdCurve::new(med, config.theta).ok())
        }
        _ => (None, None),
    };
    Ok(Stage1Result {
        patients,
        stopped_for_safety: state.stopped_for_safety,
        posterior_medians,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_of(params: &[ToxParams]) -> PosteriorChain {
        let rows: Vec<Vec<f64>> = params.iter().map(|p| p.to_vec()).collect();
        PosteriorChain::from_draws(&TOX_PARAM_NAMES, &rows).unwrap()
    }

    #[test]
    fn alpha_schedule_examples() {
        let cfg = Stage1Config::default();
        assert_eq!(alpha_schedule(0, &cfg), 0.25);
        assert!((alpha_schedule(15, &cfg) - 0.5).abs() < 1e-15);
        assert!((alpha_schedule(6, &cfg) - 0.35).abs() < 1e-15);
        assert_eq!(alpha_schedule(30, &cfg), 0.5);
        let mut prev = 0.0;
        for n in 0..=30 {
            let a = alpha_schedule(n, &cfg);
            assert!(a >= prev && a <= 0.5);
            prev = a;
        }
    }

    #[test]
    fn conditional_mtd_lies_on_target() {
        let p = ToxParams::new(0.05, 0.4, 0.3, 3.0).unwrap();
        let x = conditional_mtd_x(&p, 0.5, 0.33);
        assert!(x > 0.0 && x < 1.0);
        assert!((p.prob_dlt_unchecked(x, 0.5) - 0.33).abs() < 1e-12);
        let y = conditional_mtd_y(&p, 0.2, 0.33);
        assert!((p.prob_dlt_unchecked(0.2, y) - 0.33).abs() < 1e-12);
        // clipping
        let toxic = ToxParams::new(0.2, 0.5, 0.9, 3.0).unwrap();
        assert_eq!(conditional_mtd_x(&toxic, 1.0, 0.33), 0.0);
        let safe = ToxParams::new(0.01, 0.05, 0.05, 0.1).unwrap();
        assert_eq!(conditional_mtd_x(&safe, 0.0, 0.33), 1.0);
    }

    #[test]
    fn point_mass_posterior_gives_its_mtd() {
        // curve through (0.5, 0.4)
        let base = ToxParams::new(0.05, 0.3, 0.2, 2.0).unwrap();
        let y = 0.4;
        let x_true = conditional_mtd_x(&base, y, 0.33);
        let chain = chain_of(&[base]);
        for alpha in [0.1, 0.25, 0.5] {
            assert!((next_dose_x_given_y(&chain, y, alpha, 0.33).unwrap() - x_true).abs() < 1e-12);
        }
    }

    #[test]
    fn two_draw_median_interpolates() {
        // rho10 chosen so the conditional MTD given y = 0 is 0.2 or 0.6
        let theta: f64 = 0.33;
        let rho00: f64 = 0.05;
        let make = |x_mtd: f64| {
            let l0 = Logistic::quantile(rho00);
            let slope = (Logistic::quantile(theta) - l0) / x_mtd;
            ToxParams::new(rho00, Logistic::cdf(l0 + slope), 0.3, 1.0).unwrap()
        };
        let chain = chain_of(&[make(0.2), make(0.6)]);
        let x = next_dose_x_given_y(&chain, 0.0, 0.5, theta).unwrap();
        assert!((x - 0.4).abs() < 1e-12);
        let empty = PosteriorChain::from_draws(&TOX_PARAM_NAMES, &[]).unwrap();
        assert!(matches!(
            next_dose_x_given_y(&empty, 0.0, 0.5, theta),
            Err(Error::EmptyChain)
        ));
    }

    #[test]
    fn safety_rule_examples() {
        let cfg = Stage1Config::default();
        let hot = ToxParams::new(0.5, 0.8, 0.8, 1.0).unwrap();
        let cool = ToxParams::new(0.1, 0.8, 0.8, 1.0).unwrap();
        assert!(safety_stop(&chain_of(&[hot; 20]), 0.33, &cfg));
        assert!(!safety_stop(&chain_of(&[cool; 20]), 0.33, &cfg));
        let mut mixed = vec![hot; 17];
        mixed.extend([cool; 3]);
        assert!(safety_stop(&chain_of(&mixed), 0.33, &cfg));
    }

    #[test]
    fn config_validation() {
        let mut cfg = Stage1Config::default();
        assert!(cfg.validate().is_ok());
        cfg.n_max = 31;
        assert!(cfg.validate().is_err());
        let mut cfg = Stage1Config::default();
        cfg.alpha_cap = 0.6;
        assert!(cfg.validate().is_err());
    }
}
