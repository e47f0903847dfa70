//! Stage 2: adaptive randomization along a fixed MTD curve.
//!
//! The first `n1` patients are placed at equally spaced positions
//! `z = 0, 1/(n1−1), …, 1`. At every interim the Weibull/spline posterior is
//! refit and the next `n2` positions are drawn by rejection sampling from the
//! density proportional to the posterior-mean median-TTP curve. The trial stops
//! early for futility (no position has `P(Med(z) > Med0)` reaching `δ0`) or for
//! toxicity (Beta-Binomial monitoring of the stage-2 DLT rate), and otherwise
//! rejects `H0: Med(z) ≤ Med0 ∀z` when `max_z P(Med(z) > Med0) > δu`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::mcmc::{self, McmcConfig, PosteriorChain, TtpTransform};
use crate::model::{
    DoseCombination, DoseSpace, MtdCurve, Stage2Posterior, TtpParams, TtpPriorConfig,
    TTP_PARAM_NAMES,
};
use crate::rng::{child_seed, label, rng_from_seed};
use crate::{Error, Result};

/// How patient arrivals are generated in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accrual {
    /// Inter-arrival time exactly `1 / accrual_rate`.
    #[default]
    Deterministic,
    /// Exponential inter-arrival times with rate `accrual_rate`.
    Poisson,
}

/// When interim analyses happen in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterimTiming {
    /// Accrual never pauses: the interim assigning a cohort happens when the
    /// cohort's first patient arrives, and everyone still under observation is
    /// administratively censored at that time.
    #[default]
    NextArrival,
    /// Accrual pauses until every patient of the current cohort has progressed
    /// or reached the follow-up cap; patients arriving meanwhile wait.
    CohortResolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage2Config {
    pub n_max: usize,
    pub n1: usize,
    pub n2: usize,
    /// Null median TTP in months.
    pub med0: f64,
    pub delta_u: f64,
    pub delta_0: f64,
    /// Patients per month.
    pub accrual_rate: f64,
    #[serde(default)]
    pub accrual: Accrual,
    #[serde(default)]
    pub interim_timing: InterimTiming,
    /// Months of follow-up per patient.
    pub followup_cap: f64,
    /// Months after enrollment at which a patient's DLT status is known.
    pub dlt_window: f64,
    pub tox_target: f64,
    pub tox_margin: f64,
    pub tox_monitor_threshold: f64,
    pub grid_points: usize,
    pub envelope_grid_points: usize,
    pub prior: TtpPriorConfig,
    pub mcmc: McmcConfig,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config {
            n_max: 30,
            n1: 10,
            n2: 5,
            med0: 4.0,
            delta_u: 0.8,
            delta_0: 0.10,
            accrual_rate: 1.0,
            accrual: Accrual::Deterministic,
            interim_timing: InterimTiming::NextArrival,
            followup_cap: 6.0,
            dlt_window: 0.75,
            tox_target: 0.33,
            tox_margin: 0.1,
            tox_monitor_threshold: 0.8,
            grid_points: 101,
            envelope_grid_points: 1001,
            prior: TtpPriorConfig::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

impl Stage2Config {
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n1 > self.n_max || self.n2 == 0 {
            return Err(Error::config(format!(
                "need 2 <= n1 <= n_max and n2 >= 1 (n1 = {}, n2 = {}, n_max = {})",
                self.n1, self.n2, self.n_max
            )));
        }
        if (self.n_max - self.n1) % self.n2 != 0 {
            return Err(Error::config(format!(
                "n_max - n1 = {} is not a multiple of n2 = {}",
                self.n_max - self.n1,
                self.n2
            )));
        }
        if !(self.delta_0 > 0.0 && self.delta_0 < self.delta_u && self.delta_u < 1.0) {
            return Err(Error::config(format!(
                "need 0 < delta_0 < delta_u < 1 (delta_0 = {}, delta_u = {})",
                self.delta_0, self.delta_u
            )));
        }
        if !(self.med0 > 0.0 && self.accrual_rate > 0.0 && self.followup_cap > 0.0) {
            return Err(Error::config("med0, accrual_rate and followup_cap must be positive"));
        }
        if !(self.dlt_window >= 0.0) {
            return Err(Error::config("dlt_window must be non-negative"));
        }
        if !(self.tox_target > 0.0 && self.tox_target + self.tox_margin < 1.0 && self.tox_margin >= 0.0) {
            return Err(Error::config("need 0 < tox_target and tox_target + tox_margin < 1"));
        }
        if !(self.tox_monitor_threshold > 0.0 && self.tox_monitor_threshold < 1.0) {
            return Err(Error::config("tox_monitor_threshold must be in (0,1)"));
        }
        if self.grid_points < 2 || self.envelope_grid_points < 2 {
            return Err(Error::config("grids need at least two points"));
        }
        self.prior.validate()?;
        self.mcmc.validate()
    }

    /// Positions of the initial equally spaced cohort.
    pub fn initial_positions(&self) -> Vec<f64> {
        (0..self.n1).map(|j| j as f64 / (self.n1 - 1) as f64).collect()
    }
}

/// A stage-2 observation as available at an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Record {
    pub z: f64,
    /// Months from the start of stage 2.
    pub enroll_time: f64,
    /// Observed TTP or follow-up time in months.
    pub time: f64,
    /// Progression observed.
    pub event: bool,
    pub dlt: bool,
}

impl Stage2Record {
    pub fn validate(&self) -> Result<()> {
        if !(self.time > 0.0 && self.time.is_finite()) {
            return Err(Error::domain(format!("time {} must be positive", self.time)));
        }
        if !(0.0..=1.0).contains(&self.z) {
            return Err(Error::domain(format!("z = {} outside [0,1]", self.z)));
        }
        Ok(())
    }
}

/// `P(Med(z) > Med0 | data)` on a grid of positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbCurve {
    pub grid: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ProbCurve {
    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `n` equally spaced points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Fraction of posterior draws whose median TTP exceeds `med0`, per grid point.
pub fn prob_exceed_curve(chain: &PosteriorChain, med0: f64, grid: &[f64]) -> Result<ProbCurve> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let ln_med0 = med0.ln();
    let mut counts = vec![0usize; grid.len()];
    for d in chain.iter() {
        let p = TtpParams::from_slice(d);
        for (c, &z) in counts.iter_mut().zip(grid) {
            if p.log_median(z) > ln_med0 {
                *c += 1;
            }
        }
    }
    let n = chain.len() as f64;
    Ok(ProbCurve {
        grid: grid.to_vec(),
        probs: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// The grid position maximizing the exceedance probability; ties go to the
/// smallest `z`.
pub fn optimal_dose(curve: &ProbCurve) -> f64 {
    let mut best = 0;
    for (i, &p) in curve.probs.iter().enumerate() {
        if p > curve.probs[best] {
            best = i;
        }
    }
    curve.grid[best]
}

/// Futility: every grid position has exceedance probability below `delta_0`.
pub fn futility_stop(curve: &ProbCurve, delta_0: f64) -> bool {
    curve.max_prob() < delta_0
}

/// `P(p > bound)` for a stage-2 DLT rate `p` with a Beta(1,1) prior after
/// `dlts` DLTs in `n` patients.
pub fn toxicity_tail_prob(dlts: usize, n: usize, bound: f64) -> f64 {
    let post = Beta::new(1.0 + dlts as f64, 1.0 + (n - dlts) as f64)
        .expect("beta parameters are positive");
    post.sf(bound)
}

/// Bayesian continuous monitoring of the stage-2 DLT rate.
pub fn toxicity_monitor(records: &[Stage2Record], tox_target: f64, tox_margin: f64, threshold: f64) -> bool {
    let dlts = records.iter().filter(|r| r.dlt).count();
    toxicity_tail_prob(dlts, records.len(), tox_target + tox_margin) > threshold
}

/// Log of the posterior mean of `Med(z)` on `grid`, by log-sum-exp so that
/// draws with huge medians do not overflow.
pub fn log_posterior_mean_median(chain: &PosteriorChain, grid: &[f64]) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let params: Vec<TtpParams> = chain.iter().map(TtpParams::from_slice).collect();
    let ln_n = (params.len() as f64).ln();
    let mut logs = vec![0.0; params.len()];
    grid.iter()
        .map(|&z| {
            for (l, p) in logs.iter_mut().zip(&params) {
                *l = p.log_median(z);
            }
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::NonFinite(format!("log median {max} at z = {z}")));
            }
            let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
            Ok(max + sum.ln() - ln_n)
        })
        .collect()
}

/// Posterior mean of `Med(z)` on `grid`; entries overflow to infinity when the
/// mean exceeds the `f64` range.
pub fn posterior_mean_median(chain: &PosteriorChain, grid: &[f64]) -> Result<Vec<f64>> {
    Ok(log_posterior_mean_median(chain, grid)?.into_iter().map(f64::exp).collect())
}

/// Posterior median of `Med(z)` on `grid`, saturating at `f64::MAX`.
pub fn posterior_median_median(chain: &PosteriorChain, grid: &[f64]) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let params: Vec<TtpParams> = chain.iter().map(TtpParams::from_slice).collect();
    let mut buf = vec![0.0; params.len()];
    Ok(grid
        .iter()
        .map(|&z| {
            for (b, p) in buf.iter_mut().zip(&params) {
                *b = p.log_median(z);
            }
            buf.sort_by(f64::total_cmp);
            mcmc::sorted_quantile(&buf, 0.5).exp().min(f64::MAX)
        })
        .collect())
}

/// Draw `n` positions from the density on `[0, 1]` proportional to the
/// piecewise-linear interpolant of `values` on an equally spaced grid.
///
/// Uniform proposals are accepted with probability `g(z) / M`,
/// `M = 1.01 · max(values)`.
pub fn rejection_sample_from_grid<R: Rng + ?Sized>(values: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::domain("target grid needs at least two points"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::NonFinite(format!("target value {bad}")));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::NonFinite("target density is identically zero".into()));
    }
    let envelope = 1.01 * max;
    let cells = (values.len() - 1) as f64;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z: f64 = rng.random();
        let h = z * cells;
        let i = (h.floor() as usize).min(values.len() - 2);
        let g = values[i] + (h - i as f64) * (values[i + 1] - values[i]);
        if rng.random::<f64>() * envelope < g {
            out.push(z);
        }
    }
    Ok(out)
}

/// Draw `n` positions with probability proportional to the posterior-mean
/// median TTP, evaluated on `grid_points` equally spaced positions.
///
/// The target is scaled by its maximum, which leaves the sampled density
/// unchanged.
pub fn rejection_sample_doses<R: Rng + ?Sized>(
    chain: &PosteriorChain,
    n: usize,
    grid_points: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let grid = unit_grid(grid_points);
    let logs = log_posterior_mean_median(chain, &grid)?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    rejection_sample_from_grid(&target, n, rng)
}

/// Sampler starting point: constant median from the exponential MLE.
fn initial_point(data: &[(f64, f64, bool)], prior: &TtpPriorConfig) -> Vec<f64> {
    let total: f64 = data.iter().map(|d| d.1).sum();
    let events = data.iter().filter(|d| d.2).count().max(1) as f64;
    let scale = if total > 0.0 { total / events } else { 1.0 };
    let (lo, hi) = prior.k_range;
    let k = 1.0f64.clamp(lo + (hi - lo) * 1e-3, hi - (hi - lo) * 1e-3);
    let mut v = vec![scale.ln(), 0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, k];
    v[0] = v[0].clamp(-50.0, 50.0);
    v
}

/// Sample the stage-2 posterior given `(z, time, event)` data.
pub fn fit_posterior(data: &[(f64, f64, bool)], prior: &TtpPriorConfig, mcmc: &McmcConfig) -> Result<PosteriorChain> {
    let post = Stage2Posterior::new(data.iter().copied(), *prior);
    let start = initial_point(data, prior);
    mcmc::sample(
        |v: &[f64]| post.log_density(v),
        &TtpTransform { k_range: prior.k_range },
        &TTP_PARAM_NAMES,
        &start,
        mcmc,
    )
}

/// Everything computed at one stage-2 analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Analysis {
    pub prob_curve: ProbCurve,
    /// Posterior median of `Med(z)` on the same grid.
    pub median_ttp: Vec<f64>,
    pub z_opt: f64,
    pub max_prob: f64,
    pub futility: bool,
    pub toxicity: bool,
    pub toxicity_tail_prob: f64,
}

/// Refit the posterior and evaluate the decision rules.
///
/// `efficacy` are the records used for the TTP posterior; `toxicity` the
/// records whose DLT status is known.
pub fn analyze(
    efficacy: &[Stage2Record],
    toxicity: &[Stage2Record],
    config: &Stage2Config,
    mcmc_seed: u64,
) -> Result<(Stage2Analysis, PosteriorChain)> {
    let data: Vec<(f64, f64, bool)> = efficacy
        .iter()
        .filter(|r| r.time > 0.0)
        .map(|r| (r.z, r.time, r.event))
        .collect();
    let chain = fit_posterior(&data, &config.prior, &config.mcmc.with_seed(mcmc_seed))?;
    let grid = unit_grid(config.grid_points);
    let prob_curve = prob_exceed_curve(&chain, config.med0, &grid)?;
    let median_ttp = posterior_median_median(&chain, &grid)?;
    let dlts = toxicity.iter().filter(|r| r.dlt).count();
    let tail = toxicity_tail_prob(dlts, toxicity.len(), config.tox_target + config.tox_margin);
    let analysis = Stage2Analysis {
        z_opt: optimal_dose(&prob_curve),
        max_prob: prob_curve.max_prob(),
        futility: futility_stop(&prob_curve, config.delta_0),
        toxicity: tail > config.tox_monitor_threshold,
        toxicity_tail_prob: tail,
        median_ttp,
        prob_curve,
    };
    Ok((analysis, chain))
}

/// Median-TTP shapes used to build simulation truths. Each is a function on
/// `[0, 1]` with maximum 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianShape {
    Flat,
    Increasing,
    Decreasing,
    MidPeak,
    EdgePeak,
    EverywhereAbove,
}

impl MedianShape {
    pub const ALL: [MedianShape; 6] = [
        MedianShape::Flat,
        MedianShape::Increasing,
        MedianShape::Decreasing,
        MedianShape::MidPeak,
        MedianShape::EdgePeak,
        MedianShape::EverywhereAbove,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MedianShape::Flat => "flat",
            MedianShape::Increasing => "increasing",
            MedianShape::Decreasing => "decreasing",
            MedianShape::MidPeak => "midpeak",
            MedianShape::EdgePeak => "edgepeak",
            MedianShape::EverywhereAbove => "above",
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let bump = |c: f64, w: f64| (-((z - c) / w).powi(2)).exp();
        match self {
            MedianShape::Flat => 1.0,
            MedianShape::Increasing => z,
            MedianShape::Decreasing => 1.0 - z,
            MedianShape::MidPeak => bump(0.5, 0.2),
            MedianShape::EdgePeak => bump(0.85, 0.15),
            MedianShape::EverywhereAbove => 0.7 + 0.3 * z,
        }
    }
}

/// Generative time-to-progression model for simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrueTtp {
    /// A member of the fitted model family.
    Spline { params: TtpParams },
    /// `Med(z) = med0 − drop + (drop + effect_size) · shape(z)` with Weibull
    /// shape `weibull_k`. `effect_size = 0` gives the matching null truth.
    Shape {
        shape: MedianShape,
        med0: f64,
        effect_size: f64,
        drop: f64,
        weibull_k: f64,
    },
}

impl TrueTtp {
    pub fn median(&self, z: f64) -> f64 {
        match self {
            TrueTtp::Spline { params } => params.log_median(z).exp(),
            TrueTtp::Shape {
                shape,
                med0,
                effect_size,
                drop,
                ..
            } => med0 - drop + (drop + effect_size) * shape.eval(z),
        }
    }

    pub fn weibull_k(&self) -> f64 {
        match self {
            TrueTtp::Spline { params } => params.k,
            TrueTtp::Shape { weibull_k, .. } => *weibull_k,
        }
    }

    /// Weibull scale at `z`.
    pub fn lambda(&self, z: f64) -> f64 {
        let k = self.weibull_k();
        self.median(z) / std::f64::consts::LN_2.powf(1.0 / k)
    }

    /// Event time from a uniform variate by inversion.
    pub fn event_time(&self, z: f64, u: f64) -> f64 {
        self.lambda(z) * (-(1.0 - u).ln()).powf(1.0 / self.weibull_k())
    }

    /// The same truth with the effect removed (null counterpart).
    pub fn null_counterpart(&self) -> Option<TrueTtp> {
        match self {
            TrueTtp::Shape {
                shape,
                med0,
                drop,
                weibull_k,
                ..
            } => Some(TrueTtp::Shape {
                shape: *shape,
                med0: *med0,
                effect_size: 0.0,
                drop: *drop,
                weibull_k: *weibull_k,
            }),
            TrueTtp::Spline { .. } => None,
        }
    }
}

/// Generative truth for a stage-2 simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyTruth {
    pub ttp: TrueTtp,
    /// DLT probability along the curve; `None` means the curve's target θ.
    #[serde(default)]
    pub dlt_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    Futility,
    Toxicity,
}

/// One simulated stage-2 patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage2Patient {
    pub patient_id: usize,
    pub cohort: usize,
    pub z: f64,
    pub dose: DoseCombination,
    pub enroll_time: f64,
    /// Latent progression time.
    pub event_time: f64,
    pub dlt: bool,
}

impl Stage2Patient {
    /// The record available at calendar time `at`, or `None` before any
    /// follow-up has accrued.
    fn observed(&self, at: f64, cap: f64) -> Option<Stage2Record> {
        let follow = (at - self.enroll_time).min(cap);
        if follow <= 0.0 {
            return None;
        }
        let event = self.event_time <= follow;
        Some(Stage2Record {
            z: self.z,
            enroll_time: self.enroll_time,
            time: if event { self.event_time } else { follow },
            event,
            dlt: self.dlt,
        })
    }

    fn resolved_at(&self, cap: f64) -> f64 {
        self.enroll_time + self.event_time.min(cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Result {
    pub patients: Vec<Stage2Patient>,
    /// Records at the last analysis.
    pub records: Vec<Stage2Record>,
    pub prob_curve: ProbCurve,
    pub z_opt: f64,
    pub max_prob: f64,
    pub reject_h0: bool,
    pub stop_reason: StopReason,
    /// Calendar time of the last analysis, months.
    pub calendar_time: f64,
    pub followup_cap: f64,
    pub analyses: usize,
}

impl Stage2Result {
    pub fn sample_size(&self) -> usize {
        self.patients.len()
    }

    pub fn stopped_early(&self) -> bool {
        self.stop_reason != StopReason::Completed
    }

    /// Trajectory CSV: `patient_id,cohort,z,raw_x,raw_y,enroll_time,time,event,dlt`.
    pub fn write_trajectory_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "patient_id", "cohort", "z", "raw_x", "raw_y", "enroll_time", "time", "event", "dlt",
        ])?;
        for p in &self.patients {
            let (time, event) = match p.observed(self.calendar_time, self.followup_cap) {
                Some(r) => (r.time, r.event),
                None => (0.0, false),
            };
            w.write_record([
                p.patient_id.to_string(),
                p.cohort.to_string(),
                format!("{:.17e}", p.z),
                format!("{:.17e}", p.dose.raw_x),
                format!("{:.17e}", p.dose.raw_y),
                format!("{:.17e}", p.enroll_time),
                format!("{:.17e}", time),
                u8::from(event).to_string(),
                u8::from(p.dlt).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Arrival times of `n` patients, months from the start of stage 2.
pub fn arrival_times<R: Rng + ?Sized>(n: usize, rate: f64, kind: Accrual, rng: &mut R) -> Vec<f64> {
    match kind {
        Accrual::Deterministic => (0..n).map(|i| i as f64 / rate).collect(),
        Accrual::Poisson => {
            let gap = Exp::new(rate).expect("positive rate");
            let mut t = 0.0;
            (0..n)
                .map(|i| {
                    if i > 0 {
                        t += gap.sample(rng);
                    }
                    t
                })
                .collect()
        }
    }
}

/// Simulate stage 2 along `curve` under `truth`.
pub fn run_stage2(
    curve: &MtdCurve,
    space: &DoseSpace,
    truth: &EfficacyTruth,
    config: &Stage2Config,
    seed: u64,
) -> Result<Stage2Result> {
    config.validate()?;
    let dlt_rate = truth.dlt_rate.unwrap_or(curve.theta);
    if !(0.0..=1.0).contains(&dlt_rate) {
        return Err(Error::config(format!("dlt rate {dlt_rate} not a probability")));
    }
    let outcome_root = child_seed(seed, label::OUTCOMES);
    let mcmc_root = child_seed(seed, label::MCMC);
    let mut alloc_rng = rng_from_seed(child_seed(seed, label::ALLOCATION));
    let arrivals = arrival_times(
        config.n_max,
        config.accrual_rate,
        config.accrual,
        &mut rng_from_seed(child_seed(seed, label::ACCRUAL)),
    );
    let cap = config.followup_cap;

    let mut patients: Vec<Stage2Patient> = Vec::with_capacity(config.n_max);
    let enroll = |patients: &mut Vec<Stage2Patient>, z: f64, cohort: usize, not_before: f64| -> Result<()> {
        let index = patients.len();
        let mut prng = rng_from_seed(child_seed(outcome_root, index as u64));
        let u_event: f64 = prng.random();
        let u_dlt: f64 = prng.random();
        let enroll_time = arrivals[index].max(not_before);
        patients.push(Stage2Patient {
            patient_id: index + 1,
            cohort,
            z,
            dose: curve.dose_at_z(z, space)?,
            enroll_time,
            event_time: truth.ttp.event_time(z, u_event),
            dlt: u_dlt < dlt_rate,
        });
        Ok(())
    };

    let mut cohort = 1;
    for z in config.initial_positions() {
        enroll(&mut patients, z, cohort, 0.0)?;
    }
    let mut analyses = 0usize;

    loop {
        let done = patients.len() >= config.n_max;
        let at = if done {
            patients.iter().map(|p| p.resolved_at(cap)).fold(0.0, f64::max)
        } else {
            let resolved = patients
                .iter()
                .filter(|p| p.cohort == cohort)
                .map(|p| p.resolved_at(cap))
                .fold(0.0, f64::max);
            match config.interim_timing {
                InterimTiming::NextArrival => arrivals[patients.len()],
                InterimTiming::CohortResolved => resolved,
            }
        };
        let records: Vec<Stage2Record> = patients.iter().filter_map(|p| p.observed(at, cap)).collect();
        let known_tox: Vec<Stage2Record> = records
            .iter()
            .filter(|r| at - r.enroll_time >= config.dlt_window)
            .copied()
            .collect();
        let (analysis, chain) = analyze(&records, &known_tox, config, child_seed(mcmc_root, analyses as u64))?;
        analyses += 1;

        let stop = if done {
            Some(StopReason::Completed)
        } else if analysis.toxicity {
            Some(StopReason::Toxicity)
        } else if analysis.futility {
            Some(StopReason::Futility)
        } else {
            None
        };
        if let Some(reason) = stop {
            let reject_h0 = reason == StopReason::Completed && analysis.max_prob > config.delta_u;
            return Ok(Stage2Result {
                patients,
                records,
                z_opt: analysis.z_opt,
                max_prob: analysis.max_prob,
                prob_curve: analysis.prob_curve,
                reject_h0,
                stop_reason: reason,
                calendar_time: at,
                followup_cap: cap,
                analyses,
            });
        }

        cohort += 1;
        let n_next = config.n2.min(config.n_max - patients.len());
        let zs = rejection_sample_doses(&chain, n_next, config.envelope_grid_points, &mut alloc_rng)?;
        for z in zs {
            enroll(&mut patients, z, cohort, at)?;
        }
    }
}
