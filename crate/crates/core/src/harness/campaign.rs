//! Replicate execution and aggregation into operating characteristics.
//!
//! Replicate `i` of a campaign with master seed `s` uses the seed
//! `child_seed(s, i)`; the stage-1 and stage-2 parts of a replicate use the
//! children labelled 1 and 2 of that seed. Null and alternative stage-2 arms of
//! a replicate share their seed. Replicates run on a dedicated thread pool and
//! are aggregated in index order, so results do not depend on parallelism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{self, bias_from_distances, evaluation_grid, selection_from_distances, signed_distances};
use super::scenario::{Scenario, SCHEMA_VERSION};
use crate::model::MtdCurve;
use crate::rng::{child_seed, label};
use crate::stage1::{run_stage1, Stage1Result};
use crate::stage2::{run_stage2, EfficacyTruth, ProbCurve, StopReason, Stage2Result};
use crate::{Error, Result};

/// Circle radii, relative to distance from the origin, for percent selection.
pub const SELECTION_RADII: [f64; 2] = [0.1, 0.2];

/// Bins of the allocation histogram over `z`.
pub const ALLOCATION_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    /// Stage 1 only.
    Stage1,
    /// Stage 2 along the true MTD curve.
    Stage2,
    /// Stage 1 followed by stage 2 along the estimated curve.
    FullTrial,
}

pub fn replicate_seed(master_seed: u64, replicate: usize) -> u64 {
    child_seed(master_seed, replicate as u64)
}

/// Raw output of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub seed: u64,
    pub stage1: Option<Stage1Result>,
    pub stage2: Option<Stage2Result>,
    /// Stage 2 under the null counterpart of the efficacy truth.
    pub stage2_null: Option<Stage2Result>,
}

fn null_truth(truth: &EfficacyTruth) -> Option<EfficacyTruth> {
    truth.ttp.null_counterpart().map(|ttp| EfficacyTruth {
        ttp,
        dlt_rate: truth.dlt_rate,
    })
}

fn run_one(scenario: &Scenario, kind: CampaignKind, seed: u64) -> Result<Replicate> {
    let mut rep = Replicate {
        seed,
        stage1: None,
        stage2: None,
        stage2_null: None,
    };
    let curve = match kind {
        CampaignKind::Stage1 | CampaignKind::FullTrial => {
            let s1 = run_stage1(&scenario.true_tox, &scenario.stage1, child_seed(seed, label::STAGE1))?;
            let curve = if s1.stopped_for_safety { None } else { s1.curve };
            rep.stage1 = Some(s1);
            if kind == CampaignKind::Stage1 {
                return Ok(rep);
            }
            curve
        }
        CampaignKind::Stage2 => Some(scenario.true_curve()?),
    };
    let Some(curve) = curve else {
        return Ok(rep);
    };
    let truth = scenario
        .efficacy
        .as_ref()
        .ok_or_else(|| Error::config(format!("scenario {:?} has no efficacy truth", scenario.name)))?;
    let s2_seed = child_seed(seed, label::STAGE2);
    let space = &scenario.stage1.dose_space;
    rep.stage2 = Some(run_stage2(&curve, space, truth, &scenario.stage2, s2_seed)?);
    if let Some(null) = null_truth(truth) {
        rep.stage2_null = Some(run_stage2(&curve, space, &null, &scenario.stage2, s2_seed)?);
    }
    Ok(rep)
}

/// Run all replicates of `scenario` on `parallelism` threads (0 = all cores).
pub fn run_replicates(scenario: &Scenario, kind: CampaignKind, parallelism: usize, master_seed: u64) -> Result<Vec<Replicate>> {
    scenario.validate()?;
    if kind != CampaignKind::Stage1 && scenario.efficacy.is_none() {
        return Err(Error::config(format!("scenario {:?} has no efficacy truth", scenario.name)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..scenario.replicates)
            .into_par_iter()
            .map(|i| run_one(scenario, kind, replicate_seed(master_seed, i)))
            .collect()
    })
}

/// Run and aggregate a campaign.
pub fn run_campaign(scenario: &Scenario, kind: CampaignKind, parallelism: usize, master_seed: u64) -> Result<OperatingCharacteristics> {
    let reps = run_replicates(scenario, kind, parallelism, master_seed)?;
    aggregate(scenario, kind, master_seed, &reps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCurve {
    pub p: f64,
    pub fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Summary {
    pub theta: f64,
    /// Evaluation points on the true curve; empty when the truth has none.
    pub grid: Vec<[f64; 2]>,
    /// Mean signed distance per grid point over replicates with an estimate.
    pub pointwise_bias: Option<Vec<f64>>,
    pub percent_selection: Vec<SelectionCurve>,
    pub mean_dlt_rate: f64,
    /// Trial-level DLT rate above which a trial counts as excessive.
    pub dlt_excess_threshold: f64,
    pub pct_trials_dlt_above: f64,
    pub safety_stop_prob: f64,
    /// Fraction of replicates ending without an estimated curve.
    pub curve_missing_prob: f64,
    pub mean_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub delta_u: f64,
    pub power: f64,
    pub type1: Option<f64>,
    pub type1_plus_type2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSummary {
    pub early_stop_prob: f64,
    pub futility_stop_prob: f64,
    pub toxicity_stop_prob: f64,
    pub avg_sample_size: f64,
    /// Mean sample size among early-stopped trials.
    pub avg_sample_size_at_stop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts normalized to sum to 1 (all zero when there are no counts).
    pub freqs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Summary {
    pub delta_u: f64,
    pub delta_0: f64,
    pub accrual_rate: f64,
    /// Fraction of replicates that reached stage 2.
    pub reached_stage2: f64,
    pub power: f64,
    pub type1: Option<f64>,
    pub type1_plus_type2: Option<f64>,
    pub decisions: Vec<DecisionRow>,
    pub stopping: StoppingSummary,
    pub stopping_null: Option<StoppingSummary>,
    /// Allocations after the initial equally spaced cohort.
    pub allocation_histogram: Histogram,
    /// Fraction of those allocations where the true median exceeds the null.
    pub correct_allocation: Option<f64>,
    /// Mean final exceedance-probability curve.
    pub mean_prob_curve: ProbCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub schema_version: u32,
    pub scenario: String,
    pub kind: CampaignKind,
    pub effect: String,
    pub accrual_rate: f64,
    pub master_seed: u64,
    pub replicates: usize,
    pub stage1: Option<Stage1Summary>,
    pub stage2: Option<Stage2Summary>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn fraction<T>(items: &[T], pred: impl Fn(&T) -> bool) -> f64 {
    items.iter().filter(|t| pred(t)).count() as f64 / items.len() as f64
}

fn summarize_stage1(scenario: &Scenario, results: &[&Stage1Result]) -> Result<Stage1Summary> {
    let theta = scenario.stage1.theta;
    let threshold = theta + 0.1;
    let (grid, bias, selection) = match scenario.true_curve() {
        Ok(truth) => {
            let grid = evaluation_grid(&truth);
            let rows: Vec<Option<Vec<f64>>> = results
                .iter()
                .map(|r| r.curve.as_ref().map(|c: &MtdCurve| signed_distances(c, &grid)))
                .collect();
            let present: Vec<Vec<f64>> = rows.iter().flatten().cloned().collect();
            let bias = if present.is_empty() {
                None
            } else {
                Some(bias_from_distances(&present, grid.len())?)
            };
            let selection = SELECTION_RADII
                .iter()
                .map(|&p| {
                    Ok(SelectionCurve {
                        p,
                        fraction: selection_from_distances(&rows, &grid, p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (grid, bias, selection)
        }
        Err(Error::NoCurve(_)) => (Vec::new(), None, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(Stage1Summary {
        theta,
        grid: grid.into_iter().map(|(x, y)| [x, y]).collect(),
        pointwise_bias: bias,
        percent_selection: selection,
        mean_dlt_rate: mean(results.iter().map(|r| r.dlt_rate())).unwrap_or(0.0),
        dlt_excess_threshold: threshold,
        pct_trials_dlt_above: fraction(results, |r| r.dlt_rate() > threshold),
        safety_stop_prob: fraction(results, |r| r.stopped_for_safety),
        curve_missing_prob: fraction(results, |r| r.curve.is_none()),
        mean_sample_size: mean(results.iter().map(|r| r.patients.len() as f64)).unwrap_or(0.0),
    })
}

fn summarize_stopping(results: &[&Stage2Result]) -> StoppingSummary {
    let stopped: Vec<&&Stage2Result> = results.iter().filter(|r| r.stopped_early()).collect();
    StoppingSummary {
        early_stop_prob: fraction(results, |r| r.stopped_early()),
        futility_stop_prob: fraction(results, |r| r.stop_reason == StopReason::Futility),
        toxicity_stop_prob: fraction(results, |r| r.stop_reason == StopReason::Toxicity),
        avg_sample_size: mean(results.iter().map(|r| r.sample_size() as f64)).unwrap_or(0.0),
        avg_sample_size_at_stop: mean(stopped.iter().map(|r| r.sample_size() as f64)),
    }
}

/// Fraction of replicates (all of them, including those that never reached
/// stage 2) rejecting the null.
fn rejection_rate(arm: &[Option<&Stage2Result>], delta_u: f64) -> f64 {
    fraction(arm, |r| r.is_some_and(|r| metrics::rejects(r, delta_u)))
}

fn summarize_stage2(scenario: &Scenario, reps: &[Replicate]) -> Result<Stage2Summary> {
    let cfg = &scenario.stage2;
    let alt: Vec<Option<&Stage2Result>> = reps.iter().map(|r| r.stage2.as_ref()).collect();
    let null: Vec<Option<&Stage2Result>> = reps.iter().map(|r| r.stage2_null.as_ref()).collect();
    let has_null = null.iter().any(Option::is_some);
    let ran: Vec<&Stage2Result> = alt.iter().flatten().copied().collect();
    let ran_null: Vec<&Stage2Result> = null.iter().flatten().copied().collect();

    let mut thresholds = scenario.delta_u_grid.clone();
    thresholds.push(cfg.delta_u);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let decision = |delta_u: f64| {
        let power = rejection_rate(&alt, delta_u);
        let type1 = has_null.then(|| rejection_rate(&null, delta_u));
        DecisionRow {
            delta_u,
            power,
            type1,
            type1_plus_type2: type1.map(|t| t + (1.0 - power)),
        }
    };
    let decisions: Vec<DecisionRow> = thresholds.iter().map(|&d| decision(d)).collect();
    let main = decision(cfg.delta_u);

    let edges: Vec<f64> = (0..=ALLOCATION_BINS).map(|i| i as f64 / ALLOCATION_BINS as f64).collect();
    let mut counts = vec![0u64; ALLOCATION_BINS];
    let mut correct = 0usize;
    let truth = scenario.efficacy.as_ref().map(|e| &e.ttp);
    for r in &ran {
        for p in r.patients.iter().skip(cfg.n1) {
            let bin = ((p.z * ALLOCATION_BINS as f64) as usize).min(ALLOCATION_BINS - 1);
            counts[bin] += 1;
            if truth.is_some_and(|t| t.median(p.z) > cfg.med0) {
                correct += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let freqs = counts
        .iter()
        .map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 })
        .collect();

    let grid = crate::stage2::unit_grid(cfg.grid_points);
    let mut sums = vec![0.0; grid.len()];
    for r in &ran {
        for (s, p) in sums.iter_mut().zip(&r.prob_curve.probs) {
            *s += p;
        }
    }
    let n_ran = ran.len().max(1) as f64;

    Ok(Stage2Summary {
        delta_u: cfg.delta_u,
        delta_0: cfg.delta_0,
        accrual_rate: cfg.accrual_rate,
        reached_stage2: ran.len() as f64 / reps.len() as f64,
        power: main.power,
        type1: main.type1,
        type1_plus_type2: main.type1_plus_type2,
        decisions,
        stopping: summarize_stopping(&ran),
        stopping_null: (!ran_null.is_empty()).then(|| summarize_stopping(&ran_null)),
        allocation_histogram: Histogram { edges, counts, freqs },
        correct_allocation: (total > 0).then(|| correct as f64 / total as f64),
        mean_prob_curve: ProbCurve {
            grid,
            probs: sums.into_iter().map(|s| s / n_ran).collect(),
        },
    })
}

/// Aggregate replicate outputs, in the given order.
pub fn aggregate(scenario: &Scenario, kind: CampaignKind, master_seed: u64, reps: &[Replicate]) -> Result<OperatingCharacteristics> {
    if reps.is_empty() {
        return Err(Error::EmptyReport("no replicates".into()));
    }
    let s1: Vec<&Stage1Result> = reps.iter().filter_map(|r| r.stage1.as_ref()).collect();
    let stage1 = match kind {
        CampaignKind::Stage2 => None,
        _ => Some(summarize_stage1(scenario, &s1)?),
    };
    let stage2 = match kind {
        CampaignKind::Stage1 => None,
        _ => Some(summarize_stage2(scenario, reps)?),
    };
    Ok(OperatingCharacteristics {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.name.clone(),
        kind,
        effect: scenario.effect_label(),
        accrual_rate: scenario.stage2.accrual_rate,
        master_seed,
        replicates: reps.len(),
        stage1,
        stage2,
    })
}
