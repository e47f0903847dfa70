//! Trial state machine. Every state change is an [`Event`]; the state of a
//! trial is the fold of its events, so replaying the log reproduces it exactly.

use combidose::mcmc::PosteriorChain;
use combidose::model::{ContourCurve, DoseCombination, MtdCurve, Stage1Record, ToxParams};
use combidose::rng::{child_seed, label, rng_from_seed};
use combidose::stage1::{self, Stage1Config, Stage1Recommendation};
use combidose::stage2::{self, Stage2Analysis, Stage2Config, Stage2Record};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::ApiError;

/// Points per rendered curve.
pub const CURVE_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), ApiError> {
        self.stage1.validate().map_err(ApiError::bad_request)?;
        self.stage2.validate().map_err(ApiError::bad_request)
    }
}

/// Accepts `true`/`false` or `0`/`1`.
fn flag<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(u64),
    }
    match Flag::deserialize(d)? {
        Flag::Bool(b) => Ok(b),
        Flag::Int(0) => Ok(false),
        Flag::Int(1) => Ok(true),
        Flag::Int(n) => Err(serde::de::Error::custom(format!("flag must be 0 or 1, got {n}"))),
    }
}

/// A stage-1 outcome at standardized doses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Outcome {
    pub x: f64,
    pub y: f64,
    #[serde(deserialize_with = "flag")]
    pub dlt: bool,
}

/// The current outcome of one stage-2 patient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Outcome {
    pub z: f64,
    /// Months of follow-up, or time to progression when `event` is set.
    pub time: f64,
    #[serde(deserialize_with = "flag")]
    pub event: bool,
    #[serde(deserialize_with = "flag")]
    pub dlt: bool,
}

impl Stage2Outcome {
    fn record(&self) -> Stage2Record {
        Stage2Record {
            z: self.z,
            enroll_time: 0.0,
            time: self.time,
            event: self.event,
            dlt: self.dlt,
        }
    }
}

/// A stage-2 position with its doses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub z: f64,
    pub dose: DoseCombination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Step {
    pub cohort: usize,
    pub recommendation: Stage1Recommendation,
    pub posterior_medians: ToxParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Step {
    pub analysis_index: usize,
    pub analysis: Stage2Analysis,
    /// Next cohort; empty when the trial stopped or completed.
    pub next: Vec<Assignment>,
    /// Final decision, present once the maximum sample size is analyzed.
    pub reject_h0: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Created {
        config: TrialConfig,
        seed: u64,
        idempotency_key: Option<String>,
    },
    Stage1Outcomes {
        outcomes: Vec<Stage1Outcome>,
        step: Stage1Step,
    },
    Stage1Finalized {
        curve: MtdCurve,
    },
    Stage2Outcomes {
        outcomes: Vec<Stage2Outcome>,
        step: Stage2Step,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at_unix_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Stage1Active,
    /// All stage-1 patients treated; awaiting finalization.
    Stage1Complete,
    StoppedForSafety,
    Stage2Active,
    StoppedForFutility,
    StoppedForToxicity,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1View {
    pub records: Vec<Stage1Record>,
    pub cohort_index: usize,
    pub alpha: f64,
    /// Doses for the next cohort, absent once stage 1 is over.
    pub next_doses: Option<[DoseCombination; 2]>,
    pub last: Option<Stage1Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2View {
    pub outcomes: Vec<Stage2Outcome>,
    pub analyses: usize,
    pub next: Vec<Assignment>,
    pub last: Option<Stage2Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub id: String,
    pub created_at_unix_ms: u64,
    pub seed: u64,
    pub idempotency_key: Option<String>,
    pub config: TrialConfig,
    pub stage: u8,
    pub status: Status,
    pub stage1: Stage1View,
    pub curve: Option<MtdCurve>,
    pub stage2: Option<Stage2View>,
    /// Every event after creation, in order.
    pub events: Vec<Event>,
}

fn stage1_seed(seed: u64) -> u64 {
    child_seed(seed, label::STAGE1)
}

fn stage2_seed(seed: u64) -> u64 {
    child_seed(seed, label::STAGE2)
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::internal(e)
}

impl TrialState {
    /// State right after creation.
    pub fn created(id: String, event: &Event) -> Result<Self, ApiError> {
        let EventKind::Created {
            config,
            seed,
            idempotency_key,
        } = &event.kind
        else {
            return Err(internal("log does not start with a creation event"));
        };
        let start = config.stage1.start_dose;
        Ok(TrialState {
            id,
            created_at_unix_ms: event.at_unix_ms,
            seed: *seed,
            idempotency_key: idempotency_key.clone(),
            config: config.clone(),
            stage: 1,
            status: Status::Stage1Active,
            stage1: Stage1View {
                records: Vec::new(),
                cohort_index: 0,
                alpha: config.stage1.alpha_start,
                next_doses: Some([start, start]),
                last: None,
            },
            curve: None,
            stage2: None,
            events: Vec::new(),
        })
    }

    /// Rebuild a trial from its full event log.
    pub fn replay(id: String, events: &[Event]) -> Result<Self, ApiError> {
        let (first, rest) = events.split_first().ok_or_else(|| internal("empty event log"))?;
        let mut state = TrialState::created(id, first)?;
        for e in rest {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64 + 1
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ApiError> {
        if event.seq != self.next_seq() {
            return Err(internal(format!(
                "event sequence {} where {} was expected",
                event.seq,
                self.next_seq()
            )));
        }
        match &event.kind {
            EventKind::Created { .. } => return Err(internal("duplicate creation event")),
            EventKind::Stage1Outcomes { outcomes, step } => {
                let s1 = &mut self.stage1;
                s1.records.extend(outcomes.iter().map(|o| Stage1Record {
                    x: o.x,
                    y: o.y,
                    dlt: o.dlt,
                }));
                s1.cohort_index = step.cohort;
                s1.alpha = step.recommendation.alpha;
                self.status = if step.recommendation.safety_stop {
                    Status::StoppedForSafety
                } else if s1.records.len() >= self.config.stage1.n_max {
                    Status::Stage1Complete
                } else {
                    Status::Stage1Active
                };
                s1.next_doses = (self.status == Status::Stage1Active).then_some(step.recommendation.doses);
                s1.last = Some(step.clone());
            }
            EventKind::Stage1Finalized { curve } => {
                self.curve = Some(*curve);
                self.stage = 2;
                self.status = Status::Stage2Active;
                self.stage1.next_doses = None;
                self.stage2 = Some(Stage2View {
                    outcomes: Vec::new(),
                    analyses: 0,
                    next: initial_assignments(curve, &self.config)?,
                    last: None,
                });
            }
            EventKind::Stage2Outcomes { outcomes, step } => {
                let s2 = self.stage2.as_mut().ok_or_else(|| internal("stage-2 event before finalization"))?;
                s2.outcomes = outcomes.clone();
                s2.analyses = step.analysis_index + 1;
                s2.next = step.next.clone();
                s2.last = Some(step.clone());
                self.status = if step.analysis.toxicity {
                    Status::StoppedForToxicity
                } else if step.analysis.futility {
                    Status::StoppedForFutility
                } else if step.reject_h0.is_some() {
                    Status::Completed
                } else {
                    Status::Stage2Active
                };
            }
        }
        self.events.push(event.clone());
        Ok(())
    }

    fn conflict_unless(&self, allowed: &[Status], action: &str) -> Result<(), ApiError> {
        if allowed.contains(&self.status) {
            Ok(())
        } else {
            Err(ApiError::conflict(format!(
                "cannot {action}: trial status is {}",
                serde_json::to_value(self.status).map_err(internal)?.as_str().unwrap_or("?")
            )))
        }
    }

    /// Compute the event for a stage-1 cohort submission.
    pub fn stage1_submit(&self, outcomes: Vec<Stage1Outcome>) -> Result<EventKind, ApiError> {
        self.conflict_unless(&[Status::Stage1Active], "submit stage-1 outcomes")?;
        if outcomes.len() != 2 {
            return Err(ApiError::unprocessable(format!(
                "a cohort has two patients, got {} outcomes",
                outcomes.len()
            )));
        }
        for o in &outcomes {
            if !((0.0..=1.0).contains(&o.x) && (0.0..=1.0).contains(&o.y)) {
                return Err(ApiError::unprocessable(format!(
                    "standardized doses ({}, {}) outside [0,1]",
                    o.x, o.y
                )));
            }
        }
        let cfg = &self.config.stage1;
        let mut records = self.stage1.records.clone();
        records.extend(outcomes.iter().map(|o| Stage1Record {
            x: o.x,
            y: o.y,
            dlt: o.dlt,
        }));
        let cohort = self.stage1.cohort_index + 1;
        let mcmc_seed = child_seed(child_seed(stage1_seed(self.seed), label::MCMC), cohort as u64);
        let previous = [(outcomes[0].x, outcomes[0].y), (outcomes[1].x, outcomes[1].y)];
        let (recommendation, chain) = stage1::recommend(&records, previous, cfg, mcmc_seed).map_err(internal)?;
        let posterior_medians = stage1::posterior_medians(&chain).map_err(internal)?;
        Ok(EventKind::Stage1Outcomes {
            outcomes,
            step: Stage1Step {
                cohort,
                recommendation,
                posterior_medians,
            },
        })
    }

    /// Compute the finalization event, or `None` when already finalized.
    pub fn finalize(&self) -> Result<Option<EventKind>, ApiError> {
        if self.curve.is_some() {
            return Ok(None);
        }
        self.conflict_unless(&[Status::Stage1Active, Status::Stage1Complete], "finalize stage 1")?;
        let last = self
            .stage1
            .last
            .as_ref()
            .ok_or_else(|| ApiError::conflict("cannot finalize stage 1 before any outcomes"))?;
        let curve = MtdCurve::new(last.posterior_medians, self.config.stage1.theta)
            .map_err(|e| ApiError::conflict(format!("no MTD curve: {e}")))?;
        Ok(Some(EventKind::Stage1Finalized { curve }))
    }

    /// Compute the event for a stage-2 submission holding the current outcome
    /// of every stage-2 patient so far.
    pub fn stage2_submit(&self, outcomes: Vec<Stage2Outcome>) -> Result<EventKind, ApiError> {
        self.conflict_unless(&[Status::Stage2Active], "submit stage-2 outcomes")?;
        let s2 = self.stage2.as_ref().ok_or_else(|| internal("stage 2 missing"))?;
        let cfg = &self.config.stage2;
        if outcomes.is_empty() || outcomes.len() > cfg.n_max {
            return Err(ApiError::unprocessable(format!(
                "expected between 1 and {} outcomes, got {}",
                cfg.n_max,
                outcomes.len()
            )));
        }
        if outcomes.len() < s2.outcomes.len() {
            return Err(ApiError::unprocessable(format!(
                "submission has {} patients but {} were already reported",
                outcomes.len(),
                s2.outcomes.len()
            )));
        }
        for o in &outcomes {
            if !(0.0..=1.0).contains(&o.z) {
                return Err(ApiError::unprocessable(format!("z = {} outside [0,1]", o.z)));
            }
            if !(o.time > 0.0 && o.time.is_finite()) {
                return Err(ApiError::unprocessable(format!("time {} must be positive", o.time)));
            }
        }
        let curve = self.curve.as_ref().ok_or_else(|| internal("stage 2 without a curve"))?;
        let records: Vec<Stage2Record> = outcomes.iter().map(Stage2Outcome::record).collect();
        let index = s2.analyses;
        let root = stage2_seed(self.seed);
        let mcmc_seed = child_seed(child_seed(root, label::MCMC), index as u64);
        let (analysis, chain) = stage2::analyze(&records, &records, cfg, mcmc_seed).map_err(internal)?;
        let stopped = analysis.toxicity || analysis.futility;
        let complete = !stopped && outcomes.len() >= cfg.n_max;
        let next = if stopped || complete {
            Vec::new()
        } else {
            let n = cfg.n2.min(cfg.n_max - outcomes.len());
            let mut rng = rng_from_seed(child_seed(child_seed(root, label::ALLOCATION), index as u64));
            assign(&chain, n, curve, &self.config, &mut rng)?
        };
        let reject_h0 = complete.then_some(analysis.max_prob > cfg.delta_u);
        Ok(EventKind::Stage2Outcomes {
            outcomes,
            step: Stage2Step {
                analysis_index: index,
                analysis,
                next,
                reject_h0,
            },
        })
    }

    /// Curves for rendering.
    pub fn curves(&self) -> Result<Curves, ApiError> {
        let theta = self.config.stage1.theta;
        let (source, curve) = match (&self.curve, &self.stage1.last) {
            (Some(c), _) => (CurveSource::Final, Some(*c)),
            (None, Some(step)) => (CurveSource::Interim, MtdCurve::new(step.posterior_medians, theta).ok()),
            (None, None) => (CurveSource::Interim, None),
        };
        let space = &self.config.stage1.dose_space;
        let mtd_curve = curve
            .map(|c| {
                let points = c
                    .points(CURVE_POINTS)
                    .into_iter()
                    .map(|(x, y)| {
                        let y = y.clamp(0.0, 1.0);
                        let d = space.standardized(x, y).map_err(internal)?;
                        Ok(CurvePoint {
                            x,
                            y,
                            raw_x: d.raw_x,
                            raw_y: d.raw_y,
                        })
                    })
                    .collect::<Result<Vec<_>, ApiError>>()?;
                Ok::<_, ApiError>(MtdCurveView {
                    source,
                    curve: c,
                    points,
                })
            })
            .transpose()?;
        let last = self.stage2.as_ref().and_then(|s| s.last.as_ref());
        Ok(Curves {
            mtd_curve,
            median_ttp: last.map(|s| Series {
                z: s.analysis.prob_curve.grid.clone(),
                values: s.analysis.median_ttp.clone(),
            }),
            prob_curve: last.map(|s| ProbSeries {
                z: s.analysis.prob_curve.grid.clone(),
                probs: s.analysis.prob_curve.probs.clone(),
                med0: self.config.stage2.med0,
                z_opt: s.analysis.z_opt,
            }),
        })
    }
}

fn assign<R: rand::Rng>(
    chain: &PosteriorChain,
    n: usize,
    curve: &MtdCurve,
    config: &TrialConfig,
    rng: &mut R,
) -> Result<Vec<Assignment>, ApiError> {
    let zs = stage2::rejection_sample_doses(chain, n, config.stage2.envelope_grid_points, rng).map_err(internal)?;
    positions(&zs, curve, config)
}

fn positions(zs: &[f64], curve: &MtdCurve, config: &TrialConfig) -> Result<Vec<Assignment>, ApiError> {
    zs.iter()
        .map(|&z| {
            Ok(Assignment {
                z,
                dose: curve.dose_at_z(z, &config.stage1.dose_space).map_err(internal)?,
            })
        })
        .collect()
}

fn initial_assignments(curve: &MtdCurve, config: &TrialConfig) -> Result<Vec<Assignment>, ApiError> {
    positions(&config.stage2.initial_positions(), curve, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    /// From the latest stage-1 posterior.
    Interim,
    /// Fixed at finalization.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    pub raw_x: f64,
    pub raw_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtdCurveView {
    pub source: CurveSource,
    pub curve: MtdCurve,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub z: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSeries {
    pub z: Vec<f64>,
    pub probs: Vec<f64>,
    pub med0: f64,
    pub z_opt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub mtd_curve: Option<MtdCurveView>,
    pub median_ttp: Option<Series>,
    pub prob_curve: Option<ProbSeries>,
}
