use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use combidose::model::{DoseCombination, MtdCurve, ToxParams};
use combidose::stage1::Stage1Recommendation;
use combidose::ProbCurve;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::Store;
use crate::trial::{Assignment, Curves, Stage1Outcome, Stage2Outcome, Status, TrialConfig, TrialState};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateRequest {
    pub config: TrialConfig,
    /// Drawn at random when absent.
    pub seed: Option<u64>,
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub seed: u64,
    pub stage: u8,
    pub status: Status,
    pub alpha: f64,
    pub next_doses: [DoseCombination; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Request {
    pub outcomes: Vec<Stage1Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Response {
    pub id: String,
    pub status: Status,
    pub cohort: usize,
    pub n_treated: usize,
    pub recommendation: Stage1Recommendation,
    pub posterior_medians: ToxParams,
    /// Doses for the next cohort; absent when stage 1 is over.
    pub next_doses: Option<[DoseCombination; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizeResponse {
    pub id: String,
    pub status: Status,
    pub curve: MtdCurve,
    pub next: Vec<Assignment>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage2Request {
    pub outcomes: Vec<Stage2Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Response {
    pub id: String,
    pub status: Status,
    pub analysis_index: usize,
    pub next: Vec<Assignment>,
    pub prob_curve: ProbCurve,
    pub z_opt: f64,
    pub max_prob: f64,
    pub futility: bool,
    pub toxicity: bool,
    pub toxicity_tail_prob: f64,
    pub reject_h0: Option<bool>,
}

type AppState = Arc<Store>;

pub fn routes(store: Arc<Store>) -> Router {
    Router::new()
        .route("/trials", post(create_trial))
        .route("/trials/{id}", get(get_trial))
        .route("/trials/{id}/curves", get(get_curves))
        .route("/trials/{id}/stage1/outcomes", post(stage1_outcomes))
        .route("/trials/{id}/stage1/finalize", post(finalize))
        .route("/trials/{id}/stage2/outcomes", post(stage2_outcomes))
        .with_state(store)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn create_trial(
    State(store): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    req.config.validate()?;
    let header_key = headers
        .get(IDEMPOTENCY_HEADER)
        .map(|v| v.to_str().map(str::to_owned))
        .transpose()
        .map_err(|_| ApiError::bad_request("idempotency key is not valid text"))?;
    let key = header_key.or(req.idempotency_key);
    let seed = req.seed.unwrap_or_else(rand::random);
    let id = uuid::Uuid::new_v4().simple().to_string();
    let kind = crate::trial::EventKind::Created {
        config: req.config,
        seed,
        idempotency_key: key,
    };
    let (handle, fresh) = blocking(move || store.create(id, kind)).await?;
    let state = handle.lock().await;
    let status = if fresh { StatusCode::CREATED } else { StatusCode::OK };
    let start = state.config.stage1.start_dose;
    Ok((
        status,
        Json(CreateResponse {
            id: state.id.clone(),
            seed: state.seed,
            stage: state.stage,
            status: state.status,
            alpha: state.config.stage1.alpha_start,
            next_doses: [start, start],
        }),
    ))
}

async fn get_trial(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<TrialState>, ApiError> {
    let handle = store.get(&id)?;
    let state = handle.lock().await;
    Ok(Json(state.clone()))
}

async fn get_curves(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<Curves>, ApiError> {
    let handle = store.get(&id)?;
    let state = handle.lock().await;
    Ok(Json(state.curves()?))
}

async fn stage1_outcomes(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Stage1Request>, JsonRejection>,
) -> Result<Json<Stage1Response>, ApiError> {
    let mut state = store.get(&id)?.lock_owned().await;
    let Json(req) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    let store = store.clone();
    blocking(move || {
        let kind = state.stage1_submit(req.outcomes)?;
        store.commit(&mut state, kind)?;
        let step = state.stage1.last.clone().ok_or_else(|| ApiError::internal("no stage-1 step"))?;
        Ok(Stage1Response {
            id: state.id.clone(),
            status: state.status,
            cohort: step.cohort,
            n_treated: state.stage1.records.len(),
            recommendation: step.recommendation,
            posterior_medians: step.posterior_medians,
            next_doses: state.stage1.next_doses,
        })
    })
    .await
    .map(Json)
}

async fn finalize(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<FinalizeResponse>, ApiError> {
    let mut state = store.get(&id)?.lock_owned().await;
    let store = store.clone();
    blocking(move || {
        if let Some(kind) = state.finalize()? {
            store.commit(&mut state, kind)?;
        }
        let curve = state.curve.ok_or_else(|| ApiError::internal("finalized without a curve"))?;
        let s2 = state.stage2.as_ref().ok_or_else(|| ApiError::internal("finalized without stage 2"))?;
        // Before any stage-2 analysis the next cohort is the initial spread.
        let next = match &s2.last {
            None => s2.next.clone(),
            Some(_) => Vec::new(),
        };
        Ok(FinalizeResponse {
            id: state.id.clone(),
            status: state.status,
            curve,
            next,
        })
    })
    .await
    .map(Json)
}

async fn stage2_outcomes(
    State(store): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Stage2Request>, JsonRejection>,
) -> Result<Json<Stage2Response>, ApiError> {
    let mut state = store.get(&id)?.lock_owned().await;
    let Json(req) = body.map_err(|e| ApiError::unprocessable(e.body_text()))?;
    let store = store.clone();
    blocking(move || {
        let kind = state.stage2_submit(req.outcomes)?;
        store.commit(&mut state, kind)?;
        let step = state
            .stage2
            .as_ref()
            .and_then(|s| s.last.clone())
            .ok_or_else(|| ApiError::internal("no stage-2 step"))?;
        let a = step.analysis;
        Ok(Stage2Response {
            id: state.id.clone(),
            status: state.status,
            analysis_index: step.analysis_index,
            next: step.next,
            prob_curve: a.prob_curve,
            z_opt: a.z_opt,
            max_prob: a.max_prob,
            futility: a.futility,
            toxicity: a.toxicity,
            toxicity_tail_prob: a.toxicity_tail_prob,
            reject_h0: step.reject_h0,
        })
    })
    .await
    .map(Json)
}
