#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use combidose::harness::calibrated_truth;
use combidose::model::ToxParams;
use combidose::rng::rng_from_seed;
use combidose::stage1::Stage1Config;
use combidose::stage2::{MedianShape, TrueTtp};
use combidose_service::{app, ServiceConfig, Store};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn open(dir: &Path) -> Router {
    let store = Store::open(dir).unwrap();
    app(Arc::new(store), &ServiceConfig::new(dir)).unwrap()
}

/// Send a request and return the status and raw body.
pub async fn raw(app: &Router, method: Method, uri: &str, body: Option<&Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let (status, bytes) = raw(app, method, uri, body).await;
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: non-JSON body ({e}): {:?}", String::from_utf8_lossy(&bytes)))
    };
    (status, v)
}

pub async fn create(app: &Router, seed: u64) -> String {
    let (status, v) = call(app, Method::POST, "/v1/trials", Some(&json!({ "seed": seed }))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_owned()
}

pub fn truth() -> ToxParams {
    let cfg = Stage1Config::default();
    calibrated_truth(&cfg.prior, cfg.theta).unwrap()
}

/// DLT outcomes for the two recommended doses, drawn from the true model.
pub fn stage1_outcomes<R: Rng>(doses: &Value, rng: &mut R) -> Value {
    let t = truth();
    let outcomes: Vec<Value> = doses
        .as_array()
        .unwrap()
        .iter()
        .map(|d| {
            let (x, y) = (d["x"].as_f64().unwrap(), d["y"].as_f64().unwrap());
            let dlt = rng.random::<f64>() < t.prob_dlt_unchecked(x, y);
            json!({ "x": x, "y": y, "dlt": dlt })
        })
        .collect();
    json!({ "outcomes": outcomes })
}

/// Run all 15 stage-1 cohorts; returns the last response.
pub async fn run_stage1(app: &Router, id: &str, outcome_seed: u64) -> Value {
    let (_, state) = call(app, Method::GET, &format!("/v1/trials/{id}"), None).await;
    let mut doses = state["stage1"]["next_doses"].clone();
    let mut rng = rng_from_seed(outcome_seed);
    let mut last = Value::Null;
    for _ in 0..15 {
        let body = stage1_outcomes(&doses, &mut rng);
        let (status, v) = call(app, Method::POST, &format!("/v1/trials/{id}/stage1/outcomes"), Some(&body)).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        last = v.clone();
        if v["next_doses"].is_null() {
            break;
        }
        doses = v["next_doses"].clone();
    }
    last
}

pub fn ttp_truth() -> TrueTtp {
    TrueTtp::Shape {
        shape: MedianShape::MidPeak,
        med0: 4.0,
        effect_size: 2.0,
        drop: 1.0,
        weibull_k: 2.0,
    }
}

/// Fully followed-up outcome of a patient at `z`.
pub fn stage2_outcome<R: Rng>(z: f64, rng: &mut R) -> Value {
    let t = ttp_truth().event_time(z, rng.random());
    let capped = t.min(6.0);
    json!({ "z": z, "time": capped, "event": t <= 6.0, "dlt": rng.random::<f64>() < 0.2 })
}

/// Finalize stage 1 and submit fully followed-up stage-2 outcomes until the
/// trial stops; returns every stage-2 response.
pub async fn drive_stage2(app: &Router, id: &str, seed: u64) -> Vec<Value> {
    let (_, fin) = call(app, Method::POST, &format!("/v1/trials/{id}/stage1/finalize"), None).await;
    let mut next = fin["next"].as_array().unwrap().clone();
    let mut rng = rng_from_seed(seed);
    let mut outcomes: Vec<Value> = Vec::new();
    let mut responses = Vec::new();
    while !next.is_empty() {
        for a in &next {
            let z = a["z"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&z));
            assert!(a["dose"]["raw_x"].as_f64().unwrap() >= 10.0);
            outcomes.push(stage2_outcome(z, &mut rng));
        }
        let body = json!({ "outcomes": outcomes });
        let (status, v) = call(app, Method::POST, &format!("/v1/trials/{id}/stage2/outcomes"), Some(&body)).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        next = v["next"].as_array().unwrap().clone();
        responses.push(v);
    }
    responses
}
