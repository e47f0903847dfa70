//! Conduct a trial through the HTTP API in-process: create it, post stage-1
//! cohorts until escalation ends, finalize the MTD curve, then post stage-2
//! outcomes until the trial stops. Outcomes are simulated from a known truth.
//!
//! `cargo run --release -p combidose-service --example conduct_trial -- [data_dir]`
//!
//! Against a running `combidose serve`, the same requests work over HTTP.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use combidose::harness::calibrated_truth;
use combidose::rng::rng_from_seed;
use combidose::stage2::{MedianShape, TrueTtp};
use combidose::Stage1Config;
use combidose_service::{app, ServiceConfig, Store};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Value {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert!(status.is_success(), "{uri}: {status} {v}");
    v
}

#[tokio::main]
async fn main() {
    let data_dir = std::env::args().nth(1).unwrap_or_else(|| "trial-data".into());
    let config = ServiceConfig::new(&data_dir);
    let store = Store::open(&config.data_dir).expect("open data directory");
    let app = app(Arc::new(store), &config).unwrap();

    let s1 = Stage1Config::default();
    let tox = calibrated_truth(&s1.prior, s1.theta).unwrap();
    let ttp = TrueTtp::Shape {
        shape: MedianShape::MidPeak,
        med0: 4.0,
        effect_size: 2.0,
        drop: 1.0,
        weibull_k: 2.0,
    };
    let mut rng = rng_from_seed(99);

    let created = call(&app, Method::POST, "/v1/trials", Some(json!({ "seed": 2024 }))).await;
    let id = created["id"].as_str().unwrap().to_owned();
    println!("trial {id}");

    let state = call(&app, Method::GET, &format!("/v1/trials/{id}"), None).await;
    let mut doses = state["stage1"]["next_doses"].clone();
    while let Some(pair) = doses.as_array() {
        let outcomes: Vec<Value> = pair
            .iter()
            .map(|d| {
                let (x, y) = (d["x"].as_f64().unwrap(), d["y"].as_f64().unwrap());
                json!({ "x": x, "y": y, "dlt": rng.random::<f64>() < tox.prob_dlt_unchecked(x, y) })
            })
            .collect();
        let v = call(&app, Method::POST, &format!("/v1/trials/{id}/stage1/outcomes"), Some(json!({ "outcomes": outcomes }))).await;
        println!(
            "stage 1: {} DLT(s) at ({:.1}, {:.1}) mg/m2, status {}",
            outcomes.iter().filter(|o| o["dlt"] == true).count(),
            pair[0]["raw_x"].as_f64().unwrap(),
            pair[0]["raw_y"].as_f64().unwrap(),
            v["status"]
        );
        doses = v["next_doses"].clone();
    }

    let fin = call(&app, Method::POST, &format!("/v1/trials/{id}/stage1/finalize"), None).await;
    let mut next = fin["next"].as_array().cloned().unwrap_or_default();
    let mut outcomes: Vec<Value> = Vec::new();
    while !next.is_empty() {
        for a in &next {
            let z = a["z"].as_f64().unwrap();
            let t = ttp.event_time(z, rng.random());
            outcomes.push(json!({ "z": z, "time": t.min(6.0), "event": t <= 6.0, "dlt": rng.random::<f64>() < 0.25 }));
        }
        let v = call(&app, Method::POST, &format!("/v1/trials/{id}/stage2/outcomes"), Some(json!({ "outcomes": outcomes }))).await;
        println!(
            "stage 2: n = {}, z_opt = {:.2}, max prob {:.3}, status {}",
            outcomes.len(),
            v["z_opt"].as_f64().unwrap(),
            v["max_prob"].as_f64().unwrap_or(f64::NAN),
            v["status"]
        );
        next = v["next"].as_array().cloned().unwrap_or_default();
    }

    let curves = call(&app, Method::GET, &format!("/v1/trials/{id}/curves"), None).await;
    println!("curves: {}", curves.as_object().map(|o| o.keys().cloned().collect::<Vec<_>>().join(", ")).unwrap_or_default());
    println!("event log: {data_dir}/{id}.jsonl");
}
