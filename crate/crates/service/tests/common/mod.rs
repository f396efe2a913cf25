#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use tempalign::calibration::PosteriorChain;
use tempalign::emulator::{generate_training_set, train, EmulatorModel, GenerationConfig, TrainConfig};
use tempalign::fair::ParameterVector;
use tempalign::uncertainty::{ParameterSource, PropagationConfig};
use tempalign::DataBundle;
use tempalign_service::api::{router, AppState};
use tempalign_service::Engine;

/// A small chain around the default parameters; enough for fast, deterministic ensembles.
pub fn small_chain() -> PosteriorChain {
    let base = ParameterVector::default();
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let mut p = base;
            let f = 1.0 + 0.02 * (i as f64 - 3.5);
            p.0[10] *= f; // f2x
            p.0[12] *= 2.0 - f; // q2
            p.0.to_vec()
        })
        .collect();
    let mut c = PosteriorChain::from_rows(&rows, None)
        .unwrap()
        .with_parameter_names();
    c.id = Some(c.content_id());
    c
}

pub fn tiny_emulator(engine: &Engine) -> EmulatorModel {
    let ids = ["SSP1-RCP2.6", "SSP2-RCP4.5"];
    let scen: Vec<_> = ids.iter().map(|id| engine.store.get(id).unwrap()).collect();
    let refs: Vec<&_> = scen.iter().map(|s| s.as_ref()).collect();
    let chain = small_chain();
    let gen = GenerationConfig::grid(
        0.5,
        1.5,
        12,
        2022,
        PropagationConfig {
            n: 100,
            seed: 1,
            ..Default::default()
        },
    );
    let ts = generate_training_set(&ParameterSource::Chain(&chain), &refs, None, &gen).unwrap();
    train(
        &ts,
        &TrainConfig {
            hidden: vec![8, 8],
            epochs: 200,
            max_validation_loss: None,
            ..Default::default()
        },
    )
    .unwrap()
}

pub fn engine() -> Engine {
    let e = Engine::from_bundle(&DataBundle::locate().unwrap(), None).unwrap();
    e.add_chain(small_chain());
    e
}

pub fn app(engine: Engine) -> Router {
    router(AppState::new(engine, 1))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(
            body.map(|b| Body::from(b.to_string()))
                .unwrap_or_else(Body::empty),
        )
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

pub fn ssab() -> Value {
    let text = std::fs::read_to_string(DataBundle::locate().unwrap().portfolio_path("ssab")).unwrap();
    serde_json::from_str(&text).unwrap()
}
