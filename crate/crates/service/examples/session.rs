//! A client session against the HTTP API, driven in-process: upload a
//! source and a target, scribble a pair and a keep region, ask for a
//! preview and then a full solve, and poll for the results.
//!
//! For a real server run `chromaflow serve --port 7878`.

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chromaflow::{io, synth};
use chromaflow_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(Body::from(body)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[tokio::main]
async fn main() {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, Into::into);
    let app = router(AppState::new(ServiceConfig::default()));
    let source = synth::scene(640, 480, 2);
    let target = synth::noisy_patch(120, 90, [70, 150, 220], 10, 1);

    let (status, body) = call(&app, "POST", "/api/session", io::encode_png(&source).unwrap()).await;
    let id = json(&body)["id"].as_str().unwrap().to_string();
    println!("POST /api/session -> {status} {id}");
    let (status, body) = call(&app, "POST", &format!("/api/session/{id}/target"), io::encode_png(&target).unwrap()).await;
    let target_id = json(&body)["target_id"].as_str().unwrap().to_string();
    println!("POST target -> {status} {target_id}");

    let scribbles = json!([
        {"kind": "pair", "target_id": target_id,
         "source_path": synth::ellipse_path(320.0, 90.0, 250.0, 60.0, 64),
         "target_path": [[0, 0], [120, 0], [120, 90], [0, 90]]},
        {"kind": "keep", "source_path": synth::ellipse_path(320.0, 380.0, 250.0, 70.0, 64)},
    ]);
    let (status, _) = call(&app, "PUT", &format!("/api/session/{id}/correspondences"), serde_json::to_vec(&scribbles).unwrap()).await;
    println!("PUT correspondences -> {status}");

    for mode in ["preview", "full", "full"] {
        let (status, body) = call(&app, "POST", &format!("/api/session/{id}/solve?mode={mode}"), vec![]).await;
        let job = json(&body)["job"].as_str().unwrap().to_string();
        println!("POST solve?mode={mode} -> {status} job {job}");
        let png = loop {
            let (status, body) = call(&app, "GET", &format!("/api/session/{id}/result/{job}"), vec![]).await;
            if status != StatusCode::CONFLICT {
                break body;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        };
        let (_, body) = call(&app, "GET", &format!("/api/session/{id}/status"), vec![]).await;
        let report = &json(&body)["jobs"][&job]["report"];
        println!(
            "  {}x{}, cache hit {}, iterations {}, timings {}",
            report["width"], report["height"], report["cache_hit"], report["iterations"], report["timings"]
        );
        let path = out_dir.join(format!("session-{mode}.png"));
        std::fs::write(&path, png).unwrap();
    }
    println!("results in {}", out_dir.display());
}
