mod common;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use carefulbot::experiment::{run_session, SessionInputs};
use carefulbot::robot::read_jsonl;
use carefulbot_service::protocol::SessionCreated;
use carefulbot_service::router;
use serde_json::json;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

#[tokio::test]
async fn scripted_report_matches_the_library_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let state = common::app(dir.path());
    let app = router(state.clone());
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"v": "v1", "mode": "scripted", "participant": 2, "seed": 99}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let created: SessionCreated = serde_json::from_str(&body).unwrap();
    let (status, served) = call(&app, "GET", &format!("/sessions/{}/report", created.id), None).await;
    assert_eq!(status, StatusCode::OK);

    let config = state.config();
    let setup = &config.setup;
    let inputs = SessionInputs {
        schedule: &setup.schedule,
        profiles: &setup.profiles,
        sim: &setup.sim,
        classifier: &setup.classifier,
    };
    let lib = run_session(inputs, &config.study.participant_params(2).unwrap(), 2, 99).unwrap();
    assert_eq!(served, lib.report.to_json().unwrap());

    let session_dir = dir.path().join(&created.id);
    assert_eq!(std::fs::read_to_string(session_dir.join("report.json")).unwrap(), served);
    let file = std::fs::File::open(session_dir.join("trials").join("05.jsonl")).unwrap();
    let lines = read_jsonl(std::io::BufReader::new(file)).unwrap();
    assert_eq!(lines.len(), lib.traces[5].ticks.len());
}

#[tokio::test]
async fn lifecycle_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(common::app(dir.path()));
    let (status, body) = call(&app, "GET", "/sessions/nope/report", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body.contains("\"code\":\"not_found\""));

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"v": "v0", "mode": "live"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"v": "v1", "mode": "live"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(!body.contains("profile") && !body.contains("areful"), "{body}");
    let id = serde_json::from_str::<SessionCreated>(&body).unwrap().id;

    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"v": "v1", "trial_idx": 0, "zone": "serve"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/wrist"),
        Some(json!({"v": "v1", "samples": [{"t": 0.0, "x": 1.0, "y": 2.0}, {"t": -1.0, "x": 1.0, "y": 2.0}]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, r#"{"accepted":1,"stale":1}"#);
    assert!(dir.path().join(&id).join("session.json").exists());
}
