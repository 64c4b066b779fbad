use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use emocal_service::http::router;
use emocal_service::{replay, ManualClock, Service};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn app() -> (Arc<Service>, axum::Router) {
    let service = Arc::new(Service::in_memory(Arc::new(ManualClock::new(1_700_000_000.0))));
    (service.clone(), router(service))
}

#[tokio::test]
async fn event_lifecycle_and_schedule() {
    let (service, app) = app();
    let (s, v) = call(&app, Method::GET, "/schedule", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");

    let (s, v) = call(
        &app,
        Method::POST,
        "/events",
        Some(json!({"name": "Deep work", "duration_min": 90, "priority": 0.9, "cognitive_load": 0.9})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["id"], "evt-1");
    let (s, _) = call(
        &app,
        Method::POST,
        "/events",
        Some(json!({"id": "mail", "duration_min": 30, "priority": 0.2, "cognitive_load": 0.1})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);

    let (s, v) = call(&app, Method::POST, "/solve", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["placements"].as_array().unwrap().len(), 2);
    let (_, sched) = call(&app, Method::GET, "/schedule", None).await;
    assert_eq!(sched, v);

    let (s, _) = call(&app, Method::DELETE, "/events/mail", None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, v) = call(&app, Method::DELETE, "/events/mail", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");

    let (_, state) = call(&app, Method::GET, "/state", None).await;
    assert_eq!(state["events"].as_array().unwrap().len(), 1);
    assert_eq!(replay(&service.journal_text().unwrap()).unwrap(), *service.state());
}

#[tokio::test]
async fn errors_share_one_shape() {
    let (service, app) = app();
    let (s, v) = call(&app, Method::POST, "/solve", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("no_events")));

    let (s, v) = call(&app, Method::POST, "/events", Some(json!({"duration_min": 30, "priority": 3.0}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("validation_failed")));
    assert!(v["message"].as_str().unwrap().contains("priority"));

    let (s, v) = call(&app, Method::POST, "/events", Some(json!({"nonsense": true}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("validation_failed")));

    let (s, v) = call(
        &app,
        Method::POST,
        "/emotion",
        Some(json!({"source": "activity", "log": "event,x,y\n"})),
    )
    .await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("model_missing")));

    // two exclusive 5-hour events cannot share a 9-hour day
    for id in ["a", "b"] {
        call(&app, Method::POST, "/events", Some(json!({"id": id, "duration_min": 300, "priority": 0.5}))).await;
    }
    let before = service.state();
    let (s, v) = call(&app, Method::POST, "/solve", None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("infeasible")));
    assert_eq!(v["details"]["reason"], "capacity_exceeded");
    assert_eq!(v["details"]["required"], 20);
    assert_eq!(*service.state(), *before);
}

#[tokio::test]
async fn emotion_and_config_round_trip() {
    let (service, app) = app();
    let (s, v) = call(
        &app,
        Method::POST,
        "/emotion",
        Some(json!({"source": "manual", "valence": 0.1, "arousal": 0.95, "dominance": 0.3})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["source"], "manual");
    assert_eq!(v["at"], 1_700_000_000.0);

    let (s, v) = call(&app, Method::POST, "/config", Some(json!({"day_end": "12:00", "alpha_emotional": 4.0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["horizon"]["day_end"], "12:00");
    let (s, v) = call(&app, Method::POST, "/config", Some(json!({"slot_minutes": 7}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::BAD_REQUEST, Some("validation_failed")));

    let (_, state) = call(&app, Method::GET, "/state", None).await;
    assert_eq!(state["emotion"]["arousal"], 0.95);
    assert_eq!(state["config"]["weights"]["alpha_emotional"], 4.0);
    assert_eq!(service.seq(), 2);
}
