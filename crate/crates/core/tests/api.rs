mod support;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::sync::{Arc, OnceLock};
use tower::ServiceExt;
use vfmga::orchestrator::api::{router, AppState, RunData, SCHEMA_NAMES};
use vfmga::orchestrator::{run_pipeline, Stage};

/// One reduced run shared by all tests in this file.
fn run_dir() -> &'static std::path::Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        run_pipeline(&support::small_inputs(), dir.path(), Stage::Analyse).unwrap();
        dir
    })
    .path()
}

fn server() -> axum::Router {
    router(Arc::new(AppState::new(RunData::load(run_dir()).unwrap())))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn check(app: &axum::Router, schema: &str, instance: &Value) {
    let (status, s) = call(app, "GET", &format!("/schemas/{schema}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let validator = jsonschema::validator_for(&s).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema}: {errors:?}");
}

fn answer_for(question: &Value) -> Value {
    match question["kind"].as_str().unwrap() {
        "rank_order" => {
            let ids: Vec<Value> = question["attributes"].as_array().unwrap().iter().map(|a| a["id"].clone()).collect();
            json!({"kind": "rank_order", "order": ids})
        }
        "ratings" => {
            let order = question["order"].as_array().unwrap();
            let ratings: serde_json::Map<String, Value> = order
                .iter()
                .enumerate()
                .map(|(i, a)| (a.as_str().unwrap().to_string(), json!((100 - 10 * i as i64).max(0))))
                .collect();
            json!({"kind": "ratings", "ratings": ratings})
        }
        "bisection" => {
            let i = &question["interval"];
            let (lo, hi) = (i["lower_state"].as_f64().unwrap(), i["upper_state"].as_f64().unwrap());
            json!({"kind": "bisection", "state": lo + 0.4 * (hi - lo)})
        }
        "compensation" => json!({"kind": "compensation", "response": "reject"}),
        other => panic!("no answer for {other}"),
    }
}

#[tokio::test]
async fn every_response_matches_its_schema() {
    let app = server();
    for name in SCHEMA_NAMES {
        let (status, s) = call(&app, "GET", &format!("/schemas/{name}"), None).await;
        assert_eq!(status, StatusCode::OK, "{name}");
        assert!(jsonschema::validator_for(&s).is_ok(), "{name} compiles");
    }
    let (s, v) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "health", &v).await;

    let (s, v) = call(&app, "GET", "/alternatives", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "alternatives", &v).await;
    let all = v["alternatives"].as_array().unwrap().len();
    let (s, v) = call(&app, "GET", "/alternatives?top=0.1&stakeholder=SH01", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "alternatives", &v).await;
    assert_eq!(v["alternatives"].as_array().unwrap().len(), (0.1 * all as f64 + 1e-9).floor() as usize);
    assert_eq!(v["alternatives"][0]["rank"], 1);

    let (s, v) = call(&app, "GET", "/rankings/SH01", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "ranking", &v).await;
    let (s, v) = call(&app, "GET", "/analysis/classification", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "classification", &v).await;
    let (s, v) = call(&app, "GET", "/analysis/clustering", None).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "dendrogram", &v).await;

    let req = json!({"stakeholder": "SH02", "gamma": 1.0});
    check(&app, "whatif_request", &req).await;
    let (s, v) = call(&app, "POST", "/whatif", Some(req)).await;
    assert_eq!(s, StatusCode::OK);
    check(&app, "whatif_response", &v).await;

    let req = json!({"stakeholder": "S", "bisection_depth": 3});
    check(&app, "create_session", &req).await;
    let (s, v) = call(&app, "POST", "/sessions", Some(req)).await;
    assert_eq!(s, StatusCode::CREATED);
    check(&app, "session", &v).await;
    let id = v["id"].as_str().unwrap().to_string();
    loop {
        let (s, q) = call(&app, "GET", &format!("/sessions/{id}/question"), None).await;
        assert_eq!(s, StatusCode::OK);
        check(&app, "question", &q).await;
        if q["kind"] == "complete" {
            break;
        }
        let a = answer_for(&q);
        check(&app, "answer", &a).await;
        let (s, v) = call(&app, "POST", &format!("/sessions/{id}/answer"), Some(a)).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        check(&app, "session", &v).await;
    }

    let (s, v) = call(&app, "GET", "/rankings/nobody", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    check(&app, "error", &v).await;
    assert_eq!(call(&app, "GET", "/sessions/S9999/question", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/sessions/..%2Fx/question", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/schemas/nope", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn scripted_session_follows_protocol() {
    let app = server();
    let (_, v) = call(&app, "POST", "/sessions", Some(json!({"stakeholder": "scripted"}))).await;
    let id = v["id"].as_str().unwrap().to_string();
    let url = format!("/sessions/{id}/answer");
    assert_eq!(v["phase"], "swing_ranking");
    assert_eq!(v["question"]["kind"], "rank_order");
    assert_eq!(v["question"]["attributes"].as_array().unwrap().len(), 11);

    // wrong answer type and a bad permutation are rejected without side effects
    let (s, _) = call(&app, "POST", &url, Some(json!({"kind": "bisection", "state": 1.0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", &url, Some(json!({"kind": "rank_order", "order": ["om_costs"]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (_, v) = call(&app, "POST", &url, Some(answer_for(&v["question"]))).await;
    assert_eq!(v["phase"], "swing_rating");
    let mut bad = answer_for(&v["question"]);
    let first = v["question"]["reference"].as_str().unwrap().to_string();
    bad["ratings"][&first] = json!(90);
    assert_eq!(call(&app, "POST", &url, Some(bad)).await.0, StatusCode::BAD_REQUEST);

    let (_, mut v) = call(&app, "POST", &url, Some(answer_for(&v["question"]))).await;
    let mut targets = Vec::new();
    while v["phase"] == "savf_bisection" {
        let q = &v["question"];
        targets.push((q["attribute"].as_str().unwrap().to_string(), q["target_value"].as_f64().unwrap()));
        let i = &q["interval"];
        let (lo, hi) = (i["lower_state"].as_f64().unwrap(), i["upper_state"].as_f64().unwrap());
        let outside = json!({"kind": "bisection", "state": hi + (hi - lo)});
        assert_eq!(call(&app, "POST", &url, Some(outside)).await.0, StatusCode::BAD_REQUEST);
        v = call(&app, "POST", &url, Some(answer_for(q))).await.1;
    }
    assert!(!targets.is_empty());
    for chunk in targets.chunks(3) {
        let t: Vec<f64> = chunk.iter().map(|c| c.1).collect();
        assert_eq!(t, vec![0.5, 0.25, 0.75]);
        assert!(chunk.iter().all(|c| c.0 == chunk[0].0));
    }

    let mut probes = 0;
    while v["phase"] == "compensation_check" {
        probes += 1;
        v = call(&app, "POST", &url, Some(answer_for(&v["question"]))).await.1;
    }
    assert_eq!(probes, 2);
    assert_eq!(v["phase"], "complete");
    let prefs = &v["result"]["preferences"];
    assert_eq!(prefs["gamma"], 0.2);
    let total: f64 = prefs["weights"].as_object().unwrap().values().map(|w| w.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(call(&app, "POST", &url, Some(json!({"kind": "compensation", "response": "accept"}))).await.0,
        StatusCode::CONFLICT);

    // the recorded answers derive the same preferences as the session
    let run = RunData::load(run_dir()).unwrap();
    let input: vfmga::mavt::StakeholderInput = serde_json::from_value(v["result"]["input"].clone()).unwrap();
    let direct = input.derive(&run.catalog, &run.ranges).unwrap();
    assert_eq!(serde_json::to_value(direct).unwrap(), *prefs);
}

#[tokio::test]
async fn session_resumes_after_restart() {
    let app = server();
    let (_, v) = call(&app, "POST", "/sessions", Some(json!({"stakeholder": "resumer"}))).await;
    let id = v["id"].as_str().unwrap().to_string();
    let url = format!("/sessions/{id}/answer");
    let mut v = v;
    for _ in 0..3 {
        v = call(&app, "POST", &url, Some(answer_for(&v["question"]))).await.1;
    }
    assert_eq!(v["phase"], "savf_bisection");
    let before = call(&app, "GET", &format!("/sessions/{id}/question"), None).await.1;
    let restarted = server();
    let after = call(&restarted, "GET", &format!("/sessions/{id}/question"), None).await.1;
    assert_eq!(before, after);
    // a new session on the restarted server does not reuse the id
    let (_, fresh) = call(&restarted, "POST", "/sessions", Some(json!({"stakeholder": "x"}))).await;
    assert_ne!(fresh["id"], v["id"]);
}

#[tokio::test]
async fn whatif_with_stored_preferences_reproduces_ranking() {
    let app = server();
    let (_, stored) = call(&app, "GET", "/rankings/SH03", None).await;
    let (_, v) = call(&app, "POST", "/whatif", Some(json!({"stakeholder": "SH03", "top_fraction": 1.0}))).await;
    assert_eq!(v["ranking"], stored);
    assert_eq!(v["kendall_tau_to_baseline"], 0.0);
    for t in v["technologies"].as_array().unwrap() {
        assert_eq!(t["top_range"], t["full_range"], "{}", t["technology"]);
    }
    let (_, moved) = call(&app, "POST", "/whatif", Some(json!({"stakeholder": "SH03", "gamma": 1.0}))).await;
    assert!(moved["kendall_tau_to_baseline"].as_f64().unwrap() >= 0.0);

    let (s, _) = call(&app, "POST", "/whatif", Some(json!({"weights": {"bogus": 1.0}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&app, "POST", "/whatif", Some(json!({"weights": {"om_costs": 1.0}}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["weights"]["om_costs"], 1.0);
}
