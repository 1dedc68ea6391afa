use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use crowdgen::{Engine, EngineConfig};
use crowdgen_core::imaging::{samples, ImageBuffer};
use crowdgen_core::reasoning::{ChatBackend, ChatMessage};
use crowdgen_core::ReasonError;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    _dir: tempfile::TempDir,
    app: Router,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EngineConfig {
        data_dir: dir.path().to_path_buf(),
        ..EngineConfig::default()
    };
    let engine = Engine::open(cfg).unwrap();
    Harness {
        app: crowdgen::http::router(Arc::new(engine)),
        _dir: dir,
    }
}

struct Down;

impl ChatBackend for Down {
    fn complete(&self, _: &[ChatMessage], _: f64) -> Result<String, ReasonError> {
        Err(ReasonError::Transport("connection refused".into()))
    }
}

struct Babbler;

impl ChatBackend for Babbler {
    fn complete(&self, _: &[ChatMessage], _: f64) -> Result<String, ReasonError> {
        Ok("I would suggest a nice slider.".into())
    }
}

impl Harness {
    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req
            .body(body.map_or(Body::empty(), |b| Body::from(serde_json::to_vec(&b).unwrap())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (s, b) = self.call(method, uri, body).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }
}

fn exposure() -> Value {
    json!({ "name": "image_adjust_exposure", "description": "Adjust the exposure of the image to make it brighter or darker." })
}

fn hue() -> Value {
    json!({ "name": "image_adjust_hue", "description": "Experiment with different hues to find a color tone that complements the overall mood of the image." })
}

#[tokio::test]
async fn reason_exposure_prefers_presets_for_efficiency() {
    let h = harness();
    let body = json!({ "task": exposure(), "library_mode": "withlib30", "k": 10, "backend": "oracle", "seed": 1 });
    let (s, v) = h.json("POST", "/v1/reason", Some(body)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["recommendations"]["efficiency"]["top"], "preset_buttons");
    for aspect in ["predictability", "efficiency", "explorability"] {
        let total: u64 = v["recommendations"][aspect]["widgets"]
            .as_array()
            .unwrap()
            .iter()
            .map(|w| w["score"].as_u64().unwrap())
            .sum();
        assert_eq!(total, 10);
    }
}

#[tokio::test]
async fn reason_is_byte_identical() {
    let h = harness();
    let body = json!({ "task": hue(), "backend": "oracle", "seed": 7, "library_mode": "withlib25" });
    let a = h.call("POST", "/v1/reason", Some(body.clone())).await;
    let b = h.call("POST", "/v1/reason", Some(body)).await;
    assert_eq!(a.0, StatusCode::OK);
    assert_eq!(a.1, b.1);
}

#[tokio::test]
async fn reason_errors() {
    let h = harness();
    let (s, v) = h.json("POST", "/v1/reason", Some(json!({ "task": hue(), "k": 0 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "validation");
    let (s, _) = h.json("POST", "/v1/reason", Some(json!({ "task": hue(), "library_mode": "withlib99" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.json("POST", "/v1/reason", Some(json!({ "task": { "description": "" } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let poem = json!({ "task": { "name": "write_poem", "description": "Summarize this quarterly sales report", "tags": [] } });
    let (s, v) = h.json("POST", "/v1/reason", Some(poem)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}

fn engine_with(chat: Arc<dyn ChatBackend>) -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = EngineConfig {
        data_dir: dir.path().to_path_buf(),
        ..EngineConfig::default()
    };
    let engine = Engine::open(cfg).unwrap().with_chat_backend(chat);
    (dir, crowdgen::http::router(Arc::new(engine)))
}

#[tokio::test]
async fn llm_failures_are_bad_gateway() {
    for chat in [Arc::new(Down) as Arc<dyn ChatBackend>, Arc::new(Babbler)] {
        let (_dir, app) = engine_with(chat);
        let h = Harness { _dir: tempfile::tempdir().unwrap(), app };
        let body = json!({ "task": hue(), "backend": { "kind": "llm", "max_retries": 1 }, "k": 2 });
        let (s, v) = h.json("POST", "/v1/reason", Some(body)).await;
        assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
        assert_eq!(v["error"]["code"], "backend");
    }
}

#[tokio::test]
async fn widgets_by_kind_and_top_per_aspect() {
    let h = harness();
    let (s, v) = h.json("POST", "/v1/widgets", Some(json!({ "task": hue(), "kinds": ["slider"] }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let specs = v["specs"].as_array().unwrap();
    assert_eq!(specs.len(), 1);
    assert_eq!(specs[0]["binding"]["range"], json!({ "min": 0.0, "max": 1.0, "step": 0.01 }));

    let (s, _) = h.json("POST", "/v1/widgets", Some(json!({ "kinds": [] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.json("POST", "/v1/widgets", Some(json!({ "task": hue(), "kinds": "top-per-aspect" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let wm = json!({ "name": "image_place_watermark", "description": "Move the watermark" });
    let (s, v) = h.json("POST", "/v1/widgets", Some(json!({ "task": wm, "kinds": ["color_wheel"] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let (_, sess) = h.json("POST", "/v1/sessions", Some(json!({}))).await;
    let id = sess["session_id"].as_str().unwrap();
    let (s, rv) = h.json("POST", "/v1/reason", Some(json!({ "task": hue(), "session_id": id, "seed": 3 }))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = h.json("POST", "/v1/widgets", Some(json!({ "session_id": id, "kinds": "top-per-aspect" }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let specs = v["specs"].as_array().unwrap();
    assert!(!specs.is_empty() && specs.len() <= 3);
    let kinds: std::collections::BTreeSet<&str> = specs.iter().map(|s| s["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds.len(), specs.len());
    let tops: std::collections::BTreeSet<&str> =
        rv["top_per_aspect"].as_array().unwrap().iter().map(|t| t["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, tops);
    for s in specs {
        assert_eq!(s["spec_version"], "1");
        assert!(s["score"].as_u64().unwrap() <= 10);
    }
}

fn png_b64(img: &ImageBuffer) -> String {
    B64.encode(img.encode_png())
}

#[tokio::test]
async fn image_apply_identity_golden_and_missing() {
    let h = harness();
    let photo = ImageBuffer::decode_png(crowdgen_core::fixtures::PHOTO64_PNG).unwrap();
    let (s, v) = h
        .json("POST", "/v1/image/apply", Some(json!({ "image_png_base64": png_b64(&photo), "op": { "op": "hue", "h": 0.0 } })))
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let out = ImageBuffer::decode_png(&B64.decode(v["image_png_base64"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(out, photo);

    let (s, v) = h
        .json("POST", "/v1/image/apply", Some(json!({ "image_png_base64": png_b64(&photo), "op": { "op": "hue", "h": 0.2 } })))
        .await;
    assert_eq!(s, StatusCode::OK);
    let out = ImageBuffer::decode_png(&B64.decode(v["image_png_base64"].as_str().unwrap()).unwrap()).unwrap();
    let golden = ImageBuffer::decode_png(crowdgen_core::fixtures::PHOTO64_HUE020_PNG).unwrap();
    assert_eq!(out, golden);

    let handle = v["image_handle"].as_str().unwrap();
    let (s, png) = h.call("GET", &format!("/v1/images/{handle}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ImageBuffer::decode_png(&png).unwrap(), golden);

    let (s, v) = h
        .json("POST", "/v1/image/apply", Some(json!({ "image_handle": "f".repeat(64), "op": { "op": "hue", "h": 0.1 } })))
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
    let (s, _) = h
        .json("POST", "/v1/image/apply", Some(json!({ "image_handle": handle, "op": { "op": "saturation", "f": -1.0 } })))
        .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = h.json("POST", "/v1/sessions/nope/replay", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn raw_png_negotiation() {
    let h = harness();
    let img = samples::gradient(16, 8);
    let req = Request::builder()
        .method("POST")
        .uri("/v1/image/apply")
        .header("content-type", "image/png")
        .header("accept", "image/png")
        .header("x-op", r#"{"op":"lightness","d":0.0}"#)
        .body(Body::from(img.encode_png()))
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/png");
    assert_eq!(resp.headers()["x-image-handle"].len(), 64);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(ImageBuffer::decode_png(&bytes).unwrap(), img);
}

#[tokio::test]
async fn session_history_replays_exactly() {
    let h = harness();
    let (s, sess) = h.json("POST", "/v1/sessions", Some(json!({ "task": hue() }))).await;
    assert_eq!(s, StatusCode::CREATED);
    let id = sess["session_id"].as_str().unwrap().to_string();
    let (_, w) = h.json("POST", "/v1/widgets", Some(json!({ "session_id": id, "kinds": ["preset_buttons", "color_picker"] }))).await;
    let preset = w["specs"][0].clone();
    let picker = w["specs"][1].clone();
    let steps = [
        json!({ "session_id": id, "binding": preset["binding"], "value": preset["binding"]["presets"][1]["value"], "spec_id": preset["id"] }),
        json!({ "session_id": id, "op": { "op": "saturation", "f": 1.4 } }),
        json!({ "session_id": id, "binding": picker["binding"], "value": "#3366cc", "spec_id": picker["id"] }),
        json!({ "session_id": id, "op": { "op": "overlay", "asset": "watermark", "x": 0.9, "y": 0.9, "alpha": 0.5 } }),
    ];
    let mut last = String::new();
    for step in steps {
        let (s, v) = h.json("POST", "/v1/image/apply", Some(step)).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        last = v["image_handle"].as_str().unwrap().to_string();
    }
    let (_, sess) = h.json("GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(sess["image_handle"], last.as_str());
    assert_eq!(sess["history"].as_array().unwrap().len(), 5);
    assert_eq!(sess["history"][1]["chosen_spec_ids"], json!(["image_adjust_hue.preset_buttons"]));
    let (s, r) = h.json("POST", &format!("/v1/sessions/{id}/replay"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["identical"], true);
    assert_eq!(r["replayed_handle"], last.as_str());
    assert_eq!(r["ops"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn library_capture() {
    let h = harness();
    let (_, before) = h.json("GET", "/v1/library", None).await;
    assert_eq!(before["total_responses"], 720);
    let count = |v: &Value| v["tasks"][2]["frequencies"]["efficiency"]["total"].as_u64().unwrap();
    assert_eq!(before["tasks"][2]["name"], "image_adjust_hue");
    for i in 0..3 {
        let body = json!({ "task": "image_adjust_hue", "aspect": "efficiency", "widget": "Color Wheel", "reason": "quick", "rater_id": format!("new{i}") });
        let (s, v) = h.json("POST", "/v1/library/responses", Some(body)).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["count"], 31 + i);
    }
    let (_, after) = h.json("GET", "/v1/library", None).await;
    assert_eq!(after["total_responses"], 723);
    assert_eq!(count(&after), count(&before) + 3);
    let bad = json!({ "task": "image_adjust_hue", "aspect": "efficiency", "widget": "knob", "reason": "x", "rater_id": "z" });
    assert_eq!(h.json("POST", "/v1/library/responses", Some(bad)).await.0, StatusCode::CONFLICT);
    let dup = json!({ "task": "image_adjust_hue", "aspect": "efficiency", "widget": "slider", "reason": "x", "rater_id": "new0" });
    assert_eq!(h.json("POST", "/v1/library/responses", Some(dup)).await.0, StatusCode::CONFLICT);
    let (s, cat) = h.json("GET", "/v1/catalog", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cat["widgets"].as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn study_endpoints() {
    let h = harness();
    let (s, plan) = h.json("POST", "/v1/study/plan", Some(json!({ "n": 2, "seed": 5 }))).await;
    assert_eq!(s, StatusCode::OK);
    let parts = plan["participants"].as_array().unwrap();
    assert_eq!(parts.len(), 2);
    for p in parts {
        let n: usize = p["items"].as_array().unwrap().iter().map(|i| i["pairs"].as_array().unwrap().len()).sum();
        assert_eq!(n, 18);
    }
    let item = &parts[0]["items"][0];
    let pair = item["pairs"][0].clone();
    let rec = json!({ "participant_id": parts[0]["participant_id"], "task_name": item["task"], "aspect": item["aspect"], "pair": pair, "selection": "left" });
    let (s, v) = h.json("POST", "/v1/study/record", Some(rec.clone())).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let mut flipped = rec.clone();
    flipped["pair"] = json!("withoutlib_vs_withlib30");
    assert_eq!(h.json("POST", "/v1/study/record", Some(flipped)).await.0, StatusCode::CONFLICT);
    let mut outsider = rec.clone();
    outsider["participant_id"] = json!("P999");
    assert_eq!(h.json("POST", "/v1/study/record", Some(outsider)).await.0, StatusCode::CONFLICT);
    let (s, _) = h.call("POST", "/v1/study/record", Some(json!("not a record"))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _) = h.json("POST", "/v1/study/plan", Some(json!({ "n": 78, "seed": 42 }))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = h.json("POST", "/v1/study/simulate", Some(json!({ "p": 0.8, "seed": 42 }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["stored"], 78 * 18);
    let (s, v) = h.json("GET", "/v1/study/results?group_by=aspect-pair", None).await;
    assert_eq!(s, StatusCode::OK);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.get("chi2").is_some() && r.get("stars").is_some()));
    let (s, csv) = h.call("GET", "/v1/study/results?group_by=task-aspect-pair&format=csv", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(csv).unwrap().starts_with("task,aspect,left,right,count_left,count_right,chi2,p,stars"));
    assert_eq!(h.json("GET", "/v1/study/results?group_by=bogus", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(h.json("POST", "/v1/study/plan", Some(json!({ "n": 0 }))).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let h = harness();
    for uri in ["/v1/reason", "/v1/widgets", "/v1/image/apply", "/v1/library/responses", "/v1/study/plan"] {
        let req = Request::builder().method("POST").uri(uri).header("content-type", "application/json").body(Body::from("{oops")).unwrap();
        let resp = h.app.clone().oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::BAD_REQUEST, "{uri}");
    }
}
