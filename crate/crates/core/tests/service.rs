use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use parlogue::compilesvc::InProcessCompiler;
use parlogue::pipeline::{replay, PromptSet, Scenario, SessionConfig, SessionEvent};
use parlogue::service::{spawn_service, ServiceConfig, ServiceHandle, SessionView};
use serde_json::{json, Value};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios")
}

async fn start(data_dir: Option<PathBuf>) -> ServiceHandle {
    let config = ServiceConfig {
        data_dir,
        fixtures_dir: fixtures(),
        compiler: Arc::new(InProcessCompiler),
        prompts: Arc::new(PromptSet::builtin()),
        session: SessionConfig::default(),
    };
    spawn_service("127.0.0.1:0", config).await.unwrap()
}

async fn create(client: &reqwest::Client, svc: &ServiceHandle, fixture: &str) -> SessionView {
    let resp = client
        .post(svc.url("/sessions"))
        .json(&json!({ "backend": "scripted", "fixture": fixture, "final_prompt_variant": "strict" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 201);
    resp.json().await.unwrap()
}

/// Posts every command of the fixture through the public endpoints.
async fn play(client: &reqwest::Client, svc: &ServiceHandle, id: &str, fixture: &str) {
    let scenario = Scenario::load(&fixtures().join(format!("{fixture}.json"))).unwrap();
    for c in serde_json::to_value(&scenario.commands).unwrap().as_array().unwrap() {
        let (path, body) = match c["op"].as_str().unwrap() {
            "message" => ("message", json!({ "text": c["text"], "updates": c["updates"] })),
            "add_shape" => ("shapes", json!({ "shape": c["shape"] })),
            "update_param" => ("params", c["update"].clone()),
            other => panic!("unexpected op {other}"),
        };
        let resp = client
            .post(svc.url(&format!("/sessions/{id}/{path}")))
            .json(&body)
            .send()
            .await
            .unwrap();
        assert!(resp.status().is_success(), "{path}: {}", resp.text().await.unwrap());
    }
}

/// Reads SSE frames until `count` events have arrived.
async fn read_events(resp: reqwest::Response, count: usize) -> Vec<SessionEvent> {
    let mut resp = resp;
    let mut buf = String::new();
    let mut out = Vec::new();
    while out.len() < count {
        let chunk = tokio::time::timeout(Duration::from_secs(5), resp.chunk())
            .await
            .expect("event stream stalled")
            .unwrap()
            .expect("stream ended");
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let frame: String = buf.drain(..end + 2).collect();
            if let Some(data) = frame.lines().find_map(|l| l.strip_prefix("data: ")) {
                out.push(serde_json::from_str(data).unwrap());
            }
        }
    }
    out
}

#[tokio::test]
async fn fresh_session_is_gathering_with_no_params() {
    let svc = start(None).await;
    let client = reqwest::Client::new();
    let created = create(&client, &svc, "oval").await;
    let got: Value = client
        .get(svc.url(&format!("/sessions/{}", created.id)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(got["state"], "gathering");
    assert_eq!(got["params"], json!([]));
    assert_eq!(got["id"], created.id.as_str());
}

#[tokio::test]
async fn errors_have_codes_and_statuses() {
    let svc = start(None).await;
    let client = reqwest::Client::new();
    let resp = client.get(svc.url("/sessions/nope")).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "E_UNKNOWN_SESSION");
    assert_eq!(body["diagnostics"], json!([]));

    let resp = client
        .post(svc.url("/sessions"))
        .json(&json!({ "backend": "scripted" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    let resp = client
        .post(svc.url("/sessions"))
        .json(&json!({ "backend": "scripted", "fixture": "../etc" }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);

    let s = create(&client, &svc, "oval").await;
    let resp = client
        .post(svc.url(&format!("/sessions/{}/params", s.id)))
        .json(&json!({ "name": "OvalCount", "value": 3 }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 409);
    let resp = client
        .get(svc.url(&format!("/sessions/{}/artifact", s.id)))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 409);
    assert_eq!(resp.json::<Value>().await.unwrap()["code"], "E_NO_ARTIFACT");

    // Malformed bodies and queries still get the error shape.
    let resp = client
        .post(svc.url(&format!("/sessions/{}/message", s.id)))
        .header("content-type", "application/json")
        .body("{\"text\": ")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    assert_eq!(resp.json::<Value>().await.unwrap()["code"], "E_INVALID_REQUEST");
    let resp = client
        .post(svc.url(&format!("/sessions/{}/confirm", s.id)))
        .json(&json!({ "name": "OvalCount", "accept": true, "extra": 1 }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    let resp = client
        .get(svc.url(&format!("/sessions/{}/events?from=soon", s.id)))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    assert_eq!(resp.json::<Value>().await.unwrap()["code"], "E_INVALID_REQUEST");
    let resp = client.get(svc.url("/nowhere")).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    assert_eq!(resp.json::<Value>().await.unwrap()["code"], "E_NOT_FOUND");
}

#[tokio::test]
async fn oval_session_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let svc = start(Some(dir.path().to_path_buf())).await;
    let client = reqwest::Client::new();
    let s = create(&client, &svc, "oval").await;
    let events = client
        .get(svc.url(&format!("/sessions/{}/events", s.id)))
        .send()
        .await
        .unwrap();
    assert_eq!(events.headers()["content-type"], "text/event-stream");
    play(&client, &svc, &s.id, "oval").await;

    let view: SessionView = client
        .get(svc.url(&format!("/sessions/{}", s.id)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let total = view.last_seq as usize;
    let streamed = read_events(events, total).await;
    assert!(streamed.iter().any(|e| serde_json::to_value(e).unwrap()["to"] == "live"));
    let digest = view.artifact.as_ref().unwrap().digest.clone();
    let last = serde_json::to_value(streamed.last().unwrap()).unwrap();
    assert_eq!(last["type"], "artifact_updated");
    assert_eq!(last["digest"], digest.as_str());

    // Replay oracle: the journal served over HTTP replays to the same digest.
    let journal = client
        .get(svc.url(&format!("/sessions/{}/journal", s.id)))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    let report = replay(&journal, Arc::new(InProcessCompiler)).await.unwrap();
    assert!(report.matches());
    assert_eq!(report.replayed_digest.as_deref(), Some(digest.as_str()));
    let on_disk = std::fs::read_to_string(dir.path().join(&s.id).join("journal.jsonl")).unwrap();
    assert_eq!(on_disk, journal);

    // OBJ has one group per ring; two reads are byte-identical.
    let obj = |fmt: &'static str| {
        let client = client.clone();
        let url = svc.url(&format!("/sessions/{}/artifact?format={fmt}", s.id));
        async move { client.get(url).send().await.unwrap().text().await.unwrap() }
    };
    let a = obj("obj").await;
    assert_eq!(a, obj("obj").await);
    assert_eq!(a.lines().filter(|l| l.starts_with("o ")).count(), 3);
    let native: Value = serde_json::from_str(&obj("json").await).unwrap();
    assert_eq!(native["digest"], digest.as_str());
    assert_eq!(native["meshes"].as_array().unwrap().len(), 3);
    assert!(native["source"].as_str().unwrap().contains("oval_ring"));
}

#[tokio::test]
async fn out_of_range_update_is_rejected_without_an_artifact_event() {
    let svc = start(None).await;
    let client = reqwest::Client::new();
    let s = create(&client, &svc, "oval").await;
    play(&client, &svc, &s.id, "oval").await;
    let before: SessionView = client
        .get(svc.url(&format!("/sessions/{}", s.id)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let resp = client
        .post(svc.url(&format!("/sessions/{}/params", s.id)))
        .json(&json!({ "name": "OvalCount", "value": 99 }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "E_OUT_OF_RANGE");
    assert_eq!(body["diagnostics"][0]["code"], "E_OUT_OF_RANGE");

    let tail = client
        .get(svc.url(&format!("/sessions/{}/events?from={}", s.id, before.last_seq + 1)))
        .send()
        .await
        .unwrap();
    let events = read_events(tail, 1).await;
    let e = serde_json::to_value(&events[0]).unwrap();
    assert_eq!(e["type"], "error");
    assert_eq!(e["stage"], "params");

    // A valid update streams exactly ParamsChanged then ArtifactUpdated.
    let resp = client
        .post(svc.url(&format!("/sessions/{}/params", s.id)))
        .json(&json!({ "name": "OvalCount", "value": 5 }))
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_success());
    let tail = client
        .get(svc.url(&format!("/sessions/{}/events?from={}", s.id, before.last_seq + 2)))
        .send()
        .await
        .unwrap();
    let names: Vec<_> = read_events(tail, 2).await.iter().map(|e| e.payload.name()).collect();
    assert_eq!(names, ["params_changed", "artifact_updated"]);
}

#[tokio::test]
async fn resume_by_last_event_id() {
    let svc = start(None).await;
    let client = reqwest::Client::new();
    let s = create(&client, &svc, "two_squares").await;
    play(&client, &svc, &s.id, "two_squares").await;
    let resp = client
        .get(svc.url(&format!("/sessions/{}/events", s.id)))
        .header("Last-Event-ID", "3")
        .send()
        .await
        .unwrap();
    let events = read_events(resp, 1).await;
    assert_eq!(events[0].seq, 4);
}

#[tokio::test]
async fn sessions_are_independent() {
    let svc = start(None).await;
    let client = reqwest::Client::new();
    let a = create(&client, &svc, "oval").await;
    let b = create(&client, &svc, "two_squares").await;
    assert_ne!(a.id, b.id);
    let (ra, rb) = tokio::join!(play(&client, &svc, &a.id, "oval"), play(&client, &svc, &b.id, "two_squares"));
    let _ = (ra, rb);
    for (id, shapes) in [(&a.id, 3), (&b.id, 2)] {
        let v: SessionView = client
            .get(svc.url(&format!("/sessions/{id}")))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(v.artifact.unwrap().shapes, shapes);
    }
}
