//! Starts the HTTP service, drives the scripted oval dialogue over the REST API and
//! follows the server-sent event stream.
//!
//! ```text
//! cargo run --example http_service
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use parlogue::compilesvc::InProcessCompiler;
use parlogue::pipeline::{PromptSet, SessionConfig};
use parlogue::service::{spawn_service, ServiceConfig};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig {
        data_dir: None,
        fixtures_dir: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios"),
        compiler: Arc::new(InProcessCompiler),
        prompts: Arc::new(PromptSet::builtin()),
        session: SessionConfig::default(),
    };
    let svc = spawn_service("127.0.0.1:0", config).await?;
    println!("listening on {}", svc.url(""));
    let http = reqwest::Client::new();

    let created: Value = http
        .post(svc.url("/sessions"))
        .json(&json!({ "backend": "scripted", "fixture": "oval" }))
        .send()
        .await?
        .json()
        .await?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    println!("session {id} is {}", created["state"]);

    let mut stream = http.get(svc.url(&format!("/sessions/{id}/events"))).send().await?;

    let shape: Value = http
        .post(svc.url(&format!("/sessions/{id}/shapes")))
        .json(&json!({ "shape": { "kind": "point", "pos": [2.0, 3.0, 0.0] } }))
        .send()
        .await?
        .json()
        .await?;
    let post = |path: &str, body: Value| http.post(svc.url(&format!("/sessions/{id}/{path}"))).json(&body).send();
    post("message", json!({ "text": "I want concentric ovals around a point." })).await?;
    let reply = post(
        "message",
        json!({
            "text": "Three ovals, the first one 4 by 2, centered on the point I picked.",
            "updates": [
                { "name": "OvalCount", "value": 3 },
                { "name": "InitialMajorRadius", "value": 4 },
                { "name": "InitialMinorRadius", "value": 2 },
                { "name": "BaseCenter", "ref": shape["id"] }
            ]
        }),
    )
    .await?;
    println!("second message: {}", reply.status());
    post("params", json!({ "name": "OvalCount", "value": 5 })).await?;

    let view: Value = http.get(svc.url(&format!("/sessions/{id}"))).send().await?.json().await?;
    let total = view["last_seq"].as_u64().unwrap_or(0);
    let mut seen = 0;
    let mut buf = String::new();
    while seen < total {
        let Some(chunk) = stream.chunk().await? else { break };
        buf.push_str(std::str::from_utf8(&chunk)?);
        while let Some(end) = buf.find("\n\n") {
            let frame: String = buf.drain(..end + 2).collect();
            let event = frame.lines().find_map(|l| l.strip_prefix("event: ")).unwrap_or("");
            println!("  sse {event}");
            seen += 1;
        }
    }

    let obj = http
        .get(svc.url(&format!("/sessions/{id}/artifact?format=obj")))
        .send()
        .await?
        .text()
        .await?;
    println!("state {}, obj groups: {}", view["state"], obj.lines().filter(|l| l.starts_with("o ")).count());
    svc.shutdown();
    Ok(())
}
