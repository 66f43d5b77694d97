//! Plays a scripted scenario (designer commands plus canned agent replies) through a
//! session and prints the event stream.
//!
//! ```text
//! cargo run --example scripted_session -- fixtures/scenarios/oval.json [--journal out.jsonl]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use parlogue::compilesvc::InProcessCompiler;
use parlogue::pipeline::{EventPayload, Scenario};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "fixtures/scenarios/oval.json".into()));
    let journal = match (args.next().as_deref(), args.next()) {
        (Some("--journal"), Some(out)) => Some(PathBuf::from(out)),
        _ => None,
    };

    let scenario = Scenario::load(&path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    let mut run = scenario.run(id, Arc::new(InProcessCompiler)).await;
    for (i, r) in run.results.iter().enumerate() {
        if let Err(e) = r {
            println!("command {i} rejected: {e}");
        }
    }

    for e in run.session.drain_events() {
        let detail = match &e.payload {
            EventPayload::StateChanged { from, to } => format!("{from:?} -> {to:?}"),
            EventPayload::AgentText { speaker, text, .. } => format!("{speaker:?}: {text}"),
            EventPayload::ArtifactUpdated { digest, .. } => format!("digest {digest}"),
            EventPayload::Error { code, message, .. } => format!("{code} {message}"),
            _ => String::new(),
        };
        println!("{:>3} {:<18} {detail}", e.seq, e.payload.name());
    }
    println!("final state: {:?}", run.session.status());
    println!("counters: {:?}", run.session.counters());

    if let Some(out) = journal {
        std::fs::write(&out, run.session.journal_text())?;
        println!("journal written to {}", out.display());
    }
    Ok(())
}
