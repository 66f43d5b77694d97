//! Re-executes a session journal and checks that it reproduces the recorded artifact.
//!
//! ```text
//! cargo run --example replay_journal -- fixtures/journals/skyscraper.jsonl
//! ```

use std::sync::Arc;

use parlogue::compilesvc::InProcessCompiler;
use parlogue::pipeline::{parse_journal, replay_session, JournalRecord};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures/journals/skyscraper.jsonl".into());
    let text = std::fs::read_to_string(&path)?;

    let records = parse_journal(&text)?;
    let commands = records.iter().filter(|r| matches!(r, JournalRecord::Command { .. })).count();
    println!("{path}: {} records, {commands} commands", records.len());

    let (session, report) = replay_session(&text, Arc::new(InProcessCompiler)).await?;
    println!("recorded {:?}", report.recorded_digest);
    println!("replayed {:?}", report.replayed_digest);
    println!("state {:?}, match: {}", session.status(), report.matches());
    if let Some(seq) = report.divergence {
        println!("first divergent event index: {seq}");
    }
    Ok(())
}
