//! Session journals: one JSON record per line. The first line is always the
//! `session_created` record carrying `schema_version`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::event::{EventPayload, SessionEvent};
use super::session::{Command, DesignSpec, PromptSet, Session, SessionConfig};
use crate::agents::{
    AgentKind, BackendError, CaOutput, ChatTurn, OaVerdict, RaResponse, ScriptedBackend, ScriptedStep,
};
use crate::compilesvc::Compiler;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum JournalRecord {
    SessionCreated {
        schema_version: u32,
        session: String,
        seed: u64,
        config: SessionConfig,
    },
    Command {
        command: Command,
    },
    /// One backend call: the last message sent and the raw reply or error.
    Exchange {
        agent: AgentKind,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        response: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<BackendError>,
    },
    Turn {
        turn: ChatTurn,
    },
    RaResponse {
        response: RaResponse,
    },
    Design {
        design: DesignSpec,
    },
    CaOutput {
        output: CaOutput,
    },
    OaVerdict {
        verdict: OaVerdict,
    },
    Event {
        event: SessionEvent,
    },
}

impl JournalRecord {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("journal record serializes");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JournalError {
    #[error("journal is corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("unsupported journal schema version {0}")]
    UnsupportedVersion(u32),
}

/// Parses a journal. Every line, including the last, must end with a newline.
pub fn parse_journal(text: &str) -> Result<Vec<JournalRecord>, JournalError> {
    let corrupt = |line: usize, reason: String| JournalError::Corrupt { line, reason };
    if text.is_empty() {
        return Err(corrupt(1, "journal is empty".into()));
    }
    if !text.ends_with('\n') {
        return Err(corrupt(text.lines().count(), "last record is not terminated".into()));
    }
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let record: JournalRecord = serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        records.push(record);
    }
    match records.first() {
        Some(JournalRecord::SessionCreated { schema_version, .. }) => {
            if *schema_version != SCHEMA_VERSION {
                return Err(JournalError::UnsupportedVersion(*schema_version));
            }
        }
        _ => return Err(corrupt(1, "first record must be session_created".into())),
    }
    if records[1..].iter().any(|r| matches!(r, JournalRecord::SessionCreated { .. })) {
        return Err(corrupt(1, "more than one session_created record".into()));
    }
    Ok(records)
}

/// The events of a journal, in order.
pub fn journal_events(records: &[JournalRecord]) -> Vec<SessionEvent> {
    records
        .iter()
        .filter_map(|r| match r {
            JournalRecord::Event { event } => Some(event.clone()),
            _ => None,
        })
        .collect()
}

/// Digest of the last artifact announced in `events`.
pub fn final_digest(events: &[SessionEvent]) -> Option<String> {
    events.iter().rev().find_map(|e| match &e.payload {
        EventPayload::ArtifactUpdated { digest, .. } => Some(digest.clone()),
        _ => None,
    })
}

/// A scripted backend that answers exactly as the journaled backend did.
pub fn scripted_backend(records: &[JournalRecord]) -> ScriptedBackend {
    ScriptedBackend::new(
        records
            .iter()
            .filter_map(|r| match r {
                JournalRecord::Exchange {
                    agent,
                    message,
                    response,
                    error,
                } => Some(ScriptedStep {
                    agent: Some(*agent),
                    pattern: message.clone(),
                    response: response.clone().unwrap_or_default(),
                    error: error.clone(),
                }),
                _ => None,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub recorded_digest: Option<String>,
    pub replayed_digest: Option<String>,
    pub recorded_events: usize,
    pub replayed_events: usize,
    /// Index of the first event that differs, if any.
    pub divergence: Option<usize>,
}

impl ReplayReport {
    pub fn matches(&self) -> bool {
        self.divergence.is_none() && self.recorded_digest == self.replayed_digest
    }
}

fn normalized(events: &[SessionEvent]) -> Vec<Value> {
    // Round-trip through text so both sides see identical float parsing.
    events
        .iter()
        .map(|e| serde_json::from_str(&serde_json::to_string(e).expect("event serializes")).expect("event reparses"))
        .collect()
}

/// Re-executes a journaled session against a backend built from its recorded exchanges
/// and compares the resulting event stream and final digest with the recorded ones.
pub async fn replay(text: &str, compiler: Arc<dyn Compiler>) -> Result<ReplayReport, JournalError> {
    replay_session(text, compiler).await.map(|(_, report)| report)
}

/// Like [`replay`], also returning the re-executed session.
pub async fn replay_session(text: &str, compiler: Arc<dyn Compiler>) -> Result<(Session, ReplayReport), JournalError> {
    let records = parse_journal(text)?;
    let JournalRecord::SessionCreated { session, seed, config, .. } = &records[0] else {
        unreachable!("parse_journal checks the header");
    };
    let backend = Arc::new(scripted_backend(&records));
    let mut s = Session::new(session.clone(), config.clone(), *seed, backend, compiler, Arc::new(PromptSet::builtin()));
    for r in &records {
        if let JournalRecord::Command { command } = r {
            let _ = s.apply(command.clone()).await;
        }
    }
    let recorded = journal_events(&records);
    let replayed = s.drain_events();
    let (a, b) = (normalized(&recorded), normalized(&replayed));
    let divergence = (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i));
    let report = ReplayReport {
        recorded_digest: final_digest(&recorded),
        replayed_digest: final_digest(&replayed),
        recorded_events: recorded.len(),
        replayed_events: replayed.len(),
        divergence,
    };
    Ok((s, report))
}
