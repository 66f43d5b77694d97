use serde::{Deserialize, Serialize};

use super::SessionStatus;
use crate::agents::{RaType, Speaker};
use crate::params::{ParamSet, ParamSpec};
use crate::pdl::Diagnostic;

/// Where in the session a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorStage {
    Dialogue,
    Params,
    Generation,
    Review,
    MethodCompile,
    LogicCompile,
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    AgentText {
        speaker: Speaker,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kind: Option<RaType>,
        text: String,
    },
    ParamsChanged {
        params: ParamSet,
        /// Agent revisions of confirmed parameters that wait for the designer.
        proposals: Vec<ParamSpec>,
    },
    StateChanged {
        from: SessionStatus,
        to: SessionStatus,
    },
    ArtifactUpdated {
        generation: u64,
        digest: String,
        shapes: usize,
    },
    Error {
        stage: ErrorStage,
        code: String,
        message: String,
        diagnostics: Vec<Diagnostic>,
    },
}

impl EventPayload {
    pub fn name(&self) -> &'static str {
        match self {
            EventPayload::AgentText { .. } => "agent_text",
            EventPayload::ParamsChanged { .. } => "params_changed",
            EventPayload::StateChanged { .. } => "state_changed",
            EventPayload::ArtifactUpdated { .. } => "artifact_updated",
            EventPayload::Error { .. } => "error",
        }
    }
}

/// An event with its session id and per-session sequence number (starting at 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub session: String,
    pub seq: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_form_is_flat() {
        let e = SessionEvent {
            session: "s1".into(),
            seq: 4,
            payload: EventPayload::StateChanged {
                from: SessionStatus::Compiling,
                to: SessionStatus::Live,
            },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"session":"s1","seq":4,"type":"state_changed","from":"compiling","to":"live"}"#);
        assert_eq!(serde_json::from_str::<SessionEvent>(&json).unwrap(), e);
    }
}
