use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::session::{Command, PromptSet, Session, SessionConfig, SessionError};
use crate::agents::{ScriptedBackend, ScriptedStep};
use crate::compilesvc::Compiler;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// A scripted session fixture: the designer's commands and the backend replies they
/// provoke, in call order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: SessionConfig,
    pub commands: Vec<Command>,
    pub steps: Vec<ScriptedStep>,
}

/// What running a scenario produced.
pub struct ScenarioRun {
    pub session: Session,
    /// One entry per command, in order.
    pub results: Vec<Result<(), SessionError>>,
    /// Backend steps consumed.
    pub consumed: usize,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ScenarioError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn backend(&self) -> ScriptedBackend {
        ScriptedBackend::new(self.steps.clone())
    }

    /// Runs every command against a fresh session named `id`.
    pub async fn run(&self, id: &str, compiler: Arc<dyn Compiler>) -> ScenarioRun {
        let backend = Arc::new(self.backend());
        let mut session = Session::new(
            id,
            self.config.clone(),
            self.seed,
            backend.clone(),
            compiler,
            Arc::new(PromptSet::builtin()),
        );
        let mut results = Vec::with_capacity(self.commands.len());
        for c in &self.commands {
            results.push(session.apply(c.clone()).await);
        }
        ScenarioRun {
            session,
            results,
            consumed: backend.consumed(),
        }
    }
}
