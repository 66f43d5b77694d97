//! Session orchestration: dialogue with the reasoner, generation, review, two-phase
//! compilation and live parameter updates, with an event stream and a replayable
//! journal.

mod actor;
mod artifact;
mod event;
mod journal;
mod scenario;
mod session;
mod state;

pub use actor::SessionHandle;
pub use artifact::DesignArtifact;
pub use event::{ErrorStage, EventPayload, SessionEvent};
pub use journal::{
    final_digest, journal_events, parse_journal, replay, replay_session, scripted_backend, JournalError, JournalRecord,
    ReplayReport, SCHEMA_VERSION,
};
pub use scenario::{Scenario, ScenarioError, ScenarioRun};
pub use session::{
    Command, Counters, DesignSpec, PromptSet, Session, SessionConfig, SessionError, SessionSnapshot,
};
pub use state::{is_legal, SessionStatus};
