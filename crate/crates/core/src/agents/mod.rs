//! The three agents: a reasoner that gathers intent and parameters through dialogue, a
//! coder that writes PDL, and an optimizer that reviews and repairs the coder's output.
//!
//! This module owns prompt rendering, strict parsing of agent replies and the backend
//! abstraction. Orchestration lives in [`crate::pipeline`].

mod backend;
mod prompt;
mod protocol;
mod review;

pub use backend::{
    send_with_timeout, BackendError, ChatMessage, Exchange, LiveBackend, LlmBackend, LlmRequest,
    RecordingBackend, Role, ScriptedBackend, ScriptedStep,
};
pub use prompt::{
    parameter_kinds, render_prompt, AgentKind, FinalVariant, PromptContext, PromptError,
    PromptTemplate,
};
pub use protocol::{
    extract_json, parse_ca_output, parse_ra_response, unwrap_user_input, wrap_user_input,
    CaOutput, ChatTurn, ProtocolError, RaResponse, RaType, Speaker,
};
pub use review::{
    parse_candidate, review_message, run_oa_review, static_check, OaStatus, OaVerdict,
    ParsedCandidate, ReviewConfig,
};
