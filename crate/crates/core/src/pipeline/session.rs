use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::artifact::DesignArtifact;
use super::event::{ErrorStage, EventPayload, SessionEvent};
use super::journal::{JournalRecord, SCHEMA_VERSION};
use super::state::{is_legal, SessionStatus};
use crate::agents::{
    parse_ca_output, parse_ra_response, render_prompt, run_oa_review, send_with_timeout, wrap_user_input,
    AgentKind, BackendError, CaOutput, ChatMessage, ChatTurn, FinalVariant, LlmBackend, LlmRequest,
    PromptContext, PromptError, PromptTemplate, ProtocolError, RaType, RecordingBackend, ReviewConfig,
    Role, Speaker,
};
use crate::compilesvc::{CompileRequest, Compiler, UnitKind};
use crate::geometry::{Shape, ShapeId, ShapeRegistry};
use crate::params::{Completeness, ParamError, ParamSet, ParamSpec, ParamUpdate};
use crate::pdl::{self, ast::called_methods, codes, Diagnostic, MethodRegistry, Program, RegistryKey, Span};

/// Per-session settings. Recorded in the journal so replays run with the same ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub final_variant: FinalVariant,
    /// Run the optimizer review between generation and compilation.
    pub validator: bool,
    pub review_rounds: u32,
    /// Re-prompts after a reply that breaks the response protocol.
    pub protocol_retries: u32,
    /// Curve sampling resolution used for tessellation.
    pub resolution: u32,
    pub agent_timeout_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            final_variant: FinalVariant::Strict,
            validator: true,
            review_rounds: 2,
            protocol_retries: 2,
            resolution: 32,
            agent_timeout_ms: 120_000,
        }
    }
}

/// Prompt templates for the three agents.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub reasoner: PromptTemplate,
    pub coder: PromptTemplate,
    pub optimizer: PromptTemplate,
}

impl PromptSet {
    pub fn builtin() -> Self {
        PromptSet {
            reasoner: PromptTemplate::builtin(AgentKind::Reasoner),
            coder: PromptTemplate::builtin(AgentKind::Coder),
            optimizer: PromptTemplate::builtin(AgentKind::Optimizer),
        }
    }

    /// Loads `reasoner.txt`, `coder.txt` and `optimizer.txt` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, PromptError> {
        Ok(PromptSet {
            reasoner: PromptTemplate::load(dir, AgentKind::Reasoner)?,
            coder: PromptTemplate::load(dir, AgentKind::Coder)?,
            optimizer: PromptTemplate::load(dir, AgentKind::Optimizer)?,
        })
    }
}

/// The design intent handed to the coder: the reasoner's final text and the parameters
/// confirmed at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub intent: String,
    pub parameters: Vec<ParamSpec>,
}

/// Everything that can be asked of a session. Accepted commands are journaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Message {
        text: String,
        #[serde(default)]
        updates: Vec<ParamUpdate>,
    },
    UpdateParam {
        update: ParamUpdate,
    },
    Confirm {
        name: String,
        accept: bool,
    },
    AddShape {
        shape: Shape,
    },
    /// Skips the dialogue: generate from a given design and parameter set.
    Design {
        design: DesignSpec,
        params: ParamSet,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub agent_calls: u64,
    /// Successful method registrations.
    pub registrations: u64,
    pub evaluations: u64,
    /// Artifacts produced so far; also the generation number of the current one.
    pub generations: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{op} is not allowed while the session is {state}")]
    IllegalState { op: &'static str, state: SessionStatus },
    #[error("{message}")]
    Rejected {
        code: String,
        message: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("session is no longer running")]
    Closed,
}

impl SessionError {
    fn rejected(d: &Diagnostic) -> Self {
        SessionError::Rejected {
            code: d.code.clone(),
            message: d.message.clone(),
            diagnostics: vec![d.clone()],
        }
    }
}

fn note(code: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic::error(code, message, Span::default())
}

fn param_diag(e: &ParamError) -> Diagnostic {
    note(e.code(), e.to_string())
}

/// Read-only view of a session for observers.
#[derive(Debug, Clone, Serialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub status: SessionStatus,
    pub seed: u64,
    pub params: ParamSet,
    pub proposals: Vec<ParamSpec>,
    pub design: Option<DesignSpec>,
    pub transcript: Vec<ChatTurn>,
    pub methods: Vec<String>,
    pub counters: Counters,
    pub last_seq: u64,
    pub scene: Vec<(ShapeId, Shape)>,
    #[serde(skip)]
    pub artifact: Option<Arc<DesignArtifact>>,
}

/// One design session: a single-writer state machine over dialogue, generation,
/// compilation and live parameter updates.
pub struct Session {
    id: String,
    config: SessionConfig,
    seed: u64,
    status: SessionStatus,
    transcript: Vec<ChatTurn>,
    design: Option<DesignSpec>,
    params: ParamSet,
    proposals: Vec<ParamSpec>,
    methods: MethodRegistry,
    scene: ShapeRegistry,
    artifact: Option<Arc<DesignArtifact>>,
    counters: Counters,
    seq: u64,
    clock: u64,
    next_request: u64,
    journal: Vec<JournalRecord>,
    journal_flushed: usize,
    outbox: Vec<SessionEvent>,
    backend: Arc<dyn LlmBackend>,
    compiler: Arc<dyn Compiler>,
    prompts: Arc<PromptSet>,
}

type StageFailure = (ErrorStage, Vec<Diagnostic>);

impl Session {
    pub fn new(
        id: impl Into<String>,
        config: SessionConfig,
        seed: u64,
        backend: Arc<dyn LlmBackend>,
        compiler: Arc<dyn Compiler>,
        prompts: Arc<PromptSet>,
    ) -> Self {
        let id = id.into();
        let header = JournalRecord::SessionCreated {
            schema_version: SCHEMA_VERSION,
            session: id.clone(),
            seed,
            config: config.clone(),
        };
        Session {
            id,
            config,
            seed,
            status: SessionStatus::Gathering,
            transcript: Vec::new(),
            design: None,
            params: ParamSet::new(),
            proposals: Vec::new(),
            methods: MethodRegistry::new(),
            scene: ShapeRegistry::new(),
            artifact: None,
            counters: Counters::default(),
            seq: 0,
            clock: 0,
            next_request: 0,
            journal: vec![header],
            journal_flushed: 0,
            outbox: Vec::new(),
            backend,
            compiler,
            prompts,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn methods(&self) -> &MethodRegistry {
        &self.methods
    }

    pub fn scene(&self) -> &ShapeRegistry {
        &self.scene
    }

    pub fn artifact(&self) -> Option<&Arc<DesignArtifact>> {
        self.artifact.as_ref()
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn transcript(&self) -> &[ChatTurn] {
        &self.transcript
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            status: self.status,
            seed: self.seed,
            params: self.params.clone(),
            proposals: self.proposals.clone(),
            design: self.design.clone(),
            transcript: self.transcript.clone(),
            methods: self.methods.iter().map(|m| m.def.name.name.clone()).collect(),
            counters: self.counters,
            last_seq: self.seq,
            scene: self.scene.list(),
            artifact: self.artifact.clone(),
        }
    }

    /// Events emitted since the last call.
    pub fn drain_events(&mut self) -> Vec<SessionEvent> {
        std::mem::take(&mut self.outbox)
    }

    /// The whole journal as JSONL.
    pub fn journal_text(&self) -> String {
        self.journal.iter().map(JournalRecord::to_line).collect()
    }

    /// Journal lines added since the last call.
    pub fn drain_journal_lines(&mut self) -> String {
        let out = self.journal[self.journal_flushed..].iter().map(JournalRecord::to_line).collect();
        self.journal_flushed = self.journal.len();
        out
    }

    /// Runs one command.
    pub async fn apply(&mut self, command: Command) -> Result<(), SessionError> {
        match command {
            Command::Message { text, updates } => self.advance(&text, &updates).await,
            Command::UpdateParam { update } => self.update_parameter(&update),
            Command::Confirm { name, accept } => self.confirm(&name, accept),
            Command::AddShape { shape } => self.add_shape(shape).map(|_| ()),
            Command::Design { design, params } => self.start_design(design, params).await,
        }
    }

    fn record(&mut self, record: JournalRecord) {
        self.journal.push(record);
    }

    fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    fn emit(&mut self, payload: EventPayload) {
        self.seq += 1;
        let event = SessionEvent {
            session: self.id.clone(),
            seq: self.seq,
            payload,
        };
        self.record(JournalRecord::Event { event: event.clone() });
        self.outbox.push(event);
    }

    fn emit_error(&mut self, stage: ErrorStage, diagnostics: Vec<Diagnostic>) {
        let first = diagnostics.iter().find(|d| d.is_error()).or(diagnostics.first());
        let (code, message) = first
            .map(|d| (d.code.clone(), d.message.clone()))
            .unwrap_or_else(|| ("E_UNKNOWN".into(), "unknown failure".into()));
        self.emit(EventPayload::Error {
            stage,
            code,
            message,
            diagnostics,
        });
    }

    fn emit_params(&mut self) {
        self.emit(EventPayload::ParamsChanged {
            params: self.params.clone(),
            proposals: self.proposals.clone(),
        });
    }

    fn transition(&mut self, to: SessionStatus) {
        let from = self.status;
        assert!(is_legal(from, to), "illegal transition {from} -> {to}");
        self.status = to;
        self.emit(EventPayload::StateChanged { from, to });
    }

    fn fail(&mut self, (stage, diagnostics): StageFailure) {
        self.emit_error(stage, diagnostics);
        self.transition(SessionStatus::Failed);
    }

    fn turn(&mut self, speaker: Speaker, text: String, payload: Option<serde_json::Value>) {
        let at = self.tick();
        let turn = ChatTurn {
            speaker,
            text,
            payload,
            at,
        };
        self.record(JournalRecord::Turn { turn: turn.clone() });
        self.transcript.push(turn);
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.config.agent_timeout_ms)
    }

    fn render(&self, template: &PromptTemplate) -> Result<String, Diagnostic> {
        render_prompt(
            template,
            &PromptContext {
                params: &self.params,
                registry: &self.methods,
                final_variant: self.config.final_variant,
            },
        )
        .map_err(|e| note(codes::PROTOCOL, e.to_string()))
    }

    async fn call(&mut self, agent: AgentKind, system: &str, messages: Vec<ChatMessage>) -> Result<String, BackendError> {
        self.counters.agent_calls += 1;
        let request = LlmRequest {
            agent,
            system: system.to_string(),
            messages,
        };
        let backend = self.backend.clone();
        let out = send_with_timeout(backend.as_ref(), &request, self.timeout()).await;
        self.record(JournalRecord::Exchange {
            agent,
            message: request.last_message().to_string(),
            response: out.as_ref().ok().cloned(),
            error: out.as_ref().err().cloned(),
        });
        out
    }

    /// Calls `agent` and parses its reply, re-prompting with a corrective note after a
    /// protocol violation.
    async fn ask<T>(
        &mut self,
        agent: AgentKind,
        system: &str,
        mut messages: Vec<ChatMessage>,
        parse: fn(&str) -> Result<T, ProtocolError>,
    ) -> Result<T, Diagnostic> {
        let mut attempt = 0;
        loop {
            let raw = self
                .call(agent, system, messages.clone())
                .await
                .map_err(|e| note(codes::TRANSPORT, e.to_string()))?;
            match parse(&raw) {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.config.protocol_retries => {
                    attempt += 1;
                    messages.push(ChatMessage::new(Role::Assistant, raw));
                    messages.push(ChatMessage::new(
                        Role::User,
                        format!(
                            "<system>Your previous reply was rejected: {e}. Reply again with exactly one JSON object in the required format.</system>"
                        ),
                    ));
                }
                Err(e) => {
                    return Err(note(
                        codes::PROTOCOL,
                        format!("{} reply rejected after {} attempts: {e}", agent.name(), attempt + 1),
                    ))
                }
            }
        }
    }

    fn reasoner_history(&self) -> Vec<ChatMessage> {
        self.transcript
            .iter()
            .map(|t| match t.speaker {
                Speaker::User => {
                    let updates: Vec<ParamUpdate> = t
                        .payload
                        .as_ref()
                        .and_then(|p| serde_json::from_value(p.clone()).ok())
                        .unwrap_or_default();
                    ChatMessage::new(Role::User, wrap_user_input(&t.text, &updates))
                }
                Speaker::Reasoner => {
                    let raw = t.payload.as_ref().map(|p| p.to_string()).unwrap_or_else(|| t.text.clone());
                    ChatMessage::new(Role::Assistant, raw)
                }
                Speaker::System => ChatMessage::new(Role::User, format!("<system>{}</system>", t.text)),
            })
            .collect()
    }

    /// Handles a designer message: applies their direct parameter edits, consults the
    /// reasoner and, on a final answer with every parameter confirmed, generates.
    pub async fn advance(&mut self, text: &str, updates: &[ParamUpdate]) -> Result<(), SessionError> {
        if !self.status.accepts_messages() {
            return Err(SessionError::IllegalState {
                op: "message",
                state: self.status,
            });
        }
        self.record(JournalRecord::Command {
            command: Command::Message {
                text: text.to_string(),
                updates: updates.to_vec(),
            },
        });
        if self.status == SessionStatus::Failed {
            self.transition(SessionStatus::Gathering);
        }

        let mut changed = false;
        for u in updates {
            match self.params.apply_update(u, &self.scene) {
                Ok(()) => changed = true,
                Err(e) => self.emit_error(ErrorStage::Params, vec![param_diag(&e)]),
            }
        }
        let payload = (!updates.is_empty()).then(|| json!(updates));
        self.turn(Speaker::User, text.to_string(), payload);
        if changed {
            self.emit_params();
        }

        let system = match self.render(&self.prompts.reasoner.clone()) {
            Ok(s) => s,
            Err(d) => {
                self.emit_error(ErrorStage::Dialogue, vec![d]);
                return Ok(());
            }
        };
        let history = self.reasoner_history();
        let response = match self.ask(AgentKind::Reasoner, &system, history, parse_ra_response).await {
            Ok(r) => r,
            Err(d) => {
                self.emit_error(ErrorStage::Dialogue, vec![d]);
                return Ok(());
            }
        };
        self.record(JournalRecord::RaResponse {
            response: response.clone(),
        });
        self.turn(Speaker::Reasoner, response.text.clone(), Some(json!(response)));
        self.emit(EventPayload::AgentText {
            speaker: Speaker::Reasoner,
            kind: Some(response.kind),
            text: response.text.clone(),
        });
        if self.merge_params(&response.parameters) {
            self.emit_params();
        }

        if response.kind == RaType::Final {
            match self.params.validate_complete() {
                Completeness::Missing(names) => {
                    let text = format!("Generation is waiting for parameters: {}", names.join(", "));
                    self.turn(Speaker::System, text.clone(), None);
                    self.emit(EventPayload::AgentText {
                        speaker: Speaker::System,
                        kind: None,
                        text,
                    });
                }
                Completeness::Confirmed => {
                    let design = DesignSpec {
                        intent: response.text.clone(),
                        parameters: self.params.specs().to_vec(),
                    };
                    self.record(JournalRecord::Design { design: design.clone() });
                    self.design = Some(design);
                    self.generate().await;
                }
            }
        }
        Ok(())
    }

    /// Folds the reasoner's parameter list into the session. New names are declared,
    /// pending ones replaced; a differing spec for a confirmed parameter becomes a
    /// proposal that waits for the designer.
    fn merge_params(&mut self, specs: &[ParamSpec]) -> bool {
        let mut changed = false;
        for spec in specs {
            let result = match self.params.get(&spec.name).cloned() {
                None => self.params.declare(spec.clone()).map(|_| true),
                Some(existing) if !existing.is_confirmed() => self
                    .params
                    .replace(spec.clone())
                    .map(|_| self.params.get(&spec.name) != Some(&existing)),
                Some(existing) => {
                    let agrees = existing.kind == spec.kind
                        && existing.range == spec.range
                        && spec.value.as_ref().is_none_or(|v| existing.value.as_ref() == Some(v))
                        && spec.reference.is_none_or(|r| existing.reference == Some(r));
                    if agrees {
                        Ok(false)
                    } else {
                        let mut scratch = ParamSet::new();
                        scratch.declare(spec.clone()).map(|_| {
                            let normalized = scratch.specs()[0].clone();
                            let fresh = !self.proposals.contains(&normalized);
                            self.proposals.retain(|p| p.name != spec.name);
                            self.proposals.push(normalized);
                            fresh
                        })
                    }
                }
            };
            match result {
                Ok(c) => changed |= c,
                Err(e) => self.emit_error(ErrorStage::Params, vec![param_diag(&e)]),
            }
        }
        changed
    }

    /// Generates from an explicit design, bypassing the dialogue.
    pub async fn start_design(&mut self, design: DesignSpec, params: ParamSet) -> Result<(), SessionError> {
        if !self.status.accepts_messages() {
            return Err(SessionError::IllegalState {
                op: "design",
                state: self.status,
            });
        }
        if let Err(e) = params.validate() {
            return Err(SessionError::rejected(&param_diag(&e)));
        }
        if let Completeness::Missing(names) = params.validate_complete() {
            return Err(SessionError::rejected(&note(
                codes::PARAM_PENDING,
                format!("parameters not confirmed: {}", names.join(", ")),
            )));
        }
        self.record(JournalRecord::Command {
            command: Command::Design {
                design: design.clone(),
                params: params.clone(),
            },
        });
        if self.status == SessionStatus::Failed {
            self.transition(SessionStatus::Gathering);
        }
        self.params = params;
        self.emit_params();
        self.record(JournalRecord::Design { design: design.clone() });
        self.design = Some(design);
        self.generate().await;
        Ok(())
    }

    fn coder_message(&self, design: &DesignSpec) -> String {
        format!(
            "<design>\n{}\n</design>\n<parameters>\n{}\n</parameters>",
            design.intent,
            serde_json::to_string_pretty(self.params.specs()).expect("params serialize")
        )
    }

    /// Generation, review and two-phase compilation. Ends Live with a new artifact or
    /// Failed with the previous artifact untouched.
    async fn generate(&mut self) {
        self.transition(SessionStatus::Generating);
        let design = self.design.clone().expect("generation needs a design");
        let system = match self.render(&self.prompts.coder.clone()) {
            Ok(s) => s,
            Err(d) => return self.fail((ErrorStage::Generation, vec![d])),
        };
        let message = vec![ChatMessage::new(Role::User, self.coder_message(&design))];
        let output = match self.ask(AgentKind::Coder, &system, message, parse_ca_output).await {
            Ok(o) => o,
            Err(d) => return self.fail((ErrorStage::Generation, vec![d])),
        };
        self.record(JournalRecord::CaOutput { output: output.clone() });

        let candidate = if self.config.validator {
            self.transition(SessionStatus::Reviewing);
            match self.review(&output).await {
                Ok(c) => c,
                Err(f) => return self.fail(f),
            }
        } else {
            output
        };

        self.transition(SessionStatus::Compiling);
        let (program, registry, keys) = match self.compile(&candidate).await {
            Ok(v) => v,
            Err(f) => return self.fail(f),
        };
        let artifact = match self.evaluate(program, keys, &registry, self.params.clone()) {
            Ok(a) => a,
            Err(d) => return self.fail((ErrorStage::Runtime, vec![d])),
        };
        self.methods = registry;
        self.install(artifact);
        self.transition(SessionStatus::Live);
        self.announce_artifact();
    }

    async fn review(&mut self, output: &CaOutput) -> Result<CaOutput, StageFailure> {
        let config = ReviewConfig {
            max_rounds: self.config.review_rounds.max(1),
            timeout: self.timeout(),
            template: self.prompts.optimizer.clone(),
        };
        let backend = self.backend.clone();
        let recorder = RecordingBackend::new(backend.as_ref());
        let verdict = run_oa_review(output, &self.methods, &self.params, &recorder, &config).await;
        for ex in recorder.take() {
            self.counters.agent_calls += 1;
            let (response, error) = match ex.response {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e)),
            };
            self.record(JournalRecord::Exchange {
                agent: ex.agent,
                message: ex.message,
                response,
                error,
            });
        }
        self.record(JournalRecord::OaVerdict {
            verdict: verdict.clone(),
        });
        match verdict.accepted(output) {
            Some(c) => Ok(c.clone()),
            None => Err((ErrorStage::Review, verdict.diagnostics)),
        }
    }

    fn request_id(&mut self) -> u64 {
        self.next_request += 1;
        self.next_request
    }

    fn callee_keys(registry: &MethodRegistry, block: &pdl::ast::Block) -> Vec<RegistryKey> {
        let mut keys: Vec<RegistryKey> = called_methods(block)
            .iter()
            .filter_map(|c| registry.get(&c.name).map(|m| m.key.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Phase one registers the new methods into a copy of the registry, callees first;
    /// phase two compiles the logic against it and checks it against the session
    /// parameters.
    async fn compile(&mut self, candidate: &CaOutput) -> Result<(Program, MethodRegistry, Vec<RegistryKey>), StageFailure> {
        let method_fail = |d: Vec<Diagnostic>| (ErrorStage::MethodCompile, d);
        let logic_fail = |d: Vec<Diagnostic>| (ErrorStage::LogicCompile, d);

        let mut units = Vec::new();
        for src in &candidate.method_new {
            let def = pdl::parse_method(src).map_err(method_fail)?;
            units.push((src.clone(), def));
        }
        let mut scratch = self.methods.clone();
        let mut pending = units;
        while !pending.is_empty() {
            let names: Vec<String> = pending.iter().map(|(_, d)| d.name.name.clone()).collect();
            // Callees first; a cycle is left in order and rejected by registration.
            let idx = pending
                .iter()
                .position(|(_, d)| {
                    called_methods(&d.body)
                        .iter()
                        .all(|c| c.name == d.name.name || !names.contains(&c.name))
                })
                .unwrap_or(0);
            let (source, def) = pending.remove(idx);
            let request = CompileRequest {
                id: self.request_id(),
                kind: UnitKind::Method,
                source,
                deps: Self::callee_keys(&scratch, &def.body),
            };
            let response = self.compiler.compile(&request, &scratch).await;
            if !response.is_ok() {
                return Err(method_fail(response.diagnostics));
            }
            let keys = scratch.register_methods(std::slice::from_ref(&def)).map_err(method_fail)?;
            if response.key.as_ref() != Some(&keys[0]) {
                return Err(method_fail(vec![note(
                    codes::PROTOCOL,
                    format!("compiler returned a different key for `{}`", def.name.name),
                )]));
            }
            self.counters.registrations += 1;
        }

        let program = pdl::parse(&candidate.logic).map_err(logic_fail)?;
        if let Some(m) = program.methods.first() {
            return Err(logic_fail(vec![Diagnostic::error(
                codes::SYNTAX,
                format!("method `{}` must be listed in Method_New, not in Logic", m.name.name),
                m.name.span,
            )]));
        }
        let keys = Self::callee_keys(&scratch, &program.logic);
        let request = CompileRequest {
            id: self.request_id(),
            kind: UnitKind::Logic,
            source: candidate.logic.clone(),
            deps: keys.clone(),
        };
        let response = self.compiler.compile(&request, &scratch).await;
        if !response.is_ok() {
            return Err(logic_fail(response.diagnostics));
        }
        let mut diags: Vec<Diagnostic> = candidate
            .dependency
            .iter()
            .filter(|name| scratch.get(name).is_none())
            .map(|name| note(codes::UNKNOWN_DEPENDENCY, format!("dependency `{name}` is neither new nor registered")))
            .collect();
        diags.extend(
            pdl::check(&program, &scratch, &self.params)
                .into_iter()
                .filter(Diagnostic::is_error),
        );
        if !diags.is_empty() {
            return Err(logic_fail(diags));
        }
        Ok((program, scratch, keys))
    }

    fn evaluate(
        &mut self,
        program: Program,
        keys: Vec<RegistryKey>,
        registry: &MethodRegistry,
        params: ParamSet,
    ) -> Result<DesignArtifact, Diagnostic> {
        self.counters.evaluations += 1;
        let eval = pdl::evaluate_in(&program, &params, registry, &self.scene, self.seed)?;
        DesignArtifact::build(
            self.counters.generations + 1,
            program,
            keys,
            params,
            eval,
            self.seed,
            self.config.resolution,
        )
        .map_err(|e| note(codes::RUNTIME_DOMAIN, e.to_string()))
    }

    fn install(&mut self, artifact: DesignArtifact) {
        self.counters.generations = artifact.generation;
        self.artifact = Some(Arc::new(artifact));
    }

    fn announce_artifact(&mut self) {
        let a = self.artifact.clone().expect("artifact installed");
        self.emit(EventPayload::ArtifactUpdated {
            generation: a.generation,
            digest: a.digest.clone(),
            shapes: a.meshes.len(),
        });
    }

    /// Re-evaluates the live program with `params`. On failure nothing changes.
    fn refresh(&mut self, params: ParamSet) -> Result<(), SessionError> {
        let current = self.artifact.clone().expect("live sessions have an artifact");
        let registry = self.methods.clone();
        match self.evaluate(current.program.clone(), current.keys.clone(), &registry, params.clone()) {
            Ok(artifact) => {
                self.params = params;
                self.install(artifact);
                self.emit_params();
                self.announce_artifact();
                Ok(())
            }
            Err(d) => {
                self.emit_error(ErrorStage::Runtime, vec![d.clone()]);
                Err(SessionError::rejected(&d))
            }
        }
    }

    /// Binds one parameter and re-runs the existing program. No agent is called and no
    /// method is registered.
    pub fn update_parameter(&mut self, update: &ParamUpdate) -> Result<(), SessionError> {
        if self.status != SessionStatus::Live {
            return Err(SessionError::IllegalState {
                op: "parameter update",
                state: self.status,
            });
        }
        self.record(JournalRecord::Command {
            command: Command::UpdateParam { update: update.clone() },
        });
        let mut next = self.params.clone();
        if let Err(e) = next.apply_update(update, &self.scene) {
            let d = param_diag(&e);
            self.emit_error(ErrorStage::Params, vec![d.clone()]);
            return Err(SessionError::rejected(&d));
        }
        self.refresh(next)
    }

    /// Accepts or rejects a pending proposal for `name`.
    pub fn confirm(&mut self, name: &str, accept: bool) -> Result<(), SessionError> {
        let Some(idx) = self.proposals.iter().position(|p| p.name == name) else {
            return Err(SessionError::rejected(&note(
                "E_NO_PROPOSAL",
                format!("no pending proposal for `{name}`"),
            )));
        };
        self.record(JournalRecord::Command {
            command: Command::Confirm {
                name: name.to_string(),
                accept,
            },
        });
        let proposal = self.proposals.remove(idx);
        if !accept {
            self.emit_params();
            return Ok(());
        }
        let mut next = self.params.clone();
        if let Err(e) = next.replace(proposal) {
            let d = param_diag(&e);
            self.emit_error(ErrorStage::Params, vec![d.clone()]);
            return Err(SessionError::rejected(&d));
        }
        if self.status == SessionStatus::Live {
            self.refresh(next)
        } else {
            self.params = next;
            self.emit_params();
            Ok(())
        }
    }

    /// Adds a shape to the scene that reference parameters can point at.
    pub fn add_shape(&mut self, shape: Shape) -> Result<ShapeId, SessionError> {
        if let Err(e) = shape.validate() {
            return Err(SessionError::rejected(&note("E_INVALID_SHAPE", e.to_string())));
        }
        self.record(JournalRecord::Command {
            command: Command::AddShape { shape: shape.clone() },
        });
        self.scene
            .add(shape)
            .map_err(|e| SessionError::rejected(&note("E_INVALID_SHAPE", e.to_string())))
    }
}
