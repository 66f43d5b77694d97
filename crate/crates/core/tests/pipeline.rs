use std::path::PathBuf;
use std::sync::Arc;

use parlogue::agents::Speaker;
use parlogue::compilesvc::{Compiler, InProcessCompiler};
use parlogue::geometry::{Shape, ShapeId};
use parlogue::params::{ParamStatus, ParamUpdate};
use parlogue::pipeline::{
    is_legal, parse_journal, replay, Command, ErrorStage, EventPayload, JournalRecord, Scenario, ScenarioRun,
    SessionError, SessionEvent, SessionHandle, SessionStatus,
};

fn fixture(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(format!("{name}.json"));
    Scenario::load(&path).unwrap()
}

fn compiler() -> Arc<dyn Compiler> {
    Arc::new(InProcessCompiler)
}

async fn run(name: &str) -> ScenarioRun {
    fixture(name).run(name, compiler()).await
}

fn transitions(events: &[SessionEvent]) -> Vec<(SessionStatus, SessionStatus)> {
    events
        .iter()
        .filter_map(|e| match e.payload {
            EventPayload::StateChanged { from, to } => Some((from, to)),
            _ => None,
        })
        .collect()
}

fn ellipse_radii(shape: &Shape) -> (f64, f64) {
    match shape {
        Shape::Ellipse {
            major_radius,
            minor_radius,
            ..
        } => (*major_radius, *minor_radius),
        other => panic!("expected an ellipse, got {other:?}"),
    }
}

#[tokio::test]
async fn oval_dialogue_reaches_live() {
    let mut r = run("oval").await;
    assert!(r.results.iter().all(Result::is_ok), "{:?}", r.results);
    assert_eq!(r.consumed, 3);
    let s = &mut r.session;
    assert_eq!(s.status(), SessionStatus::Live);

    let events = s.drain_events();
    let first_question = events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::AgentText { kind: Some(k), text, .. } => Some((*k, text.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(first_question.0, parlogue::agents::RaType::Question);
    assert!(first_question.1.contains("How many ovals"));

    use SessionStatus::*;
    assert_eq!(
        transitions(&events),
        vec![(Gathering, Generating), (Generating, Reviewing), (Reviewing, Compiling), (Compiling, Live)]
    );
    for w in events.windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1);
    }

    let a = s.artifact().unwrap();
    assert_eq!(a.meshes.len(), 3);
    // Independent oracle: ring i has radii (4 + 0.5 i, 2 + 0.5 i) around the picked point.
    for (i, shape) in a.eval.shapes.iter().enumerate() {
        let (maj, min) = ellipse_radii(shape);
        assert!((maj - (4.0 + 0.5 * i as f64)).abs() < 1e-9);
        assert!((min - (2.0 + 0.5 * i as f64)).abs() < 1e-9);
        let Shape::Ellipse { center, .. } = shape else { unreachable!() };
        assert_eq!([center.x, center.y, center.z], [2.0, 3.0, 0.0]);
    }
    let last = events.last().unwrap();
    assert!(matches!(&last.payload, EventPayload::ArtifactUpdated { digest, shapes: 3, .. } if *digest == a.digest));
    assert_eq!(s.counters().registrations, 1);
    assert_eq!(s.counters().agent_calls, 3);
}

#[tokio::test]
async fn first_message_declares_pending_parameters() {
    let mut scenario = fixture("oval");
    scenario.commands.truncate(2);
    let r = scenario.run("q", compiler()).await;
    let s = &r.session;
    assert_eq!(s.status(), SessionStatus::Gathering);
    assert_eq!(s.params().len(), 4);
    assert!(s.params().specs().iter().all(|p| p.status == ParamStatus::Pending));
    assert_eq!(s.transcript().len(), 2);
    assert_eq!(s.transcript()[1].speaker, Speaker::Reasoner);
}

#[tokio::test]
async fn final_answer_waits_for_pending_parameters() {
    let mut scenario = fixture("oval");
    // Drop the BaseCenter binding from the second message.
    if let Command::Message { updates, .. } = &mut scenario.commands[2] {
        updates.retain(|u| u.name != "BaseCenter");
    }
    scenario.steps.truncate(2);
    let mut r = scenario.run("pending", compiler()).await;
    let s = &mut r.session;
    assert_eq!(s.status(), SessionStatus::Gathering);
    let events = s.drain_events();
    let note = events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::AgentText {
                speaker: Speaker::System,
                text,
                ..
            } => Some(text.clone()),
            _ => None,
        })
        .unwrap();
    assert!(note.contains("BaseCenter"), "{note}");
    assert!(transitions(&events).is_empty());
}

#[tokio::test]
async fn unregistered_method_fails_at_logic_compile() {
    let mut r = run("linking_failure").await;
    let s = &mut r.session;
    assert_eq!(s.status(), SessionStatus::Failed);
    assert!(s.artifact().is_none());
    assert!(s.methods().is_empty());
    let events = s.drain_events();
    let (stage, code) = events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::Error { stage, code, .. } => Some((*stage, code.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(stage, ErrorStage::LogicCompile);
    assert_eq!(code, "E_UNREGISTERED_METHOD");
    use SessionStatus::*;
    assert_eq!(transitions(&events), vec![(Gathering, Generating), (Generating, Compiling), (Compiling, Failed)]);
    // The failing diagnostics are in the journal.
    assert!(s.journal_text().contains("E_UNREGISTERED_METHOD"));
}

#[tokio::test]
async fn failed_generation_keeps_the_previous_artifact() {
    let mut scenario = fixture("oval");
    let broken = fixture("linking_failure").steps[2].clone();
    scenario.commands.push(Command::Message {
        text: "Now make the rings grow faster.".into(),
        updates: vec![],
    });
    scenario.steps.push(parlogue::agents::ScriptedStep {
        agent: Some(parlogue::agents::AgentKind::Reasoner),
        pattern: "grow faster".into(),
        response: scenario.steps[1].response.clone(),
        error: None,
    });
    scenario.steps.push(broken);
    scenario.config.validator = false;
    let mut r = scenario.run("retain", compiler()).await;
    let s = &mut r.session;
    assert_eq!(s.status(), SessionStatus::Failed);
    let a = s.artifact().unwrap();
    assert_eq!(a.generation, 1);
    assert_eq!(a.meshes.len(), 3);
    let events = s.drain_events();
    let updates = events
        .iter()
        .filter(|e| matches!(e.payload, EventPayload::ArtifactUpdated { .. }))
        .count();
    assert_eq!(updates, 1);
    assert_eq!(s.methods().len(), 1);
}

#[tokio::test]
async fn live_update_evaluates_once_without_agents() {
    let mut r = run("oval").await;
    let s = &mut r.session;
    s.drain_events();
    let before = s.counters();
    s.update_parameter(&ParamUpdate::number("OvalCount", 5.0)).unwrap();
    let after = s.counters();
    assert_eq!(after.evaluations - before.evaluations, 1);
    assert_eq!(after.agent_calls, before.agent_calls);
    assert_eq!(after.registrations, before.registrations);
    assert_eq!(s.status(), SessionStatus::Live);
    assert_eq!(s.artifact().unwrap().meshes.len(), 5);
    let events = s.drain_events();
    let names: Vec<_> = events.iter().map(|e| e.payload.name()).collect();
    assert_eq!(names, ["params_changed", "artifact_updated"]);
}

#[tokio::test]
async fn rejected_update_leaves_the_artifact() {
    let mut r = run("oval").await;
    let s = &mut r.session;
    s.drain_events();
    let generation = s.artifact().unwrap().generation;
    let err = s.update_parameter(&ParamUpdate::number("OvalCount", 0.0)).unwrap_err();
    assert!(matches!(err, SessionError::Rejected { ref code, .. } if code == "E_OUT_OF_RANGE"));
    assert_eq!(s.artifact().unwrap().generation, generation);
    let events = s.drain_events();
    assert_eq!(events.len(), 1);
    assert!(matches!(events[0].payload, EventPayload::Error { stage: ErrorStage::Params, .. }));
}

#[tokio::test]
async fn moving_the_center_point_recenters_the_rings() {
    let mut r = run("oval").await;
    let s = &mut r.session;
    let before: Vec<_> = s.artifact().unwrap().meshes.iter().map(centroid).collect();
    let moved = s.add_shape(Shape::point([5.0, -1.0, 2.0].into()).unwrap()).unwrap();
    assert_eq!(moved, ShapeId(2));
    s.update_parameter(&ParamUpdate::reference("BaseCenter", moved)).unwrap();
    let after: Vec<_> = s.artifact().unwrap().meshes.iter().map(centroid).collect();
    // The point moved by (3, -4, 2).
    for (b, a) in before.iter().zip(&after) {
        assert!((a[0] - b[0] - 3.0).abs() < 1e-9);
        assert!((a[1] - b[1] + 4.0).abs() < 1e-9);
        assert!((a[2] - b[2] - 2.0).abs() < 1e-9);
    }
}

fn centroid(m: &parlogue::geometry::TriMesh) -> [f64; 3] {
    let n = m.vertices.len() as f64;
    let mut c = [0.0; 3];
    for v in &m.vertices {
        c[0] += v.x / n;
        c[1] += v.y / n;
        c[2] += v.z / n;
    }
    c
}

#[tokio::test]
async fn update_while_gathering_is_illegal() {
    let mut scenario = fixture("oval");
    scenario.commands.truncate(1);
    let mut r = scenario.run("gate", compiler()).await;
    let err = r
        .session
        .update_parameter(&ParamUpdate::number("OvalCount", 2.0))
        .unwrap_err();
    assert!(matches!(err, SessionError::IllegalState { state: SessionStatus::Gathering, .. }));
}

#[tokio::test]
async fn optimizer_repairs_the_skyscraper() {
    let mut r = run("skyscraper").await;
    let s = &mut r.session;
    assert_eq!(r.consumed, 4);
    assert_eq!(s.status(), SessionStatus::Live);
    assert_eq!(s.artifact().unwrap().meshes.len(), 20);
    let journal = parse_journal(&s.journal_text()).unwrap();
    assert!(journal.iter().any(|r| matches!(r, JournalRecord::OaVerdict { verdict } if verdict.rounds == 1)));
}

#[tokio::test]
async fn fresh_journal_has_only_the_header() {
    let scenario = Scenario {
        commands: vec![],
        ..fixture("oval")
    };
    let r = scenario.run("empty", compiler()).await;
    let records = parse_journal(&r.session.journal_text()).unwrap();
    assert_eq!(records.len(), 1);
    assert!(matches!(records[0], JournalRecord::SessionCreated { schema_version: 1, .. }));
}

#[tokio::test]
async fn journals_replay_to_the_same_events() {
    for name in ["oval", "two_squares", "skyscraper", "planar", "linking_failure"] {
        let r = run(name).await;
        let text = r.session.journal_text();
        let report = replay(&text, compiler()).await.unwrap();
        assert!(report.matches(), "{name}: {report:?}");
        assert!(report.recorded_events > 0);
    }
}

#[tokio::test]
async fn replay_notices_a_changed_digest() {
    let r = run("oval").await;
    let text = r.session.journal_text();
    let digest = r.session.artifact().unwrap().digest.clone();
    let mut flipped = digest.clone();
    let c = if flipped.ends_with('0') { "1" } else { "0" };
    flipped.replace_range(flipped.len() - 1.., c);
    let tampered = text.replace(&digest, &flipped);
    let report = replay(&tampered, compiler()).await.unwrap();
    assert!(!report.matches());
    assert!(replay(&text[..text.len() - 10], compiler()).await.is_err());
}

#[tokio::test]
async fn scripted_failures_are_recoverable_by_dialogue() {
    let mut scenario = fixture("linking_failure");
    scenario.commands.push(Command::Message {
        text: "Three ovals, try again.".into(),
        updates: vec![],
    });
    let mut steps = fixture("oval").steps;
    steps[1].pattern = "try again".into();
    scenario.steps.push(steps[1].clone());
    scenario.steps.push(steps[2].clone());
    let mut r = scenario.run("recover", compiler()).await;
    let s = &mut r.session;
    assert_eq!(s.status(), SessionStatus::Live);
    let t = transitions(&s.drain_events());
    assert!(t.contains(&(SessionStatus::Failed, SessionStatus::Gathering)));
    for (from, to) in t {
        assert!(is_legal(from, to));
    }
}

#[tokio::test]
async fn handle_serializes_commands_and_streams_events() {
    let scenario = fixture("oval");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.jsonl");
    let session = parlogue::pipeline::Session::new(
        "h1",
        scenario.config.clone(),
        scenario.seed,
        Arc::new(scenario.backend()),
        compiler(),
        Arc::new(parlogue::pipeline::PromptSet::builtin()),
    );
    let handle = SessionHandle::spawn(session, Some(path.clone()));
    let (past, mut rx) = handle.subscribe(1);
    assert!(past.is_empty());
    for c in scenario.commands.clone() {
        handle.apply(c).await.unwrap();
    }
    let snap = handle.snapshot();
    assert_eq!(snap.status, SessionStatus::Live);
    let history = handle.events();
    let mut streamed = Vec::new();
    while let Ok(e) = rx.try_recv() {
        streamed.push(e);
    }
    assert_eq!(streamed, history);
    let (resumed, _) = handle.subscribe(5);
    assert_eq!(resumed.first().unwrap().seq, 5);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), handle.journal());
    // Every streamed event is in the journal, in order.
    let journaled: Vec<_> = parse_journal(&handle.journal())
        .unwrap()
        .into_iter()
        .filter_map(|r| match r {
            JournalRecord::Event { event } => Some(event),
            _ => None,
        })
        .collect();
    assert_eq!(journaled, history);
}

mod fuzz {
    use std::sync::Mutex;

    use async_trait::async_trait;
    use parlogue::agents::{AgentKind, BackendError, LlmBackend, LlmRequest};
    use parlogue::pipeline::{PromptSet, Session, SessionConfig};
    use proptest::prelude::*;

    use super::*;

    /// Answers each agent from a fixed menu, choosing by the next script byte.
    struct Menu {
        picks: Mutex<Vec<u8>>,
        reasoner: Vec<String>,
        coder: Vec<String>,
    }

    #[async_trait]
    impl LlmBackend for Menu {
        async fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
            let pick = self.picks.lock().unwrap().pop().unwrap_or(0) as usize;
            let menu = match request.agent {
                AgentKind::Reasoner => &self.reasoner,
                AgentKind::Coder | AgentKind::Optimizer => &self.coder,
            };
            match pick % (menu.len() + 1) {
                i if i == menu.len() => Err(BackendError::transport("dropped")),
                i => Ok(menu[i].clone()),
            }
        }
    }

    #[derive(Debug, Clone)]
    enum Op {
        Message(bool),
        Update(f64),
        Confirm(bool),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            any::<bool>().prop_map(Op::Message),
            (-2.0f64..25.0).prop_map(|v| Op::Update(v.round())),
            any::<bool>().prop_map(Op::Confirm),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_operations_only_take_legal_transitions(
            ops in proptest::collection::vec(op(), 1..12),
            picks in proptest::collection::vec(any::<u8>(), 0..40),
        ) {
            let oval = fixture("oval");
            let broken = fixture("linking_failure");
            let menu = Menu {
                picks: Mutex::new(picks),
                reasoner: vec![oval.steps[0].response.clone(), oval.steps[1].response.clone(), "not json".into()],
                coder: vec![oval.steps[2].response.clone(), broken.steps[2].response.clone()],
            };
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
            rt.block_on(async {
                let mut s = Session::new("fuzz", SessionConfig::default(), 3, Arc::new(menu), compiler(), Arc::new(PromptSet::builtin()));
                s.add_shape(Shape::point([0.0, 0.0, 0.0].into()).unwrap()).unwrap();
                let mut seen = Vec::new();
                let mut transcript = 0;
                for op in ops {
                    let before = s.status();
                    let out = match op {
                        Op::Message(bind) => {
                            let updates = if bind {
                                vec![
                                    ParamUpdate::number("OvalCount", 2.0),
                                    ParamUpdate::number("InitialMajorRadius", 3.0),
                                    ParamUpdate::number("InitialMinorRadius", 1.0),
                                    ParamUpdate::reference("BaseCenter", ShapeId(1)),
                                ]
                            } else {
                                vec![]
                            };
                            s.advance("ovals please", &updates).await
                        }
                        Op::Update(v) => s.update_parameter(&ParamUpdate::number("OvalCount", v)),
                        Op::Confirm(accept) => s.confirm("OvalCount", accept),
                    };
                    if let Err(SessionError::IllegalState { state, .. }) = out {
                        assert_eq!(state, before);
                        assert_eq!(s.status(), before);
                    }
                    assert!(s.transcript().len() >= transcript);
                    transcript = s.transcript().len();
                    // Only resting states are observable between operations.
                    assert!(matches!(s.status(), SessionStatus::Gathering | SessionStatus::Live | SessionStatus::Failed));
                    seen.extend(s.drain_events());
                }
                for w in seen.windows(2) {
                    assert_eq!(w[1].seq, w[0].seq + 1);
                }
                let mut state = SessionStatus::Gathering;
                for (from, to) in transitions(&seen) {
                    assert_eq!(from, state);
                    assert!(is_legal(from, to), "{from} -> {to}");
                    state = to;
                }
                assert_eq!(state, s.status());
            });
        }
    }
}
