use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use tokio::sync::{broadcast, mpsc, oneshot};

use super::event::SessionEvent;
use super::session::{Command, Session, SessionError, SessionSnapshot};
use crate::geometry::{Shape, ShapeId};

enum Job {
    Apply(Command, oneshot::Sender<Result<(), SessionError>>),
    AddShape(Shape, oneshot::Sender<Result<ShapeId, SessionError>>),
}

struct Shared {
    snapshot: RwLock<SessionSnapshot>,
    /// Every event so far, in sequence order. Held while broadcasting so a subscriber
    /// that reads the history and then subscribes misses nothing.
    history: Mutex<Vec<SessionEvent>>,
    events: broadcast::Sender<SessionEvent>,
    journal: Mutex<String>,
}

/// Cloneable handle to a session running on its own task. Commands are queued and run
/// one at a time; reads never wait for a running command.
#[derive(Clone)]
pub struct SessionHandle {
    id: String,
    jobs: mpsc::Sender<Job>,
    shared: Arc<Shared>,
}

impl SessionHandle {
    /// Moves `session` onto a task. When `journal_path` is set the journal is appended
    /// there after every command.
    pub fn spawn(mut session: Session, journal_path: Option<PathBuf>) -> Self {
        let (events, _) = broadcast::channel(1024);
        let shared = Arc::new(Shared {
            snapshot: RwLock::new(session.snapshot()),
            history: Mutex::new(Vec::new()),
            events,
            journal: Mutex::new(String::new()),
        });
        let id = session.id().to_string();
        let (jobs, mut rx) = mpsc::channel::<Job>(64);
        let state = shared.clone();
        publish(&mut session, &state, journal_path.as_ref());
        tokio::spawn(async move {
            while let Some(job) = rx.recv().await {
                match job {
                    Job::Apply(command, reply) => {
                        let out = session.apply(command).await;
                        publish(&mut session, &state, journal_path.as_ref());
                        let _ = reply.send(out);
                    }
                    Job::AddShape(shape, reply) => {
                        let out = session.add_shape(shape);
                        publish(&mut session, &state, journal_path.as_ref());
                        let _ = reply.send(out);
                    }
                }
            }
        });
        SessionHandle { id, jobs, shared }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Queues `command` and waits for it to finish.
    pub async fn apply(&self, command: Command) -> Result<(), SessionError> {
        let (tx, rx) = oneshot::channel();
        self.jobs
            .send(Job::Apply(command, tx))
            .await
            .map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)?
    }

    pub async fn add_shape(&self, shape: Shape) -> Result<ShapeId, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.jobs
            .send(Job::AddShape(shape, tx))
            .await
            .map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)?
    }

    /// State as of the last finished command.
    pub fn snapshot(&self) -> SessionSnapshot {
        self.shared.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn journal(&self) -> String {
        self.shared.journal.lock().expect("journal lock").clone()
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.shared.history.lock().expect("history lock").clone()
    }

    /// Events with `seq >= from` so far, plus a receiver for everything after them.
    pub fn subscribe(&self, from: u64) -> (Vec<SessionEvent>, broadcast::Receiver<SessionEvent>) {
        let history = self.shared.history.lock().expect("history lock");
        let rx = self.shared.events.subscribe();
        let past = history.iter().filter(|e| e.seq >= from).cloned().collect();
        (past, rx)
    }
}

fn publish(session: &mut Session, shared: &Shared, journal_path: Option<&PathBuf>) {
    let lines = session.drain_journal_lines();
    if let Some(path) = journal_path {
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(lines.as_bytes()));
        if let Err(e) = written {
            tracing::warn!(path = %path.display(), error = %e, "journal write failed");
        }
    }
    shared.journal.lock().expect("journal lock").push_str(&lines);
    *shared.snapshot.write().expect("snapshot lock") = session.snapshot();
    let mut history = shared.history.lock().expect("history lock");
    for e in session.drain_events() {
        history.push(e.clone());
        let _ = shared.events.send(e);
    }
}
