use std::collections::HashMap;
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use lru::LruCache;
use serde::Serialize;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinSet;

use super::core::{closure, compile_unit, request_digest, unit_is_consistent, Compiled};
use super::wire::{
    read_frame, write_frame, ClientFrame, CompileRequest, CompileResponse, FrameError, MethodUnit,
    UnitKind, WorkerFrame,
};
use crate::pdl::{codes, Diagnostic, RegistryKey, Span};

/// How long a request waits for the engine to answer a fetch.
const FETCH_TIMEOUT: Duration = Duration::from_secs(10);
const FETCH_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct WorkerStats {
    pub requests: u64,
    /// Requests that ran parse and check.
    pub checks: u64,
    /// Requests answered from the response cache.
    pub cache_hits: u64,
    pub fetches: u64,
    pub protocol_errors: u64,
}

#[derive(Debug)]
pub struct WorkerConfig {
    pub source_capacity: usize,
    pub response_capacity: usize,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            source_capacity: 4096,
            response_capacity: 1024,
        }
    }
}

#[derive(Default)]
struct Counters {
    requests: AtomicU64,
    checks: AtomicU64,
    cache_hits: AtomicU64,
    fetches: AtomicU64,
    protocol_errors: AtomicU64,
}

/// Shared worker state. Both caches are pure optimizations: every response is a function
/// of the request and the method sources its keys name.
pub struct WorkerState {
    sources: Mutex<LruCache<RegistryKey, MethodUnit>>,
    responses: Mutex<LruCache<[u8; 32], Compiled>>,
    counters: Counters,
}

impl WorkerState {
    pub fn new(config: &WorkerConfig) -> Self {
        let cap = |n: usize| NonZeroUsize::new(n.max(1)).expect("nonzero");
        WorkerState {
            sources: Mutex::new(LruCache::new(cap(config.source_capacity))),
            responses: Mutex::new(LruCache::new(cap(config.response_capacity))),
            counters: Counters::default(),
        }
    }

    pub fn stats(&self) -> WorkerStats {
        let c = &self.counters;
        WorkerStats {
            requests: c.requests.load(Ordering::Relaxed),
            checks: c.checks.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            fetches: c.fetches.load(Ordering::Relaxed),
            protocol_errors: c.protocol_errors.load(Ordering::Relaxed),
        }
    }

    fn known_closure(&self, deps: &[RegistryKey]) -> (HashMap<RegistryKey, MethodUnit>, Vec<RegistryKey>) {
        let mut cache = self.sources.lock().expect("source cache lock");
        let snapshot: HashMap<RegistryKey, MethodUnit> = {
            let (found, _) = closure(deps, &CacheView(&mut cache));
            found.into_iter().map(|u| (u.key.clone(), u)).collect()
        };
        let (_, missing) = closure(deps, &snapshot);
        (snapshot, missing)
    }

    fn remember(&self, units: impl IntoIterator<Item = MethodUnit>) {
        let mut cache = self.sources.lock().expect("source cache lock");
        for u in units {
            if unit_is_consistent(&u) {
                cache.put(u.key.clone(), u);
            }
        }
    }
}

struct CacheView<'a>(&'a mut LruCache<RegistryKey, MethodUnit>);

impl super::core::SourceStore for CacheView<'_> {
    fn unit(&self, key: &RegistryKey) -> Option<MethodUnit> {
        self.0.peek(key).cloned()
    }
}

/// Error frame sent for protocol violations. Its id is always 0.
pub fn error_frame(message: impl Into<String>) -> CompileResponse {
    CompileResponse::fail(0, vec![Diagnostic::error(codes::PROTOCOL, message, Span::default())])
}

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<Vec<MethodUnit>>>>>;

async fn handle_request(
    state: Arc<WorkerState>,
    req: CompileRequest,
    out: mpsc::UnboundedSender<WorkerFrame>,
    pending: Pending,
) {
    let c = &state.counters;
    c.requests.fetch_add(1, Ordering::Relaxed);
    let digest = request_digest(&req);
    let cached = state.responses.lock().expect("response cache lock").get(&digest).cloned();
    let compiled = match cached {
        Some(hit) => {
            c.cache_hits.fetch_add(1, Ordering::Relaxed);
            hit
        }
        None => {
            let (mut units, mut missing) = state.known_closure(&req.deps);
            let mut rounds = 0;
            while !missing.is_empty() && rounds < FETCH_ROUNDS {
                rounds += 1;
                c.fetches.fetch_add(1, Ordering::Relaxed);
                let (tx, rx) = oneshot::channel();
                pending.lock().expect("pending lock").insert(req.id, tx);
                if out.send(WorkerFrame::Fetch { id: req.id, keys: missing.clone() }).is_err() {
                    break;
                }
                match tokio::time::timeout(FETCH_TIMEOUT, rx).await {
                    Ok(Ok(provided)) => state.remember(provided),
                    _ => break,
                }
                (units, missing) = state.known_closure(&req.deps);
            }
            pending.lock().expect("pending lock").remove(&req.id);
            c.checks.fetch_add(1, Ordering::Relaxed);
            let compiled = compile_unit(&req, &units);
            // A response that depends on sources we could not get is not worth keeping.
            if missing.is_empty() {
                if let Some(u) = &compiled.unit {
                    state.remember([u.clone()]);
                }
                state.responses.lock().expect("response cache lock").put(digest, compiled.clone());
            }
            compiled
        }
    };
    let mut response = compiled.response;
    response.id = req.id;
    let _ = out.send(WorkerFrame::Response(response));
}

/// Serves one connection until the peer closes it or violates the protocol.
pub async fn handle_connection(state: Arc<WorkerState>, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<WorkerFrame>();
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            if write_frame(&mut wr, &frame.to_json()).await.is_err() {
                break;
            }
        }
    });
    let pending: Pending = Arc::default();
    let mut tasks = JoinSet::new();
    loop {
        let violation = match read_frame(&mut rd).await {
            Ok(bytes) => match serde_json::from_slice::<ClientFrame>(&bytes) {
                Ok(ClientFrame::Provide { id, sources }) => {
                    if let Some(waiter) = pending.lock().expect("pending lock").remove(&id) {
                        let _ = waiter.send(sources);
                    }
                    continue;
                }
                Ok(ClientFrame::Method { id, source, deps }) => {
                    let req = CompileRequest { id, kind: UnitKind::Method, source, deps };
                    tasks.spawn(handle_request(state.clone(), req, tx.clone(), pending.clone()));
                    continue;
                }
                Ok(ClientFrame::Logic { id, source, deps }) => {
                    let req = CompileRequest { id, kind: UnitKind::Logic, source, deps };
                    tasks.spawn(handle_request(state.clone(), req, tx.clone(), pending.clone()));
                    continue;
                }
                Err(e) => {
                    // The frame boundary is intact, so the connection can carry on.
                    state.counters.protocol_errors.fetch_add(1, Ordering::Relaxed);
                    let _ = tx.send(WorkerFrame::Response(error_frame(format!("malformed request: {e}"))));
                    continue;
                }
            },
            Err(FrameError::Closed) | Err(FrameError::Io(_)) => None,
            Err(e) => Some(e.to_string()),
        };
        if let Some(message) = violation {
            state.counters.protocol_errors.fetch_add(1, Ordering::Relaxed);
            tracing::warn!(%message, "dropping worker connection");
            let _ = tx.send(WorkerFrame::Response(error_frame(message)));
        }
        break;
    }
    pending.lock().expect("pending lock").clear();
    while tasks.join_next().await.is_some() {}
    drop(tx);
    let _ = writer.await;
}

/// Accepts connections on `listener` forever, one handler task per connection.
pub async fn serve_worker(listener: TcpListener, state: Arc<WorkerState>) -> std::io::Result<()> {
    let mut conns = JoinSet::new();
    loop {
        let (stream, peer) = listener.accept().await?;
        tracing::debug!(%peer, "worker connection");
        conns.spawn(handle_connection(state.clone(), stream));
        while conns.try_join_next().is_some() {}
    }
}

/// A worker running on a background task. Dropping the handle does not stop it; call
/// [`WorkerHandle::shutdown`].
pub struct WorkerHandle {
    pub addr: SocketAddr,
    state: Arc<WorkerState>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl WorkerHandle {
    pub fn stats(&self) -> WorkerStats {
        self.state.stats()
    }

    /// Stops accepting and drops every open connection.
    pub async fn shutdown(self) {
        self.task.abort();
        let _ = self.task.await;
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background task.
pub async fn spawn_worker(addr: &str, config: &WorkerConfig) -> std::io::Result<WorkerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let state = Arc::new(WorkerState::new(config));
    let task = tokio::spawn(serve_worker(listener, state.clone()));
    Ok(WorkerHandle { addr, state, task })
}
