use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::net::TcpStream;
use tokio::sync::Mutex;

use super::core::{closure, compile_unit, SourceStore};
use super::wire::{read_frame, write_frame, ClientFrame, CompileRequest, CompileResponse, WorkerFrame};
use crate::pdl::{codes, Diagnostic, Span};

/// Compiles units on behalf of a session. `store` supplies method sources by key.
#[async_trait]
pub trait Compiler: Send + Sync {
    async fn compile(&self, req: &CompileRequest, store: &(dyn SourceStore + Sync)) -> CompileResponse;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InProcessCompiler;

#[async_trait]
impl Compiler for InProcessCompiler {
    async fn compile(&self, req: &CompileRequest, store: &(dyn SourceStore + Sync)) -> CompileResponse {
        compile_unit(req, store).response
    }
}

pub fn transport_failure(id: u64, message: impl Into<String>) -> CompileResponse {
    CompileResponse::fail(id, vec![Diagnostic::error(codes::TRANSPORT, message, Span::default())])
}

/// True when `resp` failed because the worker could not be reached.
pub fn is_transport_failure(resp: &CompileResponse) -> bool {
    resp.diagnostics.iter().any(|d| d.code == codes::TRANSPORT)
}

/// Client for a remote worker. Holds one connection, reconnecting when it breaks.
pub struct RemoteCompiler {
    addr: String,
    timeout: Duration,
    conn: Mutex<Option<TcpStream>>,
}

#[derive(Debug, thiserror::Error)]
enum Exchange {
    #[error("{0}")]
    Frame(#[from] super::wire::FrameError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("unreadable worker frame: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("worker reported a protocol error: {0}")]
    Rejected(String),
}

impl RemoteCompiler {
    pub fn new(addr: impl Into<String>) -> Self {
        RemoteCompiler {
            addr: addr.into(),
            timeout: Duration::from_secs(10),
            conn: Mutex::new(None),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    async fn exchange(
        stream: &mut TcpStream,
        req: &CompileRequest,
        store: &(dyn SourceStore + Sync),
    ) -> Result<CompileResponse, Exchange> {
        let frame = serde_json::to_vec(&ClientFrame::request(req))?;
        write_frame(stream, &frame).await?;
        loop {
            let bytes = read_frame(stream).await?;
            match WorkerFrame::from_json(&bytes)? {
                WorkerFrame::Fetch { id, keys } if id == req.id => {
                    let (sources, _) = closure(&keys, store);
                    let reply = serde_json::to_vec(&ClientFrame::Provide { id, sources })?;
                    write_frame(stream, &reply).await?;
                }
                WorkerFrame::Response(resp) if resp.id == req.id => return Ok(resp),
                WorkerFrame::Response(resp) if resp.id == 0 => {
                    let message = resp.diagnostics.first().map(|d| d.message.clone()).unwrap_or_default();
                    return Err(Exchange::Rejected(message));
                }
                _ => {}
            }
        }
    }
}

#[async_trait]
impl Compiler for RemoteCompiler {
    async fn compile(&self, req: &CompileRequest, store: &(dyn SourceStore + Sync)) -> CompileResponse {
        let mut conn = self.conn.lock().await;
        // A reused connection may have gone stale (say, the worker restarted), so one
        // failure on it earns a retry on a fresh connection.
        let mut attempts = if conn.is_some() { 2 } else { 1 };
        loop {
            attempts -= 1;
            if conn.is_none() {
                match tokio::time::timeout(self.timeout, TcpStream::connect(&self.addr)).await {
                    Ok(Ok(s)) => {
                        let _ = s.set_nodelay(true);
                        *conn = Some(s);
                    }
                    Ok(Err(e)) => return transport_failure(req.id, format!("cannot reach worker at {}: {e}", self.addr)),
                    Err(_) => return transport_failure(req.id, format!("timed out connecting to {}", self.addr)),
                }
            }
            let stream = conn.as_mut().expect("connected");
            let outcome = tokio::time::timeout(self.timeout, Self::exchange(stream, req, store)).await;
            let message = match outcome {
                Ok(Ok(resp)) => return resp,
                Ok(Err(e)) => e.to_string(),
                Err(_) => "worker timed out".to_string(),
            };
            *conn = None;
            if attempts == 0 {
                return transport_failure(req.id, message);
            }
        }
    }
}

/// Tries `primary` and recompiles in process when it cannot be reached.
pub struct FallbackCompiler<P> {
    primary: P,
    fallbacks: AtomicU64,
}

impl<P: Compiler> FallbackCompiler<P> {
    pub fn new(primary: P) -> Self {
        FallbackCompiler {
            primary,
            fallbacks: AtomicU64::new(0),
        }
    }

    /// Number of requests that were served in process after a transport failure.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl<P: Compiler> Compiler for FallbackCompiler<P> {
    async fn compile(&self, req: &CompileRequest, store: &(dyn SourceStore + Sync)) -> CompileResponse {
        let resp = self.primary.compile(req, store).await;
        if !is_transport_failure(&resp) {
            return resp;
        }
        let reason = resp.diagnostics.first().map(|d| d.message.as_str()).unwrap_or("");
        tracing::warn!(code = codes::TRANSPORT, reason, "compile worker unavailable, compiling in process");
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        InProcessCompiler.compile(req, store).await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompilerMode {
    #[default]
    InProcess,
    Remote,
}

/// Builds the compiler a session uses. Remote mode always falls back to in-process.
pub fn compiler_for(mode: CompilerMode, addr: &str) -> Arc<dyn Compiler> {
    match mode {
        CompilerMode::InProcess => Arc::new(InProcessCompiler),
        CompilerMode::Remote => Arc::new(FallbackCompiler::new(RemoteCompiler::new(addr))),
    }
}
