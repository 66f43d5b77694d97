//! Compile service: parse, check and hash PDL units either in process or on a remote
//! worker reached over length-prefixed JSON frames.
//!
//! A worker keeps an LRU cache of method sources keyed by registry key. When a request
//! names a key the worker has not seen, it sends a `fetch` frame for that request id and
//! the engine answers with a `provide` frame carrying the sources. Both modes run the
//! same [`compile_unit`], so for identical requests they produce identical bytes.

mod client;
mod core;
mod wire;
mod worker;

pub use self::core::{closure, compile_unit, request_digest, unit_is_consistent, Compiled, SourceStore};
pub use client::{
    compiler_for, is_transport_failure, transport_failure, Compiler, CompilerMode, FallbackCompiler,
    InProcessCompiler, RemoteCompiler,
};
pub use wire::{
    encode, read_frame, write_frame, ClientFrame, CompileRequest, CompileResponse, FetchFrame,
    FrameError, MethodUnit, Status, UnitKind, WorkerFrame, MAX_FRAME,
};
pub use worker::{
    error_frame, handle_connection, serve_worker, spawn_worker, WorkerConfig, WorkerHandle,
    WorkerState, WorkerStats,
};
