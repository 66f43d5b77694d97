//! Compiles the same units in-process and on a `pdl-worker` over TCP. The responses are
//! byte-identical; once the worker is gone the fallback compiler answers locally.

use parlogue::compilesvc::{
    spawn_worker, CompileRequest, Compiler, FallbackCompiler, InProcessCompiler, RemoteCompiler, UnitKind,
    WorkerConfig,
};
use parlogue::pdl::{self, MethodRegistry};

const RING: &str = "method ring(c: point, r: number) -> shape { return ellipse(c, r, r); }";
const LOGIC: &str = "param N: integer = 3 in [1, 10]\nlogic { for i in 0..N { emit(ring(point(0, 0, 0), 1 + i)); } }";

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let worker = spawn_worker("127.0.0.1:0", &WorkerConfig::default()).await?;
    println!("worker on {}", worker.addr);

    let mut store = MethodRegistry::new();
    let ring = pdl::parse_method(RING).map_err(|d| format!("{d:?}"))?;
    let keys = store.register_methods(&[ring]).map_err(|d| format!("{d:?}"))?;
    let requests = [
        CompileRequest { id: 1, kind: UnitKind::Method, source: RING.into(), deps: vec![] },
        CompileRequest { id: 2, kind: UnitKind::Logic, source: LOGIC.into(), deps: keys.clone() },
        CompileRequest { id: 3, kind: UnitKind::Logic, source: "logic { emit(ring(point(0,0,0), 1)); }".into(), deps: vec![] },
    ];

    let remote = RemoteCompiler::new(worker.addr.to_string());
    for req in &requests {
        let local = InProcessCompiler.compile(req, &store).await;
        let far = remote.compile(req, &store).await;
        println!(
            "request {}: {:?} ({} diagnostics), identical bytes: {}",
            req.id,
            far.status,
            far.diagnostics.len(),
            local.to_bytes() == far.to_bytes()
        );
    }
    // A second round is served from the worker's cache.
    for req in &requests {
        remote.compile(req, &store).await;
    }
    let stats = worker.stats();
    println!("worker stats: {} requests, {} cache hits, {} fetches", stats.requests, stats.cache_hits, stats.fetches);

    let addr = worker.addr.to_string();
    worker.shutdown().await;
    let fallback = FallbackCompiler::new(RemoteCompiler::new(addr));
    let r = fallback.compile(&requests[1], &store).await;
    println!("after shutdown: {:?}, fallbacks {}", r.status, fallback.fallbacks());
    Ok(())
}
