//! Command-line surface: `serve`, `replay`, `batch`, `mutate`, `export` and the
//! `pdl-worker` compile worker.

mod batch;
mod config;
mod mutate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

pub use batch::{load_corpus, mutants, run_batch, AblationReport, BatchOptions, Config, CorpusError, CorpusFixture, Row, Summary};
pub use config::{CompilerSection, ConfigError, EngineConfig, PromptsSection, ServerSection};
pub use mutate::{mutate_candidate, mutate_program, MutateError, Mutation, MutationOp, Target};

use crate::compilesvc::{compiler_for, Compiler, InProcessCompiler, WorkerConfig, WorkerState};
use crate::pipeline::{replay_session, JournalError, PromptSet};
use crate::service::ServiceConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_DIGEST_MISMATCH: u8 = 2;
pub const EXIT_CORRUPT_JOURNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "parlogue", version, about = "Conversational parametric design engine")]
pub struct Cli {
    /// TOML config file; `PARLOGUE_*` variables override it.
    #[arg(long, global = true, env = "PARLOGUE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Validator {
    On,
    Off,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Json,
    Obj,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Re-execute a journal and compare its final artifact digest.
    Replay { journal: PathBuf },
    /// Run the fault-injection ablation over a design corpus.
    Batch {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        validator: Validator,
        /// Mutants per fixture; 0 runs the clean fixtures.
        #[arg(long, default_value_t = 10)]
        mutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Apply one seeded mutation to a PDL program.
    Mutate {
        program: PathBuf,
        #[arg(long, value_enum)]
        op: MutationOp,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the mutation metadata (JSON) here instead of stderr.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Write the artifact of a journal (or a session data directory).
    Export {
        source: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a compile worker.
    #[command(name = "pdl-worker")]
    Worker {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    EXIT_FAILURE
}

fn journal_path(source: &Path) -> PathBuf {
    if source.is_dir() {
        source.join("journal.jsonl")
    } else {
        source.to_path_buf()
    }
}

/// Parses `args` (including the program name) and runs the command. Returns the exit
/// status.
pub async fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    let config = match EngineConfig::load(cli.config.as_deref(), |k| std::env::var(k).ok()) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match cli.command {
        Cmd::Serve { listen } => serve(config, listen).await,
        Cmd::Replay { journal } => replay_cmd(&journal, compiler_for(config.compiler.mode, &config.compiler.addr)).await,
        Cmd::Batch {
            corpus,
            validator,
            mutations,
            seed,
            csv,
        } => {
            let configs = match validator {
                Validator::On => vec![Config::ValidatorOn],
                Validator::Off => vec![Config::ValidatorOff],
                Validator::Both => vec![Config::ValidatorOff, Config::ValidatorOn],
            };
            let options = BatchOptions {
                configs,
                mutations,
                seed,
            };
            batch_cmd(&corpus, &options, csv.as_deref(), Arc::new(InProcessCompiler)).await
        }
        Cmd::Mutate { program, op, seed, meta } => mutate_cmd(&program, op, seed, meta.as_deref()),
        Cmd::Export { source, format, out } => {
            export_cmd(&source, format, &out, compiler_for(config.compiler.mode, &config.compiler.addr)).await
        }
        Cmd::Worker { listen } => worker(&listen).await,
    }
}

async fn serve(config: EngineConfig, listen: Option<String>) -> u8 {
    let prompts = match &config.prompts.dir {
        Some(dir) => match PromptSet::load(dir) {
            Ok(p) => p,
            Err(e) => return fail(e),
        },
        None => PromptSet::builtin(),
    };
    let addr = listen.unwrap_or_else(|| config.server.listen.clone());
    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => return fail(format!("cannot bind {addr}: {e}")),
    };
    tracing::info!(%addr, mode = ?config.compiler.mode, "serving");
    let service = ServiceConfig {
        data_dir: config.server.data_dir.clone(),
        fixtures_dir: config.server.fixtures_dir.clone(),
        compiler: compiler_for(config.compiler.mode, &config.compiler.addr),
        prompts: Arc::new(prompts),
        session: config.session.clone(),
    };
    match crate::service::serve(listener, service).await {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}

/// `replay`: prints the replayed digest; 0 on a match, 2 on a mismatch, 3 when the
/// journal cannot be used.
pub async fn replay_cmd(path: &Path, compiler: Arc<dyn Compiler>) -> u8 {
    let text = match std::fs::read_to_string(journal_path(path)) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_CORRUPT_JOURNAL;
        }
    };
    match replay_session(&text, compiler).await {
        Ok((_, report)) => {
            println!("{}", report.replayed_digest.as_deref().unwrap_or("none"));
            if report.matches() {
                EXIT_OK
            } else {
                eprintln!(
                    "mismatch: recorded {} replayed {} (first differing event: {:?})",
                    report.recorded_digest.as_deref().unwrap_or("none"),
                    report.replayed_digest.as_deref().unwrap_or("none"),
                    report.divergence
                );
                EXIT_DIGEST_MISMATCH
            }
        }
        Err(e @ (JournalError::Corrupt { .. } | JournalError::UnsupportedVersion(_))) => {
            eprintln!("error: {e}");
            EXIT_CORRUPT_JOURNAL
        }
    }
}

pub async fn batch_cmd(corpus: &Path, options: &BatchOptions, csv: Option<&Path>, compiler: Arc<dyn Compiler>) -> u8 {
    let fixtures = match load_corpus(corpus) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let report = match run_batch(&fixtures, options, compiler).await {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    print!("{}", report.table());
    match csv {
        Some(path) => {
            if let Err(e) = std::fs::write(path, report.to_csv()) {
                return fail(format!("{}: {e}", path.display()));
            }
        }
        None => print!("\n{}", report.to_csv()),
    }
    EXIT_OK
}

pub fn mutate_cmd(program: &Path, op: MutationOp, seed: u64, meta: Option<&Path>) -> u8 {
    let src = match std::fs::read_to_string(program) {
        Ok(s) => s,
        Err(e) => return fail(format!("{}: {e}", program.display())),
    };
    match mutate_program(&src, op, seed) {
        Ok((out, m)) => {
            print!("{out}");
            let json = serde_json::to_string(&m).expect("mutation serializes");
            match meta {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, json + "\n") {
                        return fail(format!("{}: {e}", path.display()));
                    }
                }
                None => eprintln!("{json}"),
            }
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

pub async fn export_cmd(source: &Path, format: ExportFormat, out: &Path, compiler: Arc<dyn Compiler>) -> u8 {
    let path = journal_path(source);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    let (session, _) = match replay_session(&text, compiler).await {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let Some(artifact) = session.artifact() else {
        return fail("the journal has no artifact");
    };
    let body = match format {
        ExportFormat::Json => artifact.to_json(),
        ExportFormat::Obj => artifact.to_obj(),
    };
    match std::fs::write(out, body) {
        Ok(()) => {
            println!("{}", artifact.digest);
            EXIT_OK
        }
        Err(e) => fail(format!("{}: {e}", out.display())),
    }
}

async fn worker(listen: &str) -> u8 {
    let listener = match tokio::net::TcpListener::bind(listen).await {
        Ok(l) => l,
        Err(e) => return fail(format!("cannot bind {listen}: {e}")),
    };
    tracing::info!(addr = %listen, "pdl-worker listening");
    let state = Arc::new(WorkerState::new(&WorkerConfig::default()));
    match crate::compilesvc::serve_worker(listener, state).await {
        Ok(()) => EXIT_OK,
        Err(e) => fail(e),
    }
}
