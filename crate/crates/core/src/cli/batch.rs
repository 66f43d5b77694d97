//! Fault-injection ablation: run seeded mutants of the design corpus through generation
//! with and without the optimizer review and count how far each gets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mutate::{mutate_candidate, Mutation, MutationOp};
use crate::agents::{parse_candidate, static_check, AgentKind, CaOutput, OaStatus, ScriptedBackend, ScriptedStep};
use crate::compilesvc::Compiler;
use crate::params::ParamSet;
use crate::pdl::{self, MethodRegistry};
use crate::pipeline::{parse_journal, Command, DesignSpec, JournalRecord, PromptSet, Session, SessionConfig, SessionStatus};

/// A clean design: the coder output that implements it and the parameters it runs with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFixture {
    pub name: String,
    pub family: String,
    pub design: DesignSpec,
    pub output: CaOutput,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid fixture {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("fixture {name}: {message}")]
    Invalid { name: String, message: String },
}

/// Loads every `*.json` in `dir`, sorted by fixture name.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusFixture>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(io)?;
        let f: CorpusFixture = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
            path: path.display().to_string(),
            source,
        })?;
        out.push(f);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Config {
    ValidatorOff,
    ValidatorOn,
}

impl Config {
    pub fn name(self) -> &'static str {
        match self {
            Config::ValidatorOff => "validator_off",
            Config::ValidatorOn => "validator_on",
        }
    }
}

/// One (fixture, mutation, config) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub fixture: String,
    /// Mutation index; `None` for the clean fixture.
    pub mutation: Option<usize>,
    pub op: Option<MutationOp>,
    pub config: Config,
    pub parse_ok: bool,
    pub check_ok: bool,
    pub eval_ok: bool,
    pub end_to_end_ok: bool,
    /// The static checker flagged the candidate the coder produced.
    pub detected: bool,
    /// First error code of a failed run.
    pub failure: Option<String>,
    #[serde(skip)]
    pub detail: Option<Mutation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: Config,
    pub total: usize,
    pub parse_ok: usize,
    pub check_ok: usize,
    pub eval_ok: usize,
    pub end_to_end_ok: usize,
    pub rate: f64,
    /// Mutants from static-fault operators, and how many of them were flagged.
    pub static_faults: usize,
    pub detected: usize,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<Row>,
    pub summaries: Vec<Summary>,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub configs: Vec<Config>,
    /// Mutants per fixture; zero runs the clean fixtures.
    pub mutations: usize,
    pub seed: u64,
}

/// Seed of mutation `k` of fixture `index`.
fn mutation_seed(seed: u64, index: usize, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64) << 32)
        .wrapping_add(k as u64)
}

/// The mutants of one fixture. Operators cycle; an operator with no site in the fixture
/// is skipped in favor of the next.
pub fn mutants(fixture: &CorpusFixture, index: usize, count: usize, seed: u64) -> Vec<(usize, CaOutput, Mutation)> {
    let mut out = Vec::new();
    for k in 0..count {
        let s = mutation_seed(seed, index, k);
        for shift in 0..MutationOp::ALL.len() {
            let op = MutationOp::ALL[(k + shift) % MutationOp::ALL.len()];
            if let Ok((m, meta)) = mutate_candidate(&fixture.output, op, s) {
                out.push((k, m, meta));
                break;
            }
        }
    }
    out
}

fn param_set(design: &DesignSpec) -> Result<ParamSet, String> {
    let mut set = ParamSet::new();
    for p in &design.parameters {
        set.declare(p.clone()).map_err(|e| e.to_string())?;
    }
    Ok(set)
}

fn static_levels(candidate: &CaOutput, params: &ParamSet, seed: u64) -> (bool, bool, bool) {
    let Ok(parsed) = parse_candidate(candidate) else { return (false, false, false) };
    if !static_check(candidate, &MethodRegistry::new(), params).is_empty() {
        return (true, false, false);
    }
    let mut registry = MethodRegistry::new();
    if registry.register_methods(&parsed.methods).is_err() {
        return (true, false, false);
    }
    let eval_ok = pdl::evaluate(&parsed.program, params, &registry, seed).is_ok();
    (true, true, eval_ok)
}

async fn run_one(
    fixture: &CorpusFixture,
    params: &ParamSet,
    candidate: &CaOutput,
    config: Config,
    compiler: Arc<dyn Compiler>,
) -> (bool, Option<CaOutput>, Option<String>, bool) {
    let reply = serde_json::to_string(candidate).expect("candidate serializes");
    let repair = serde_json::to_string(&fixture.output).expect("candidate serializes");
    let mut steps = vec![ScriptedStep {
        agent: Some(AgentKind::Coder),
        pattern: String::new(),
        response: reply,
        error: None,
    }];
    if config == Config::ValidatorOn {
        steps.push(ScriptedStep {
            agent: Some(AgentKind::Optimizer),
            pattern: String::new(),
            response: repair,
            error: None,
        });
    }
    let session_config = SessionConfig {
        validator: config == Config::ValidatorOn,
        review_rounds: 1,
        ..SessionConfig::default()
    };
    let mut s = Session::new(
        fixture.name.clone(),
        session_config,
        0,
        Arc::new(ScriptedBackend::new(steps)),
        compiler,
        Arc::new(PromptSet::builtin()),
    );
    let _ = s
        .apply(Command::Design {
            design: fixture.design.clone(),
            params: params.clone(),
        })
        .await;
    let records = parse_journal(&s.journal_text()).unwrap_or_default();
    let mut flagged = false;
    let mut final_candidate = None;
    for r in &records {
        match r {
            JournalRecord::CaOutput { output } => final_candidate = Some(output.clone()),
            JournalRecord::OaVerdict { verdict } => {
                flagged = verdict.status != OaStatus::Approved;
                if let Some(c) = &verdict.revised_output {
                    final_candidate = Some(c.clone());
                }
            }
            _ => {}
        }
    }
    let failure = s.drain_events().into_iter().find_map(|e| match e.payload {
        crate::pipeline::EventPayload::Error { code, .. } => Some(code),
        _ => None,
    });
    (s.status() == SessionStatus::Live, final_candidate, failure, flagged)
}

/// Runs the ablation. Rows are sorted by (fixture, mutation, config) whatever order the
/// runs finish in.
pub async fn run_batch(
    corpus: &[CorpusFixture],
    options: &BatchOptions,
    compiler: Arc<dyn Compiler>,
) -> Result<AblationReport, CorpusError> {
    let mut jobs = tokio::task::JoinSet::new();
    for (index, fixture) in corpus.iter().enumerate() {
        let params = param_set(&fixture.design).map_err(|message| CorpusError::Invalid {
            name: fixture.name.clone(),
            message,
        })?;
        let cases: Vec<(Option<usize>, CaOutput, Option<Mutation>)> = if options.mutations == 0 {
            vec![(None, fixture.output.clone(), None)]
        } else {
            mutants(fixture, index, options.mutations, options.seed)
                .into_iter()
                .map(|(k, c, m)| (Some(k), c, Some(m)))
                .collect()
        };
        for (k, candidate, meta) in cases {
            for &config in &options.configs {
                let fixture = fixture.clone();
                let params = params.clone();
                let candidate = candidate.clone();
                let meta = meta.clone();
                let compiler = compiler.clone();
                jobs.spawn(async move {
                    let detected = !static_check(&candidate, &MethodRegistry::new(), &params).is_empty();
                    let (live, final_candidate, failure, flagged) =
                        run_one(&fixture, &params, &candidate, config, compiler).await;
                    let (parse_ok, check_ok, eval_ok) = match &final_candidate {
                        Some(c) => static_levels(c, &params, 0),
                        None => (false, false, false),
                    };
                    Row {
                        fixture: fixture.name.clone(),
                        mutation: k,
                        op: meta.as_ref().map(|m| m.op),
                        config,
                        parse_ok,
                        check_ok,
                        eval_ok,
                        end_to_end_ok: live && eval_ok,
                        detected: match config {
                            Config::ValidatorOn => flagged,
                            Config::ValidatorOff => detected,
                        },
                        failure: if live { None } else { failure },
                        detail: meta,
                    }
                });
            }
        }
    }
    let mut rows = Vec::new();
    while let Some(row) = jobs.join_next().await {
        rows.push(row.expect("batch task panicked"));
    }
    rows.sort_by(|a, b| (&a.fixture, a.mutation, a.config).cmp(&(&b.fixture, b.mutation, b.config)));
    let summaries = options.configs.iter().map(|&c| summarize(&rows, c)).collect();
    Ok(AblationReport { rows, summaries })
}

fn summarize(rows: &[Row], config: Config) -> Summary {
    let rows: Vec<&Row> = rows.iter().filter(|r| r.config == config).collect();
    let count = |f: fn(&Row) -> bool| rows.iter().filter(|r| f(r)).count();
    let total = rows.len();
    let end_to_end_ok = count(|r| r.end_to_end_ok);
    let mut failures = BTreeMap::new();
    for r in &rows {
        if let Some(code) = &r.failure {
            *failures.entry(code.clone()).or_insert(0) += 1;
        }
    }
    Summary {
        config,
        total,
        parse_ok: count(|r| r.parse_ok),
        check_ok: count(|r| r.check_ok),
        eval_ok: count(|r| r.eval_ok),
        end_to_end_ok,
        rate: if total == 0 { 0.0 } else { end_to_end_ok as f64 / total as f64 },
        static_faults: count(|r| r.op.is_some_and(MutationOp::is_static_fault)),
        detected: count(|r| r.detected && r.op.is_some_and(MutationOp::is_static_fault)),
        failures,
    }
}

impl AblationReport {
    pub fn summary(&self, config: Config) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.config == config)
    }

    /// One row per (fixture, mutation, config), with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fixture,mutation,op,config,parse_ok,check_ok,eval_ok,end_to_end_ok,detected,failure\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.fixture,
                r.mutation.map(|m| m.to_string()).unwrap_or_default(),
                r.op.map(MutationOp::name).unwrap_or("none"),
                r.config.name(),
                r.parse_ok,
                r.check_ok,
                r.eval_ok,
                r.end_to_end_ok,
                r.detected,
                r.failure.as_deref().unwrap_or(""),
            );
        }
        out
    }

    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>5} {:>8} {:>8} {:>7} {:>10} {:>7} {:>9}\n",
            "config", "total", "parse_ok", "check_ok", "eval_ok", "end_to_end", "rate", "detected"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>8} {:>8} {:>7} {:>10} {:>6.1}% {:>5}/{:<3}",
                s.config.name(),
                s.total,
                s.parse_ok,
                s.check_ok,
                s.eval_ok,
                s.end_to_end_ok,
                s.rate * 100.0,
                s.detected,
                s.static_faults
            );
        }
        for s in &self.summaries {
            if !s.failures.is_empty() {
                let list: Vec<String> = s.failures.iter().map(|(c, n)| format!("{c}={n}")).collect();
                let _ = writeln!(out, "{} failures: {}", s.config.name(), list.join(" "));
            }
        }
        out
    }
}
