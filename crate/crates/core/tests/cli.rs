use std::path::{Path, PathBuf};
use std::sync::Arc;

use parlogue::cli::{self, load_corpus, run_batch, BatchOptions, Config, MutationOp};
use parlogue::compilesvc::InProcessCompiler;
use parlogue::pipeline::Scenario;
use proptest::prelude::*;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

async fn run(args: &[&str]) -> u8 {
    let mut argv = vec!["parlogue"];
    argv.extend_from_slice(args);
    cli::run(argv).await
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[tokio::test]
async fn replay_exit_codes() {
    for name in ["skyscraper", "planar", "oval"] {
        let p = fixture(&format!("journals/{name}.jsonl"));
        assert_eq!(run(&["replay", path_str(&p)]).await, cli::EXIT_OK, "{name}");
    }

    let dir = tempfile::tempdir().unwrap();
    let golden = std::fs::read_to_string(fixture("journals/oval.jsonl")).unwrap();

    // A tampered digest replays fine but no longer matches.
    let digest = golden.lines().rev().find_map(|l| {
        let v: serde_json::Value = serde_json::from_str(l).ok()?;
        v["event"]["digest"].as_str().map(str::to_string)
    });
    let digest = digest.expect("journal records a digest");
    let tampered = golden.replace(&digest, &"0".repeat(digest.len()));
    let p = dir.path().join("tampered.jsonl");
    std::fs::write(&p, tampered).unwrap();
    assert_eq!(run(&["replay", path_str(&p)]).await, cli::EXIT_DIGEST_MISMATCH);

    let p = dir.path().join("corrupt.jsonl");
    std::fs::write(&p, format!("{}{{not json\n", golden)).unwrap();
    assert_eq!(run(&["replay", path_str(&p)]).await, cli::EXIT_CORRUPT_JOURNAL);

    let missing = dir.path().join("absent.jsonl");
    assert_eq!(run(&["replay", path_str(&missing)]).await, cli::EXIT_CORRUPT_JOURNAL);
}

/// Minimal OBJ reader: (vertex count, face count, group count), with face indices
/// checked against the vertices seen so far.
fn parse_obj(text: &str) -> (usize, usize, usize) {
    let (mut v, mut f, mut o) = (0, 0, 0);
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let xyz: Vec<f64> = parts.map(|p| p.parse().unwrap()).collect();
                assert_eq!(xyz.len(), 3);
                v += 1;
            }
            Some("f") => {
                let idx: Vec<usize> = parts.map(|p| p.parse().unwrap()).collect();
                assert_eq!(idx.len(), 3);
                assert!(idx.iter().all(|&i| i >= 1 && i <= v), "{line}");
                f += 1;
            }
            Some("o") => o += 1,
            _ => {}
        }
    }
    (v, f, o)
}

#[tokio::test]
async fn export_matches_the_live_artifact() {
    let scenario = Scenario::load(&fixture("scenarios/oval.json")).unwrap();
    let live = scenario.run("oval", Arc::new(InProcessCompiler)).await;
    let artifact = live.session.artifact().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    std::fs::write(&journal, live.session.journal_text()).unwrap();

    let obj = dir.path().join("out.obj");
    assert_eq!(run(&["export", path_str(dir.path()), "--format", "obj", "--out", path_str(&obj)]).await, 0);
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text, artifact.to_obj());
    // Curves export as vertex groups without faces.
    let (v, f, o) = parse_obj(&text);
    assert_eq!((o, f), (3, 0));
    assert_eq!(v, 3 * 32);

    let json = dir.path().join("out.json");
    assert_eq!(run(&["export", path_str(&journal), "--out", path_str(&json)]).await, 0);
    assert_eq!(std::fs::read_to_string(&json).unwrap(), artifact.to_json());

    let empty = dir.path().join("empty.jsonl");
    let header = live.session.journal_text().lines().next().unwrap().to_string() + "\n";
    std::fs::write(&empty, header).unwrap();
    assert_eq!(run(&["export", path_str(&empty), "--out", path_str(&json)]).await, cli::EXIT_FAILURE);
}

#[tokio::test]
async fn mutate_writes_mutant_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.json");
    let program = fixture("pdl/two_squares.pdl");
    let code = run(&["mutate", path_str(&program), "--op", "corrupt_token", "--seed", "3", "--meta", path_str(&meta)]).await;
    assert_eq!(code, 0);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(m["op"], "corrupt_token");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["replacement"], "");

    let garbage = dir.path().join("bad.pdl");
    std::fs::write(&garbage, "logic {").unwrap();
    assert_eq!(run(&["mutate", path_str(&garbage), "--op", "rename_ident"]).await, cli::EXIT_FAILURE);
    assert_eq!(run(&["mutate", path_str(&program), "--op", "sideways"]).await, cli::EXIT_FAILURE);
}

#[test]
fn pdl_fixtures_are_whole_programs() {
    for entry in std::fs::read_dir(fixture("pdl")).unwrap() {
        let path = entry.unwrap().path();
        let program = parlogue::pdl::parse(&std::fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|d| panic!("{}: {d:?}", path.display()));
        let mut registry = parlogue::pdl::MethodRegistry::new();
        registry.register_methods(&program.methods).unwrap();
    }
}

#[tokio::test]
async fn batch_meets_thresholds_and_is_reproducible() {
    let corpus = load_corpus(&fixture("corpus")).unwrap();
    let options = BatchOptions {
        configs: vec![Config::ValidatorOff, Config::ValidatorOn],
        mutations: 10,
        seed: 0,
    };
    let a = run_batch(&corpus, &options, Arc::new(InProcessCompiler)).await.unwrap();
    let off = a.summary(Config::ValidatorOff).unwrap();
    let on = a.summary(Config::ValidatorOn).unwrap();
    assert_eq!(off.total, 40);
    assert!(off.rate <= 0.30, "validator off: {}", off.rate);
    assert_eq!(on.detected, on.static_faults);
    assert!(on.rate >= 0.90, "validator on: {}", on.rate);

    let b = run_batch(&corpus, &options, Arc::new(InProcessCompiler)).await.unwrap();
    assert_eq!(a.to_csv(), b.to_csv());

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let code = run(&["batch", path_str(&fixture("corpus")), "--mutations", "10", "--csv", path_str(&csv)]).await;
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), a.to_csv());
}

#[tokio::test]
async fn clean_corpus_always_succeeds() {
    let corpus = load_corpus(&fixture("corpus")).unwrap();
    let options = BatchOptions {
        configs: vec![Config::ValidatorOff, Config::ValidatorOn],
        mutations: 0,
        seed: 0,
    };
    let report = run_batch(&corpus, &options, Arc::new(InProcessCompiler)).await.unwrap();
    assert!(report.rows.iter().all(|r| r.end_to_end_ok && !r.detected));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every mutant of a corpus program is caught by parse, registration or check.
    #[test]
    fn static_mutants_never_pass_the_checker(op_index in 0usize..4, seed in any::<u64>(), which in 0usize..4) {
        let corpus = load_corpus(&fixture("corpus")).unwrap();
        let fixture = &corpus[which % corpus.len()];
        let op = MutationOp::ALL[op_index];
        let params = {
            let mut set = parlogue::params::ParamSet::new();
            for p in &fixture.design.parameters {
                set.declare(p.clone()).unwrap();
            }
            set
        };
        if let Ok((mutant, _)) = parlogue::cli::mutate_candidate(&fixture.output, op, seed) {
            let diags = parlogue::agents::static_check(&mutant, &parlogue::pdl::MethodRegistry::new(), &params);
            prop_assert!(op.is_static_fault());
            prop_assert!(!diags.is_empty(), "{} seed {} on {}", op.name(), seed, fixture.name);
        }
    }
}

#[test]
fn example_config_loads() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/parlogue.example.toml");
    let config = cli::EngineConfig::load(Some(&path), |_| None).unwrap();
    assert_eq!(config.compiler.mode, parlogue::compilesvc::CompilerMode::Remote);
    assert_eq!(config.session, parlogue::pipeline::SessionConfig::default());
    let env = cli::EngineConfig::load(Some(&path), |k| (k == "PARLOGUE_LISTEN").then(|| "0.0.0.0:9000".into())).unwrap();
    assert_eq!(env.server.listen, "0.0.0.0:9000");
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), "[server]\nlisten_on = \"x\"\n").unwrap();
    assert!(cli::EngineConfig::load(Some(bad.path()), |_| None).is_err());
}
