//! Runs the fault-injection ablation over the bundled design corpus with and without
//! the validator, and prints the summary table.
//!
//! ```text
//! cargo run --example ablation -- [corpus_dir] [mutations] [seed]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use parlogue::cli::{load_corpus, run_batch, BatchOptions, Config};
use parlogue::compilesvc::InProcessCompiler;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixtures/corpus".into()));
    let mutations = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let corpus = load_corpus(&dir)?;
    println!("{} fixtures, {} mutants each", corpus.len(), mutations);
    let options = BatchOptions {
        configs: vec![Config::ValidatorOff, Config::ValidatorOn],
        mutations,
        seed,
    };
    let report = run_batch(&corpus, &options, Arc::new(InProcessCompiler)).await?;
    print!("{}", report.table());

    for row in report.rows.iter().filter(|r| r.config == Config::ValidatorOn && !r.end_to_end_ok) {
        println!("not repaired: {} #{:?} {:?}", row.fixture, row.mutation, row.failure);
    }
    Ok(())
}
