//! Document retrieval over a corpus of exact duplicate pairs: every query's
//! duplicate should rank first.
//!
//! ```text
//! cargo run --release --example retrieval_pipeline -- out/retrieve
//! ```

use std::path::PathBuf;

use longdoc_bench::corpus::{duplicate_pairs, generate_synthetic_corpus, write_corpus, SyntheticSpec, TaskKind};
use longdoc_bench::encoder::EncoderKind;
use longdoc_bench::pipeline::{run_retrieve, RunSettings};
use longdoc_bench::retrieval::DocEmbeddingStore;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/retrieve".into()));
    std::fs::create_dir_all(&out)?;
    let corpus = out.join("duplicates.jsonl");
    let base = generate_synthetic_corpus(&SyntheticSpec::new(100, (200, 600), 5, TaskKind::Singlelabel, 11))?;
    write_corpus(&corpus, &duplicate_pairs(&base))?;

    let mut settings = RunSettings::new(&corpus, TaskKind::Retrieval, EncoderKind::ScanSequential);
    settings.model_dim = 32;
    settings.ks = vec![1, 10];
    let outcome = run_retrieve(&settings, &out.join("run"))?;
    println!("{}", std::fs::read_to_string(outcome.out_dir.join("table.txt"))?);

    let store = DocEmbeddingStore::load(outcome.out_dir.join("embeddings.bin"))?;
    println!("stored {} embeddings of dimension {}", store.len(), store.dim());
    let rankings = std::fs::read_to_string(outcome.out_dir.join("rankings.csv"))?;
    for line in rankings.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
