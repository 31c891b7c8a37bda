//! End-to-end classification on a synthetic corpus: split, vocabulary,
//! windowed encoding, probe training and evaluation.
//!
//! ```text
//! cargo run --release --example classify_pipeline -- scan out/classify
//! ```

use std::path::PathBuf;

use longdoc_bench::corpus::{generate_synthetic_corpus, write_corpus, SyntheticSpec, TaskKind};
use longdoc_bench::pipeline::{run_classify, RunSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let encoder = args.first().map_or("scan", String::as_str).parse()?;
    let out = PathBuf::from(args.get(1).map_or("out/classify", String::as_str));

    std::fs::create_dir_all(&out)?;
    let corpus = out.join("corpus.jsonl");
    write_corpus(&corpus, &generate_synthetic_corpus(&SyntheticSpec::new(400, (200, 600), 5, TaskKind::Multilabel, 7))?)?;

    let mut settings = RunSettings::new(&corpus, TaskKind::Multilabel, encoder);
    settings.model_dim = 32;
    let outcome = run_classify(&settings, &out.join("run"))?;
    println!("{}", std::fs::read_to_string(outcome.out_dir.join("table.txt"))?);
    println!("manifest: {}", outcome.out_dir.join("manifest.toml").display());
    Ok(())
}
