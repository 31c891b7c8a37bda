//! Writes a planted-marker corpus and prints its split sizes.
//!
//! ```text
//! cargo run --example synthetic_corpus -- corpus.jsonl multilabel 1000
//! ```
//!
//! Task is `multilabel`, `singlelabel`, `retrieval` or `duplicates` (a retrieval
//! corpus where every document has one exact duplicate).

use longdoc_bench::corpus::{
    duplicate_pairs, generate_synthetic_corpus, split_corpus, write_corpus, Split, SplitSpec, SyntheticSpec, TaskKind,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = args.first().map_or("synthetic.jsonl", String::as_str);
    let kind = args.get(1).map_or("multilabel", String::as_str);
    let n_docs: usize = args.get(2).map_or(Ok(1000), |s| s.parse())?;

    let docs = if kind == "duplicates" {
        let base = generate_synthetic_corpus(&SyntheticSpec::new(n_docs / 2, (200, 600), 5, TaskKind::Singlelabel, 11))?;
        duplicate_pairs(&base)
    } else {
        generate_synthetic_corpus(&SyntheticSpec::new(n_docs, (200, 600), 5, kind.parse()?, 7))?
    };
    write_corpus(path, &docs)?;

    let split = split_corpus(docs, &SplitSpec::default())?;
    let count = |s: Split| split.iter().filter(|d| d.split == s).count();
    println!(
        "wrote {} documents to {path}: train {}, validation {}, test {}",
        split.len(),
        count(Split::Train),
        count(Split::Validation),
        count(Split::Test)
    );
    println!("first document: {}...", &split[0].text[..80.min(split[0].text.len())]);
    Ok(())
}
