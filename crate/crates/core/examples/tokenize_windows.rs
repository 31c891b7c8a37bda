//! Builds a vocabulary, tokenizes one document and cuts it into overlapping windows.
//!
//! ```text
//! cargo run --example tokenize_windows -- 512 0.2
//! ```

use longdoc_bench::corpus::{generate_synthetic_corpus, SyntheticSpec, TaskKind};
use longdoc_bench::tokenize::{build_vocab, tokenize_document};
use longdoc_bench::window::{make_windows, window_count, WindowingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let window_len: usize = args.first().map_or(Ok(512), |s| s.parse())?;
    let overlap: f64 = args.get(1).map_or(Ok(0.2), |s| s.parse())?;

    let docs = generate_synthetic_corpus(&SyntheticSpec::new(50, (900, 1100), 4, TaskKind::Multilabel, 1))?;
    let vocab = build_vocab(&docs, 2000)?;
    println!("vocabulary: {} entries, sha256 {}", vocab.size(), &vocab.content_hash()[..16]);

    let tokens = tokenize_document(&docs[0], &vocab)?;
    let cfg = WindowingConfig::new(window_len, overlap)?;
    let windows = make_windows(&tokens, &cfg)?;
    println!(
        "{}: {} tokens, stride {}, {} windows (closed form {})",
        tokens.doc_id,
        tokens.len(),
        cfg.stride(),
        windows.len(),
        window_count(tokens.len(), &cfg)
    );
    for (i, (start, end)) in windows.spans.iter().enumerate() {
        println!("  window {i}: [{start}, {end}) real tokens {}", windows.masks[i].iter().filter(|m| **m).count());
    }
    println!("real tokens across windows, overlap included: {}", windows.real_tokens());
    Ok(())
}
