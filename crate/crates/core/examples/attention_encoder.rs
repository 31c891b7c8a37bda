//! Encodes a token sequence with the attention encoder and shows the
//! attention weights of the first layer and the context cap.
//!
//! ```text
//! cargo run --example attention_encoder
//! ```

use longdoc_bench::encoder::{attention_context, encode, init_weights, EncoderConfig, LayerWeights};
use longdoc_bench::Error;
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EncoderConfig::attention(200, 16, 2, 2).with_max_context(Some(64)).with_seed(4);
    let weights = init_weights(&cfg)?;
    let ids: Vec<u32> = (0..6).map(|i| 10 + 7 * i).collect();
    let mask = [true, true, true, true, false, false];

    let encoded = encode(&ids, &mask, &cfg, &weights)?;
    println!("{}: pooled embedding (first 4 of {}): {:.4}", cfg.label(), encoded.pooled.len(), encoded.pooled.slice(ndarray::s![..4]));

    let LayerWeights::Attention(layer) = &weights.layers[0] else {
        unreachable!("attention config")
    };
    let x = Array2::from_shape_fn((6, 16), |(t, c)| weights.embedding[[ids[t] as usize, c]]);
    let mut probs = Vec::new();
    attention_context(&x, layer, &mask, Some(&mut probs))?;
    println!("head 0 attention weights (padded keys get zero weight):");
    for row in probs[0].rows() {
        println!("  {:.3}", row);
    }

    let long: Vec<u32> = vec![5; 65];
    match encode(&long, &[true; 65], &cfg, &weights) {
        Err(Error::ContextOverflow { len, limit }) => println!("65 tokens rejected: length {len} over cap {limit}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
