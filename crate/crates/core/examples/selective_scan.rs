//! Runs the selective scan sequentially and in chunks and compares the outputs.
//!
//! ```text
//! cargo run --release --example selective_scan -- 4096 64
//! ```

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longdoc_bench::encoder::{init_weights, ssm_scan_chunked, ssm_scan_sequential, EncoderConfig, LayerWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let t: usize = args.first().map_or(Ok(4096), |s| s.parse())?;
    let chunk: usize = args.get(1).map_or(Ok(64), |s| s.parse())?;

    let cfg = EncoderConfig::scan(100, 32, 1, 16).with_seed(9);
    let weights = init_weights(&cfg)?;
    let LayerWeights::Scan(params) = &weights.layers[0] else {
        unreachable!("scan config")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_simple_fn((t, 32), || rng.random_range(-1.0..1.0));
    let mask = vec![true; t];

    let start = Instant::now();
    let seq = ssm_scan_sequential(x.view(), params, &mask)?;
    let seq_time = start.elapsed();
    let start = Instant::now();
    let chunked = ssm_scan_chunked(x.view(), params, &mask, chunk)?;
    let chunk_time = start.elapsed();

    let diff = (&seq - &chunked).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("T = {t}, state 16, model dim 32");
    println!("sequential {seq_time:.2?}, chunked (Q = {chunk}) {chunk_time:.2?}");
    println!("max |sequential - chunked| = {diff:.2e}");
    Ok(())
}
