//! Times both encoders over doubling sequence lengths and fits the log-log
//! scaling exponent.
//!
//! ```text
//! cargo run --release --example throughput_scaling -- 512,1024,2048,4096
//! ```

use longdoc_bench::bench::{bench_table_text, run_series};
use longdoc_bench::encoder::{init_weights, EncoderConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lengths: Vec<usize> = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "512,1024,2048,4096".into())
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let cfgs = [
        EncoderConfig::attention(8000, 64, 2, 4).with_max_context(None),
        EncoderConfig::scan(8000, 64, 2, 16),
    ];
    let mut series = Vec::new();
    for cfg in &cfgs {
        let weights = init_weights(cfg)?;
        series.push(run_series(cfg, &weights, &lengths, 3, 1)?);
    }
    print!("{}", bench_table_text(&series));
    Ok(())
}
