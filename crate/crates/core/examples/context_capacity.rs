//! Longest input each encoder can take under a memory budget.
//!
//! ```text
//! cargo run --example context_capacity -- 512
//! ```

use longdoc_bench::bench::compare_context_capacity;
use longdoc_bench::encoder::EncoderConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mib: usize = std::env::args().nth(1).map_or(Ok(512), |s| s.parse())?;
    let budget = mib << 20;
    let cfgs = [
        EncoderConfig::attention(8000, 64, 2, 4).with_max_context(Some(4096)),
        EncoderConfig::attention(8000, 64, 2, 4).with_max_context(None),
        EncoderConfig::scan(8000, 64, 2, 16),
    ];
    println!("budget {mib} MiB");
    for report in compare_context_capacity(&cfgs, budget, 1 << 24) {
        println!("  {:<16} {:>9} tokens ({:?})", report.model, report.capacity, report.limited_by);
    }
    for (cfg, t) in [(&cfgs[1], 8192), (&cfgs[2], 100_000)] {
        println!("  {} at {t} tokens needs {:.1} MiB", cfg.label(), cfg.footprint_bytes(t) as f64 / (1 << 20) as f64);
    }
    Ok(())
}
