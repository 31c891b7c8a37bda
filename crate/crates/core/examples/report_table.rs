//! Renders a results table from metric reports and throughput numbers.
//!
//! ```text
//! cargo run --example report_table
//! ```

use longdoc_bench::metrics::{ClassificationReport, MetricReport};
use longdoc_bench::report::{emit_table, metrics_table, TableRow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let row = |model: &str, micro: f64, cap: Option<usize>, tps: f64| TableRow {
        model: model.into(),
        metrics: MetricReport::Classification(ClassificationReport {
            micro_f1: micro,
            macro_f1: micro - 0.031,
            accuracy: micro - 0.12,
            auc: Some(0.95),
            n_docs: 150,
            n_labels: 5,
        }),
        max_context: cap,
        tokens_per_sec: Some(tps),
    };
    let rows = [row("attention-512", 0.9071, Some(512), 2989.8), row("scan", 0.8984, None, 88805.0)];
    println!("{}", emit_table(&rows)?.to_text());
    print!("{}", metrics_table(&rows)?.to_csv()?);
    Ok(())
}
