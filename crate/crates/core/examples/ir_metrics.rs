//! Classification and ranking metrics on small hand-made inputs.
//!
//! ```text
//! cargo run --example ir_metrics
//! ```

use std::collections::{BTreeMap, BTreeSet};

use longdoc_bench::metrics::{eval_retrieval, macro_f1, micro_f1, roc_auc, subset_accuracy};
use longdoc_bench::retrieval::RankedList;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let predicted = vec![vec![0, 1], vec![1], vec![], vec![2]];
    let gold = vec![vec![0], vec![1], vec![2], vec![2]];
    println!(
        "micro-F1 {:.4}, macro-F1 {:.4}, subset accuracy {:.4}",
        micro_f1(&predicted, &gold, 3),
        macro_f1(&predicted, &gold, 3),
        subset_accuracy(&predicted, &gold)
    );
    println!("AUC with a tie: {:.4}", roc_auc(&[0.9, 0.4, 0.4, 0.1], &[true, true, false, false])?);

    let list = |q: &str, ids: &[&str]| RankedList {
        query_id: q.into(),
        entries: ids.iter().enumerate().map(|(i, id)| (id.to_string(), 1.0 - i as f64 / 10.0)).collect(),
    };
    let lists = vec![list("q1", &["a", "b", "c", "d", "e"]), list("q2", &["c", "a", "e", "b", "d"])];
    let judgments = BTreeMap::from([
        ("q1".to_string(), BTreeSet::from(["b".to_string(), "d".to_string()])),
        ("q2".to_string(), BTreeSet::from(["c".to_string()])),
    ]);
    let r = eval_retrieval(&lists, &judgments, &[1, 3, 5])?;
    println!("MAP {:.4}, MRR {:.4}", r.map, r.mrr);
    for ((k, recall), (_, ndcg)) in r.recall_at_k.iter().zip(&r.ndcg_at_k) {
        println!("  k = {k}: recall {recall:.4}, nDCG {ndcg:.4}");
    }
    Ok(())
}
