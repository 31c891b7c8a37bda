//! Classification and ranked-retrieval measures.
//!
//! Multi-label accuracy is subset (exact-match) accuracy. MAP is computed over
//! the full ranked list; nDCG uses binary gains with a `log2(rank + 1)` discount.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::error::{Error, Result};
use crate::heads::DocPrediction;
use crate::retrieval::RankedList;

/// Gold label indices for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub doc_id: String,
    pub labels: Vec<usize>,
}

/// Query id to the set of relevant candidate ids.
pub type RelevanceJudgments = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// `None` when no label has both classes among the evaluated documents.
    pub auc: Option<f64>,
    pub n_docs: usize,
    pub n_labels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub map: f64,
    pub mrr: f64,
    pub recall_at_k: Vec<(usize, f64)>,
    pub ndcg_at_k: Vec<(usize, f64)>,
    pub n_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MetricReport {
    Classification(ClassificationReport),
    Retrieval(RetrievalReport),
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Per-label (TP, FP, FN) counts.
pub fn confusion_counts(predicted: &[Vec<usize>], gold: &[Vec<usize>], n_labels: usize) -> Vec<(usize, usize, usize)> {
    let mut counts = vec![(0, 0, 0); n_labels];
    for (p, g) in predicted.iter().zip(gold) {
        for l in 0..n_labels {
            match (p.contains(&l), g.contains(&l)) {
                (true, true) => counts[l].0 += 1,
                (true, false) => counts[l].1 += 1,
                (false, true) => counts[l].2 += 1,
                (false, false) => {}
            }
        }
    }
    counts
}

pub fn micro_f1(predicted: &[Vec<usize>], gold: &[Vec<usize>], n_labels: usize) -> f64 {
    let (tp, fp, fn_) = confusion_counts(predicted, gold, n_labels)
        .into_iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    f1(tp, fp, fn_)
}

/// Unweighted mean of per-label F1 over all `n_labels`, with 0/0 scored as 0.
pub fn macro_f1(predicted: &[Vec<usize>], gold: &[Vec<usize>], n_labels: usize) -> f64 {
    if n_labels == 0 {
        return 0.0;
    }
    let counts = confusion_counts(predicted, gold, n_labels);
    counts.iter().map(|&(tp, fp, fn_)| f1(tp, fp, fn_)).sum::<f64>() / n_labels as f64
}

/// Fraction of documents whose predicted label set equals the gold set.
pub fn subset_accuracy(predicted: &[Vec<usize>], gold: &[Vec<usize>]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted
        .iter()
        .zip(gold)
        .filter(|(p, g)| {
            let p: BTreeSet<_> = p.iter().collect();
            let g: BTreeSet<_> = g.iter().collect();
            p == g
        })
        .count();
    hits as f64 / predicted.len() as f64
}

/// Mann-Whitney AUC with half credit for ties, computed from midranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs at least one positive and one negative".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                pos_rank_sum += midrank;
            }
        }
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean one-vs-rest AUC over labels that have both classes present.
pub fn mean_label_auc(probs: &[Vec<f64>], gold: &[Vec<usize>], n_labels: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0;
    for l in 0..n_labels {
        let scores: Vec<f64> = probs.iter().map(|p| p[l]).collect();
        let labels: Vec<bool> = gold.iter().map(|g| g.contains(&l)).collect();
        match roc_auc(&scores, &labels) {
            Ok(a) => {
                total += a;
                used += 1;
            }
            Err(Error::Undefined(_)) => warn!("AUC undefined for label {l}: single class present; skipped"),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::Undefined("AUC undefined for every label".into()));
    }
    Ok(total / used as f64)
}

/// Scores aligned predictions against gold labels. Predictions and gold must
/// be in the same document order.
pub fn eval_classification(
    preds: &[DocPrediction],
    gold: &[GoldLabels],
    n_labels: usize,
    task: TaskKind,
) -> Result<ClassificationReport> {
    if preds.is_empty() {
        return Err(Error::Degenerate("no documents to evaluate".into()));
    }
    if preds.len() != gold.len() {
        return Err(Error::DimMismatch {
            expected: gold.len(),
            actual: preds.len(),
        });
    }
    for (position, (p, g)) in preds.iter().zip(gold).enumerate() {
        if p.doc_id != g.doc_id {
            return Err(Error::IdMismatch {
                position,
                predicted: p.doc_id.clone(),
                gold: g.doc_id.clone(),
            });
        }
        if p.probs.len() != n_labels {
            return Err(Error::DimMismatch {
                expected: n_labels,
                actual: p.probs.len(),
            });
        }
    }
    let predicted: Vec<Vec<usize>> = preds.iter().map(|p| p.predicted.clone()).collect();
    let gold_sets: Vec<Vec<usize>> = gold.iter().map(|g| g.labels.clone()).collect();
    let probs: Vec<Vec<f64>> = preds.iter().map(|p| p.probs.clone()).collect();
    let auc = match mean_label_auc(&probs, &gold_sets, n_labels) {
        Ok(a) => Some(a),
        Err(Error::Undefined(msg)) => {
            warn!("{msg}; AUC omitted from the report");
            None
        }
        Err(e) => return Err(e),
    };
    let accuracy = subset_accuracy(&predicted, &gold_sets);
    if task == TaskKind::Singlelabel {
        if let Some(position) = predicted.iter().zip(&gold_sets).position(|(p, g)| p.len() != 1 || g.len() != 1) {
            return Err(Error::InvalidDocument {
                id: gold[position].doc_id.clone(),
                message: "single-label evaluation needs exactly one gold and one predicted label".into(),
            });
        }
    }
    let micro = micro_f1(&predicted, &gold_sets, n_labels);
    Ok(ClassificationReport {
        micro_f1: micro,
        macro_f1: macro_f1(&predicted, &gold_sets, n_labels),
        accuracy,
        auc,
        n_docs: preds.len(),
        n_labels,
    })
}

/// Relevance flags of a ranking, in rank order.
pub fn relevance_flags(list: &RankedList, relevant: &BTreeSet<String>) -> Vec<bool> {
    list.entries.iter().map(|(id, _)| relevant.contains(id)).collect()
}

pub fn average_precision(flags: &[bool], n_relevant: usize) -> f64 {
    if n_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &rel) in flags.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / n_relevant as f64
}

pub fn reciprocal_rank(flags: &[bool]) -> f64 {
    flags.iter().position(|&r| r).map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

pub fn recall_at_k(flags: &[bool], n_relevant: usize, k: usize) -> f64 {
    if n_relevant == 0 {
        return 0.0;
    }
    flags.iter().take(k).filter(|&&r| r).count() as f64 / n_relevant as f64
}

pub fn ndcg_at_k(flags: &[bool], n_relevant: usize, k: usize) -> f64 {
    let gain = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = flags.iter().take(k).enumerate().filter(|(_, &r)| r).map(|(i, _)| gain(i)).sum();
    let idcg: f64 = (0..k.min(n_relevant)).map(gain).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Mean AP, RR, Recall@k and nDCG@k over queries. Queries with an empty
/// judgment set are skipped with a warning.
pub fn eval_retrieval(lists: &[RankedList], judgments: &RelevanceJudgments, ks: &[usize]) -> Result<RetrievalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::config(format!("cutoffs must be non-empty and positive, got {ks:?}")));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let mut n = 0usize;
    let (mut map, mut mrr) = (0.0, 0.0);
    let mut recall = vec![0.0; ks.len()];
    let mut ndcg = vec![0.0; ks.len()];
    for list in lists {
        let relevant = judgments
            .get(&list.query_id)
            .ok_or_else(|| Error::Undefined(format!("no relevance judgments for query {}", list.query_id)))?;
        if relevant.is_empty() {
            warn!("query {} has no relevant documents; excluded", list.query_id);
            continue;
        }
        let flags = relevance_flags(list, relevant);
        n += 1;
        map += average_precision(&flags, relevant.len());
        mrr += reciprocal_rank(&flags);
        for (j, &k) in ks.iter().enumerate() {
            recall[j] += recall_at_k(&flags, relevant.len(), k);
            ndcg[j] += ndcg_at_k(&flags, relevant.len(), k);
        }
    }
    if n == 0 {
        return Err(Error::Undefined("no query has relevance judgments".into()));
    }
    let mean = |v: f64| v / n as f64;
    Ok(RetrievalReport {
        map: mean(map),
        mrr: mean(mrr),
        recall_at_k: ks.iter().zip(&recall).map(|(&k, &r)| (k, mean(r))).collect(),
        ndcg_at_k: ks.iter().zip(&ndcg).map(|(&k, &v)| (k, mean(v))).collect(),
        n_queries: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, probs: Vec<f64>, predicted: Vec<usize>) -> DocPrediction {
        DocPrediction {
            doc_id: id.into(),
            probs,
            predicted,
        }
    }

    fn gold(id: &str, labels: Vec<usize>) -> GoldLabels {
        GoldLabels {
            doc_id: id.into(),
            labels,
        }
    }

    fn list(query: &str, ids: &[&str]) -> RankedList {
        RankedList {
            query_id: query.into(),
            entries: ids.iter().enumerate().map(|(i, id)| (id.to_string(), -(i as f64))).collect(),
        }
    }

    #[test]
    fn hand_counted_multilabel_example() {
        let p = [vec![0], vec![1, 2]];
        let g = [vec![0, 2], vec![1]];
        assert!((micro_f1(&p, &g, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((macro_f1(&p, &g, 3) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(subset_accuracy(&p, &g), 0.0);
    }

    #[test]
    fn absent_label_scores_zero_in_macro() {
        let p = [vec![0], vec![1]];
        let g = [vec![0], vec![1]];
        assert_eq!(macro_f1(&p, &g, 2), 1.0);
        assert!((macro_f1(&p, &g, 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_classification() {
        let preds = [pred("a", vec![0.9, 0.1], vec![0]), pred("b", vec![0.2, 0.7], vec![1])];
        let g = [gold("a", vec![0]), gold("b", vec![1])];
        let r = eval_classification(&preds, &g, 2, TaskKind::Multilabel).unwrap();
        assert_eq!((r.micro_f1, r.macro_f1, r.accuracy, r.auc), (1.0, 1.0, 1.0, Some(1.0)));
    }

    #[test]
    fn id_mismatch_is_an_error() {
        let preds = [pred("a", vec![0.5], vec![0])];
        let g = [gold("b", vec![0])];
        assert!(matches!(
            eval_classification(&preds, &g, 1, TaskKind::Multilabel),
            Err(Error::IdMismatch { .. })
        ));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.8, 0.5, 0.5, 0.2], &[true, false, true, false]).unwrap(), 0.875);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::Undefined(_))));
    }

    #[test]
    fn all_labels_single_class_leaves_auc_empty() {
        let preds = [pred("a", vec![0.9], vec![0]), pred("b", vec![0.7], vec![0])];
        let g = [gold("a", vec![0]), gold("b", vec![0])];
        let r = eval_classification(&preds, &g, 1, TaskKind::Multilabel).unwrap();
        assert_eq!(r.auc, None);
        assert!(mean_label_auc(&[vec![0.9], vec![0.7]], &[vec![0], vec![0]], 1).is_err());
    }

    #[test]
    fn ideal_single_query() {
        let mut j = RelevanceJudgments::new();
        j.insert("q".into(), ["a".to_string()].into());
        let r = eval_retrieval(&[list("q", &["a", "b", "c"])], &j, &[10]).unwrap();
        assert_eq!((r.map, r.mrr, r.recall_at_k[0].1, r.ndcg_at_k[0].1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn interleaved_ranking_example() {
        let flags = [false, true, false, true];
        assert_eq!(reciprocal_rank(&flags), 0.5);
        assert_eq!(average_precision(&flags, 2), 0.5);
        assert_eq!(recall_at_k(&flags, 2, 3), 0.5);
        let l3 = 3f64.log2();
        assert!((ndcg_at_k(&flags, 2, 3) - (1.0 / l3) / (1.0 + 1.0 / l3)).abs() < 1e-12);
        assert!((ndcg_at_k(&flags, 2, 3) - 0.3869).abs() < 1e-4);
    }

    #[test]
    fn empty_judgments_excluded_then_error() {
        let mut j = RelevanceJudgments::new();
        j.insert("q".into(), BTreeSet::new());
        j.insert("r".into(), ["a".to_string()].into());
        let lists = [list("q", &["a"]), list("r", &["b", "a"])];
        let rep = eval_retrieval(&lists, &j, &[1]).unwrap();
        assert_eq!(rep.n_queries, 1);
        assert_eq!(rep.mrr, 0.5);
        assert!(eval_retrieval(&lists[..1], &j, &[1]).is_err());
        assert!(eval_retrieval(&lists, &j, &[]).is_err());
    }
}
