use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use longdoc_bench::corpus::TaskKind;
use longdoc_bench::heads::{
    aggregate_multilabel, aggregate_singlelabel, sigmoid, train_probe, window_predict, Example, ProbeHyper,
};
use longdoc_bench::metrics::{eval_retrieval, micro_f1, ndcg_at_k, recall_at_k, subset_accuracy, RelevanceJudgments};
use longdoc_bench::retrieval::RankedList;

fn window_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..6).prop_flat_map(|(w, k)| prop::collection::vec(prop::collection::vec(-4.0f64..4.0, k), w))
}

fn ranked_lists() -> impl Strategy<Value = (Vec<RankedList>, RelevanceJudgments)> {
    prop::collection::vec((prop::collection::vec(any::<bool>(), 1..12), any::<u64>()), 1..8).prop_map(|queries| {
        let mut lists = Vec::new();
        let mut judgments = BTreeMap::new();
        for (qi, (flags, salt)) in queries.into_iter().enumerate() {
            let qid = format!("q{qi}");
            let mut rel = BTreeSet::new();
            let entries = flags
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let id = format!("c{}_{}", salt % 97, i);
                    if r {
                        rel.insert(id.clone());
                    }
                    (id, 1.0 - i as f64 / 100.0)
                })
                .collect();
            if rel.is_empty() {
                rel.insert("missing".to_string());
            }
            judgments.insert(qid.clone(), rel);
            lists.push(RankedList { query_id: qid, entries });
        }
        (lists, judgments)
    })
}

proptest! {
    #[test]
    fn aggregation_ignores_window_order(windows in window_matrix(), rot in 0usize..6) {
        let mut rotated = windows.clone();
        let r = rot % rotated.len();
        rotated.rotate_left(r);
        let probs: Vec<Vec<f64>> = windows.iter().map(|w| w.iter().map(|&z| sigmoid(z)).collect()).collect();
        let probs_rot: Vec<Vec<f64>> = rotated.iter().map(|w| w.iter().map(|&z| sigmoid(z)).collect()).collect();
        let a = aggregate_multilabel("d", &probs, 0.5).unwrap();
        let b = aggregate_multilabel("d", &probs_rot, 0.5).unwrap();
        prop_assert!(a.probs.iter().zip(&b.probs).all(|(x, y)| (x - y).abs() < 1e-12));
        let a = aggregate_singlelabel("d", &windows).unwrap();
        let b = aggregate_singlelabel("d", &rotated).unwrap();
        prop_assert!(a.probs.iter().zip(&b.probs).all(|(x, y)| (x - y).abs() < 1e-12));
        prop_assert_eq!(a.predicted, b.predicted);
    }

    #[test]
    fn retrieval_metrics_ignore_query_order_and_ids((lists, judgments) in ranked_lists()) {
        let ks = [1, 5, 10];
        let base = eval_retrieval(&lists, &judgments, &ks).unwrap();
        let mut reversed = lists.clone();
        reversed.reverse();
        let rev = eval_retrieval(&reversed, &judgments, &ks).unwrap();
        prop_assert!((base.map - rev.map).abs() < 1e-12 && (base.mrr - rev.mrr).abs() < 1e-12);

        let rename = |s: &str| format!("renamed-{s}");
        let renamed: Vec<RankedList> = lists
            .iter()
            .map(|l| RankedList {
                query_id: rename(&l.query_id),
                entries: l.entries.iter().map(|(id, s)| (rename(id), *s)).collect(),
            })
            .collect();
        let renamed_j: RelevanceJudgments = judgments
            .iter()
            .map(|(q, r)| (rename(q), r.iter().map(|id| rename(id)).collect()))
            .collect();
        let ren = eval_retrieval(&renamed, &renamed_j, &ks).unwrap();
        prop_assert_eq!(base, ren);
    }

    #[test]
    fn recall_is_monotone_in_k(flags in prop::collection::vec(any::<bool>(), 1..30)) {
        let n_rel = flags.iter().filter(|&&f| f).count().max(1);
        let mut last = 0.0;
        for k in 1..=flags.len() + 2 {
            let r = recall_at_k(&flags, n_rel, k);
            prop_assert!(r >= last && r <= 1.0);
            last = r;
        }
    }

    #[test]
    fn ndcg_is_one_exactly_for_ideal_prefixes(flags in prop::collection::vec(any::<bool>(), 1..12), k in 1usize..14) {
        let n_rel = flags.iter().filter(|&&f| f).count();
        prop_assume!(n_rel > 0);
        let top = k.min(flags.len());
        let ideal_prefix = flags[..n_rel.min(top)].iter().all(|&f| f);
        let v = ndcg_at_k(&flags, n_rel, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        prop_assert_eq!((v - 1.0).abs() < 1e-12, ideal_prefix);
    }

    #[test]
    fn single_label_micro_f1_is_accuracy(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
        let p: Vec<Vec<usize>> = pairs.iter().map(|x| vec![x.0]).collect();
        let g: Vec<Vec<usize>> = pairs.iter().map(|x| vec![x.1]).collect();
        prop_assert!((micro_f1(&p, &g, 4) - subset_accuracy(&p, &g)).abs() < 1e-12);
    }
}

fn separable(n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let x = (i as f64 / n as f64) * 2.0 - 1.0 + if i < n / 2 { -0.2 } else { 0.2 };
            let y = ((i * 7) % 5) as f64 / 5.0 - 0.5;
            Example {
                embedding: Array1::from(vec![x, y]),
                gold: vec![usize::from(i >= n / 2)],
            }
        })
        .collect()
}

fn full_batch(lr: f64, epochs: usize, l2: f64) -> ProbeHyper {
    ProbeHyper { lr, epochs, batch: usize::MAX, l2, seed: 3 }
}

#[test]
fn separable_problem_is_solved_like_reference_descent() {
    let data = separable(40);
    let hyper = full_batch(0.5, 300, 0.0);
    let trained = train_probe(&data, TaskKind::Singlelabel, 2, &hyper).unwrap();

    // plain softmax regression by full-batch gradient descent
    let (mut w, mut b) = (Array2::<f64>::zeros((2, 2)), Array1::<f64>::zeros(2));
    for _ in 0..hyper.epochs {
        let (mut gw, mut gb) = (Array2::<f64>::zeros((2, 2)), Array1::<f64>::zeros(2));
        for ex in &data {
            let z = w.dot(&ex.embedding) + &b;
            let m = z.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let e = z.mapv(|v| (v - m).exp());
            let mut p = &e / e.sum();
            p[ex.gold[0]] -= 1.0;
            for i in 0..2 {
                for j in 0..2 {
                    gw[[i, j]] += p[i] * ex.embedding[j];
                }
            }
            gb += &p;
        }
        let n = data.len() as f64;
        w.scaled_add(-hyper.lr / n, &gw);
        b.scaled_add(-hyper.lr / n, &gb);
    }
    assert!((&trained.weights.w - &w).iter().all(|d| d.abs() < 1e-9));
    assert!((&trained.weights.b - &b).iter().all(|d| d.abs() < 1e-9));

    let correct = data
        .iter()
        .filter(|ex| {
            let p = window_predict(ex.embedding.view(), &trained.weights).unwrap();
            usize::from(p[1] > p[0]) == ex.gold[0]
        })
        .count();
    assert_eq!(correct, data.len());
}

#[test]
fn stronger_l2_shrinks_weights() {
    let data = separable(40);
    let norms: Vec<f64> = [0.01, 0.1, 1.0]
        .iter()
        .map(|&l2| {
            let t = train_probe(&data, TaskKind::Multilabel, 2, &full_batch(0.5, 400, l2)).unwrap();
            t.weights.w.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn full_batch_loss_never_increases() {
    for task in [TaskKind::Multilabel, TaskKind::Singlelabel] {
        let t = train_probe(&separable(30), task, 2, &full_batch(0.2, 100, 0.01)).unwrap();
        assert!(t.loss_trace.windows(2).all(|p| p[1] <= p[0] + 1e-12), "{task:?}");
    }
}
