//! Linear probe over pooled embeddings and window-to-document aggregation.
//!
//! Multi-label documents average per-window sigmoid probabilities and then
//! threshold; single-label documents average per-window logits and then apply
//! softmax.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskKind;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWeights {
    /// `n_labels x d`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub task: TaskKind,
}

impl ProbeWeights {
    pub fn zeros(n_labels: usize, dim: usize, task: TaskKind) -> Self {
        Self {
            w: Array2::zeros((n_labels, dim)),
            b: Array1::zeros(n_labels),
            task,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    fn logits(&self, e: ArrayView1<f64>) -> Result<Array1<f64>> {
        if e.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                actual: e.len(),
            });
        }
        Ok(self.w.dot(&e) + &self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPrediction {
    pub doc_id: String,
    pub probs: Vec<f64>,
    /// Sorted label indices.
    pub predicted: Vec<usize>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Sigmoid probabilities (multi-label) or raw logits (single-label).
pub fn window_predict(embedding: ArrayView1<f64>, probe: &ProbeWeights) -> Result<Vec<f64>> {
    let logits = probe.logits(embedding)?;
    Ok(match probe.task {
        TaskKind::Multilabel => logits.iter().map(|&z| sigmoid(z)).collect(),
        _ => logits.to_vec(),
    })
}

fn elementwise_mean(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Degenerate("cannot aggregate zero windows".into()))?;
    let mut acc = vec![0.0; first.len()];
    for row in rows {
        if row.len() != acc.len() {
            return Err(Error::DimMismatch {
                expected: acc.len(),
                actual: row.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Mean window probability per label; labels with mean `>= threshold` are predicted.
pub fn aggregate_multilabel(doc_id: &str, window_probs: &[Vec<f64>], threshold: f64) -> Result<DocPrediction> {
    let probs = elementwise_mean(window_probs)?;
    let predicted = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(DocPrediction {
        doc_id: doc_id.to_string(),
        probs,
        predicted,
    })
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax of the mean window logits.
pub fn aggregate_singlelabel(doc_id: &str, window_logits: &[Vec<f64>]) -> Result<DocPrediction> {
    let mean = elementwise_mean(window_logits)?;
    let probs = softmax(&mean);
    Ok(DocPrediction {
        doc_id: doc_id.to_string(),
        predicted: vec![argmax(&mean)],
        probs,
    })
}

/// One training example: an embedding and its gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub embedding: Array1<f64>,
    pub gold: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        Self {
            lr: 0.5,
            epochs: 200,
            batch: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGradient {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Per-example loss gradient w.r.t. the logits, and the loss itself.
fn logit_residual(probe: &ProbeWeights, ex: &Example) -> Result<(Array1<f64>, f64)> {
    let z = probe.logits(ex.embedding.view())?;
    let k = probe.n_labels();
    if let Some(&bad) = ex.gold.iter().find(|&&g| g >= k) {
        return Err(Error::DimMismatch {
            expected: k,
            actual: bad + 1,
        });
    }
    match probe.task {
        TaskKind::Multilabel => {
            let mut target = vec![0.0; k];
            for &g in &ex.gold {
                target[g] = 1.0;
            }
            let mut loss = 0.0;
            let resid = Array1::from_iter(z.iter().zip(&target).map(|(&zi, &yi)| {
                // BCE with logits: softplus(z) - y z
                loss += if zi > 0.0 { zi + (-zi).exp().ln_1p() } else { zi.exp().ln_1p() } - yi * zi;
                sigmoid(zi) - yi
            }));
            Ok((resid, loss))
        }
        _ => {
            let gold = *ex
                .gold
                .first()
                .ok_or_else(|| Error::Degenerate("single-label example without a label".into()))?;
            let probs = softmax(z.as_slice().expect("contiguous"));
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let mut resid = Array1::from(probs);
            resid[gold] -= 1.0;
            Ok((resid, lse - z[gold]))
        }
    }
}

/// Mean cross-entropy over the batch plus `l2 / 2 * ||W||^2` (bias unpenalized).
pub fn probe_loss(probe: &ProbeWeights, batch: &[Example], l2: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let mut total = 0.0;
    for ex in batch {
        total += logit_residual(probe, ex)?.1;
    }
    Ok(total / batch.len() as f64 + 0.5 * l2 * probe.w.iter().map(|v| v * v).sum::<f64>())
}

/// Analytic gradient of [`probe_loss`].
pub fn probe_gradient(probe: &ProbeWeights, batch: &[Example], l2: f64) -> Result<ProbeGradient> {
    if batch.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let mut gw = Array2::zeros(probe.w.raw_dim());
    let mut gb = Array1::zeros(probe.n_labels());
    for ex in batch {
        let (resid, _) = logit_residual(probe, ex)?;
        let outer = resid
            .view()
            .insert_axis(Axis(1))
            .dot(&ex.embedding.view().insert_axis(Axis(0)));
        gw += &outer;
        gb += &resid;
    }
    let n = batch.len() as f64;
    gw /= n;
    gb /= n;
    gw.scaled_add(l2, &probe.w);
    Ok(ProbeGradient { w: gw, b: gb })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProbe {
    pub weights: ProbeWeights,
    /// Mean mini-batch loss (measured before each step) for every epoch.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch gradient descent from zero weights; batches are drawn from a
/// seeded shuffle every epoch.
pub fn train_probe(examples: &[Example], task: TaskKind, n_labels: usize, hyper: &ProbeHyper) -> Result<TrainedProbe> {
    if examples.len() < 2 {
        return Err(Error::Degenerate(format!(
            "probe training needs at least 2 examples, got {}",
            examples.len()
        )));
    }
    let mut present: Vec<usize> = examples.iter().flat_map(|e| e.gold.iter().copied()).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 || n_labels < 2 {
        return Err(Error::Degenerate(format!(
            "probe training needs at least 2 distinct labels, found {}",
            present.len()
        )));
    }
    if hyper.batch == 0 || hyper.epochs == 0 || !(hyper.lr > 0.0) || hyper.l2 < 0.0 {
        return Err(Error::config(format!("invalid probe hyperparameters {hyper:?}")));
    }
    let dim = examples[0].embedding.len();
    let mut probe = ProbeWeights::zeros(n_labels, dim, task);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs);
    let mut batch: Vec<Example> = Vec::with_capacity(hyper.batch.min(examples.len()));
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0;
        for chunk in order.chunks(hyper.batch) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            epoch_loss += probe_loss(&probe, &batch, hyper.l2)?;
            n_batches += 1;
            let grad = probe_gradient(&probe, &batch, hyper.l2)?;
            probe.w.scaled_add(-hyper.lr, &grad.w);
            probe.b.scaled_add(-hyper.lr, &grad.b);
        }
        loss_trace.push(epoch_loss / n_batches as f64);
    }
    if probe.w.iter().chain(probe.b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "probe training",
            position: 0,
        });
    }
    Ok(TrainedProbe {
        weights: probe,
        loss_trace,
    })
}

/// Per-feature mean and standard deviation of the embeddings; constant
/// features get deviation 1.
pub fn feature_moments(examples: &[Example]) -> Result<(Array1<f64>, Array1<f64>)> {
    let first = examples
        .first()
        .ok_or_else(|| Error::Degenerate("no examples".into()))?;
    let dim = first.embedding.len();
    let n = examples.len() as f64;
    let mut mean = Array1::zeros(dim);
    for ex in examples {
        if ex.embedding.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: ex.embedding.len(),
            });
        }
        mean += &ex.embedding;
    }
    mean /= n;
    let mut var = Array1::<f64>::zeros(dim);
    for ex in examples {
        let c = &ex.embedding - &mean;
        var += &(&c * &c);
    }
    let std = (var / n).mapv(|v| if v > 1e-24 { v.sqrt() } else { 1.0 });
    Ok((mean, std))
}

/// Trains on z-scored embeddings, then folds the scaling into the returned
/// weights so they apply to raw embeddings: `W' = W / std`, `b' = b - W' mean`.
pub fn train_probe_standardized(
    examples: &[Example],
    task: TaskKind,
    n_labels: usize,
    hyper: &ProbeHyper,
) -> Result<TrainedProbe> {
    let (mean, std) = feature_moments(examples)?;
    let scaled: Vec<Example> = examples
        .iter()
        .map(|ex| Example {
            embedding: (&ex.embedding - &mean) / &std,
            gold: ex.gold.clone(),
        })
        .collect();
    let mut trained = train_probe(&scaled, task, n_labels, hyper)?;
    let w = &trained.weights.w / &std.view().insert_axis(Axis(0));
    trained.weights.b = &trained.weights.b - &w.dot(&mean);
    trained.weights.w = w;
    Ok(trained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn ex(v: &[f64], gold: &[usize]) -> Example {
        Example {
            embedding: Array1::from(v.to_vec()),
            gold: gold.to_vec(),
        }
    }

    #[test]
    fn zero_probe_multilabel_is_half() {
        let p = ProbeWeights::zeros(3, 4, TaskKind::Multilabel);
        assert_eq!(window_predict(array![1.0, 2.0, 3.0, 4.0].view(), &p).unwrap(), [0.5; 3]);
    }

    #[test]
    fn zero_probe_singlelabel_uniform_after_softmax() {
        let p = ProbeWeights::zeros(4, 2, TaskKind::Singlelabel);
        let logits = window_predict(array![0.3, -1.0].view(), &p).unwrap();
        let doc = aggregate_singlelabel("d", &[logits]).unwrap();
        for prob in doc.probs {
            assert!((prob - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn window_predict_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = ProbeWeights::zeros(3, 5, TaskKind::Singlelabel);
        p.w.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        p.b.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let e: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = window_predict(Array1::from(e.clone()).view(), &p).unwrap();
        for l in 0..3 {
            let mut z = p.b[l];
            for j in 0..5 {
                z += p.w[[l, j]] * e[j];
            }
            assert!((got[l] - z).abs() < 1e-9);
        }
        assert!(window_predict(array![1.0].view(), &p).is_err());
    }

    #[test]
    fn multilabel_mean_then_threshold() {
        let doc = aggregate_multilabel("d", &[vec![0.9, 0.1], vec![0.5, 0.5]], 0.5).unwrap();
        assert!((doc.probs[0] - 0.7).abs() < 1e-15 && (doc.probs[1] - 0.3).abs() < 1e-15);
        assert_eq!(doc.predicted, [0]);
        let tie = aggregate_multilabel("d", &[vec![0.5, 0.49]], 0.5).unwrap();
        assert_eq!(tie.predicted, [0]);
        assert!(aggregate_multilabel("d", &[], 0.5).is_err());
        assert!(aggregate_multilabel("d", &[vec![0.1], vec![0.1, 0.2]], 0.5).is_err());
    }

    #[test]
    fn single_window_is_identity() {
        let w = vec![0.2, 0.9, 0.4];
        assert_eq!(aggregate_multilabel("d", &[w.clone()], 0.5).unwrap().probs, w);
        let doc = aggregate_singlelabel("d", &[w.clone()]).unwrap();
        assert_eq!(doc.probs, softmax(&w));
    }

    #[test]
    fn singlelabel_softmax_values() {
        let doc = aggregate_singlelabel("d", &[vec![2.0, 0.0]]).unwrap();
        let e2 = 2f64.exp();
        assert!((doc.probs[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        assert!((doc.probs[0] - 0.8808).abs() < 1e-4);
        assert!((doc.probs[1] - 0.1192).abs() < 1e-4);
        assert_eq!(doc.predicted, [0]);
    }

    #[test]
    fn opposite_windows_tie_to_label_zero() {
        let doc = aggregate_singlelabel("d", &[vec![1.7, -1.7], vec![-1.7, 1.7]]).unwrap();
        assert_eq!(doc.probs, [0.5, 0.5]);
        assert_eq!(doc.predicted, [0]);
    }

    #[test]
    fn logit_shift_invariance() {
        let windows = vec![vec![0.3, 1.2, -0.4], vec![2.0, -1.0, 0.5]];
        let shifted: Vec<Vec<f64>> = windows.iter().map(|w| w.iter().map(|v| v + 17.5).collect()).collect();
        let a = aggregate_singlelabel("d", &windows).unwrap();
        let b = aggregate_singlelabel("d", &shifted).unwrap();
        assert_eq!(a.predicted, b.predicted);
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_first_step_bias_gradient_is_zero() {
        let batch = [ex(&[1.0, 2.0], &[0]), ex(&[-1.0, -2.0], &[1])];
        let p = ProbeWeights::zeros(2, 2, TaskKind::Singlelabel);
        let g = probe_gradient(&p, &batch, 0.0).unwrap();
        assert!(g.b.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn saturated_perfect_predictions_zero_gradient() {
        let batch = [ex(&[1.0, 0.0], &[0]), ex(&[0.0, 1.0], &[1])];
        let mut p = ProbeWeights::zeros(2, 2, TaskKind::Singlelabel);
        p.w = array![[40.0, -40.0], [-40.0, 40.0]];
        let g = probe_gradient(&p, &batch, 0.0).unwrap();
        assert!(g.w.iter().chain(g.b.iter()).all(|v| v.abs() < 1e-8));
        let mut m = ProbeWeights::zeros(2, 2, TaskKind::Multilabel);
        m.w = p.w.clone();
        let g = probe_gradient(&m, &batch, 0.0).unwrap();
        assert!(g.w.iter().chain(g.b.iter()).all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch: Vec<Example> = (0..5)
            .map(|i| ex(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], &[i % 3]))
            .collect();
        let mut p = ProbeWeights::zeros(3, 2, TaskKind::Singlelabel);
        p.w.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let doubled: Vec<Example> = batch.iter().chain(batch.iter()).cloned().collect();
        let a = probe_gradient(&p, &batch, 0.1).unwrap();
        let b = probe_gradient(&p, &doubled, 0.1).unwrap();
        for (x, y) in a.w.iter().zip(b.w.iter()).chain(a.b.iter().zip(b.b.iter())) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_training_sets() {
        let hyper = ProbeHyper::default();
        assert!(train_probe(&[ex(&[1.0], &[0])], TaskKind::Singlelabel, 2, &hyper).is_err());
        let same = [ex(&[1.0], &[0]), ex(&[2.0], &[0])];
        assert!(matches!(
            train_probe(&same, TaskKind::Singlelabel, 2, &hyper),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn standardized_weights_apply_to_raw_embeddings() {
        let data: Vec<Example> = (0..30)
            .map(|i| ex(&[100.0 + i as f64 * 0.01, 0.5 * (i % 4) as f64 - 3.0], &[usize::from(i >= 15)]))
            .collect();
        let hyper = ProbeHyper {
            epochs: 50,
            ..ProbeHyper::default()
        };
        let trained = train_probe_standardized(&data, TaskKind::Singlelabel, 2, &hyper).unwrap();
        let (mean, std) = feature_moments(&data).unwrap();
        let mut inner = trained.weights.clone();
        inner.w = &trained.weights.w * &std.view().insert_axis(Axis(0));
        inner.b = &trained.weights.b + &trained.weights.w.dot(&mean);
        for e in &data {
            let raw = window_predict(e.embedding.view(), &trained.weights).unwrap();
            let z = (&e.embedding - &mean) / &std;
            let scaled = window_predict(z.view(), &inner).unwrap();
            for (a, b) in raw.iter().zip(&scaled) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let correct = data
            .iter()
            .filter(|e| argmax(&window_predict(e.embedding.view(), &trained.weights).unwrap()) == e.gold[0])
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<Example> = (0..20)
            .map(|i| ex(&[i as f64 / 10.0 - 1.0, (i % 3) as f64], &[usize::from(i >= 10)]))
            .collect();
        let hyper = ProbeHyper {
            batch: 4,
            epochs: 20,
            seed: 5,
            ..ProbeHyper::default()
        };
        let a = train_probe(&data, TaskKind::Singlelabel, 2, &hyper).unwrap();
        let b = train_probe(&data, TaskKind::Singlelabel, 2, &hyper).unwrap();
        assert_eq!(a, b);
    }
}
