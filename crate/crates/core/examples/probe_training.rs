//! Trains a linear probe on fixed embeddings, checks the analytic gradient
//! against finite differences and aggregates window predictions.
//!
//! ```text
//! cargo run --example probe_training
//! ```

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use longdoc_bench::corpus::TaskKind;
use longdoc_bench::heads::{
    aggregate_multilabel, probe_gradient, probe_loss, train_probe, window_predict, Example, ProbeHyper,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // label j is present when feature j is positive
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let examples: Vec<Example> = (0..300)
        .map(|_| {
            let x = Array1::from_shape_simple_fn(6, || rng.random_range(-1.0..1.0));
            let gold = (0..3).filter(|&j| x[j] > 0.0).collect();
            Example { embedding: x, gold }
        })
        .collect();
    let hyper = ProbeHyper { epochs: 100, ..ProbeHyper::default() };
    let trained = train_probe(&examples, TaskKind::Multilabel, 3, &hyper)?;
    let trace = &trained.loss_trace;
    println!("loss: epoch 1 {:.4}, epoch {} {:.4}", trace[0], trace.len(), trace[trace.len() - 1]);

    let probe = &trained.weights;
    let grad = probe_gradient(probe, &examples[..8], hyper.l2)?;
    let h = 1e-5;
    let (mut up, mut down) = (probe.clone(), probe.clone());
    up.w[[0, 0]] += h;
    down.w[[0, 0]] -= h;
    let numeric = (probe_loss(&up, &examples[..8], hyper.l2)? - probe_loss(&down, &examples[..8], hyper.l2)?) / (2.0 * h);
    println!("dL/dW[0,0]: analytic {:.8}, central difference {:.8}", grad.w[[0, 0]], numeric);

    let windows: Vec<Vec<f64>> = examples[..3]
        .iter()
        .map(|e| window_predict(e.embedding.view(), probe))
        .collect::<Result<_, _>>()?;
    let doc = aggregate_multilabel("doc", &windows, 0.5)?;
    println!("mean of 3 window probabilities {:.3?} -> labels {:?}", doc.probs, doc.predicted);
    Ok(())
}
