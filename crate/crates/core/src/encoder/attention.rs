use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::{ensure_finite_rows, scaled_uniform, LayerNorm};
use crate::error::{Error, Result};

/// One post-norm transformer encoder block. Projection matrices are stored
/// input-major, so a projection is `x.dot(&w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub n_heads: usize,
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub norm1: LayerNorm,
    /// `d x 4d`
    pub ff_in: Array2<f64>,
    pub ff_in_bias: Array1<f64>,
    /// `4d x d`
    pub ff_out: Array2<f64>,
    pub ff_out_bias: Array1<f64>,
    pub norm2: LayerNorm,
}

impl AttentionParams {
    pub(crate) fn init(rng: &mut impl Rng, d: usize, n_heads: usize) -> Self {
        let wq = scaled_uniform(rng, d, d, d);
        let wk = scaled_uniform(rng, d, d, d);
        let wv = scaled_uniform(rng, d, d, d);
        let wo = scaled_uniform(rng, d, d, d);
        let ff_in = scaled_uniform(rng, d, 4 * d, d);
        let ff_out = scaled_uniform(rng, 4 * d, d, 4 * d);
        Self {
            n_heads,
            wq,
            wk,
            wv,
            wo,
            norm1: LayerNorm::identity(d),
            ff_in,
            ff_in_bias: Array1::zeros(4 * d),
            ff_out,
            ff_out_bias: Array1::zeros(d),
            norm2: LayerNorm::identity(d),
        }
    }

    pub fn model_dim(&self) -> usize {
        self.wq.nrows()
    }
}

/// Softmax over the valid entries of `row`; masked entries get probability 0,
/// which is the limit of a `-inf` score.
fn masked_softmax(row: &mut [f64], mask: &[bool]) {
    let max = row
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (v, &m) in row.iter_mut().zip(mask) {
        *v = if m { (*v - max).exp() } else { 0.0 };
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Multi-head scaled dot-product attention before the output projection:
/// per head `softmax(Q K^T / sqrt(d / n_heads)) V`, heads concatenated.
///
/// When `probs` is given, each head's `T x T` weight matrix is pushed to it.
pub fn attention_context(
    x: &Array2<f64>,
    params: &AttentionParams,
    mask: &[bool],
    mut probs: Option<&mut Vec<Array2<f64>>>,
) -> Result<Array2<f64>> {
    let (t, d) = x.dim();
    if mask.len() != t {
        return Err(Error::DimMismatch {
            expected: t,
            actual: mask.len(),
        });
    }
    if params.model_dim() != d {
        return Err(Error::DimMismatch {
            expected: params.model_dim(),
            actual: d,
        });
    }
    let heads = params.n_heads;
    let head_dim = d / heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let q = x.dot(&params.wq) * scale;
    let k = x.dot(&params.wk);
    let v = x.dot(&params.wv);

    let mut ctx = Array2::zeros((t, d));
    for h in 0..heads {
        let cols = s![.., h * head_dim..(h + 1) * head_dim];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        for mut row in scores.axis_iter_mut(Axis(0)) {
            masked_softmax(row.as_slice_mut().expect("standard layout"), mask);
        }
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        if let Some(sink) = probs.as_deref_mut() {
            sink.push(scores);
        }
    }
    Ok(ctx)
}

fn gelu(v: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
    0.5 * v * (1.0 + (C * (v + 0.044_715 * v * v * v)).tanh())
}

/// `x1 = LN(x + MHA(x) W_o)`, `out = LN(x1 + FFN(x1))`.
pub fn self_attention_layer(
    x: &Array2<f64>,
    params: &AttentionParams,
    mask: &[bool],
    max_context: Option<usize>,
) -> Result<Array2<f64>> {
    let t = x.nrows();
    if let Some(limit) = max_context {
        if t > limit {
            return Err(Error::ContextOverflow { len: t, limit });
        }
    }
    let ctx = attention_context(x, params, mask, None)?;
    let mut x1 = x + &ctx.dot(&params.wo);
    params.norm1.apply(&mut x1);

    let mut hidden = x1.dot(&params.ff_in) + &params.ff_in_bias;
    hidden.mapv_inplace(gelu);
    let mut out = hidden.dot(&params.ff_out) + &params.ff_out_bias;
    drop(hidden);
    out += &x1;
    params.norm2.apply(&mut out);
    ensure_finite_rows(&out, "attention")?;
    Ok(out)
}
