//! Diagonal selective state-space scan.
//!
//! For channel `c`, state index `n` and position `t`:
//!
//! ```text
//! delta_t = softplus(x_t W_delta + b_delta)            (per channel)
//! B_t     = x_t W_B + b_B,   C_t = x_t W_C + b_C       (N-vectors)
//! a       = exp(delta_t[c] * A[c, n])                   zero-order hold
//! h[c, n] = a * h[c, n] + delta_t[c] * x_t[c] * B_t[n]  Euler input step
//! y_t[c]  = <C_t, h[c, :]> + D[c] * x_t[c]
//! out     = y * silu(x W_z)                             when the gate is present
//! ```
//!
//! Masked positions leave the state untouched and emit zeros.
//!
//! The chunked evaluation splits the sequence into blocks of `Q` positions.
//! Inside a block it runs the recurrence from a zero state while tracking the
//! cumulative decay, then adds the decayed carry-in state:
//! `h_t = h_local_t + decay_t * h_in`. The block's last state becomes the next
//! block's carry-in. With `Q = 1` or `Q = T` this reproduces the sequential
//! scan bit for bit.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::{ensure_finite_rows, scaled_uniform, LayerNorm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    /// `d x N`, all entries `<= 0`.
    pub a: Array2<f64>,
    /// `d x d`
    pub delta_proj: Array2<f64>,
    pub delta_bias: Array1<f64>,
    /// `d x N`
    pub b_proj: Array2<f64>,
    pub b_bias: Array1<f64>,
    /// `d x N`
    pub c_proj: Array2<f64>,
    pub c_bias: Array1<f64>,
    /// Skip weights `D`.
    pub skip: Array1<f64>,
    /// `d x d` gate projection; `None` disables gating.
    pub gate: Option<Array2<f64>>,
    pub norm: LayerNorm,
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

fn silu(v: f64) -> f64 {
    v / (1.0 + (-v).exp())
}

/// Inverse of softplus, for placing the initial step size.
pub fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

impl ScanParams {
    pub(crate) fn init(rng: &mut impl Rng, d: usize, n: usize) -> Self {
        let a = Array2::from_shape_fn((d, n), |(_, j)| -((j + 1) as f64));
        let delta_proj = scaled_uniform(rng, d, d, d);
        // Initial step sizes log-uniform in [1e-3, 1e-1].
        let delta_bias = Array1::from_shape_simple_fn(d, || {
            let log_dt = rng.random_range(1e-3f64.ln()..1e-1f64.ln());
            softplus_inverse(log_dt.exp())
        });
        let b_proj = scaled_uniform(rng, d, n, d);
        let c_proj = scaled_uniform(rng, d, n, d);
        let gate = scaled_uniform(rng, d, d, d);
        Self {
            a,
            delta_proj,
            delta_bias,
            b_proj,
            b_bias: Array1::zeros(n),
            c_proj,
            c_bias: Array1::zeros(n),
            skip: Array1::ones(d),
            gate: Some(gate),
            norm: LayerNorm::identity(d),
        }
    }

    pub fn model_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.a.ncols()
    }
}

/// Input-dependent quantities for every position, computed with one GEMM each.
struct Selective {
    delta: Array2<f64>,
    b: Array2<f64>,
    c: Array2<f64>,
    gate: Option<Array2<f64>>,
}

impl Selective {
    fn project(x: &ArrayView2<f64>, p: &ScanParams) -> Self {
        let mut delta = x.dot(&p.delta_proj) + &p.delta_bias;
        delta.mapv_inplace(softplus);
        let b = x.dot(&p.b_proj) + &p.b_bias;
        let c = x.dot(&p.c_proj) + &p.c_bias;
        let gate = p.gate.as_ref().map(|w| x.dot(w).mapv(silu));
        Self { delta, b, c, gate }
    }
}

fn check_inputs(x: &ArrayView2<f64>, p: &ScanParams, mask: &[bool]) -> Result<()> {
    if mask.len() != x.nrows() {
        return Err(Error::DimMismatch {
            expected: x.nrows(),
            actual: mask.len(),
        });
    }
    if x.ncols() != p.model_dim() {
        return Err(Error::DimMismatch {
            expected: p.model_dim(),
            actual: x.ncols(),
        });
    }
    if p.a.iter().any(|&v| v > 0.0) {
        return Err(Error::config("state matrix entries must be <= 0"));
    }
    Ok(())
}

/// Writes `y_t` for all channels from the full state `h` (`d * N`, row-major).
#[inline]
fn emit(t: usize, x: &ArrayView2<f64>, p: &ScanParams, sel: &Selective, h: &[f64], out: &mut Array2<f64>) {
    let n = p.state_dim();
    let c_row = sel.c.row(t);
    let c_row = c_row.as_slice().expect("standard layout");
    for ch in 0..p.model_dim() {
        let state = &h[ch * n..(ch + 1) * n];
        let mut y = 0.0;
        for (ci, hi) in c_row.iter().zip(state) {
            y += ci * hi;
        }
        y += p.skip[ch] * x[[t, ch]];
        if let Some(g) = &sel.gate {
            y *= g[[t, ch]];
        }
        out[[t, ch]] = y;
    }
}

/// One recurrence step `h = a * h + bx` on all channels. When `decay` is given
/// it is multiplied by the same `a`, tracking the product since the last reset.
#[inline]
fn step(t: usize, x: &ArrayView2<f64>, p: &ScanParams, sel: &Selective, h: &mut [f64], decay: Option<&mut [f64]>) {
    let n = p.state_dim();
    let b_row = sel.b.row(t);
    let b_row = b_row.as_slice().expect("standard layout");
    let mut decay = decay;
    for ch in 0..p.model_dim() {
        let dt = sel.delta[[t, ch]];
        let dx = dt * x[[t, ch]];
        let a_row = p.a.row(ch);
        let state = &mut h[ch * n..(ch + 1) * n];
        for (j, hi) in state.iter_mut().enumerate() {
            let a = (dt * a_row[j]).exp();
            *hi = a * *hi + dx * b_row[j];
            if let Some(dec) = decay.as_deref_mut() {
                dec[ch * n + j] *= a;
            }
        }
    }
}

/// Position-by-position selective scan; `O(T d N)` time, `O(d N)` state.
pub fn ssm_scan_sequential(x: ArrayView2<f64>, p: &ScanParams, mask: &[bool]) -> Result<Array2<f64>> {
    check_inputs(&x, p, mask)?;
    let (t_len, d) = x.dim();
    let sel = Selective::project(&x, p);
    let mut h = vec![0.0; d * p.state_dim()];
    let mut out = Array2::zeros((t_len, d));
    for t in 0..t_len {
        if !mask[t] {
            continue;
        }
        step(t, &x, p, &sel, &mut h, None);
        emit(t, &x, p, &sel, &h, &mut out);
        if !out.row(t).iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "scan",
                position: t,
            });
        }
    }
    Ok(out)
}

/// Chunked selective scan with the state carried across chunk boundaries.
pub fn ssm_scan_chunked(x: ArrayView2<f64>, p: &ScanParams, mask: &[bool], chunk_len: usize) -> Result<Array2<f64>> {
    check_inputs(&x, p, mask)?;
    if chunk_len == 0 {
        return Err(Error::config("chunk length must be at least 1"));
    }
    let (t_len, d) = x.dim();
    let n = p.state_dim();
    let sel = Selective::project(&x, p);
    let mut out = Array2::zeros((t_len, d));

    let q = chunk_len.min(t_len.max(1));
    // Per-position local states and cumulative decays of the current chunk.
    let mut local = vec![0.0; q * d * n];
    let mut decay = vec![0.0; q * d * n];
    let mut carry = vec![0.0; d * n];
    let mut h = vec![0.0; d * n];
    let width = d * n;

    for start in (0..t_len).step_by(q) {
        let end = (start + q).min(t_len);
        // Phase 1: recurrence from a zero state, independent of the carry.
        let mut run = vec![0.0; width];
        let mut cum = vec![1.0; width];
        for t in start..end {
            if mask[t] {
                step(t, &x, p, &sel, &mut run, Some(&mut cum));
            }
            let slot = (t - start) * width;
            local[slot..slot + width].copy_from_slice(&run);
            decay[slot..slot + width].copy_from_slice(&cum);
        }
        // Phase 2: fold in the carried state and emit outputs.
        for t in start..end {
            let slot = (t - start) * width;
            for i in 0..width {
                h[i] = local[slot + i] + decay[slot + i] * carry[i];
            }
            if mask[t] {
                emit(t, &x, p, &sel, &h, &mut out);
                if !out.row(t).iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite {
                        stage: "scan",
                        position: t,
                    });
                }
            }
        }
        // Phase 3: the chunk's final state is the next carry-in.
        carry.copy_from_slice(&h);
    }
    Ok(out)
}

/// `LN(x + scan(x))`, sequential when `chunk_len` is `None`.
pub(crate) fn scan_layer(x: &Array2<f64>, p: &ScanParams, mask: &[bool], chunk_len: Option<usize>) -> Result<Array2<f64>> {
    let y = match chunk_len {
        None => ssm_scan_sequential(x.view(), p, mask)?,
        Some(q) => ssm_scan_chunked(x.view(), p, mask, q)?,
    };
    let mut out = y + x;
    p.norm.apply(&mut out);
    ensure_finite_rows(&out, "scan")?;
    Ok(out)
}
