//! Toy-scale sequence encoders behind one embedding and pooling interface.
//!
//! Two layer families are provided:
//!
//! * [`attention`]: post-norm bidirectional multi-head self-attention with a
//!   GELU feed-forward block. Cost and score memory are quadratic in the window.
//! * [`scan`]: diagonal selective state-space scan (input-dependent step size,
//!   input and output projections, SiLU gate), evaluated either position by
//!   position or chunk by chunk with the state carried across chunk boundaries.
//!   Cost and memory are linear in the sequence length.
//!
//! All encoders are forward-only. Weights are drawn once from the config seed.

pub mod attention;
mod io;
pub mod scan;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::stable_hash64;

pub use attention::{attention_context, self_attention_layer, AttentionParams};
pub use io::{load_weights, save_weights};
pub use scan::{ssm_scan_chunked, ssm_scan_sequential, ScanParams};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderKind {
    #[serde(rename = "attention")]
    Attention,
    #[serde(rename = "scan")]
    ScanSequential,
    #[serde(rename = "scan-chunked")]
    ScanChunked,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Attention => "attention",
            EncoderKind::ScanSequential => "scan",
            EncoderKind::ScanChunked => "scan-chunked",
        }
    }

    pub fn is_scan(self) -> bool {
        !matches!(self, EncoderKind::Attention)
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(EncoderKind::Attention),
            "scan" | "scan-sequential" => Ok(EncoderKind::ScanSequential),
            "scan-chunked" => Ok(EncoderKind::ScanChunked),
            other => Err(Error::config(format!("unknown encoder kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub vocab_size: usize,
    pub model_dim: usize,
    pub n_layers: usize,
    #[serde(default = "default_heads")]
    pub n_heads: usize,
    #[serde(default = "default_state_dim")]
    pub state_dim: usize,
    #[serde(default = "default_chunk")]
    pub chunk_len: usize,
    /// Hard token cap; `None` is unbounded ("Flex").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_heads() -> usize {
    4
}

fn default_state_dim() -> usize {
    16
}

fn default_chunk() -> usize {
    64
}

impl EncoderConfig {
    pub fn attention(vocab_size: usize, model_dim: usize, n_layers: usize, n_heads: usize) -> Self {
        Self {
            kind: EncoderKind::Attention,
            vocab_size,
            model_dim,
            n_layers,
            n_heads,
            state_dim: default_state_dim(),
            chunk_len: default_chunk(),
            max_context: Some(512),
            seed: 0,
        }
    }

    pub fn scan(vocab_size: usize, model_dim: usize, n_layers: usize, state_dim: usize) -> Self {
        Self {
            kind: EncoderKind::ScanSequential,
            vocab_size,
            model_dim,
            n_layers,
            n_heads: default_heads(),
            state_dim,
            chunk_len: default_chunk(),
            max_context: None,
            seed: 0,
        }
    }

    pub fn scan_chunked(
        vocab_size: usize,
        model_dim: usize,
        n_layers: usize,
        state_dim: usize,
        chunk_len: usize,
    ) -> Self {
        Self {
            kind: EncoderKind::ScanChunked,
            chunk_len,
            ..Self::scan(vocab_size, model_dim, n_layers, state_dim)
        }
    }

    pub fn with_max_context(mut self, max_context: Option<usize>) -> Self {
        self.max_context = max_context;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_dim < 2 {
            return Err(Error::config("model_dim must be at least 2"));
        }
        if self.n_layers == 0 {
            return Err(Error::config("n_layers must be at least 1"));
        }
        if self.vocab_size <= crate::tokenize::N_RESERVED {
            return Err(Error::config("vocab_size must exceed the 4 reserved ids"));
        }
        if self.max_context == Some(0) {
            return Err(Error::config("max_context must be positive"));
        }
        match self.kind {
            EncoderKind::Attention => {
                if self.n_heads == 0 || !self.model_dim.is_multiple_of(self.n_heads) {
                    return Err(Error::config(format!(
                        "model_dim {} is not divisible by n_heads {}",
                        self.model_dim, self.n_heads
                    )));
                }
            }
            EncoderKind::ScanSequential | EncoderKind::ScanChunked => {
                if self.state_dim == 0 {
                    return Err(Error::config("state_dim must be at least 1"));
                }
                if self.kind == EncoderKind::ScanChunked && self.chunk_len == 0 {
                    return Err(Error::config("chunk_len must be at least 1"));
                }
            }
        }
        Ok(())
    }

    /// Row label for reports: kind plus context cap, e.g. `attention-512`.
    pub fn label(&self) -> String {
        match self.max_context {
            Some(cap) => format!("{}-{cap}", self.kind),
            None => self.kind.to_string(),
        }
    }

    /// Stable identifier of the architecture and seed.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("config serializes");
        stable_hash64(&[b"encoder-config", &json])
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Peak working-set bytes of one `encode` call on `len` positions: the
    /// activation buffers live at the most expensive step of a layer.
    pub fn footprint_bytes(&self, len: usize) -> usize {
        let (t, d) = (len, self.model_dim);
        let floats = match self.kind {
            // x, q, k, v, context, one head's score matrix; the FFN step needs
            // x, the 4d hidden and its output, which is never larger.
            EncoderKind::Attention => t.saturating_mul(t).saturating_add(6 * t * d),
            // x, delta, gate, output, residual, B and C rows, plus the state.
            EncoderKind::ScanSequential => 5 * t * d + 2 * t * self.state_dim + d * self.state_dim,
            EncoderKind::ScanChunked => {
                let q = self.chunk_len.min(t.max(1));
                5 * t * d + 2 * t * self.state_dim + d * self.state_dim * (1 + 2 * q)
            }
        };
        floats.saturating_mul(std::mem::size_of::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub bias: Array1<f64>,
}

impl LayerNorm {
    pub fn identity(d: usize) -> Self {
        Self {
            gain: Array1::ones(d),
            bias: Array1::zeros(d),
        }
    }

    pub fn apply(&self, x: &mut Array2<f64>) {
        let d = x.ncols() as f64;
        for mut row in x.rows_mut() {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for ((v, g), b) in row.iter_mut().zip(&self.gain).zip(&self.bias) {
                *v = (*v - mean) * inv * g + b;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Attention(AttentionParams),
    Scan(ScanParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    /// `vocab_size x model_dim` token embedding table.
    pub embedding: Array2<f64>,
    pub layers: Vec<LayerWeights>,
}

/// Symmetric uniform draws with variance `1 / fan_in`.
pub(crate) fn scaled_uniform(rng: &mut impl Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = (3.0 / fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

/// Draws every parameter from `cfg.seed` in declaration order.
pub fn init_weights(cfg: &EncoderConfig) -> Result<EncoderWeights> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.model_dim;
    let embedding = scaled_uniform(&mut rng, cfg.vocab_size, d, 1);
    let layers = (0..cfg.n_layers)
        .map(|_| match cfg.kind {
            EncoderKind::Attention => LayerWeights::Attention(AttentionParams::init(&mut rng, d, cfg.n_heads)),
            EncoderKind::ScanSequential | EncoderKind::ScanChunked => {
                LayerWeights::Scan(ScanParams::init(&mut rng, d, cfg.state_dim))
            }
        })
        .collect();
    Ok(EncoderWeights { embedding, layers })
}

/// Per-position final-layer states with their validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    pub states: Array2<f64>,
    pub mask: Vec<bool>,
}

impl HiddenStates {
    /// Mean of the valid rows.
    pub fn masked_mean(&self) -> Array1<f64> {
        let mut acc = Array1::zeros(self.states.ncols());
        let mut n = 0usize;
        for (row, &valid) in self.states.axis_iter(Axis(0)).zip(&self.mask) {
            if valid {
                acc += &row;
                n += 1;
            }
        }
        acc / n.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub hidden: HiddenStates,
    pub pooled: Array1<f64>,
}

fn sinusoidal_position(x: &mut Array2<f64>) {
    let d = x.ncols();
    for (pos, mut row) in x.rows_mut().into_iter().enumerate() {
        for i in 0..d {
            let freq = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * freq;
            row[i] += if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
}

fn check_context(cfg: &EncoderConfig, len: usize) -> Result<()> {
    match cfg.max_context {
        Some(limit) if len > limit => Err(Error::ContextOverflow { len, limit }),
        _ => Ok(()),
    }
}

/// Embedding lookup, `n_layers` of the configured layer, masked mean pooling.
pub fn encode(ids: &[u32], mask: &[bool], cfg: &EncoderConfig, weights: &EncoderWeights) -> Result<Encoded> {
    encode_within_budget(ids, mask, cfg, weights, None)
}

/// [`encode`] that refuses inputs whose [`EncoderConfig::footprint_bytes`]
/// exceeds `budget` bytes before allocating anything.
pub fn encode_within_budget(
    ids: &[u32],
    mask: &[bool],
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
    budget: Option<usize>,
) -> Result<Encoded> {
    let t = ids.len();
    if mask.len() != t {
        return Err(Error::DimMismatch {
            expected: t,
            actual: mask.len(),
        });
    }
    if t == 0 || !mask.iter().any(|&m| m) {
        return Err(Error::config("a window needs at least one valid token"));
    }
    check_context(cfg, t)?;
    if let Some(budget) = budget {
        let needed = cfg.footprint_bytes(t);
        if needed > budget {
            return Err(Error::MemoryBudget { len: t, needed, budget });
        }
    }
    if weights.layers.len() != cfg.n_layers || weights.embedding.dim() != (cfg.vocab_size, cfg.model_dim) {
        return Err(Error::config("weights do not match the encoder config"));
    }

    let mut x = Array2::zeros((t, cfg.model_dim));
    for (mut row, &id) in x.rows_mut().into_iter().zip(ids) {
        let id = id as usize;
        if id >= cfg.vocab_size {
            return Err(Error::config(format!(
                "token id {id} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        row.assign(&weights.embedding.row(id));
    }
    if cfg.kind == EncoderKind::Attention {
        sinusoidal_position(&mut x);
    }

    for layer in &weights.layers {
        x = match (layer, cfg.kind) {
            (LayerWeights::Attention(p), EncoderKind::Attention) => {
                self_attention_layer(&x, p, mask, cfg.max_context)?
            }
            (LayerWeights::Scan(p), EncoderKind::ScanSequential) => {
                scan::scan_layer(&x, p, mask, None)?
            }
            (LayerWeights::Scan(p), EncoderKind::ScanChunked) => {
                scan::scan_layer(&x, p, mask, Some(cfg.chunk_len))?
            }
            _ => return Err(Error::config("layer weights do not match the encoder kind")),
        };
    }

    let hidden = HiddenStates {
        states: x,
        mask: mask.to_vec(),
    };
    let pooled = hidden.masked_mean();
    Ok(Encoded { hidden, pooled })
}

pub(crate) fn ensure_finite_rows(x: &Array2<f64>, stage: &'static str) -> Result<()> {
    for (position, row) in x.axis_iter(Axis(0)).enumerate() {
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { stage, position });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: EncoderKind) -> EncoderConfig {
        let cfg = match kind {
            EncoderKind::Attention => EncoderConfig::attention(50, 8, 2, 2),
            EncoderKind::ScanSequential => EncoderConfig::scan(50, 8, 2, 4),
            EncoderKind::ScanChunked => EncoderConfig::scan_chunked(50, 8, 2, 4, 3),
        };
        cfg.with_seed(11)
    }

    const KINDS: [EncoderKind; 3] = [
        EncoderKind::Attention,
        EncoderKind::ScanSequential,
        EncoderKind::ScanChunked,
    ];

    #[test]
    fn init_is_bitwise_deterministic() {
        for kind in KINDS {
            let cfg = small(kind);
            assert_eq!(init_weights(&cfg).unwrap(), init_weights(&cfg).unwrap());
        }
        let a = init_weights(&small(EncoderKind::Attention)).unwrap();
        let b = init_weights(&small(EncoderKind::Attention).with_seed(12)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn heads_must_divide_dim() {
        let cfg = EncoderConfig::attention(50, 8, 1, 3);
        assert!(matches!(init_weights(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn scan_state_matrix_init() {
        let w = init_weights(&EncoderConfig::scan(50, 3, 1, 4)).unwrap();
        let LayerWeights::Scan(p) = &w.layers[0] else { panic!() };
        for row in p.a.rows() {
            assert_eq!(row.to_vec(), [-1.0, -2.0, -3.0, -4.0]);
        }
    }

    #[test]
    fn single_valid_token_pools_to_its_state() {
        for kind in KINDS {
            let cfg = small(kind);
            let w = init_weights(&cfg).unwrap();
            let ids = [7, 0, 0, 0, 0];
            let mask = [true, false, false, false, false];
            let enc = encode(&ids, &mask, &cfg, &w).unwrap();
            assert_eq!(enc.pooled, enc.hidden.states.row(0));
        }
    }

    #[test]
    fn identical_windows_identical_pooled() {
        for kind in KINDS {
            let cfg = small(kind);
            let w = init_weights(&cfg).unwrap();
            let ids = [5, 9, 12, 40];
            let mask = [true; 4];
            let a = encode(&ids, &mask, &cfg, &w).unwrap();
            let b = encode(&ids, &mask, &cfg, &w).unwrap();
            assert_eq!(a.pooled, b.pooled);
        }
    }

    #[test]
    fn pooled_equals_explicit_masked_average() {
        for kind in KINDS {
            let cfg = small(kind);
            let w = init_weights(&cfg).unwrap();
            let ids = [5, 9, 12, 40, 33, 0, 0];
            let mask = [true, true, true, true, true, false, false];
            let enc = encode(&ids, &mask, &cfg, &w).unwrap();
            for c in 0..cfg.model_dim {
                let mut sum = 0.0;
                for t in 0..5 {
                    sum += enc.hidden.states[[t, c]];
                }
                assert!((enc.pooled[c] - sum / 5.0).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn appended_padding_does_not_move_pooled() {
        for kind in KINDS {
            let cfg = small(kind);
            let w = init_weights(&cfg).unwrap();
            let ids = vec![5, 9, 12, 40, 33, 21];
            let base = encode(&ids, &[true; 6], &cfg, &w).unwrap();
            let mut padded = ids.clone();
            padded.extend([0; 10]);
            let mut mask = vec![true; 6];
            mask.extend([false; 10]);
            let more = encode(&padded, &mask, &cfg, &w).unwrap();
            let diff = (&base.pooled - &more.pooled).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            assert!(diff < 1e-7, "{kind}: {diff}");
        }
    }

    #[test]
    fn attention_overflow_names_limit() {
        let cfg = small(EncoderKind::Attention).with_max_context(Some(4));
        let w = init_weights(&cfg).unwrap();
        let err = encode(&[5; 6], &[true; 6], &cfg, &w).unwrap_err();
        assert!(matches!(err, Error::ContextOverflow { len: 6, limit: 4 }));
        assert!(err.to_string().contains('4'));
    }

    #[test]
    fn budget_is_enforced_before_work() {
        let cfg = small(EncoderKind::ScanSequential);
        let w = init_weights(&cfg).unwrap();
        let need = cfg.footprint_bytes(100);
        let ids = vec![5u32; 100];
        let mask = vec![true; 100];
        assert!(encode_within_budget(&ids, &mask, &cfg, &w, Some(need)).is_ok());
        assert!(matches!(
            encode_within_budget(&ids, &mask, &cfg, &w, Some(need - 1)),
            Err(Error::MemoryBudget { .. })
        ));
    }

    #[test]
    fn config_toml_round_trip_and_unknown_keys() {
        let cfg = small(EncoderKind::Attention);
        assert_eq!(EncoderConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let flex = small(EncoderKind::ScanChunked);
        assert_eq!(EncoderConfig::from_toml(&flex.to_toml()).unwrap(), flex);
        let bad = format!("{}bogus = 1\n", cfg.to_toml());
        assert!(EncoderConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn scan_accepts_long_inputs_without_blowup() {
        let cfg = EncoderConfig::scan(200, 8, 1, 4).with_seed(3);
        let w = init_weights(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ids: Vec<u32> = (0..10_000).map(|_| rng.random_range(4..200)).collect();
        let enc = encode(&ids, &vec![true; ids.len()], &cfg, &w).unwrap();
        assert!(enc.hidden.states.iter().all(|v| v.is_finite()));
    }
}
