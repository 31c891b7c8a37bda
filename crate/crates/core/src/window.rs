//! Overlapping fixed-length windows over token sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{TokenSequence, PAD};

pub const DEFAULT_OVERLAP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingConfig {
    /// Tokens per window; 0 means the whole document is one window.
    pub window_len: usize,
    pub overlap: f64,
}

impl WindowingConfig {
    pub fn new(window_len: usize, overlap: f64) -> Result<Self> {
        let cfg = Self {
            window_len,
            overlap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn whole_document() -> Self {
        Self {
            window_len: 0,
            overlap: DEFAULT_OVERLAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 1 {
            return Err(Error::config("window length must be 0 (whole document) or at least 2"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::config(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    pub fn is_whole_document(&self) -> bool {
        self.window_len == 0
    }

    /// `max(1, floor(L * (1 - overlap)))`, so consecutive windows share at least
    /// the requested fraction.
    pub fn stride(&self) -> usize {
        let raw = (self.window_len as f64 * (1.0 - self.overlap) + 1e-9).floor() as usize;
        raw.clamp(1, self.window_len.max(1))
    }
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            overlap: DEFAULT_OVERLAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSet {
    pub doc_id: String,
    /// Half-open `[start, end)` token offsets, sorted by start.
    pub spans: Vec<(usize, usize)>,
    pub padded_ids: Vec<Vec<u32>>,
    pub masks: Vec<Vec<bool>>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Real tokens across all windows, overlap counted once per window.
    pub fn real_tokens(&self) -> usize {
        self.spans.iter().map(|(s, e)| e - s).sum()
    }
}

/// Number of windows `make_windows` produces for a sequence of `length` tokens.
pub fn window_count(length: usize, cfg: &WindowingConfig) -> usize {
    let l = cfg.window_len;
    if cfg.is_whole_document() || length <= l {
        return 1;
    }
    (length - l).div_ceil(cfg.stride()) + 1
}

/// Span offsets only; `make_windows` pads them.
pub fn window_spans(length: usize, cfg: &WindowingConfig) -> Vec<(usize, usize)> {
    let l = cfg.window_len;
    if cfg.is_whole_document() || length <= l {
        return vec![(0, length)];
    }
    let stride = cfg.stride();
    let mut spans = Vec::with_capacity(window_count(length, cfg));
    let mut start = 0;
    loop {
        let end = (start + l).min(length);
        spans.push((start, end));
        if end == length {
            break;
        }
        start += stride;
    }
    spans
}

pub fn make_windows(tokens: &TokenSequence, cfg: &WindowingConfig) -> Result<WindowSet> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Err(Error::InvalidDocument {
            id: tokens.doc_id.clone(),
            message: "cannot window an empty token sequence".into(),
        });
    }
    let spans = window_spans(tokens.len(), cfg);
    let width = if cfg.is_whole_document() {
        tokens.len()
    } else {
        cfg.window_len
    };
    let mut padded_ids = Vec::with_capacity(spans.len());
    let mut masks = Vec::with_capacity(spans.len());
    for &(s, e) in &spans {
        let mut ids = Vec::with_capacity(width);
        ids.extend_from_slice(&tokens.ids[s..e]);
        ids.resize(width, PAD);
        let mut mask = vec![false; width];
        mask[..e - s].fill(true);
        padded_ids.push(ids);
        masks.push(mask);
    }
    Ok(WindowSet {
        doc_id: tokens.doc_id.clone(),
        spans,
        padded_ids,
        masks,
    })
}
