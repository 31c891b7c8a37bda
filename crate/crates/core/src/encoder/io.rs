//! Little-endian flat binary weight files.
//!
//! ```text
//! magic "LDBW" | version u32 | config block | parameter blocks
//! config: kind u8, vocab u64, dim u64, layers u64, heads u64, state u64,
//!         chunk u64, max_context u64 (0 = unbounded), seed u64
//! blocks: f64 row-major, embedding then each layer's fields in declaration order;
//!         scan layers prefix the gate block with a presence byte
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{AttentionParams, EncoderConfig, EncoderKind, EncoderWeights, LayerNorm, LayerWeights, ScanParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LDBW";
const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn floats<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        for v in values {
            self.0.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
    fn norm(&mut self, n: &LayerNorm) -> Result<()> {
        self.floats(&n.gain)?;
        self.floats(&n.bias)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| Error::Format(format!("truncated weight file: {e}")))?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size overflows usize".into()))
    }
    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(f64::from_le_bytes(self.bytes()?));
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape matches length"))
    }
    fn vector(&mut self, len: usize) -> Result<Array1<f64>> {
        Ok(self.matrix(1, len)?.into_shape_with_order(len).expect("1 x n reshapes"))
    }
    fn norm(&mut self, d: usize) -> Result<LayerNorm> {
        Ok(LayerNorm {
            gain: self.vector(d)?,
            bias: self.vector(d)?,
        })
    }
}

fn kind_code(kind: EncoderKind) -> u8 {
    match kind {
        EncoderKind::Attention => 0,
        EncoderKind::ScanSequential => 1,
        EncoderKind::ScanChunked => 2,
    }
}

pub fn save_weights(path: impl AsRef<Path>, cfg: &EncoderConfig, weights: &EncoderWeights) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut w = Writer(file);
    w.0.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u8(kind_code(cfg.kind))?;
    for v in [cfg.vocab_size, cfg.model_dim, cfg.n_layers, cfg.n_heads, cfg.state_dim, cfg.chunk_len] {
        w.u64(v as u64)?;
    }
    w.u64(cfg.max_context.unwrap_or(0) as u64)?;
    w.u64(cfg.seed)?;

    w.floats(&weights.embedding)?;
    for layer in &weights.layers {
        match layer {
            LayerWeights::Attention(p) => {
                for m in [&p.wq, &p.wk, &p.wv, &p.wo] {
                    w.floats(m)?;
                }
                w.norm(&p.norm1)?;
                w.floats(&p.ff_in)?;
                w.floats(&p.ff_in_bias)?;
                w.floats(&p.ff_out)?;
                w.floats(&p.ff_out_bias)?;
                w.norm(&p.norm2)?;
            }
            LayerWeights::Scan(p) => {
                w.floats(&p.a)?;
                w.floats(&p.delta_proj)?;
                w.floats(&p.delta_bias)?;
                w.floats(&p.b_proj)?;
                w.floats(&p.b_bias)?;
                w.floats(&p.c_proj)?;
                w.floats(&p.c_bias)?;
                w.floats(&p.skip)?;
                match &p.gate {
                    Some(g) => {
                        w.u8(1)?;
                        w.floats(g)?;
                    }
                    None => w.u8(0)?,
                }
                w.norm(&p.norm)?;
            }
        }
    }
    w.0.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(EncoderConfig, EncoderWeights)> {
    let mut r = Reader(std::io::BufReader::new(std::fs::File::open(path)?));
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = match r.u8()? {
        0 => EncoderKind::Attention,
        1 => EncoderKind::ScanSequential,
        2 => EncoderKind::ScanChunked,
        k => return Err(Error::Format(format!("unknown encoder kind code {k}"))),
    };
    let cfg = EncoderConfig {
        kind,
        vocab_size: r.usize()?,
        model_dim: r.usize()?,
        n_layers: r.usize()?,
        n_heads: r.usize()?,
        state_dim: r.usize()?,
        chunk_len: r.usize()?,
        max_context: match r.usize()? {
            0 => None,
            n => Some(n),
        },
        seed: r.u64()?,
    };
    cfg.validate()?;
    let (d, n) = (cfg.model_dim, cfg.state_dim);
    let embedding = r.matrix(cfg.vocab_size, d)?;
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for _ in 0..cfg.n_layers {
        layers.push(match kind {
            EncoderKind::Attention => LayerWeights::Attention(AttentionParams {
                n_heads: cfg.n_heads,
                wq: r.matrix(d, d)?,
                wk: r.matrix(d, d)?,
                wv: r.matrix(d, d)?,
                wo: r.matrix(d, d)?,
                norm1: r.norm(d)?,
                ff_in: r.matrix(d, 4 * d)?,
                ff_in_bias: r.vector(4 * d)?,
                ff_out: r.matrix(4 * d, d)?,
                ff_out_bias: r.vector(d)?,
                norm2: r.norm(d)?,
            }),
            EncoderKind::ScanSequential | EncoderKind::ScanChunked => LayerWeights::Scan(ScanParams {
                a: r.matrix(d, n)?,
                delta_proj: r.matrix(d, d)?,
                delta_bias: r.vector(d)?,
                b_proj: r.matrix(d, n)?,
                b_bias: r.vector(n)?,
                c_proj: r.matrix(d, n)?,
                c_bias: r.vector(n)?,
                skip: r.vector(d)?,
                gate: match r.u8()? {
                    0 => None,
                    1 => Some(r.matrix(d, d)?),
                    b => return Err(Error::Format(format!("bad gate flag {b}"))),
                },
                norm: r.norm(d)?,
            }),
        });
    }
    let mut tail = [0u8; 1];
    if r.0.read(&mut tail)? != 0 {
        return Err(Error::Format("trailing bytes after parameter blocks".into()));
    }
    Ok((cfg, EncoderWeights { embedding, layers }))
}
