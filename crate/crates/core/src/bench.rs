//! Forward-pass throughput, length-scaling fits and context capacity.
//!
//! Throughput counts real tokens, including tokens that appear in more than one
//! window when a capped encoder has to slide over a longer input.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, EncoderConfig, EncoderKind, EncoderWeights};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::tokenize::{TokenSequence, N_RESERVED};
use crate::window::{make_windows, WindowingConfig, DEFAULT_OVERLAP};

pub const MIN_REPS: usize = 3;
pub const MIN_WARMUP: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub model: String,
    pub encoder: EncoderKind,
    pub max_context: Option<usize>,
    pub seq_len: usize,
    pub reps: usize,
    pub warmup: usize,
    pub rep_seconds: Vec<f64>,
    pub median_seconds: f64,
    /// Real tokens per rep, window overlap included.
    pub tokens_per_rep: usize,
    pub tokens_per_sec: f64,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub model: String,
    pub encoder: EncoderKind,
    pub lengths: Vec<usize>,
    pub median_seconds: Vec<f64>,
    pub beta: f64,
    pub monotone: bool,
    pub points: Vec<ThroughputReport>,
}

pub fn tokens_per_sec(tokens: usize, seconds: f64) -> f64 {
    tokens as f64 / seconds
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Smallest observable nonzero step of the monotonic clock, in nanoseconds.
pub fn timer_resolution_ns() -> u128 {
    let mut best = u128::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min((b - a).as_nanos());
    }
    best
}

/// Deterministic token ids for a benchmark input of `len` positions.
pub fn bench_tokens(cfg: &EncoderConfig, len: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("bench-tokens-{len}")));
    let lo = if cfg.vocab_size > N_RESERVED { N_RESERVED as u32 } else { 0 };
    (0..len).map(|_| rng.random_range(lo..cfg.vocab_size as u32)).collect()
}

/// Times `reps` forward passes over `seq_len` seeded tokens after `warmup`
/// discarded passes. Inputs longer than the encoder's cap are windowed with
/// the default overlap and every window's tokens are counted.
pub fn measure_throughput(
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
    seq_len: usize,
    reps: usize,
    warmup: usize,
) -> Result<ThroughputReport> {
    if reps < MIN_REPS || warmup < MIN_WARMUP {
        return Err(Error::config(format!(
            "throughput needs at least {MIN_REPS} reps after {MIN_WARMUP} warmup, got {reps} after {warmup}"
        )));
    }
    if seq_len == 0 {
        return Err(Error::config("benchmark length must be positive"));
    }
    let windowing = match cfg.max_context {
        Some(cap) if seq_len > cap => WindowingConfig::new(cap, DEFAULT_OVERLAP)?,
        _ => WindowingConfig::whole_document(),
    };
    let tokens = TokenSequence {
        doc_id: format!("bench-{seq_len}"),
        ids: bench_tokens(cfg, seq_len),
    };
    let windows = make_windows(&tokens, &windowing)?;

    let run = || -> Result<()> {
        for (ids, mask) in windows.padded_ids.iter().zip(&windows.masks) {
            black_box(encode(ids, mask, cfg, weights)?);
        }
        Ok(())
    };
    for _ in 0..warmup {
        run()?;
    }
    let mut rep_seconds = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        run()?;
        rep_seconds.push(start.elapsed().as_secs_f64());
    }
    let median_seconds = median(&rep_seconds);
    let resolution_ns = timer_resolution_ns();
    let measured_ns = (median_seconds * 1e9) as u128;
    if resolution_ns as f64 > 0.01 * median_seconds * 1e9 {
        return Err(Error::TimerResolution {
            resolution_ns,
            measured_ns,
        });
    }
    let tokens_per_rep = windows.real_tokens();
    Ok(ThroughputReport {
        model: cfg.label(),
        encoder: cfg.kind,
        max_context: cfg.max_context,
        seq_len,
        reps,
        warmup,
        rep_seconds,
        median_seconds,
        tokens_per_rep,
        tokens_per_sec: tokens_per_sec(tokens_per_rep, median_seconds),
        windows: windows.len(),
    })
}

/// Lengths usable for a scaling fit: at least 4, strictly increasing,
/// spanning at least 8x.
pub fn validate_lengths(lengths: &[usize]) -> Result<()> {
    if lengths.len() < 4 {
        return Err(Error::config(format!("scaling fit needs at least 4 lengths, got {}", lengths.len())));
    }
    if lengths[0] == 0 || lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(format!("lengths must be positive and strictly increasing: {lengths:?}")));
    }
    if lengths[lengths.len() - 1] < 8 * lengths[0] {
        return Err(Error::config(format!("lengths must span at least 8x: {lengths:?}")));
    }
    Ok(())
}

/// Least-squares slope of `ln(time)` on `ln(length)`.
pub fn fit_exponent(lengths: &[usize], times: &[f64]) -> Result<f64> {
    if lengths.len() != times.len() || lengths.len() < 2 {
        return Err(Error::config("fit needs matching lengths and times, at least two points"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) || lengths.contains(&0) {
        return Err(Error::config("fit needs positive lengths and times"));
    }
    let xs: Vec<f64> = lengths.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::config("fit needs at least two distinct lengths"));
    }
    Ok(sxy / sxx)
}

/// Measures every length and fits the scaling exponent. Non-monotone median
/// times are reported with a warning; the fit is still returned.
pub fn fit_scaling_exponent(
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
    lengths: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<ScalingReport> {
    validate_lengths(lengths)?;
    let points = lengths
        .iter()
        .map(|&t| measure_throughput(cfg, weights, t, reps, warmup))
        .collect::<Result<Vec<_>>>()?;
    let median_seconds: Vec<f64> = points.iter().map(|p| p.median_seconds).collect();
    let monotone = median_seconds.windows(2).all(|w| w[0] <= w[1]);
    if !monotone {
        warn!("{}: median times are not monotone in length: {median_seconds:?}", cfg.label());
    }
    Ok(ScalingReport {
        model: cfg.label(),
        encoder: cfg.kind,
        lengths: lengths.to_vec(),
        beta: fit_exponent(lengths, &median_seconds)?,
        median_seconds,
        monotone,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityLimit {
    HardCap,
    MemoryBudget,
    SearchCeiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub model: String,
    pub encoder: EncoderKind,
    pub capacity: usize,
    pub limited_by: CapacityLimit,
}

/// Largest length each encoder accepts under `budget_bytes`, searched up to
/// `ceiling`. Feasibility is the same pre-allocation footprint check that
/// `encode_within_budget` applies, so the search never allocates activations.
pub fn compare_context_capacity(cfgs: &[EncoderConfig], budget_bytes: usize, ceiling: usize) -> Vec<CapacityReport> {
    cfgs.iter()
        .map(|cfg| {
            let fits = |t: usize| cfg.footprint_bytes(t) <= budget_bytes;
            let (upper, at_upper) = match cfg.max_context {
                Some(cap) if cap <= ceiling => (cap, CapacityLimit::HardCap),
                _ => (ceiling, CapacityLimit::SearchCeiling),
            };
            let (capacity, limited_by) = if fits(upper) {
                (upper, at_upper)
            } else {
                // invariant: fits(lo) or lo == 0, !fits(hi)
                let (mut lo, mut hi) = (0usize, upper);
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if fits(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (lo, CapacityLimit::MemoryBudget)
            };
            CapacityReport {
                model: cfg.label(),
                encoder: cfg.kind,
                capacity,
                limited_by,
            }
        })
        .collect()
}

/// One encoder's measurements across lengths, with an exponent when the
/// lengths support a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSeries {
    pub model: String,
    pub points: Vec<ThroughputReport>,
    pub beta: Option<f64>,
}

pub fn run_series(
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
    lengths: &[usize],
    reps: usize,
    warmup: usize,
) -> Result<BenchSeries> {
    if validate_lengths(lengths).is_ok() {
        let scaling = fit_scaling_exponent(cfg, weights, lengths, reps, warmup)?;
        return Ok(BenchSeries {
            model: scaling.model,
            points: scaling.points,
            beta: Some(scaling.beta),
        });
    }
    let points = lengths
        .iter()
        .map(|&t| measure_throughput(cfg, weights, t, reps, warmup))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchSeries {
        model: cfg.label(),
        points,
        beta: None,
    })
}

/// CSV with header `encoder,T,reps,median_s,tok_per_s,beta`; beta is blank
/// when the series has no fit.
pub fn write_bench_csv<W: Write>(out: W, series: &[BenchSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["encoder", "T", "reps", "median_s", "tok_per_s", "beta"])?;
    for s in series {
        let beta = s.beta.map(|b| format!("{b:.4}")).unwrap_or_default();
        for p in &s.points {
            w.write_record([
                s.model.clone(),
                p.seq_len.to_string(),
                p.reps.to_string(),
                format!("{:.6}", p.median_seconds),
                format!("{:.1}", p.tokens_per_sec),
                beta.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aligned text table with the window count per point.
pub fn bench_table_text(series: &[BenchSeries]) -> String {
    let header = ["encoder", "T", "windows", "reps", "median_s", "tok/s", "beta"];
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for s in series {
        for p in &s.points {
            rows.push(vec![
                s.model.clone(),
                p.seq_len.to_string(),
                p.windows.to_string(),
                p.reps.to_string(),
                format!("{:.6}", p.median_seconds),
                format!("{:.1}", p.tokens_per_sec),
                s.beta.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into()),
            ]);
        }
    }
    crate::report::align(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_weights;

    #[test]
    fn throughput_arithmetic() {
        assert_eq!(tokens_per_sec(4096, 0.5), 8192.0);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn planted_exponents_recovered() {
        let lengths = [512, 1024, 2048, 4096, 8192];
        let quad: Vec<f64> = lengths.iter().map(|&t| 3e-9 * (t as f64).powi(2)).collect();
        let lin: Vec<f64> = lengths.iter().map(|&t| 7e-6 * t as f64).collect();
        assert!((fit_exponent(&lengths, &quad).unwrap() - 2.0).abs() < 1e-6);
        assert!((fit_exponent(&lengths, &lin).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn length_list_validation() {
        assert!(validate_lengths(&[512, 1024, 2048, 4096]).is_ok());
        assert!(validate_lengths(&[512, 1024, 2048]).is_err());
        assert!(validate_lengths(&[512, 1024, 1024, 4096]).is_err());
        assert!(validate_lengths(&[512, 600, 700, 800]).is_err());
    }

    #[test]
    fn too_few_reps_rejected() {
        let cfg = EncoderConfig::scan(20, 4, 1, 2);
        let w = init_weights(&cfg).unwrap();
        assert!(measure_throughput(&cfg, &w, 64, 2, 1).is_err());
        assert!(measure_throughput(&cfg, &w, 64, 3, 0).is_err());
    }

    #[test]
    fn windowed_mode_counts_overlap() {
        let cfg = EncoderConfig::attention(20, 4, 1, 1).with_max_context(Some(40));
        let w = init_weights(&cfg).unwrap();
        let r = measure_throughput(&cfg, &w, 100, 3, 1);
        // timing may be too short for the resolution guard; the window layout is what matters here
        if let Ok(r) = r {
            assert_eq!(r.windows, 3);
            assert_eq!(r.tokens_per_rep, 40 + 40 + 36);
        }
    }

    #[test]
    fn bench_tokens_deterministic_and_in_range() {
        let cfg = EncoderConfig::scan(30, 4, 1, 2).with_seed(3);
        let a = bench_tokens(&cfg, 500);
        assert_eq!(a, bench_tokens(&cfg, 500));
        assert!(a.iter().all(|&id| (N_RESERVED as u32..30).contains(&id)));
    }

    #[test]
    fn capacity_presets() {
        let budget = 512 << 20;
        let cfgs = [
            EncoderConfig::attention(100, 64, 2, 4),
            EncoderConfig::attention(100, 64, 2, 4).with_max_context(Some(4096)),
            EncoderConfig::scan(100, 64, 2, 16),
        ];
        let r = compare_context_capacity(&cfgs, budget, 1 << 20);
        assert_eq!((r[0].capacity, r[0].limited_by), (512, CapacityLimit::HardCap));
        assert_eq!((r[1].capacity, r[1].limited_by), (4096, CapacityLimit::HardCap));
        assert!(r[2].capacity > 4096);
        assert!(cfgs[2].footprint_bytes(r[2].capacity) <= budget);
        assert!(cfgs[2].footprint_bytes(r[2].capacity + 1) > budget);
    }

    #[test]
    fn tight_budget_binds_before_cap() {
        let cfg = EncoderConfig::attention(100, 8, 1, 1).with_max_context(Some(4096));
        let budget = cfg.footprint_bytes(1000);
        let r = compare_context_capacity(&[cfg], budget, 1 << 20);
        assert_eq!((r[0].capacity, r[0].limited_by), (1000, CapacityLimit::MemoryBudget));
    }

    #[test]
    fn bench_csv_header() {
        let mut out = Vec::new();
        write_bench_csv(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "encoder,T,reps,median_s,tok_per_s,beta\n");
    }
}
