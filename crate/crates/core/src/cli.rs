//! Command-line interface: `classify`, `retrieve`, `bench` and `report`.
//!
//! `--config FILE` reads a flat TOML table whose keys are flag names; flags
//! given on the command line take precedence over the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::corpus::TaskKind;
use crate::encoder::EncoderKind;
use crate::error::{Error, Result};
use crate::pipeline::{
    default_max_context, default_window_len, rerun_manifest, run_bench, run_classify, run_report, run_retrieve,
    BenchSettings, RunOutcome, RunSettings,
};

pub const OUT_ENV: &str = "LONGDOC_BENCH_OUT";

#[derive(Debug, Parser)]
#[command(name = "longdoc-bench", version, about = "Long-document classification, retrieval and throughput harness")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads for document-level parallelism [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a linear probe on frozen window embeddings and evaluate on the test split
    Classify(ClassifyArgs),
    /// Rank documents by cosine similarity of mean-pooled embeddings
    Retrieve(RetrieveArgs),
    /// Measure forward-pass throughput and length scaling
    Bench(BenchArgs),
    /// Combine finished runs into one results table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EncoderArgs {
    /// Encoder architecture
    #[arg(long, default_value = "scan", value_parser = ["attention", "scan", "scan-chunked"])]
    pub encoder: String,
    /// Hidden width
    #[arg(long, default_value_t = 64)]
    pub model_dim: usize,
    /// Number of stacked layers
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Attention heads (attention encoder)
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    /// State size per channel (scan encoders)
    #[arg(long, default_value_t = 16)]
    pub state_dim: usize,
    /// Chunk length (scan-chunked encoder)
    #[arg(long, default_value_t = 64)]
    pub chunk: usize,
    /// Hard context cap in tokens, 0 for unbounded [default: 512 for attention, unbounded for scans]
    #[arg(long)]
    pub max_context: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Line-delimited JSON corpus
    #[arg(long, required_unless_present = "manifest")]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub encoder: EncoderArgs,
    /// Window length in tokens, 0 for whole documents [default: the context cap, or 0 when unbounded]
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Fraction of each window shared with the next
    #[arg(long, default_value_t = 0.2)]
    pub overlap: f64,
    /// Vocabulary size including the 4 reserved tokens
    #[arg(long, default_value_t = 8000)]
    pub vocab_size: usize,
    /// Fraction of documents in the train split
    #[arg(long, default_value_t = 0.7)]
    pub train_frac: f64,
    /// Fraction of documents in the validation split
    #[arg(long, default_value_t = 0.15)]
    pub val_frac: f64,
    /// Fraction of documents in the test split
    #[arg(long, default_value_t = 0.15)]
    pub test_frac: f64,
    /// Global seed; every stage derives its own seed from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
    /// Rerun the configuration recorded in a manifest and verify its hashes
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Flat TOML file of flag values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Task kind of the corpus
    #[arg(long, default_value = "multilabel", value_parser = ["multilabel", "singlelabel"])]
    pub task: String,
    /// Multi-label decision threshold on mean window probability
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Probe learning rate
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    /// Probe training epochs
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Probe mini-batch size
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// L2 penalty on probe weights
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Task kind of the corpus
    #[arg(long, default_value = "retrieval", value_parser = ["retrieval"])]
    pub task: String,
    /// Cutoffs for Recall@k and nDCG@k, comma separated
    #[arg(long, default_value = "10", value_delimiter = ',', action = ArgAction::Set)]
    pub k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Encoders to measure, comma separated
    #[arg(long = "encoder", default_value = "attention,scan", value_delimiter = ',', action = ArgAction::Set,
          value_parser = ["attention", "scan", "scan-chunked"])]
    pub encoders: Vec<String>,
    /// Hidden width
    #[arg(long, default_value_t = 64)]
    pub model_dim: usize,
    /// Number of stacked layers
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Attention heads (attention encoder)
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    /// State size per channel (scan encoders)
    #[arg(long, default_value_t = 16)]
    pub state_dim: usize,
    /// Chunk length (scan-chunked encoder)
    #[arg(long, default_value_t = 64)]
    pub chunk: usize,
    /// Context cap applied to every encoder, 0 for unbounded [default: 512 for attention, unbounded for scans]
    #[arg(long)]
    pub max_context: Option<usize>,
    /// Vocabulary size of the random benchmark tokens
    #[arg(long, default_value_t = 8000)]
    pub vocab_size: usize,
    /// Sequence lengths, comma separated; 4 or more spanning 8x also fit a scaling exponent
    #[arg(long, default_value = "512,1024,2048,4096", value_delimiter = ',', action = ArgAction::Set)]
    pub lengths: Vec<usize>,
    /// Timed repetitions per length (median reported)
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Discarded warmup repetitions per length
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Global seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
    /// Flat TOML file of flag values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories containing row.json
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Output directory
    #[arg(long, env = OUT_ENV)]
    pub out: PathBuf,
    /// Flat TOML file of flag values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn config_flags(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let scalar = |v: &toml::Value| -> Result<String> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(Error::config(format!("unsupported config value {other}"))),
        }
    };
    let mut flags = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => flags.push(flag.into()),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                flags.push(format!("{flag}={joined}").into());
            }
            v => flags.push(format!("{flag}={}", scalar(v)?).into()),
        }
    }
    Ok(flags)
}

/// Parses arguments, splicing values from `--config` in front of the command
/// line flags so that explicit flags win. Unknown config keys are rejected by
/// the parser like unknown flags.
pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let config = args.iter().enumerate().find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == "--config" {
            args.get(i + 1).cloned()
        } else {
            s.strip_prefix("--config=").map(OsString::from)
        }
    });
    if let Some(path) = config {
        let flags = config_flags(Path::new(&path))
            .map_err(|e| clap::Error::raw(clap::error::ErrorKind::InvalidValue, format!("--config: {e}\n")))?;
        let sub = args
            .iter()
            .position(|a| matches!(a.to_str(), Some("classify" | "retrieve" | "bench" | "report")));
        if let Some(at) = sub {
            args.splice(at + 1..at + 1, flags);
        }
    }
    Cli::try_parse_from(args)
}

fn encoder_kind(s: &str) -> Result<EncoderKind> {
    s.parse()
}

impl RunArgs {
    fn settings(&self, task: TaskKind) -> Result<RunSettings> {
        let kind = encoder_kind(&self.encoder.encoder)?;
        let corpus = self.corpus.clone().ok_or_else(|| Error::config("--corpus is required"))?;
        let max_context = match self.encoder.max_context {
            Some(0) => None,
            Some(c) => Some(c),
            None => default_max_context(kind),
        };
        let mut s = RunSettings::new(corpus, task, kind);
        s.model_dim = self.encoder.model_dim;
        s.layers = self.encoder.layers;
        s.heads = self.encoder.heads;
        s.state_dim = self.encoder.state_dim;
        s.chunk = self.encoder.chunk;
        s.max_context = max_context;
        s.window_len = self.window_len.unwrap_or_else(|| default_window_len(max_context));
        s.overlap = self.overlap;
        s.vocab_size = self.vocab_size;
        s.train_frac = self.train_frac;
        s.val_frac = self.val_frac;
        s.test_frac = self.test_frac;
        s.seed = self.seed;
        Ok(s)
    }
}

impl ClassifyArgs {
    pub fn settings(&self) -> Result<RunSettings> {
        let mut s = self.run.settings(self.task.parse()?)?;
        s.threshold = self.threshold;
        s.lr = self.lr;
        s.epochs = self.epochs;
        s.batch = self.batch;
        s.l2 = self.l2;
        Ok(s)
    }
}

impl RetrieveArgs {
    pub fn settings(&self) -> Result<RunSettings> {
        let mut s = self.run.settings(self.task.parse()?)?;
        s.ks = self.k.clone();
        Ok(s)
    }
}

impl BenchArgs {
    pub fn settings(&self) -> Result<BenchSettings> {
        Ok(BenchSettings {
            encoders: self.encoders.iter().map(|e| encoder_kind(e)).collect::<Result<_>>()?,
            model_dim: self.model_dim,
            layers: self.layers,
            heads: self.heads,
            state_dim: self.state_dim,
            chunk: self.chunk,
            max_context: self.max_context,
            vocab_size: self.vocab_size,
            lengths: self.lengths.clone(),
            reps: self.reps,
            warmup: self.warmup,
            seed: self.seed,
        })
    }
}

fn run_or_rerun(run: &RunArgs, settings: impl FnOnce() -> Result<RunSettings>, go: fn(&RunSettings, &Path) -> Result<RunOutcome>) -> Result<RunOutcome> {
    match &run.manifest {
        Some(m) => rerun_manifest(m, &run.out),
        None => go(&settings()?, &run.out),
    }
}

/// Executes a parsed command and returns the text printed on success.
pub fn execute(cli: &Cli) -> Result<String> {
    let work = || -> Result<String> {
        match &cli.command {
            Command::Classify(a) => {
                let o = run_or_rerun(&a.run, || a.settings(), run_classify)?;
                Ok(crate::report::emit_table(&[o.row])?.to_text())
            }
            Command::Retrieve(a) => {
                let o = run_or_rerun(&a.run, || a.settings(), run_retrieve)?;
                Ok(crate::report::emit_table(&[o.row])?.to_text())
            }
            Command::Bench(a) => {
                let series = run_bench(&a.settings()?, &a.out)?;
                Ok(crate::bench::bench_table_text(&series))
            }
            Command::Report(a) => Ok(run_report(&a.runs, &a.out)?.to_text()),
        }
    };
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?;
            pool.install(work)
        }
        None => work(),
    }
}
