//! End-to-end runs: classification, retrieval, benchmarking and report
//! assembly. Every run writes its artifacts under one output directory.
//!
//! While a run is in progress the directory holds an `INCOMPLETE` marker; it is
//! removed on success and keeps the error message on failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{bench_table_text, run_series, write_bench_csv, BenchSeries};
use crate::corpus::{load_corpus, split_corpus, Corpus, Document, Split, SplitSpec, TaskKind};
use crate::encoder::{init_weights, EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::hashing::{derive_seed, sha256_hex};
use crate::heads::{
    aggregate_multilabel, aggregate_singlelabel, train_probe_standardized, window_predict, DocPrediction, Example,
    ProbeHyper,
};
use crate::metrics::{eval_classification, eval_retrieval, GoldLabels, MetricReport, RelevanceJudgments};
use crate::report::{emit_table, metrics_table, write_manifest, RunManifest, Table, TableRow, HARNESS_VERSION};
use crate::retrieval::{mean_vector, rank_against_store, window_embeddings, write_rankings_csv, DocEmbeddingStore};
use crate::tokenize::{build_vocab, tokenize_document, TokenSequence, Vocab};
use crate::window::WindowingConfig;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Context cap an encoder kind gets when none is requested.
pub fn default_max_context(kind: EncoderKind) -> Option<usize> {
    match kind {
        EncoderKind::Attention => Some(512),
        EncoderKind::ScanSequential | EncoderKind::ScanChunked => None,
    }
}

/// Default window length: the encoder's cap, or whole documents when unbounded.
pub fn default_window_len(max_context: Option<usize>) -> usize {
    max_context.unwrap_or(0)
}

/// All knobs of a classification or retrieval run. Serialized flat into the
/// run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub corpus: PathBuf,
    pub task: TaskKind,
    pub encoder: EncoderKind,
    pub model_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub state_dim: usize,
    pub chunk: usize,
    /// `None` is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
    /// 0 encodes each document as one window.
    pub window_len: usize,
    pub overlap: f64,
    pub vocab_size: usize,
    pub threshold: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
    pub ks: Vec<usize>,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl RunSettings {
    /// Defaults for `encoder` on `corpus`.
    pub fn new(corpus: impl Into<PathBuf>, task: TaskKind, encoder: EncoderKind) -> Self {
        let max_context = default_max_context(encoder);
        let probe = ProbeHyper::default();
        Self {
            corpus: corpus.into(),
            task,
            encoder,
            model_dim: 64,
            layers: 2,
            heads: 4,
            state_dim: 16,
            chunk: 64,
            max_context,
            window_len: default_window_len(max_context),
            overlap: crate::window::DEFAULT_OVERLAP,
            vocab_size: 8000,
            threshold: crate::heads::DEFAULT_THRESHOLD,
            lr: probe.lr,
            epochs: probe.epochs,
            batch: probe.batch,
            l2: probe.l2,
            ks: vec![10],
            train_frac: 0.7,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.windowing()?;
        self.split_spec()?.validate()?;
        self.encoder_config(self.vocab_size.max(crate::tokenize::N_RESERVED + 1)).validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::config("cutoffs must be positive"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed must fit in 63 bits"));
        }
        if !(self.lr > 0.0) || self.epochs == 0 || self.batch == 0 || !(self.l2 >= 0.0) {
            return Err(Error::config("probe needs lr > 0, epochs > 0, batch > 0 and l2 >= 0"));
        }
        Ok(())
    }

    pub fn windowing(&self) -> Result<WindowingConfig> {
        WindowingConfig::new(self.window_len, self.overlap)
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.train_frac, self.val_frac, self.test_frac, derive_seed(self.seed, "split"))
    }

    pub fn probe_hyper(&self) -> ProbeHyper {
        ProbeHyper {
            lr: self.lr,
            epochs: self.epochs,
            batch: self.batch,
            l2: self.l2,
            seed: derive_seed(self.seed, "probe"),
        }
    }

    /// Encoder for a vocabulary of `vocab_size` ids, seeded from the `encoder` stage.
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            kind: self.encoder,
            vocab_size,
            model_dim: self.model_dim,
            n_layers: self.layers,
            n_heads: self.heads,
            state_dim: self.state_dim,
            chunk_len: self.chunk,
            max_context: self.max_context,
            seed: derive_seed(self.seed, "encoder"),
        }
    }
}

/// Summary of a finished classification or retrieval run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub metrics: MetricReport,
    pub row: TableRow,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs `body` with the `INCOMPLETE` marker present in `out`.
fn with_marker<T>(out: &Path, body: impl FnOnce() -> Result<T>) -> Result<T> {
    fs::create_dir_all(out)?;
    let marker = out.join(INCOMPLETE_MARKER);
    fs::write(&marker, "run in progress\n")?;
    match body() {
        Ok(v) => {
            fs::remove_file(&marker)?;
            Ok(v)
        }
        Err(e) => {
            let _ = fs::write(&marker, format!("{e}\n"));
            Err(e)
        }
    }
}

struct Prepared {
    corpus: Corpus,
    corpus_sha256: String,
    vocab: Vocab,
}

fn load_and_vocab(settings: &RunSettings, vocab_docs: impl Fn(&[Document]) -> Vec<&Document>) -> Result<Prepared> {
    let bytes = stage("load", fs::read(&settings.corpus).map_err(Error::from))?;
    let corpus = stage("load", load_corpus(&settings.corpus, settings.task))?;
    let docs = stage("split", settings.split_spec().and_then(|s| split_corpus(corpus.docs.clone(), &s)))?;
    let corpus = Corpus {
        docs,
        ..corpus
    };
    let vocab = stage("vocab", build_vocab(vocab_docs(&corpus.docs), settings.vocab_size))?;
    Ok(Prepared {
        corpus,
        corpus_sha256: sha256_hex(&bytes),
        vocab,
    })
}

fn tokenize_all(docs: &[&Document], vocab: &Vocab) -> Result<Vec<TokenSequence>> {
    stage("tokenize", docs.par_iter().map(|d| tokenize_document(d, vocab)).collect())
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    Ok(fs::write(path, text)?)
}

fn write_tables(out: &Path, row: &TableRow) -> Result<String> {
    let rows = std::slice::from_ref(row);
    let metrics_csv = metrics_table(rows)?.to_csv()?;
    write_text(out.join("metrics.csv"), &metrics_csv)?;
    let table = emit_table(rows)?;
    write_text(out.join("table.csv"), &table.to_csv()?)?;
    write_text(out.join("table.txt"), &table.to_text())?;
    row.save(out.join("row.json"))?;
    Ok(sha256_hex(metrics_csv.as_bytes()))
}

/// tokenize, window, encode, train the probe on the train split, predict the
/// test split with window aggregation and evaluate.
pub fn run_classify(settings: &RunSettings, out: &Path) -> Result<RunOutcome> {
    stage("config", settings.validate())?;
    if settings.task == TaskKind::Retrieval {
        return Err(Error::config("classify needs a multilabel or singlelabel task").in_stage("config"));
    }
    with_marker(out, || classify_inner(settings, out))
}

fn classify_inner(settings: &RunSettings, out: &Path) -> Result<RunOutcome> {
    let prepared = load_and_vocab(settings, |docs| docs.iter().filter(|d| d.split == Split::Train).collect())?;
    let Prepared {
        corpus,
        corpus_sha256,
        vocab,
    } = prepared;
    let train: Vec<&Document> = corpus.in_split(Split::Train).collect();
    let test: Vec<&Document> = corpus.in_split(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::Split("test split is empty".into()).in_stage("split"));
    }
    let train_tokens = tokenize_all(&train, &vocab)?;
    let test_tokens = tokenize_all(&test, &vocab)?;

    let windowing = stage("window", settings.windowing())?;
    let cfg = settings.encoder_config(vocab.size());
    let weights = stage("encode", init_weights(&cfg))?;
    let embed = |seqs: &[TokenSequence]| -> Result<Vec<Vec<Array1<f64>>>> {
        stage(
            "encode",
            seqs.par_iter().map(|t| window_embeddings(t, &windowing, &cfg, &weights)).collect(),
        )
    };
    let train_windows = embed(&train_tokens)?;
    let started = Instant::now();
    let test_windows = embed(&test_tokens)?;
    let elapsed = started.elapsed().as_secs_f64();
    let test_real_tokens: usize = test_tokens
        .iter()
        .map(|t| crate::window::window_spans(t.len(), &windowing).iter().map(|(s, e)| e - s).sum::<usize>())
        .sum();
    info!("encoded {} train and {} test documents", train.len(), test.len());

    let examples: Vec<Example> = train
        .iter()
        .zip(&train_windows)
        .flat_map(|(doc, windows)| {
            let gold = corpus.labels.encode(&doc.labels);
            windows.iter().map(move |e| Example {
                embedding: e.clone(),
                gold: gold.clone(),
            })
        })
        .collect();
    let n_labels = corpus.labels.len();
    let trained = stage(
        "train",
        train_probe_standardized(&examples, settings.task, n_labels, &settings.probe_hyper()),
    )?;

    let predictions: Vec<DocPrediction> = stage(
        "predict",
        test.iter()
            .zip(&test_windows)
            .map(|(doc, windows)| {
                let scores = windows
                    .iter()
                    .map(|e| window_predict(e.view(), &trained.weights))
                    .collect::<Result<Vec<_>>>()?;
                match settings.task {
                    TaskKind::Multilabel => aggregate_multilabel(&doc.id, &scores, settings.threshold),
                    _ => aggregate_singlelabel(&doc.id, &scores),
                }
            })
            .collect(),
    )?;
    let gold: Vec<GoldLabels> = test
        .iter()
        .map(|d| GoldLabels {
            doc_id: d.id.clone(),
            labels: corpus.labels.encode(&d.labels),
        })
        .collect();
    let report = stage("evaluate", eval_classification(&predictions, &gold, n_labels, settings.task))?;
    let metrics = MetricReport::Classification(report);

    stage("write", (|| {
        let mut jsonl = Vec::new();
        for p in &predictions {
            let labels: Vec<&str> = p.predicted.iter().filter_map(|&i| corpus.labels.label(i)).collect();
            serde_json::to_writer(
                &mut jsonl,
                &serde_json::json!({ "id": p.doc_id, "probs": p.probs, "predicted": labels }),
            )?;
            jsonl.push(b'\n');
        }
        fs::write(out.join("predictions.jsonl"), &jsonl)?;
        write_text(out.join("labels.txt"), &(corpus.labels.labels().join("\n") + "\n"))?;
        vocab.save(out.join("vocab.txt"))?;
        write_text(out.join("encoder.toml"), &cfg.to_toml())?;
        let row = TableRow {
            model: cfg.label(),
            metrics: metrics.clone(),
            max_context: cfg.max_context,
            tokens_per_sec: Some(test_real_tokens as f64 / elapsed.max(f64::MIN_POSITIVE)),
        };
        let metrics_sha256 = write_tables(out, &row)?;
        let manifest = RunManifest {
            harness_version: HARNESS_VERSION.into(),
            command: "classify".into(),
            settings: settings.clone(),
            corpus_sha256,
            vocab_sha256: vocab.content_hash(),
            encoder_fingerprint: format!("{:016x}", cfg.fingerprint()),
            predictions_sha256: sha256_hex(&jsonl),
            metrics_sha256,
        };
        write_manifest(out.join("manifest.toml"), &manifest)?;
        Ok(RunOutcome {
            metrics,
            row,
            manifest,
            out_dir: out.to_path_buf(),
        })
    })())
}

/// Embeds every document, ranks each query with relevance judgments against
/// all other documents and evaluates the rankings.
pub fn run_retrieve(settings: &RunSettings, out: &Path) -> Result<RunOutcome> {
    stage("config", settings.validate())?;
    if settings.task != TaskKind::Retrieval {
        return Err(Error::config("retrieve needs the retrieval task").in_stage("config"));
    }
    with_marker(out, || retrieve_inner(settings, out))
}

fn retrieve_inner(settings: &RunSettings, out: &Path) -> Result<RunOutcome> {
    let Prepared {
        corpus,
        corpus_sha256,
        vocab,
    } = load_and_vocab(settings, |docs| docs.iter().collect())?;
    let docs: Vec<&Document> = corpus.docs.iter().collect();
    let tokens = tokenize_all(&docs, &vocab)?;
    let windowing = stage("window", settings.windowing())?;
    let cfg = settings.encoder_config(vocab.size());
    let weights = stage("encode", init_weights(&cfg))?;
    let started = Instant::now();
    let embeddings: Vec<Array1<f64>> = stage(
        "encode",
        tokens
            .par_iter()
            .map(|t| mean_vector(&window_embeddings(t, &windowing, &cfg, &weights)?))
            .collect(),
    )?;
    let elapsed = started.elapsed().as_secs_f64();
    let real_tokens: usize = tokens
        .iter()
        .map(|t| crate::window::window_spans(t.len(), &windowing).iter().map(|(s, e)| e - s).sum::<usize>())
        .sum();
    let store = stage(
        "encode",
        DocEmbeddingStore::new(
            cfg.fingerprint(),
            docs.iter().map(|d| d.id.clone()).zip(embeddings).collect(),
        ),
    )?;

    let judgments: RelevanceJudgments = docs
        .iter()
        .filter(|d| !d.relevant().is_empty())
        .map(|d| (d.id.clone(), d.relevant().iter().cloned().collect()))
        .collect();
    if judgments.is_empty() {
        return Err(Error::config("no document has relevant_ids").in_stage("rank"));
    }
    let queries: Vec<String> = judgments.keys().cloned().collect();
    let lists = stage("rank", rank_against_store(&store, &queries))?;
    let report = stage("evaluate", eval_retrieval(&lists, &judgments, &settings.ks))?;
    let metrics = MetricReport::Retrieval(report);

    stage("write", (|| {
        let mut rankings = Vec::new();
        write_rankings_csv(&mut rankings, &lists)?;
        fs::write(out.join("rankings.csv"), &rankings)?;
        store.save(out.join("embeddings.bin"))?;
        vocab.save(out.join("vocab.txt"))?;
        write_text(out.join("encoder.toml"), &cfg.to_toml())?;
        let row = TableRow {
            model: cfg.label(),
            metrics: metrics.clone(),
            max_context: cfg.max_context,
            tokens_per_sec: Some(real_tokens as f64 / elapsed.max(f64::MIN_POSITIVE)),
        };
        let metrics_sha256 = write_tables(out, &row)?;
        let manifest = RunManifest {
            harness_version: HARNESS_VERSION.into(),
            command: "retrieve".into(),
            settings: settings.clone(),
            corpus_sha256,
            vocab_sha256: vocab.content_hash(),
            encoder_fingerprint: format!("{:016x}", cfg.fingerprint()),
            predictions_sha256: sha256_hex(&rankings),
            metrics_sha256,
        };
        write_manifest(out.join("manifest.toml"), &manifest)?;
        Ok(RunOutcome {
            metrics,
            row,
            manifest,
            out_dir: out.to_path_buf(),
        })
    })())
}

/// Reruns the command recorded in a manifest into `out` and checks that the
/// metric and prediction hashes match the recorded ones.
pub fn rerun_manifest(manifest_path: &Path, out: &Path) -> Result<RunOutcome> {
    let manifest = stage("manifest", RunManifest::load(manifest_path))?;
    stage("manifest", manifest.verify_corpus())?;
    let outcome = match manifest.command.as_str() {
        "classify" => run_classify(&manifest.settings, out)?,
        "retrieve" => run_retrieve(&manifest.settings, out)?,
        other => return Err(Error::config(format!("manifest names unknown command `{other}`")).in_stage("manifest")),
    };
    let fresh = &outcome.manifest;
    if fresh.metrics_sha256 != manifest.metrics_sha256 || fresh.predictions_sha256 != manifest.predictions_sha256 {
        return Err(Error::Reproduction(format!(
            "outputs differ from the manifest (metrics {} vs {}, predictions {} vs {})",
            fresh.metrics_sha256, manifest.metrics_sha256, fresh.predictions_sha256, manifest.predictions_sha256
        ))
        .in_stage("verify"));
    }
    Ok(outcome)
}

/// Encoders and lengths for a throughput run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub encoders: Vec<EncoderKind>,
    pub model_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub state_dim: usize,
    pub chunk: usize,
    /// Applied to every encoder; `Some(0)` is unbounded, `None` the kind default.
    pub max_context: Option<usize>,
    pub vocab_size: usize,
    pub lengths: Vec<usize>,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl BenchSettings {
    pub fn encoder_configs(&self) -> Vec<EncoderConfig> {
        self.encoders
            .iter()
            .map(|&kind| EncoderConfig {
                kind,
                vocab_size: self.vocab_size,
                model_dim: self.model_dim,
                n_layers: self.layers,
                n_heads: self.heads,
                state_dim: self.state_dim,
                chunk_len: self.chunk,
                max_context: match self.max_context {
                    Some(0) => None,
                    Some(c) => Some(c),
                    None => default_max_context(kind),
                },
                seed: derive_seed(self.seed, "encoder"),
            })
            .collect()
    }
}

/// Throughput for every encoder at every length, with a scaling exponent when
/// the lengths allow a fit. Writes `bench.csv`, `bench.txt` and `bench.json`.
pub fn run_bench(settings: &BenchSettings, out: &Path) -> Result<Vec<BenchSeries>> {
    if settings.encoders.is_empty() || settings.lengths.is_empty() {
        return Err(Error::config("bench needs at least one encoder and one length").in_stage("config"));
    }
    let cfgs = settings.encoder_configs();
    for cfg in &cfgs {
        stage("config", cfg.validate())?;
    }
    with_marker(out, || {
        let mut series = Vec::with_capacity(cfgs.len());
        for cfg in &cfgs {
            let weights = stage("encode", init_weights(cfg))?;
            series.push(stage(
                "measure",
                run_series(cfg, &weights, &settings.lengths, settings.reps, settings.warmup),
            )?);
        }
        stage("write", (|| {
            let mut csv = Vec::new();
            write_bench_csv(&mut csv, &series)?;
            fs::write(out.join("bench.csv"), csv)?;
            let text = bench_table_text(&series)
                + "\nforward-pass inference only; tokens counted across windows including overlap\n";
            write_text(out.join("bench.txt"), &text)?;
            write_text(out.join("bench.json"), &serde_json::to_string_pretty(&series)?)?;
            Ok(())
        })())?;
        Ok(series)
    })
}

/// Combines the `row.json` of finished runs into one table written to `out`.
pub fn run_report(run_dirs: &[PathBuf], out: &Path) -> Result<Table> {
    let rows = stage(
        "load",
        run_dirs.iter().map(|d| TableRow::load(d.join("row.json"))).collect::<Result<Vec<_>>>(),
    )?;
    let table = stage("table", emit_table(&rows))?;
    fs::create_dir_all(out)?;
    stage("write", (|| {
        write_text(out.join("table.csv"), &table.to_csv()?)?;
        let mut text = table.to_text().into_bytes();
        writeln!(text, "\nAcc. is subset accuracy for multi-label tasks; Tok/s is forward-pass inference")?;
        fs::write(out.join("table.txt"), text)?;
        Ok(())
    })())?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_defaults_follow_encoder() {
        let a = RunSettings::new("c", TaskKind::Multilabel, EncoderKind::Attention);
        assert_eq!((a.max_context, a.window_len), (Some(512), 512));
        let s = RunSettings::new("c", TaskKind::Multilabel, EncoderKind::ScanSequential);
        assert_eq!((s.max_context, s.window_len), (None, 0));
        assert!(a.validate().is_ok());
    }

    #[test]
    fn stage_seeds_are_distinct() {
        let s = RunSettings::new("c", TaskKind::Multilabel, EncoderKind::Attention);
        let seeds = [s.split_spec().unwrap().seed, s.probe_hyper().seed, s.encoder_config(10).seed];
        assert_ne!(seeds[0], seeds[1]);
        assert_ne!(seeds[1], seeds[2]);
    }

    #[test]
    fn bench_max_context_resolution() {
        let mut b = BenchSettings {
            encoders: vec![EncoderKind::Attention, EncoderKind::ScanSequential],
            model_dim: 8,
            layers: 1,
            heads: 2,
            state_dim: 4,
            chunk: 8,
            max_context: None,
            vocab_size: 50,
            lengths: vec![64],
            reps: 3,
            warmup: 1,
            seed: 0,
        };
        let caps: Vec<_> = b.encoder_configs().iter().map(|c| c.max_context).collect();
        assert_eq!(caps, [Some(512), None]);
        b.max_context = Some(0);
        assert!(b.encoder_configs().iter().all(|c| c.max_context.is_none()));
    }

    #[test]
    fn manifest_round_trip() {
        let settings = RunSettings::new("corpus.jsonl", TaskKind::Singlelabel, EncoderKind::ScanChunked);
        let m = RunManifest {
            harness_version: HARNESS_VERSION.into(),
            command: "classify".into(),
            settings,
            corpus_sha256: "a".into(),
            vocab_sha256: "b".into(),
            encoder_fingerprint: "c".into(),
            predictions_sha256: "d".into(),
            metrics_sha256: "e".into(),
        };
        let text = m.to_toml().unwrap();
        assert_eq!(RunManifest::from_toml(&text).unwrap(), m);
        assert!(RunManifest::from_toml(&(text + "bogus = 1\n")).is_err());
    }
}
