//! Result tables and run manifests.
//!
//! Metrics render as percentages with one decimal, throughput in thousands of
//! tokens per second with one decimal, and `Len` as the context cap or `Flex`.
//! Formatting rounds ties to even.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::ThroughputReport;
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;
use crate::metrics::MetricReport;
use crate::pipeline::RunSettings;

pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One table row: a model's metrics, its context cap and measured throughput.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub metrics: MetricReport,
    /// `None` renders as `Flex`.
    pub max_context: Option<usize>,
    pub tokens_per_sec: Option<f64>,
}

impl TableRow {
    pub fn new(model: impl Into<String>, metrics: MetricReport, throughput: &ThroughputReport) -> Self {
        Self {
            model: model.into(),
            metrics,
            max_context: throughput.max_context,
            tokens_per_sec: Some(throughput.tokens_per_sec),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut all = vec![self.header.clone()];
        all.extend(self.rows.iter().cloned());
        align(&all)
    }
}

/// Left-aligns the first column, right-aligns the rest.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

pub fn format_percent(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

pub fn format_tok_per_sec(value: f64) -> String {
    format!("{:.1}k", value / 1000.0)
}

pub fn format_len(max_context: Option<usize>) -> String {
    max_context.map_or_else(|| "Flex".to_string(), |c| c.to_string())
}

#[derive(PartialEq)]
enum Schema {
    Classification,
    Retrieval(Vec<usize>),
}

fn schema(m: &MetricReport) -> Schema {
    match m {
        MetricReport::Classification(_) => Schema::Classification,
        MetricReport::Retrieval(r) => Schema::Retrieval(r.recall_at_k.iter().map(|(k, _)| *k).collect()),
    }
}

fn header(s: &Schema) -> Vec<String> {
    let mut h = vec!["model".to_string()];
    match s {
        Schema::Classification => h.extend(["Micro-F1", "Macro-F1", "Acc.", "AUC"].map(String::from)),
        Schema::Retrieval(ks) => {
            h.extend(["MAP", "MRR"].map(String::from));
            h.extend(ks.iter().map(|k| format!("R@{k}")));
            h.extend(ks.iter().map(|k| format!("nDCG@{k}")));
        }
    }
    h.extend(["Len", "Tok/s"].map(String::from));
    h
}

fn metric_values(m: &MetricReport) -> Vec<Option<f64>> {
    match m {
        MetricReport::Classification(c) => vec![Some(c.micro_f1), Some(c.macro_f1), Some(c.accuracy), c.auc],
        MetricReport::Retrieval(r) => {
            let mut v = vec![Some(r.map), Some(r.mrr)];
            v.extend(r.recall_at_k.iter().map(|(_, x)| Some(*x)));
            v.extend(r.ndcg_at_k.iter().map(|(_, x)| Some(*x)));
            v
        }
    }
}

fn build(rows: &[TableRow], metric: impl Fn(f64) -> String, tok: impl Fn(f64) -> String) -> Result<Table> {
    let first = rows.first().ok_or_else(|| Error::config("cannot build a table from zero rows"))?;
    let s = schema(&first.metrics);
    if rows.iter().any(|r| schema(&r.metrics) != s) {
        return Err(Error::config("table rows mix task kinds or retrieval cutoffs"));
    }
    let body = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.model.clone()];
            cells.extend(metric_values(&r.metrics).into_iter().map(|v| v.map(&metric).unwrap_or_default()));
            cells.push(format_len(r.max_context));
            cells.push(r.tokens_per_sec.map(&tok).unwrap_or_default());
            cells
        })
        .collect();
    Ok(Table {
        header: header(&s),
        rows: body,
    })
}

/// Rounded table in the column order of the published results.
pub fn emit_table(rows: &[TableRow]) -> Result<Table> {
    build(rows, format_percent, format_tok_per_sec)
}

/// Same columns with unrounded metric values and the timing column left blank,
/// so reruns of the same configuration are byte-identical.
pub fn metrics_table(rows: &[TableRow]) -> Result<Table> {
    let untimed: Vec<TableRow> = rows
        .iter()
        .map(|r| TableRow {
            tokens_per_sec: None,
            ..r.clone()
        })
        .collect();
    build(&untimed, |v| v.to_string(), |v| v.to_string())
}

/// Everything needed to rerun a classification or retrieval run, plus content
/// hashes of its inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub harness_version: String,
    pub command: String,
    pub settings: RunSettings,
    pub corpus_sha256: String,
    pub vocab_sha256: String,
    pub encoder_fingerprint: String,
    pub predictions_sha256: String,
    pub metrics_sha256: String,
}

const MANIFEST_KEYS: [&str; 7] = [
    "harness_version",
    "command",
    "corpus_sha256",
    "vocab_sha256",
    "encoder_fingerprint",
    "predictions_sha256",
    "metrics_sha256",
];

impl RunManifest {
    /// Flat `key = value` TOML.
    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::try_from(&self.settings).map_err(|e| Error::config(e.to_string()))?;
        let values = [
            &self.harness_version,
            &self.command,
            &self.corpus_sha256,
            &self.vocab_sha256,
            &self.encoder_fingerprint,
            &self.predictions_sha256,
            &self.metrics_sha256,
        ];
        for (k, v) in MANIFEST_KEYS.iter().zip(values) {
            table.insert(k.to_string(), toml::Value::String(v.clone()));
        }
        toml::to_string(&table).map_err(|e| Error::config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::config(format!("manifest: {e}")))?;
        let mut take = |key: &str| -> Result<String> {
            match table.remove(key) {
                Some(toml::Value::String(s)) => Ok(s),
                _ => Err(Error::config(format!("manifest is missing string key `{key}`"))),
            }
        };
        let [harness_version, command, corpus_sha256, vocab_sha256, encoder_fingerprint, predictions_sha256, metrics_sha256] =
            MANIFEST_KEYS.map(&mut take);
        let settings: RunSettings = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("manifest settings: {e}")))?;
        Ok(Self {
            harness_version: harness_version?,
            command: command?,
            settings,
            corpus_sha256: corpus_sha256?,
            vocab_sha256: vocab_sha256?,
            encoder_fingerprint: encoder_fingerprint?,
            predictions_sha256: predictions_sha256?,
            metrics_sha256: metrics_sha256?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Refuses when the corpus on disk no longer hashes to the recorded value.
    pub fn verify_corpus(&self) -> Result<()> {
        let bytes = std::fs::read(&self.settings.corpus)?;
        let now = sha256_hex(&bytes);
        if now != self.corpus_sha256 {
            return Err(Error::Reproduction(format!(
                "corpus {} hashes to {now}, manifest records {}",
                self.settings.corpus.display(),
                self.corpus_sha256
            )));
        }
        Ok(())
    }
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    std::fs::write(path, manifest.to_toml()?)?;
    Ok(())
}
