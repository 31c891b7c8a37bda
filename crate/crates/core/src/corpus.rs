//! Document ingestion, label vocabularies, deterministic splits and synthetic corpora.
//!
//! The on-disk format is one JSON object per line:
//!
//! ```text
//! {"id": "case-001", "text": "...", "labels": ["art6"], "relevant_ids": ["case-017"]}
//! ```
//!
//! `relevant_ids` is optional and only meaningful for retrieval corpora.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::stable_hash64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Multilabel,
    Singlelabel,
    Retrieval,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Multilabel => "multilabel",
            TaskKind::Singlelabel => "singlelabel",
            TaskKind::Retrieval => "retrieval",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multilabel" => Ok(TaskKind::Multilabel),
            "singlelabel" => Ok(TaskKind::Singlelabel),
            "retrieval" => Ok(TaskKind::Retrieval),
            other => Err(Error::config(format!("unknown task kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant_ids: Option<Vec<String>>,
    #[serde(skip)]
    pub split: Split,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            labels,
            relevant_ids: None,
            split: Split::Unassigned,
        }
    }

    /// Relevant ids, empty when the record carries none.
    pub fn relevant(&self) -> &[String] {
        self.relevant_ids.as_deref().unwrap_or(&[])
    }
}

/// Lexicographically ordered bijection between label strings and dense indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVocab {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl LabelVocab {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let labels: Vec<String> = set.into_iter().collect();
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self { labels, index }
    }

    pub fn from_documents(docs: &[Document]) -> Self {
        Self::from_labels(docs.iter().flat_map(|d| d.labels.iter().cloned()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sorted dense indices for a document's labels.
    pub fn encode(&self, labels: &[String]) -> Vec<usize> {
        let mut idx: Vec<usize> = labels.iter().filter_map(|l| self.index_of(l)).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub task: TaskKind,
    pub docs: Vec<Document>,
    pub labels: LabelVocab,
}

impl Corpus {
    /// Validates documents for `task` and builds the label vocabulary.
    pub fn new(task: TaskKind, docs: Vec<Document>) -> Result<Self> {
        validate_documents(task, &docs)?;
        let labels = LabelVocab::from_documents(&docs);
        Ok(Self { task, docs, labels })
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.docs.iter().filter(move |d| d.split == split)
    }
}

fn validate_document(task: TaskKind, doc: &Document) -> std::result::Result<(), String> {
    if doc.id.is_empty() {
        return Err("id must be non-empty".into());
    }
    if doc.text.is_empty() {
        return Err("text must be non-empty".into());
    }
    let distinct: HashSet<&String> = doc.labels.iter().collect();
    if distinct.len() != doc.labels.len() {
        return Err("labels contain duplicates".into());
    }
    if task == TaskKind::Singlelabel && doc.labels.len() != 1 {
        return Err(format!(
            "single-label task requires exactly one label, found {}",
            doc.labels.len()
        ));
    }
    if doc.relevant().iter().any(|r| r == &doc.id) {
        return Err("relevant_ids contains the document's own id".into());
    }
    Ok(())
}

fn validate_documents(task: TaskKind, docs: &[Document]) -> Result<()> {
    let mut seen = HashSet::with_capacity(docs.len());
    for doc in docs {
        validate_document(task, doc).map_err(|message| Error::InvalidDocument {
            id: doc.id.clone(),
            message,
        })?;
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::DuplicateId(doc.id.clone()));
        }
    }
    for doc in docs {
        if let Some(missing) = doc.relevant().iter().find(|r| !seen.contains(r.as_str())) {
            return Err(Error::InvalidDocument {
                id: doc.id.clone(),
                message: format!("relevant id `{missing}` is not in the corpus"),
            });
        }
    }
    Ok(())
}

/// Reads a line-delimited corpus file, validating every record for `task`.
pub fn load_corpus(path: impl AsRef<Path>, task: TaskKind) -> Result<Corpus> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let record_err = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.map_err(|e| record_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| record_err(e.to_string()))?;
        validate_document(task, &doc).map_err(record_err)?;
        if !seen.insert(doc.id.clone()) {
            return Err(record_err(format!("duplicate document id `{}`", doc.id)));
        }
        docs.push(doc);
    }
    Corpus::new(task, docs)
}

/// Writes documents in the line-delimited record format.
pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Split(format!("fractions {fracs:?} must lie in [0, 1]")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Split sizes for `n` documents by largest-remainder rounding.
    ///
    /// Equal remainders go to the earlier split (train, then validation, then test).
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train_frac, self.val_frac, self.test_frac].map(|f| f * n as f64);
        // 1e-9 absorbs products such as 0.7 * 100 = 69.99999999999999.
        let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        let rem = |i: usize| quotas[i] - counts[i] as f64;
        order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.70,
            val_frac: 0.15,
            test_frac: 0.15,
            seed: 0,
        }
    }
}

/// Assigns splits as a function of `(id, seed)` alone: documents are ordered by a
/// seeded hash of their id and the first `counts[0]` become train, and so on.
pub fn split_corpus(mut docs: Vec<Document>, spec: &SplitSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    if docs.len() < 3 {
        return Err(Error::Split(format!(
            "need at least 3 documents, got {}",
            docs.len()
        )));
    }
    if let Some(d) = docs.iter().find(|d| d.split != Split::Unassigned) {
        return Err(Error::Split(format!("document `{}` already has a split", d.id)));
    }
    let seed = spec.seed.to_le_bytes();
    let mut order: Vec<(u64, usize)> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (stable_hash64(&[&seed, d.id.as_bytes()]), i))
        .collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| docs[a.1].id.cmp(&docs[b.1].id)));

    let [n_train, n_val, _] = spec.counts(docs.len());
    for (rank, &(_, i)) in order.iter().enumerate() {
        docs[i].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(docs)
}

/// Parameters of the planted-marker synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Inclusive token-count range of each document.
    pub len_range: (usize, usize),
    pub n_labels: usize,
    pub task: TaskKind,
    pub seed: u64,
    /// Probability that a document carries the marker of each of its labels.
    pub marker_prob: f64,
    /// Fraction of token positions replaced by a carried marker.
    pub marker_density: f64,
    pub background_vocab: usize,
}

impl SyntheticSpec {
    pub fn new(
        n_docs: usize,
        len_range: (usize, usize),
        n_labels: usize,
        task: TaskKind,
        seed: u64,
    ) -> Self {
        Self {
            n_docs,
            len_range,
            n_labels,
            task,
            seed,
            marker_prob: 0.9,
            marker_density: 0.05,
            background_vocab: 400,
        }
    }
}

const SYLLABLES: [&str; 16] = [
    "lex", "jur", "pro", "con", "sta", "tut", "ar", "ti", "cle", "mo", "ve", "re", "da", "pen",
    "sor", "ium",
];

/// Background word `i`: a unique letter-only string built from syllables.
pub fn background_word(i: usize) -> String {
    let mut word = String::new();
    let mut rest = i;
    loop {
        word.push_str(SYLLABLES[rest % SYLLABLES.len()]);
        rest /= SYLLABLES.len();
        if rest == 0 {
            break;
        }
    }
    // Single-syllable words would collide with two-syllable ones sharing a prefix.
    word.push_str(SYLLABLES[i % 7]);
    word
}

/// Marker token planted for label `label`; contains digits so it never collides
/// with a background word.
pub fn marker_token(label: usize) -> String {
    format!("statute{label}")
}

pub fn synthetic_label(label: usize) -> String {
    format!("label_{label:02}")
}

/// Generates a deterministic corpus whose labels are signalled by planted marker tokens.
///
/// Texts tokenize to exactly the sampled length. Retrieval corpora use the single
/// label as a topic and mark every other same-topic document as relevant.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Vec<Document>> {
    let (lo, hi) = spec.len_range;
    if spec.n_docs == 0 {
        return Err(Error::config("n_docs must be at least 1"));
    }
    if lo == 0 || hi < lo {
        return Err(Error::config(format!("invalid length range [{lo}, {hi}]")));
    }
    if spec.n_labels == 0 || spec.background_vocab == 0 {
        return Err(Error::config("n_labels and background_vocab must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let words: Vec<String> = (0..spec.background_vocab).map(background_word).collect();
    // Zipf-like background: cumulative weights 1/(rank+1).
    let mut cdf: Vec<f64> = Vec::with_capacity(words.len());
    let mut acc = 0.0;
    for r in 0..words.len() {
        acc += 1.0 / (r as f64 + 1.0);
        cdf.push(acc);
    }

    let mut docs = Vec::with_capacity(spec.n_docs);
    for i in 0..spec.n_docs {
        let labels: Vec<usize> = match spec.task {
            TaskKind::Singlelabel | TaskKind::Retrieval => vec![rng.random_range(0..spec.n_labels)],
            TaskKind::Multilabel => {
                let k = rng.random_range(1..=spec.n_labels.min(3));
                let mut picked = BTreeSet::new();
                while picked.len() < k {
                    picked.insert(rng.random_range(0..spec.n_labels));
                }
                picked.into_iter().collect()
            }
        };
        let carried: Vec<usize> = labels
            .iter()
            .copied()
            .filter(|_| rng.random_bool(spec.marker_prob))
            .collect();

        let len = rng.random_range(lo..=hi);
        let mut tokens: Vec<String> = Vec::with_capacity(len);
        for j in 0..len {
            // Sentence punctuation is a token of its own.
            if j > 0 && j + 1 < len && j % 13 == 12 {
                tokens.push(".".to_string());
                continue;
            }
            let u = rng.random::<f64>() * acc;
            let r = cdf.partition_point(|&c| c < u).min(words.len() - 1);
            tokens.push(words[r].clone());
        }
        for &label in &carried {
            let marker = marker_token(label);
            let mut planted = false;
            for tok in tokens.iter_mut().filter(|t| t.as_str() != ".") {
                if rng.random_bool(spec.marker_density) {
                    *tok = marker.clone();
                    planted = true;
                }
            }
            if !planted {
                let pos = rng.random_range(0..len);
                if tokens[pos] != "." {
                    tokens[pos] = marker;
                } else {
                    tokens[pos - 1] = marker;
                }
            }
        }
        let mut text = String::new();
        for (j, tok) in tokens.iter().enumerate() {
            if j > 0 && tok != "." {
                text.push(' ');
            }
            text.push_str(tok);
        }
        docs.push(Document::new(
            format!("doc{i:05}"),
            text,
            labels.iter().map(|&l| synthetic_label(l)).collect(),
        ));
    }

    if spec.task == TaskKind::Retrieval {
        let mut by_topic: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for d in &docs {
            by_topic.entry(d.labels[0].clone()).or_default().push(d.id.clone());
        }
        for d in docs.iter_mut() {
            let rel: Vec<String> = by_topic[&d.labels[0]]
                .iter()
                .filter(|id| **id != d.id)
                .cloned()
                .collect();
            d.relevant_ids = Some(rel);
        }
    }
    Ok(docs)
}

/// Retrieval corpus in which every document has an exact duplicate (`<id>_dup`)
/// and each member of a pair is the other's only relevant document.
pub fn duplicate_pairs(base: &[Document]) -> Vec<Document> {
    let mut out = Vec::with_capacity(base.len() * 2);
    for d in base {
        let dup_id = format!("{}_dup", d.id);
        let mut orig = d.clone();
        orig.relevant_ids = Some(vec![dup_id.clone()]);
        orig.split = Split::Unassigned;
        let mut dup = orig.clone();
        dup.id = dup_id;
        dup.relevant_ids = Some(vec![d.id.clone()]);
        out.push(orig);
        out.push(dup);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::split_surface;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn docs(n: usize) -> Vec<Document> {
        (0..n)
            .map(|i| Document::new(format!("d{i}"), "text", vec!["a".into()]))
            .collect()
    }

    #[test]
    fn loads_valid_file_in_order() {
        let f = write_lines(&[
            r#"{"id":"x","text":"one","labels":["b","a"]}"#,
            r#"{"id":"y","text":"two","labels":[]}"#,
            r#"{"id":"z","text":"three","labels":["c"]}"#,
        ]);
        let corpus = load_corpus(f.path(), TaskKind::Multilabel).unwrap();
        let ids: Vec<_> = corpus.docs.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["x", "y", "z"]);
        assert_eq!(corpus.labels.labels(), ["a", "b", "c"]);
        assert_eq!(corpus.labels.encode(&corpus.docs[0].labels), [0, 1]);
    }

    #[test]
    fn missing_text_names_line() {
        let f = write_lines(&[
            r#"{"id":"x","text":"one","labels":["a"]}"#,
            r#"{"id":"y","labels":["a"]}"#,
        ]);
        match load_corpus(f.path(), TaskKind::Multilabel) {
            Err(Error::Record { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("expected record error, got {other:?}"),
        }
    }

    #[test]
    fn singlelabel_rejects_two_labels() {
        let f = write_lines(&[r#"{"id":"x","text":"one","labels":["a","b"]}"#]);
        assert!(matches!(
            load_corpus(f.path(), TaskKind::Singlelabel),
            Err(Error::Record { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_lines(&[
            r#"{"id":"x","text":"one","labels":["a"]}"#,
            r#"{"id":"x","text":"two","labels":["a"]}"#,
        ]);
        assert!(load_corpus(f.path(), TaskKind::Singlelabel).is_err());
    }

    #[test]
    fn self_relevance_and_dangling_relevance_rejected() {
        let f = write_lines(&[r#"{"id":"x","text":"one","labels":[],"relevant_ids":["x"]}"#]);
        assert!(load_corpus(f.path(), TaskKind::Retrieval).is_err());
        let f = write_lines(&[r#"{"id":"x","text":"one","labels":[],"relevant_ids":["q"]}"#]);
        assert!(matches!(
            load_corpus(f.path(), TaskKind::Retrieval),
            Err(Error::InvalidDocument { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_label_bytes() {
        let f = write_lines(&[
            r#"{"id":"x","text":"one","labels":["b","a"]}"#,
            r#"{"id":"y","text":"two","labels":["c"],"relevant_ids":["x"]}"#,
        ]);
        let corpus = load_corpus(f.path(), TaskKind::Retrieval).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_corpus(out.path(), &corpus.docs).unwrap();
        let again = load_corpus(out.path(), TaskKind::Retrieval).unwrap();
        assert_eq!(corpus.docs, again.docs);
        assert_eq!(
            std::fs::read_to_string(f.path()).unwrap(),
            std::fs::read_to_string(out.path()).unwrap()
        );
    }

    #[test]
    fn split_70_15_15_exact() {
        let out = split_corpus(docs(100), &SplitSpec::new(0.70, 0.15, 0.15, 7).unwrap()).unwrap();
        let count = |s| out.iter().filter(|d| d.split == s).count();
        assert_eq!(
            (count(Split::Train), count(Split::Validation), count(Split::Test)),
            (70, 15, 15)
        );
    }

    #[test]
    fn split_largest_remainder() {
        // quotas 7.5 / 1.0 / 1.5 -> floors 7/1/1, the one leftover goes to the
        // first of the tied .5 remainders (train).
        let spec = SplitSpec::new(0.75, 0.10, 0.15, 3).unwrap();
        assert_eq!(spec.counts(10), [8, 1, 1]);
        let out = split_corpus(docs(10), &spec).unwrap();
        assert_eq!(out.iter().filter(|d| d.split == Split::Train).count(), 8);
    }

    #[test]
    fn split_deterministic_and_order_independent() {
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 1).unwrap();
        let a = split_corpus(docs(10), &spec).unwrap();
        let b = split_corpus(docs(10), &spec).unwrap();
        assert_eq!(a, b);
        let mut rev = docs(10);
        rev.reverse();
        let c = split_corpus(rev, &spec).unwrap();
        for d in &a {
            let other = c.iter().find(|o| o.id == d.id).unwrap();
            assert_eq!(d.split, other.split);
        }
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(SplitSpec::new(0.7, 0.2, 0.2, 0).is_err());
        let bad = SplitSpec {
            train_frac: 0.5,
            val_frac: 0.5,
            test_frac: 0.5,
            seed: 0,
        };
        assert!(split_corpus(docs(10), &bad).is_err());
        assert!(split_corpus(docs(2), &SplitSpec::default()).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec::new(5, (20, 40), 3, TaskKind::Multilabel, 42);
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        let ser = |d: &[Document]| serde_json::to_string(d).unwrap();
        assert_eq!(ser(&a), ser(&b));
    }

    #[test]
    fn synthetic_lengths_within_range() {
        let spec = SyntheticSpec::new(100, (800, 1200), 5, TaskKind::Singlelabel, 9);
        for d in generate_synthetic_corpus(&spec).unwrap() {
            let n = split_surface(&d.text).len();
            assert!((800..=1200).contains(&n), "{} has {n} tokens", d.id);
        }
    }

    #[test]
    fn background_words_are_unique_and_letters() {
        let words: HashSet<String> = (0..2000).map(background_word).collect();
        assert_eq!(words.len(), 2000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn synthetic_retrieval_relevance_is_same_topic() {
        let spec = SyntheticSpec::new(30, (10, 20), 4, TaskKind::Retrieval, 1);
        let docs = generate_synthetic_corpus(&spec).unwrap();
        let corpus = Corpus::new(TaskKind::Retrieval, docs).unwrap();
        for d in &corpus.docs {
            for r in d.relevant() {
                let other = corpus.docs.iter().find(|o| &o.id == r).unwrap();
                assert_eq!(other.labels, d.labels);
            }
        }
    }

    #[test]
    fn duplicate_pairs_are_mutually_relevant() {
        let base = docs(3);
        let dup = duplicate_pairs(&base);
        let corpus = Corpus::new(TaskKind::Retrieval, dup).unwrap();
        assert_eq!(corpus.docs.len(), 6);
        assert_eq!(corpus.docs[1].relevant(), ["d0"]);
        assert_eq!(corpus.docs[0].relevant(), ["d0_dup"]);
    }
}
