//! Word-level tokenizer shared by every encoder.
//!
//! Surface tokens are maximal alphanumeric runs, lowercased; every other
//! non-whitespace character is a token on its own. Ids 0..4 are reserved.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::hashing::sha256_hex;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const N_RESERVED: usize = 4;

const RESERVED_NAMES: [&str; N_RESERVED] = ["[PAD]", "[UNK]", "[BOS]", "[EOS]"];

/// Splits text into lowercased surface tokens.
pub fn split_surface(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            run.extend(c.to_lowercase());
            continue;
        }
        if !run.is_empty() {
            out.push(std::mem::take(&mut run));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), (i + N_RESERVED) as u32))
            .collect();
        Self { tokens, index }
    }

    /// Total number of ids, reserved ones included.
    pub fn size(&self) -> usize {
        self.tokens.len() + N_RESERVED
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        let id = id as usize;
        if id < N_RESERVED {
            Some(RESERVED_NAMES[id])
        } else {
            self.tokens.get(id - N_RESERVED).map(String::as_str)
        }
    }

    /// File form: four reserved header lines, then one token per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for name in RESERVED_NAMES.iter().copied().chain(self.tokens.iter().map(String::as_str)) {
            s.push_str(name);
            s.push('\n');
        }
        s
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut tokens = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let record_err = |message: String| Error::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            if i < N_RESERVED {
                if line != RESERVED_NAMES[i] {
                    return Err(record_err(format!("expected header `{}`", RESERVED_NAMES[i])));
                }
            } else if line.is_empty() {
                return Err(record_err("empty token".into()));
            } else {
                tokens.push(line);
            }
        }
        Ok(Self::from_tokens(tokens))
    }
}

/// Keeps the `target_size - 4` most frequent surface tokens, frequency-descending
/// with lexicographic tie-breaking.
pub fn build_vocab<'a, I>(docs: I, target_size: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a Document>,
{
    if target_size <= N_RESERVED {
        return Err(Error::config(format!(
            "vocabulary size must be at least {}, got {target_size}",
            N_RESERVED + 1
        )));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut any = false;
    for doc in docs {
        any = true;
        for tok in split_surface(&doc.text) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    if !any {
        return Err(Error::config("cannot build a vocabulary from zero documents"));
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(target_size - N_RESERVED);
    Ok(Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t).collect()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub doc_id: String,
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn tokenize(text: &str, vocab: &Vocab) -> Result<Vec<u32>> {
    let ids: Vec<u32> = split_surface(text).iter().map(|t| vocab.id(t)).collect();
    if ids.is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(ids)
}

pub fn tokenize_document(doc: &Document, vocab: &Vocab) -> Result<TokenSequence> {
    let ids = tokenize(&doc.text, vocab).map_err(|e| match e {
        Error::EmptyText => Error::InvalidDocument {
            id: doc.id.clone(),
            message: "text has no tokens".into(),
        },
        other => other,
    })?;
    Ok(TokenSequence {
        doc_id: doc.id.clone(),
        ids,
    })
}
