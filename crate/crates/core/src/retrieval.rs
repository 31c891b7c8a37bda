//! Document embeddings, cosine ranking and the flat binary embedding store.
//!
//! ```text
//! store: magic "LDES" | version u32 | dim u64 | count u64 | fingerprint u64
//!        | count x (id length u32, id utf-8 bytes) | count x dim f64 row-major
//! ```

use std::collections::{BTreeSet, HashMap};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::encoder::{encode, EncoderConfig, EncoderWeights};
use crate::error::{Error, Result};
use crate::tokenize::TokenSequence;
use crate::window::{make_windows, WindowingConfig};

const MAGIC: &[u8; 4] = b"LDES";
const VERSION: u32 = 1;

/// Pooled embedding of every window of a document, in window order.
pub fn window_embeddings(
    tokens: &TokenSequence,
    windowing: &WindowingConfig,
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
) -> Result<Vec<Array1<f64>>> {
    let windows = make_windows(tokens, windowing)?;
    windows
        .padded_ids
        .iter()
        .zip(&windows.masks)
        .map(|(ids, mask)| encode(ids, mask, cfg, weights).map(|e| e.pooled))
        .collect()
}

/// Unweighted mean of a document's window embeddings.
pub fn embed_document(
    tokens: &TokenSequence,
    windowing: &WindowingConfig,
    cfg: &EncoderConfig,
    weights: &EncoderWeights,
) -> Result<Array1<f64>> {
    let windows = window_embeddings(tokens, windowing, cfg, weights)?;
    mean_vector(&windows)
}

pub(crate) fn mean_vector(rows: &[Array1<f64>]) -> Result<Array1<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Degenerate("no vectors to average".into()))?;
    let mut acc = Array1::zeros(first.len());
    for r in rows {
        acc += r;
    }
    Ok(acc / rows.len() as f64)
}

/// `a.b / (|a| |b|)`; a zero-norm side scores 0.
pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        warn!("cosine with a zero-norm vector; scoring 0");
        return 0.0;
    }
    a.dot(&b) / (na * nb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    /// `(candidate_id, score)` with non-increasing scores; ties by ascending id.
    pub entries: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbeddingStore {
    fingerprint: u64,
    ids: Vec<String>,
    vectors: Array2<f64>,
    index: HashMap<String, usize>,
}

impl DocEmbeddingStore {
    /// Builds a store from `(id, vector)` rows; ids must be unique and vectors
    /// share one dimension.
    pub fn new(fingerprint: u64, rows: Vec<(String, Array1<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let mut vectors = Array2::zeros((rows.len(), dim));
        let mut ids = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        for (i, (id, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id));
            }
            vectors.row_mut(i).assign(&v);
            ids.push(id);
        }
        Ok(Self {
            fingerprint,
            ids,
            vectors,
            index,
        })
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Result<ArrayView1<'_, f64>> {
        self.index
            .get(id)
            .map(|&i| self.vectors.row(i))
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for v in [self.dim() as u64, self.len() as u64, self.fingerprint] {
            w.write_all(&v.to_le_bytes())?;
        }
        for id in &self.ids {
            let len = u32::try_from(id.len()).map_err(|_| Error::Format(format!("id too long: {id}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        for v in &self.vectors {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(std::fs::File::open(path)?).read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, at: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("bad embedding store magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported store version {version}")));
        }
        let dim = cur.u64()? as usize;
        let count = cur.u64()? as usize;
        let fingerprint = cur.u64()?;
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes")) as usize;
            let id = std::str::from_utf8(cur.take(len)?)
                .map_err(|e| Error::Format(format!("id is not utf-8: {e}")))?;
            ids.push(id.to_string());
        }
        let mut data = Vec::with_capacity(count * dim);
        for _ in 0..count * dim {
            data.push(f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes")));
        }
        if cur.at != bytes.len() {
            return Err(Error::Format("trailing bytes after embedding store".into()));
        }
        let vectors = Array2::from_shape_vec((count, dim), data).expect("shape matches length");
        let rows = ids.into_iter().zip(vectors.rows().into_iter().map(|r| r.to_owned())).collect();
        Self::new(fingerprint, rows)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated embedding store".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Scores every pool member against the query and sorts the full pool.
pub fn rank_candidates(query_id: &str, store: &DocEmbeddingStore, pool: &[String]) -> Result<RankedList> {
    let q = store.get(query_id)?;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(pool.len());
    for id in pool {
        if id == query_id {
            return Err(Error::config(format!("query {query_id} is in its own candidate pool")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
        entries.push((id.clone(), cosine(q, store.get(id)?)));
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(RankedList {
        query_id: query_id.to_string(),
        entries,
    })
}

/// Ranks each query against every other document in the store.
pub fn rank_against_store(store: &DocEmbeddingStore, queries: &[String]) -> Result<Vec<RankedList>> {
    queries
        .par_iter()
        .map(|q| {
            let pool: Vec<String> = store.ids().iter().filter(|id| *id != q).cloned().collect();
            rank_candidates(q, store, &pool)
        })
        .collect()
}

/// Rankings as CSV with header `query_id,rank,candidate_id,score`; ranks are 1-based.
pub fn write_rankings_csv<W: Write>(out: W, lists: &[RankedList]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query_id", "rank", "candidate_id", "score"])?;
    for list in lists {
        for (rank, (id, score)) in list.entries.iter().enumerate() {
            w.write_record([
                list.query_id.as_str(),
                &(rank + 1).to_string(),
                id.as_str(),
                &score.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn store(rows: &[(&str, Vec<f64>)]) -> DocEmbeddingStore {
        DocEmbeddingStore::new(
            7,
            rows.iter().map(|(id, v)| (id.to_string(), Array1::from(v.clone()))).collect(),
        )
        .unwrap()
    }

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_examples() {
        let v = array![0.3, -2.0, 5.0];
        assert!((cosine(v.view(), v.view()) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(array![1.0, 0.0].view(), array![0.0, 1.0].view()), 0.0);
        let c = cosine(array![1.0, 2.0].view(), array![3.0, 4.0].view());
        assert!((c - 11.0 / (5f64.sqrt() * 5.0)).abs() < 1e-15);
        assert!((c - 0.98387).abs() < 1e-5);
        assert_eq!(cosine(array![0.0, 0.0].view(), v.slice(ndarray::s![..2])), 0.0);
    }

    #[test]
    fn ties_rank_by_ascending_id() {
        let s = store(&[("q", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("a", vec![0.0, 2.0]), ("c", vec![1.0, 0.0])]);
        let list = rank_candidates("q", &s, &ids(&["b", "c", "a"])).unwrap();
        let order: Vec<&str> = list.entries.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(order, ["c", "a", "b"]);
        assert_eq!(list.entries[0].1, 1.0);
    }

    #[test]
    fn pool_errors() {
        let s = store(&[("q", vec![1.0]), ("a", vec![1.0])]);
        assert!(rank_candidates("q", &s, &ids(&["a", "q"])).is_err());
        assert!(matches!(
            rank_candidates("q", &s, &ids(&["zz"])),
            Err(Error::MissingEmbedding(id)) if id == "zz"
        ));
        assert!(matches!(rank_candidates("q", &s, &ids(&["a", "a"])), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn store_round_trip_preserves_rankings() {
        let s = store(&[("q", vec![1.0, 0.5]), ("a", vec![0.1, 2.0]), ("é", vec![-1.0, 0.2])]);
        let f = tempfile::NamedTempFile::new().unwrap();
        s.save(f.path()).unwrap();
        let back = DocEmbeddingStore::load(f.path()).unwrap();
        assert_eq!(back, s);
        assert_eq!(
            rank_against_store(&back, &ids(&["q"])).unwrap(),
            rank_against_store(&s, &ids(&["q"])).unwrap()
        );
        let bytes = std::fs::read(f.path()).unwrap();
        assert_eq!(&bytes[..4], b"LDES");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 7);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let rows = vec![("a".to_string(), array![1.0]), ("b".to_string(), array![1.0, 2.0])];
        assert!(DocEmbeddingStore::new(0, rows).is_err());
    }

    #[test]
    fn rankings_csv_layout() {
        let list = RankedList {
            query_id: "q".into(),
            entries: vec![("a".into(), 0.5), ("b".into(), 0.25)],
        };
        let mut out = Vec::new();
        write_rankings_csv(&mut out, &[list]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "query_id,rank,candidate_id,score\nq,1,a,0.5\nq,2,b,0.25\n"
        );
    }
}
