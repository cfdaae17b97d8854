//! Hybrid retrieval over chunks: lexical BM25 fused with dense cosine
//! similarity via min-max normalization and a weighted sum.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::docmodel::Chunk;
use crate::embedding::{cosine, EmbedError, Embedder};
use crate::text::tokenize;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// BM25 term-frequency saturation.
pub const BM25_K1: f64 = 1.2;
/// BM25 length-normalization strength.
pub const BM25_B: f64 = 0.75;
/// Default weight of the dense cosine score in the fused ranking.
pub const DENSE_WEIGHT: f64 = 0.6;
/// Default weight of the BM25 score in the fused ranking.
pub const BM25_WEIGHT: f64 = 0.4;

const INDEX_FORMAT: &str = "idc-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot search an empty index")]
    EmptyIndex,
    #[error("score lists have different lengths: {left} vs {right}")]
    ScoreLength { left: usize, right: usize },
    #[error("query embedding has dimension {got} but the index was built with {want}")]
    QueryDim { got: usize, want: usize },
    #[error("unrecognized index format {found:?} (expected {expected:?})")]
    Format { found: String, expected: String },
    #[error("index version {found} is not supported (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("failed to access index file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index file {path} is not valid JSON: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Searchable store: the chunks, their BM25 term statistics, and their
/// dense embeddings. Serializes to a versioned JSON file.
#[derive(Debug, Serialize, Deserialize)]
pub struct Index {
    format: String,
    version: u32,
    dim: usize,
    chunks: Vec<Chunk>,
    /// Per-chunk term -> occurrence count.
    term_counts: Vec<BTreeMap<String, u32>>,
    /// Per-chunk token count.
    lengths: Vec<usize>,
    /// Term -> number of chunks containing it.
    chunk_freq: BTreeMap<String, u32>,
    avg_len: f64,
    embeddings: Vec<Vec<f64>>,
}

impl Index {
    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// One ranked hit; `index` points into [`Index::chunks`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    /// Position of the chunk in the index.
    pub index: usize,
    /// Fused score: weighted sum of the min-max normalized signals.
    pub score: f64,
    /// Raw dense signal: cosine between the query and chunk embeddings.
    pub dense: f64,
    /// Raw sparse signal: the chunk's BM25 score for the query.
    pub sparse: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

/// Tokenizes and embeds every chunk and gathers the BM25 statistics.
pub fn build_index(chunks: Vec<Chunk>, embedder: &dyn Embedder) -> Result<Index, RetrievalError> {
    let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let embeddings = embedder.embed(&texts)?;
    let mut term_counts = Vec::with_capacity(chunks.len());
    let mut lengths = Vec::with_capacity(chunks.len());
    let mut chunk_freq: BTreeMap<String, u32> = BTreeMap::new();
    for text in &texts {
        let tokens = tokenize(text);
        lengths.push(tokens.len());
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        for term in counts.keys() {
            *chunk_freq.entry(term.clone()).or_insert(0) += 1;
        }
        term_counts.push(counts);
    }
    let avg_len = if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
    };
    Ok(Index {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        dim: embedder.dim(),
        chunks,
        term_counts,
        lengths,
        chunk_freq,
        avg_len,
        embeddings,
    })
}

/// BM25 score of one chunk for `query` with explicit parameters: `k1` is the
/// term-frequency saturation, `b` the length-normalization strength. The idf
/// is smoothed to stay non-negative, and duplicate query terms count once.
pub fn bm25_score_with(index: &Index, query: &str, chunk: usize, k1: f64, b: f64) -> f64 {
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    bm25_for_terms(index, &terms, chunk, k1, b)
}

/// BM25 score of one chunk for `query` at the default parameters
/// ([`BM25_K1`], [`BM25_B`]).
pub fn bm25_score(index: &Index, query: &str, chunk: usize) -> f64 {
    bm25_score_with(index, query, chunk, BM25_K1, BM25_B)
}

/// Default-parameter BM25 scores of every chunk for `query`, in chunk order.
pub fn bm25_scores(index: &Index, query: &str) -> Vec<f64> {
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    (0..index.chunks.len())
        .map(|c| bm25_for_terms(index, &terms, c, BM25_K1, BM25_B))
        .collect()
}

fn bm25_for_terms(index: &Index, terms: &BTreeSet<String>, chunk: usize, k1: f64, b: f64) -> f64 {
    if index.avg_len == 0.0 {
        return 0.0;
    }
    let n = index.chunks.len() as f64;
    let len = index.lengths[chunk] as f64;
    let mut score = 0.0;
    for term in terms {
        let Some(&cf) = index.chunk_freq.get(term) else {
            continue;
        };
        let Some(&tf) = index.term_counts[chunk].get(term) else {
            continue;
        };
        let cf = cf as f64;
        let tf = tf as f64;
        let idf = ((n - cf + 0.5) / (cf + 0.5) + 1.0).ln();
        let denom = tf + k1 * (1.0 - b + b * len / index.avg_len);
        score += idf * tf * (k1 + 1.0) / denom;
    }
    score
}

fn minmax_normalize(xs: &[f64]) -> Vec<f64> {
    let mn = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx.partial_cmp(&mn) != Some(std::cmp::Ordering::Greater) {
        // Constant (or empty) list: carries no ranking signal.
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mn) / (mx - mn)).collect()
}

/// Min-max normalizes each score list to [0, 1] and combines them as
/// `w_dense·dense + w_bm25·bm25`. A constant list normalizes to all zeros,
/// so it never perturbs the ranking induced by the other list.
pub fn fuse_scores(
    dense: &[f64],
    bm25: &[f64],
    w_dense: f64,
    w_bm25: f64,
) -> Result<Vec<f64>, RetrievalError> {
    if dense.len() != bm25.len() {
        return Err(RetrievalError::ScoreLength {
            left: dense.len(),
            right: bm25.len(),
        });
    }
    let d = minmax_normalize(dense);
    let b = minmax_normalize(bm25);
    Ok(d.iter()
        .zip(&b)
        .map(|(x, y)| w_dense * x + w_bm25 * y)
        .collect())
}

/// Indices 0..n ranked by score descending; ties break toward the smaller
/// index, so rankings are deterministic.
pub fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Embeds the query, scores every chunk by fused cosine + BM25, and returns
/// the top `k` hits sorted by fused score descending.
///
/// Normalizing in floating point can round two distinct weighted sums to the
/// same fused value, so equal fused scores are re-compared on the raw
/// signals weighted the same way; that keeps the degenerate weights (1, 0)
/// and (0, 1) exactly argsort-equal to the pure dense and pure BM25
/// rankings. Chunks tied on both comparisons rank by lower index.
pub fn hybrid_search(
    index: &Index,
    embedder: &dyn Embedder,
    query: &str,
    k: usize,
    w_dense: f64,
    w_bm25: f64,
) -> Result<Vec<SearchResult>, RetrievalError> {
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let q = embedder.embed(&[query])?.remove(0);
    if q.len() != index.dim {
        return Err(RetrievalError::QueryDim {
            got: q.len(),
            want: index.dim,
        });
    }
    let dense: Vec<f64> = index
        .embeddings
        .iter()
        .map(|e| cosine(&q, e))
        .collect::<Result<_, _>>()?;
    let bm25 = bm25_scores(index, query);
    let fused = fuse_scores(&dense, &bm25, w_dense, w_bm25)?;
    let raw = |i: usize| w_dense * dense[i] + w_bm25 * bm25[i];
    let mut order: Vec<usize> = (0..index.len()).collect();
    order.sort_by(|&a, &b| {
        fused[b]
            .partial_cmp(&fused[a])
            .expect("fused scores are finite")
            .then_with(|| raw(b).partial_cmp(&raw(a)).expect("raw scores are finite"))
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, i)| SearchResult {
            index: i,
            score: fused[i],
            dense: dense[i],
            sparse: bm25[i],
            rank: r + 1,
        })
        .collect())
}

/// Writes the index as pretty JSON.
pub fn save_index(index: &Index, path: &Path) -> Result<(), RetrievalError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| RetrievalError::Io {
        path: display.clone(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), index).map_err(|source| {
        RetrievalError::Json {
            path: display,
            source,
        }
    })
}

/// Reads an index back, rejecting unknown formats and versions.
pub fn load_index(path: &Path) -> Result<Index, RetrievalError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| RetrievalError::Io {
        path: display.clone(),
        source,
    })?;
    let index: Index =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| RetrievalError::Json {
            path: display,
            source,
        })?;
    if index.format != INDEX_FORMAT {
        return Err(RetrievalError::Format {
            found: index.format,
            expected: INDEX_FORMAT.to_string(),
        });
    }
    if index.version != INDEX_VERSION {
        return Err(RetrievalError::Version {
            found: index.version,
            expected: INDEX_VERSION,
        });
    }
    Ok(index)
}
