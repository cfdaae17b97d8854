//! Sentence embeddings: provider trait, cosine similarity, and a
//! prefix-summed embedding matrix for O(d) chunk means.

mod http;
mod offline;

pub use http::ApiEmbedder;
pub use offline::OfflineEmbedder;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docmodel::Document;
use crate::httpapi::HttpError;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vector length mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("row {row} has length {actual}, expected {expected}")]
    RowDim {
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("embedding service returned {actual} vectors for {expected} inputs")]
    BatchCount { expected: usize, actual: usize },
    #[error("embedding service response malformed: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Http(#[from] HttpError),
}

/// Produces fixed-dimension sentence embeddings.
pub trait Embedder: Send + Sync {
    /// Dimension of every vector this embedder returns.
    fn dim(&self) -> usize;

    /// Embeds each text, returning one vector per input in order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Cosine similarity between two vectors of equal length.
///
/// Returns an error on length mismatch. A zero vector on either side yields
/// 0.0 (with a warning) rather than NaN.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine with a zero vector; returning 0.0");
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Sentence embeddings for one document, stored with running prefix sums so
/// that any contiguous range's mean vector costs O(dim).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    dim: usize,
    n: usize,
    /// Flat row-major sentence vectors, length `n * dim`.
    rows: Vec<f64>,
    /// Flat prefix sums, length `(n + 1) * dim`; entry 0 is the zero vector
    /// and entry `i` is the elementwise sum of rows `0..i`.
    prefix: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds the matrix, verifying every row has length `dim`.
    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self, EmbedError> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(EmbedError::RowDim {
                    row: i,
                    expected: dim,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let mut prefix = vec![0.0; (n + 1) * dim];
        for i in 0..n {
            let (done, rest) = prefix.split_at_mut((i + 1) * dim);
            let prev = &done[i * dim..];
            let cur = &mut rest[..dim];
            let row = &flat[i * dim..(i + 1) * dim];
            for k in 0..dim {
                cur[k] = prev[k] + row[k];
            }
        }
        Ok(EmbeddingMatrix {
            dim,
            n,
            rows: flat,
            prefix,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    /// The embedding of sentence `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Prefix-sum row `i`: the elementwise sum of sentence rows `0..i`.
    pub fn prefix_row(&self, i: usize) -> &[f64] {
        &self.prefix[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean of sentence rows in the half-open range `lo..hi`.
    ///
    /// Computed as `(prefix[hi] - prefix[lo]) / (hi - lo)`.
    pub fn mean_range(&self, lo: usize, hi: usize) -> Vec<f64> {
        assert!(
            lo < hi && hi <= self.n,
            "bad mean range {lo}..{hi} for n={}",
            self.n
        );
        let len = (hi - lo) as f64;
        let a = self.prefix_row(lo);
        let b = self.prefix_row(hi);
        let mut out = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            out.push((b[k] - a[k]) / len);
        }
        out
    }
}

/// Embeds all sentences of a document into a prefix-summed matrix.
pub fn embed_document(
    embedder: &dyn Embedder,
    doc: &Document,
) -> Result<EmbeddingMatrix, EmbedError> {
    let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
    let rows = embedder.embed(&texts)?;
    if rows.len() != texts.len() {
        return Err(EmbedError::BatchCount {
            expected: texts.len(),
            actual: rows.len(),
        });
    }
    EmbeddingMatrix::from_rows(embedder.dim(), rows)
}
