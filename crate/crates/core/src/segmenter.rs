//! Question-driven segmentation: score chunks by how well they answer the
//! predicted questions, then choose boundaries with an exact dynamic
//! program.
//!
//! A chunk's relevance is the best cosine between its mean sentence
//! embedding and any question embedding. A segmentation's utility is the
//! total relevance minus a quadratic length penalty `lambda·len²` and a flat
//! penalty `beta` per chunk, so the optimizer trades focused chunks against
//! fragmentation. `segment_dp` maximizes this exactly over all partitions
//! with chunks of at most `max_len` sentences in O(N·max_len) relevance
//! evaluations; `brute_force_segment` is the exhaustive oracle used to
//! verify it on small inputs.

use std::collections::VecDeque;

use crate::docmodel::{chunk_text, Chunk, DocError, Document, Method, Segmentation};
use crate::embedding::{cosine, EmbedError, EmbeddingMatrix};
use crate::intent::IntentSet;
use thiserror::Error;

/// Largest document (in sentences) the exhaustive oracle will accept:
/// it enumerates 2^(N−1) boundary sets.
pub const BRUTE_FORCE_MAX: usize = 20;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("no intents: cannot score chunks without at least one question")]
    NoIntents,
    #[error("span {start}..={end} invalid for {len} sentences")]
    BadSpan {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("chunk length {len} exceeds maximum {max}")]
    SpanTooLong { len: usize, max: usize },
    #[error("document has {sentences} sentences but the embedding matrix has {rows} rows")]
    MatrixMismatch { rows: usize, sentences: usize },
    #[error("{n} sentences exceed the exhaustive-search limit of {max}")]
    TooManySentences { n: usize, max: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("post-processing requires best_intent on every chunk")]
    MissingIntentLabels,
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Penalties and length bounds for the segmenter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    /// Weight of the quadratic chunk-length penalty.
    pub lambda: f64,
    /// Flat penalty charged per chunk.
    pub beta: f64,
    /// Hard upper bound on chunk length (sentences) during optimization.
    pub max_len: usize,
    /// Post-processing merges chunks shorter than this into a same-intent
    /// neighbor.
    pub merge_min_len: usize,
    /// Post-processing splits chunks longer than this at a paragraph break.
    pub split_max_len: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            lambda: 0.0005,
            beta: 0.05,
            max_len: 12,
            merge_min_len: 2,
            split_max_len: 15,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.max_len < 1 {
            return Err(SegmentError::InvalidConfig(
                "max_len must be at least 1".into(),
            ));
        }
        if self.split_max_len < self.max_len {
            return Err(SegmentError::InvalidConfig(format!(
                "split_max_len {} must be >= max_len {}",
                self.split_max_len, self.max_len
            )));
        }
        if self.merge_min_len < 1 {
            return Err(SegmentError::InvalidConfig(
                "merge_min_len must be at least 1".into(),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(SegmentError::InvalidConfig(
                "lambda must be finite and >= 0".into(),
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(SegmentError::InvalidConfig(
                "beta must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-question cumulative dot products with the sentence rows, letting any
/// chunk's relevance be computed in O(dim + num_questions).
///
/// Both the dynamic program and the exhaustive oracle score chunks through
/// one of these, so their chunk scores are bit-identical and utilities are
/// directly comparable.
struct RelevanceCache<'a> {
    matrix: &'a EmbeddingMatrix,
    /// `dots[m][i]` = Σ_{t<i} row(t)·q_m; one `(N+1)`-length prefix per question.
    dots: Vec<Vec<f64>>,
    /// L2 norm of each question embedding.
    norms: Vec<f64>,
}

impl<'a> RelevanceCache<'a> {
    fn build(matrix: &'a EmbeddingMatrix, intents: &IntentSet) -> Result<Self, SegmentError> {
        if intents.is_empty() {
            return Err(SegmentError::NoIntents);
        }
        let d = matrix.dim();
        let n = matrix.n_rows();
        for q in &intents.embeddings {
            if q.len() != d {
                return Err(SegmentError::Embed(EmbedError::DimMismatch {
                    left: q.len(),
                    right: d,
                }));
            }
        }
        let m = intents.embeddings.len();
        let mut dots = vec![vec![0.0f64; n + 1]; m];
        // Outer loop over sentences keeps each row hot in cache while all
        // questions consume it.
        for i in 0..n {
            let row = matrix.row(i);
            for (qm, q) in intents.embeddings.iter().enumerate() {
                let dot: f64 = row.iter().zip(q).map(|(a, b)| a * b).sum();
                dots[qm][i + 1] = dots[qm][i] + dot;
            }
        }
        let norms = intents
            .embeddings
            .iter()
            .map(|q| q.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Ok(RelevanceCache {
            matrix,
            dots,
            norms,
        })
    }

    /// Best cosine between the chunk `i..=j` and any question, with the
    /// argmax question index. The cosine is computed against the chunk's
    /// summed sentence vector, which has the same cosine as the mean vector.
    fn relevance(&self, i: usize, j: usize) -> (f64, usize) {
        let a = self.matrix.prefix_row(i);
        let b = self.matrix.prefix_row(j + 1);
        let sum_norm = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let v = y - x;
                v * v
            })
            .sum::<f64>()
            .sqrt();
        if sum_norm == 0.0 {
            log::warn!("chunk {i}..={j} has a zero embedding; relevance treated as 0");
            return (0.0, 0);
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for (m, (dots, qn)) in self.dots.iter().zip(&self.norms).enumerate() {
            let c = if *qn == 0.0 {
                0.0
            } else {
                (dots[j + 1] - dots[i]) / (sum_norm * qn)
            };
            if c > best {
                best = c;
                arg = m;
            }
        }
        (best, arg)
    }

    /// `(score, relevance, best_intent)` for the chunk `i..=j`.
    fn score(&self, i: usize, j: usize, config: &SegmenterConfig) -> (f64, f64, usize) {
        let (rel, arg) = self.relevance(i, j);
        let len = (j - i + 1) as f64;
        (rel - config.lambda * (len * len) - config.beta, rel, arg)
    }

    fn labeled_chunk(&self, doc: &Document, i: usize, j: usize) -> Result<Chunk, SegmentError> {
        let mut c = chunk_text(doc, i, j)?;
        let (rel, arg) = self.relevance(i, j);
        c.relevance = Some(rel);
        c.best_intent = Some(arg);
        Ok(c)
    }
}

/// Best cosine between the mean embedding of sentences `i..=j` and any
/// question embedding, plus the index of that question.
pub fn relevance(
    matrix: &EmbeddingMatrix,
    i: usize,
    j: usize,
    intents: &IntentSet,
) -> Result<(f64, usize), SegmentError> {
    if intents.is_empty() {
        return Err(SegmentError::NoIntents);
    }
    if i > j || j >= matrix.n_rows() {
        return Err(SegmentError::BadSpan {
            start: i,
            end: j,
            len: matrix.n_rows(),
        });
    }
    let mean = matrix.mean_range(i, j + 1);
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0usize;
    for (m, q) in intents.embeddings.iter().enumerate() {
        let c = cosine(&mean, q)?;
        if c > best {
            best = c;
            arg = m;
        }
    }
    Ok((best, arg))
}

/// Net contribution of chunk `i..=j`: relevance − lambda·len² − beta.
/// Errors if the chunk exceeds `config.max_len`.
pub fn chunk_score(
    matrix: &EmbeddingMatrix,
    i: usize,
    j: usize,
    intents: &IntentSet,
    config: &SegmenterConfig,
) -> Result<f64, SegmentError> {
    let (rel, _) = relevance(matrix, i, j, intents)?;
    let len = j - i + 1;
    if len > config.max_len {
        return Err(SegmentError::SpanTooLong {
            len,
            max: config.max_len,
        });
    }
    let len = len as f64;
    Ok(rel - config.lambda * (len * len) - config.beta)
}

/// Recomputes a segmentation's utility from its chunk spans; used to audit
/// the value reported by the optimizer.
pub fn audit_utility(
    seg: &Segmentation,
    matrix: &EmbeddingMatrix,
    intents: &IntentSet,
    config: &SegmenterConfig,
) -> Result<f64, SegmentError> {
    let mut total = 0.0;
    for c in &seg.chunks {
        total += chunk_score(matrix, c.start, c.end, intents, config)?;
    }
    Ok(total)
}

fn check_inputs(
    doc: &Document,
    matrix: &EmbeddingMatrix,
    config: &SegmenterConfig,
) -> Result<(), SegmentError> {
    config.validate()?;
    if matrix.n_rows() != doc.len() {
        return Err(SegmentError::MatrixMismatch {
            rows: matrix.n_rows(),
            sentences: doc.len(),
        });
    }
    Ok(())
}

fn empty_segmentation(doc: &Document) -> Segmentation {
    Segmentation {
        doc_id: doc.doc_id.clone(),
        method: Method::Idc,
        chunks: Vec::new(),
        utility: Some(0.0),
    }
}

/// Exact maximum-utility segmentation via dynamic programming.
///
/// `f[j]` is the best utility over the first `j` sentences; each step scans
/// the at most `max_len` admissible predecessors. Utility ties prefer the
/// larger predecessor (a shorter final chunk); the oracle applies the same
/// rule, so both return identical boundaries even on ties.
pub fn segment_dp(
    doc: &Document,
    matrix: &EmbeddingMatrix,
    intents: &IntentSet,
    config: &SegmenterConfig,
) -> Result<Segmentation, SegmentError> {
    check_inputs(doc, matrix, config)?;
    let n = doc.len();
    if n == 0 {
        return Ok(empty_segmentation(doc));
    }
    let cache = RelevanceCache::build(matrix, intents)?;

    let mut f = vec![0.0f64; n + 1];
    let mut back = vec![0usize; n + 1];
    for j in 1..=n {
        let mut best = f64::NEG_INFINITY;
        let mut best_i = j - 1;
        #[allow(clippy::needless_range_loop)] // f[i] mirrors the recurrence
        for i in j.saturating_sub(config.max_len)..j {
            let (s, _, _) = cache.score(i, j - 1, config);
            let cand = f[i] + s;
            // `>=` with ascending i keeps the largest tying predecessor.
            if cand >= best {
                best = cand;
                best_i = i;
            }
        }
        f[j] = best;
        back[j] = best_i;
    }

    let mut spans = Vec::new();
    let mut j = n;
    while j > 0 {
        let i = back[j];
        spans.push((i, j - 1));
        j = i;
    }
    spans.reverse();
    let chunks = spans
        .into_iter()
        .map(|(i, j)| cache.labeled_chunk(doc, i, j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Segmentation {
        doc_id: doc.doc_id.clone(),
        method: Method::Idc,
        chunks,
        utility: Some(f[n]),
    })
}

/// Exhaustive oracle: enumerates every partition with chunks of at most
/// `max_len` sentences (2^(N−1) boundary sets, N ≤ [`BRUTE_FORCE_MAX`]) and
/// returns the maximum-utility one under the same tie-break as
/// [`segment_dp`]: among equal-utility partitions, the boundary list that is
/// lexicographically largest read from the end wins, which is exactly the
/// partition the DP's larger-predecessor rule reconstructs.
pub fn brute_force_segment(
    doc: &Document,
    matrix: &EmbeddingMatrix,
    intents: &IntentSet,
    config: &SegmenterConfig,
) -> Result<Segmentation, SegmentError> {
    check_inputs(doc, matrix, config)?;
    let n = doc.len();
    if n == 0 {
        return Ok(empty_segmentation(doc));
    }
    if n > BRUTE_FORCE_MAX {
        return Err(SegmentError::TooManySentences {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let cache = RelevanceCache::build(matrix, intents)?;

    // scores[i][j - i] = score of chunk i..=j (only lengths ≤ max_len).
    let scores: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (i..n.min(i + config.max_len))
                .map(|j| cache.score(i, j, config).0)
                .collect()
        })
        .collect();

    let mut best_util = f64::NEG_INFINITY;
    let mut best_bounds_rev: Vec<usize> = Vec::new();
    let mut best_spans: Vec<(usize, usize)> = Vec::new();
    'mask: for mask in 0u32..(1u32 << (n - 1)) {
        let mut spans: Vec<(usize, usize)> = Vec::new();
        let mut start = 0usize;
        for b in 0..n - 1 {
            if mask & (1 << b) != 0 {
                if b + 1 - start > config.max_len {
                    continue 'mask;
                }
                spans.push((start, b));
                start = b + 1;
            }
        }
        if n - start > config.max_len {
            continue;
        }
        spans.push((start, n - 1));

        // Left-to-right fold, matching the DP's accumulation order exactly.
        let mut util = 0.0f64;
        for &(i, j) in &spans {
            util += scores[i][j - i];
        }
        // Internal boundaries (prefix lengths), last boundary first.
        let bounds_rev: Vec<usize> = spans[..spans.len() - 1]
            .iter()
            .rev()
            .map(|&(_, j)| j + 1)
            .collect();
        if util > best_util || (util == best_util && bounds_rev > best_bounds_rev) {
            best_util = util;
            best_bounds_rev = bounds_rev;
            best_spans = spans;
        }
    }

    let chunks = best_spans
        .into_iter()
        .map(|(i, j)| cache.labeled_chunk(doc, i, j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Segmentation {
        doc_id: doc.doc_id.clone(),
        method: Method::Idc,
        chunks,
        utility: Some(best_util),
    })
}

/// Cleans up an optimized segmentation: merges chunks shorter than
/// `merge_min_len` into an adjacent chunk with the same best question
/// (left neighbor first), then splits chunks longer than `split_max_len` at
/// the paragraph start nearest their midpoint (or at the midpoint when no
/// paragraph break lies strictly inside). Relevance and best_intent are
/// recomputed for every chunk the passes touch; the reported utility stays
/// the optimizer's value for the untouched partition.
pub fn postprocess(
    seg: &Segmentation,
    doc: &Document,
    matrix: &EmbeddingMatrix,
    intents: &IntentSet,
    config: &SegmenterConfig,
) -> Result<Segmentation, SegmentError> {
    check_inputs(doc, matrix, config)?;
    if seg.chunks.is_empty() {
        return Ok(seg.clone());
    }
    if seg.chunks.iter().any(|c| c.best_intent.is_none()) {
        return Err(SegmentError::MissingIntentLabels);
    }
    let cache = RelevanceCache::build(matrix, intents)?;

    // Merge pass, left to right; merged chunks are re-examined because a
    // merge can still leave the result short.
    let mut chunks: Vec<Chunk> = seg.chunks.clone();
    let mut p = 0usize;
    while p < chunks.len() {
        if chunks[p].len() >= config.merge_min_len || chunks.len() == 1 {
            p += 1;
            continue;
        }
        let bi = chunks[p].best_intent;
        let left_of_pair = if p > 0 && chunks[p - 1].best_intent == bi {
            Some(p - 1)
        } else if p + 1 < chunks.len() && chunks[p + 1].best_intent == bi {
            Some(p)
        } else {
            None
        };
        match left_of_pair {
            Some(l) => {
                let merged = cache.labeled_chunk(doc, chunks[l].start, chunks[l + 1].end)?;
                chunks.splice(l..=l + 1, [merged]);
                p = l;
            }
            None => p += 1,
        }
    }

    // Split pass; halves go back on the queue until they fit.
    let mut out: Vec<Chunk> = Vec::with_capacity(chunks.len());
    let mut work: VecDeque<Chunk> = chunks.into();
    while let Some(c) = work.pop_front() {
        if c.len() <= config.split_max_len {
            out.push(c);
            continue;
        }
        let b = split_point(doc, c.start, c.end);
        let right = cache.labeled_chunk(doc, b, c.end)?;
        let left = cache.labeled_chunk(doc, c.start, b - 1)?;
        work.push_front(right);
        work.push_front(left);
    }

    Ok(Segmentation {
        doc_id: seg.doc_id.clone(),
        method: seg.method,
        chunks: out,
        utility: seg.utility,
    })
}

/// First sentence of the new right-hand chunk when splitting `start..=end`:
/// the paragraph start strictly inside the chunk nearest its midpoint
/// (ties to the smaller index), else the integer midpoint.
fn split_point(doc: &Document, start: usize, end: usize) -> usize {
    let len = end - start + 1;
    let mid = start as f64 + len as f64 / 2.0;
    doc.paragraph_starts
        .iter()
        .copied()
        .filter(|&p| p > start && p <= end)
        .min_by(|&a, &b| {
            let da = (a as f64 - mid).abs();
            let db = (b as f64 - mid).abs();
            da.partial_cmp(&db)
                .expect("finite distances")
                .then(a.cmp(&b))
        })
        .unwrap_or(start + len / 2)
}
