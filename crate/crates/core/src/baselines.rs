//! Baseline chunkers: fixed-width, overlapping sliding window, topic-shift
//! detection over embedding similarity, and paragraph boundaries.

use crate::docmodel::{chunk_text, Document, Method, Segmentation};
use crate::embedding::{cosine, EmbeddingMatrix};
use crate::segmenter::SegmentError;

/// Default chunk width (sentences) for the fixed-width baseline.
pub const DEFAULT_WIDTH: usize = 6;
/// Default span length for the sliding-window baseline.
pub const DEFAULT_WINDOW: usize = 6;
/// Default step between consecutive sliding-window spans.
pub const DEFAULT_STRIDE: usize = 3;
/// Default block size (sentences per side) for the topic-shift baseline.
pub const DEFAULT_BLOCK: usize = 3;

/// Valleys shallower than this are treated as flat: they are floating-point
/// residue (an all-identical document yields depths around 1e-16, which
/// would otherwise clear the statistical cutoff).
const DEPTH_FLOOR: f64 = 1e-9;

fn build(
    doc: &Document,
    method: Method,
    spans: Vec<(usize, usize)>,
) -> Result<Segmentation, SegmentError> {
    let chunks = spans
        .into_iter()
        .map(|(i, j)| chunk_text(doc, i, j).map_err(SegmentError::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Segmentation {
        doc_id: doc.doc_id.clone(),
        method,
        chunks,
        utility: None,
    })
}

/// Consecutive chunks of `width` sentences; the last chunk keeps the
/// remainder, so the count is ceil(N / width).
pub fn fixed_length(doc: &Document, width: usize) -> Result<Segmentation, SegmentError> {
    if width == 0 {
        return Err(SegmentError::InvalidConfig(
            "fixed width must be at least 1".into(),
        ));
    }
    let n = doc.len();
    let spans = (0..n)
        .step_by(width)
        .map(|s| (s, (s + width - 1).min(n - 1)))
        .collect();
    build(doc, Method::Fixed, spans)
}

/// Overlapping spans of `window` sentences starting every `stride`
/// sentences; emission stops with the first span that reaches the final
/// sentence. The result overlaps by design and is not a partition.
pub fn sliding_window(
    doc: &Document,
    window: usize,
    stride: usize,
) -> Result<Segmentation, SegmentError> {
    if window == 0 || stride == 0 {
        return Err(SegmentError::InvalidConfig(
            "window and stride must be at least 1".into(),
        ));
    }
    let n = doc.len();
    let mut spans = Vec::new();
    let mut start = 0usize;
    while start < n {
        let end = (start + window - 1).min(n - 1);
        spans.push((start, end));
        if end == n - 1 {
            break;
        }
        start += stride;
    }
    build(doc, Method::Sliding, spans)
}

/// Similarity profile for the topic-shift baseline.
///
/// For each gap g (a boundary candidate before sentence g), `sims[g-1]` is
/// the cosine between the mean embeddings of up to `block` sentences on each
/// side. `depths[g-1]` measures how deep that valley is: the rise from the
/// sim to its nearest monotone peak on the left plus the same on the right.
pub fn coherence_profile(matrix: &EmbeddingMatrix, block: usize) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.n_rows();
    if n < 2 {
        return (Vec::new(), Vec::new());
    }
    let mut sims = Vec::with_capacity(n - 1);
    for g in 1..n {
        let left = matrix.mean_range(g.saturating_sub(block), g);
        let right = matrix.mean_range(g, (g + block).min(n));
        sims.push(cosine(&left, &right).expect("same dimension"));
    }
    let mut depths = Vec::with_capacity(sims.len());
    for g in 0..sims.len() {
        let mut left_peak = sims[g];
        let mut i = g;
        while i > 0 && sims[i - 1] >= left_peak {
            left_peak = sims[i - 1];
            i -= 1;
        }
        let mut right_peak = sims[g];
        let mut i = g;
        while i + 1 < sims.len() && sims[i + 1] >= right_peak {
            right_peak = sims[i + 1];
            i += 1;
        }
        depths.push((left_peak - sims[g]) + (right_peak - sims[g]));
    }
    (sims, depths)
}

/// Boundary detection at topic shifts: gaps whose valley depth exceeds
/// mean + 0.5·stddev of all depths become chunk boundaries.
pub fn coherence_segment(
    doc: &Document,
    matrix: &EmbeddingMatrix,
    block: usize,
) -> Result<Segmentation, SegmentError> {
    if block == 0 {
        return Err(SegmentError::InvalidConfig(
            "block must be at least 1".into(),
        ));
    }
    let n = doc.len();
    if matrix.n_rows() != n {
        return Err(SegmentError::MatrixMismatch {
            rows: matrix.n_rows(),
            sentences: n,
        });
    }
    if n == 0 {
        return build(doc, Method::Coherence, Vec::new());
    }
    let (_, depths) = coherence_profile(matrix, block);
    let cutoff = if depths.is_empty() {
        f64::INFINITY
    } else {
        let mean = depths.iter().sum::<f64>() / depths.len() as f64;
        let var = depths.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / depths.len() as f64;
        mean + 0.5 * var.sqrt()
    };
    let mut spans = Vec::new();
    let mut start = 0usize;
    for (g, depth) in depths.iter().enumerate() {
        // Gap g sits before sentence g + 1.
        if *depth > cutoff && *depth > DEPTH_FLOOR {
            spans.push((start, g));
            start = g + 1;
        }
    }
    spans.push((start, n - 1));
    build(doc, Method::Coherence, spans)
}

/// One chunk per paragraph.
pub fn paragraph_segment(doc: &Document) -> Result<Segmentation, SegmentError> {
    let n = doc.len();
    if n == 0 {
        return build(doc, Method::Paragraph, Vec::new());
    }
    let starts = &doc.paragraph_starts;
    let spans = starts
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let end = if k + 1 < starts.len() {
                starts[k + 1] - 1
            } else {
                n - 1
            };
            (s, end)
        })
        .collect();
    build(doc, Method::Paragraph, spans)
}
