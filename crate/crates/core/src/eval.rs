//! Evaluation harness: answer-containment metrics, retrieval quality over a
//! QA set, and a five-way comparison of chunking methods on one corpus.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use crate::baselines::{coherence_segment, fixed_length, paragraph_segment, sliding_window};
use crate::docmodel::{Document, Method, QAPair, Segmentation};
use crate::embedding::{embed_document, EmbedError, Embedder, EmbeddingMatrix};
use crate::intent::{
    dedup_intents, generate_intents, plan_for_document, IntentError, IntentGenerator,
};
use crate::retrieval::{build_index, hybrid_search, Index, RetrievalError};
use crate::segmenter::{postprocess, segment_dp, SegmentError, SegmenterConfig};
use crate::text::{normalize_ws_lower, trim_punctuation};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no QA pairs")]
    NoQaPairs,
    #[error("no documents")]
    NoDocuments,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to encode report: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// True when the chunk text contains the answer, compared after lowercasing
/// and whitespace-collapsing both sides and trimming punctuation off the
/// answer's ends (interior punctuation still has to match).
pub fn contains_answer(chunk_text: &str, answer: &str) -> bool {
    let needle = normalize_ws_lower(trim_punctuation(answer));
    if needle.is_empty() {
        return false;
    }
    normalize_ws_lower(chunk_text).contains(&needle)
}

/// Fraction of queries whose first relevant hit ranks within the top `k`.
/// Ranks are 1-based; `None` means no relevant hit was retrieved.
pub fn recall_at_k(ranks: &[Option<usize>], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let hit = ranks
        .iter()
        .filter(|r| matches!(r, Some(rank) if *rank <= k))
        .count();
    hit as f64 / ranks.len() as f64
}

/// Mean reciprocal rank: the average of 1/rank, with misses contributing 0.
pub fn mrr(ranks: &[Option<usize>]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let total: f64 = ranks
        .iter()
        .map(|r| r.map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    total / ranks.len() as f64
}

/// Fraction of QA pairs whose answer appears intact inside at least one
/// chunk. Pairs naming a document only count chunks of that document's
/// segmentation; pairs without one may match any segmentation.
pub fn answer_coverage(segmentations: &[Segmentation], qa: &[QAPair]) -> f64 {
    if qa.is_empty() {
        return 0.0;
    }
    let covered = qa
        .iter()
        .filter(|pair| {
            segmentations
                .iter()
                .filter(|seg| match &pair.doc_id {
                    Some(id) => &seg.doc_id == id,
                    None => true,
                })
                .flat_map(|seg| &seg.chunks)
                .any(|c| contains_answer(&c.text, &pair.answer))
        })
        .count();
    covered as f64 / qa.len() as f64
}

/// Aggregate chunk-shape statistics over a set of segmentations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkStats {
    pub count: usize,
    /// Mean chunk length in sentences.
    pub mean_len: f64,
    pub max_len: usize,
}

pub fn chunk_stats(segmentations: &[Segmentation]) -> ChunkStats {
    let mut count = 0usize;
    let mut total = 0usize;
    let mut max_len = 0usize;
    for seg in segmentations {
        for c in &seg.chunks {
            count += 1;
            total += c.len();
            max_len = max_len.max(c.len());
        }
    }
    let mean_len = if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    };
    ChunkStats {
        count,
        mean_len,
        max_len,
    }
}

/// For each QA pair, the 1-based rank of the first retrieved chunk that
/// contains its answer (restricted to the named document when the pair has
/// one), searching the top `depth` hits.
pub fn answer_ranks(
    index: &Index,
    embedder: &dyn Embedder,
    qa: &[QAPair],
    depth: usize,
    dense_weight: f64,
    bm25_weight: f64,
) -> Result<Vec<Option<usize>>, EvalError> {
    let mut ranks = Vec::with_capacity(qa.len());
    for pair in qa {
        let hits = hybrid_search(
            index,
            embedder,
            &pair.question,
            depth,
            dense_weight,
            bm25_weight,
        )?;
        let rank = hits.iter().position(|hit| {
            let chunk = &index.chunks()[hit.index];
            let doc_ok = pair.doc_id.as_deref().is_none_or(|id| chunk.doc_id == id);
            doc_ok && contains_answer(&chunk.text, &pair.answer)
        });
        ranks.push(rank.map(|r| r + 1));
    }
    Ok(ranks)
}

/// Settings for [`compare_methods`].
#[derive(Debug, Clone)]
pub struct CompareConfig {
    /// Label recorded in the report.
    pub dataset: String,
    pub seg: SegmenterConfig,
    /// Chunk width for the fixed-length baseline.
    pub fixed_width: usize,
    /// Span length for the sliding-window baseline.
    pub window: usize,
    /// Step for the sliding-window baseline.
    pub stride: usize,
    /// Block size for the topic-shift baseline.
    pub block: usize,
    /// Reported recall cutoff (retrieval searches at least 5 deep).
    pub k: usize,
    pub dense_weight: f64,
    pub bm25_weight: f64,
    /// Cosine threshold for question deduplication.
    pub dedup_threshold: f64,
    /// When false, all timing fields are omitted so reports from repeat runs
    /// are byte-identical.
    pub with_timings: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            dataset: "corpus".into(),
            seg: SegmenterConfig::default(),
            fixed_width: crate::baselines::DEFAULT_WIDTH,
            window: crate::baselines::DEFAULT_WINDOW,
            stride: crate::baselines::DEFAULT_STRIDE,
            block: crate::baselines::DEFAULT_BLOCK,
            k: 5,
            dense_weight: crate::retrieval::DENSE_WEIGHT,
            bm25_weight: crate::retrieval::BM25_WEIGHT,
            dedup_threshold: crate::intent::DEDUP_THRESHOLD,
            with_timings: true,
        }
    }
}

/// One method's results over the corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub num_docs: usize,
    pub num_chunks: usize,
    pub mean_chunk_len: f64,
    pub max_chunk_len: usize,
    pub coverage: f64,
    pub recall_at_1: f64,
    pub recall_at_k: f64,
    pub k: usize,
    pub mrr: f64,
    /// Seconds to embed the corpus sentences (shared across methods).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_seconds: Option<f64>,
    /// Seconds to generate, deduplicate, and embed questions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent_seconds: Option<f64>,
    /// Seconds spent segmenting (for the question-driven method: the
    /// optimizer plus post-processing).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_seconds: Option<f64>,
    /// Documents that fell back to the topic-shift baseline because question
    /// generation or optimization failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallback_docs: Vec<String>,
}

/// Full comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub records: Vec<MethodRecord>,
}

/// Runs every chunking method over the corpus, retrieves each question
/// against the method's chunks, and reports coverage, recall, MRR, and
/// chunk-shape statistics per method.
pub fn compare_methods(
    docs: &[Document],
    qa: &[QAPair],
    generator: &dyn IntentGenerator,
    embedder: &dyn Embedder,
    config: &CompareConfig,
) -> Result<EvalReport, EvalError> {
    if docs.is_empty() {
        return Err(EvalError::NoDocuments);
    }
    if qa.is_empty() {
        return Err(EvalError::NoQaPairs);
    }

    let t0 = Instant::now();
    let matrices: Vec<EmbeddingMatrix> = docs
        .par_iter()
        .map(|doc| embed_document(embedder, doc))
        .collect::<Result<_, _>>()?;
    let embed_seconds = t0.elapsed().as_secs_f64();

    // Question-driven segmentation, with a per-document fallback.
    let mut intent_seconds = 0.0f64;
    let mut segment_seconds = 0.0f64;
    let mut fallback_docs = Vec::new();
    let mut idc_segs = Vec::with_capacity(docs.len());
    for (doc, matrix) in docs.iter().zip(&matrices) {
        match segment_one(doc, matrix, generator, embedder, config) {
            Ok((seg, t_intent, t_segment)) => {
                intent_seconds += t_intent;
                segment_seconds += t_segment;
                idc_segs.push(seg);
            }
            Err(err) => {
                log::warn!(
                    "question-driven segmentation failed for {}: {err}; falling back",
                    doc.doc_id
                );
                fallback_docs.push(doc.doc_id.clone());
                idc_segs.push(coherence_segment(doc, matrix, config.block)?);
            }
        }
    }

    let mut records = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let t0 = Instant::now();
        let segs: Vec<Segmentation> = match method {
            Method::Idc => idc_segs.clone(),
            Method::Fixed => docs
                .iter()
                .map(|d| fixed_length(d, config.fixed_width))
                .collect::<Result<_, _>>()?,
            Method::Sliding => docs
                .iter()
                .map(|d| sliding_window(d, config.window, config.stride))
                .collect::<Result<_, _>>()?,
            Method::Coherence => docs
                .iter()
                .zip(&matrices)
                .map(|(d, m)| coherence_segment(d, m, config.block))
                .collect::<Result<_, _>>()?,
            Method::Paragraph => docs
                .iter()
                .map(paragraph_segment)
                .collect::<Result<_, _>>()?,
        };
        let method_segment_seconds = match method {
            Method::Idc => segment_seconds,
            _ => t0.elapsed().as_secs_f64(),
        };

        let chunks: Vec<_> = segs.iter().flat_map(|s| s.chunks.iter().cloned()).collect();
        let index = build_index(chunks, embedder)?;
        let depth = config.k.max(5);
        let ranks = answer_ranks(
            &index,
            embedder,
            qa,
            depth,
            config.dense_weight,
            config.bm25_weight,
        )?;
        let stats = chunk_stats(&segs);
        records.push(MethodRecord {
            method,
            num_docs: docs.len(),
            num_chunks: stats.count,
            mean_chunk_len: stats.mean_len,
            max_chunk_len: stats.max_len,
            coverage: answer_coverage(&segs, qa),
            recall_at_1: recall_at_k(&ranks, 1),
            recall_at_k: recall_at_k(&ranks, config.k),
            k: config.k,
            mrr: mrr(&ranks),
            embed_seconds: config.with_timings.then_some(embed_seconds),
            intent_seconds: (config.with_timings && method == Method::Idc)
                .then_some(intent_seconds),
            segment_seconds: config.with_timings.then_some(method_segment_seconds),
            fallback_docs: if method == Method::Idc {
                fallback_docs.clone()
            } else {
                Vec::new()
            },
        });
    }

    Ok(EvalReport {
        dataset: config.dataset.clone(),
        records,
    })
}

/// Plans, generates, and deduplicates questions for one document, then runs
/// the optimizer and post-processing. Returns the segmentation with the
/// question and segmentation times.
fn segment_one(
    doc: &Document,
    matrix: &EmbeddingMatrix,
    generator: &dyn IntentGenerator,
    embedder: &dyn Embedder,
    config: &CompareConfig,
) -> Result<(Segmentation, f64, f64), EvalError> {
    let t0 = Instant::now();
    let plan = plan_for_document(doc);
    generator.prime(doc, matrix);
    let questions = generate_intents(generator, doc, &plan)?;
    let intents = dedup_intents(
        &questions,
        embedder,
        config.dedup_threshold,
        generator.source(),
    )?;
    let t_intent = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let seg = segment_dp(doc, matrix, &intents, &config.seg)?;
    let seg = postprocess(&seg, doc, matrix, &intents, &config.seg)?;
    let t_segment = t1.elapsed().as_secs_f64();
    Ok((seg, t_intent, t_segment))
}

/// Serializes a report to pretty JSON; identical reports produce identical
/// bytes (useful together with `with_timings: false`).
pub fn report_to_json(report: &EvalReport) -> Result<String, EvalError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let body = report_to_json(report)?;
    std::fs::write(path, body).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the per-method table as CSV (one row per method).
pub fn write_report_csv(report: &EvalReport, path: &Path) -> Result<(), EvalError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| EvalError::Io {
        path: display.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, line: String| {
        writeln!(w, "{line}").map_err(|source| EvalError::Io {
            path: display.clone(),
            source,
        })
    };
    write(
        &mut w,
        "method,dataset,num_docs,num_chunks,mean_chunk_len,max_chunk_len,coverage,\
         recall_at_1,recall_at_k,k,mrr,embed_seconds,intent_seconds,segment_seconds,fallback_docs"
            .to_string(),
    )?;
    for r in &report.records {
        write(
            &mut w,
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.method,
                csv_field(&report.dataset),
                r.num_docs,
                r.num_chunks,
                r.mean_chunk_len,
                r.max_chunk_len,
                r.coverage,
                r.recall_at_1,
                r.recall_at_k,
                r.k,
                r.mrr,
                opt(r.embed_seconds),
                opt(r.intent_seconds),
                opt(r.segment_seconds),
                csv_field(&r.fallback_docs.join(";")),
            ),
        )?;
    }
    Ok(())
}

/// Writes one small CSV per headline metric (`method,dataset,value`), ready
/// for plotting.
pub fn write_figures(report: &EvalReport, dir: &Path) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    type Metric = fn(&MethodRecord) -> f64;
    let metrics: [(&str, Metric); 6] = [
        ("coverage", |r| r.coverage),
        ("recall_at_1", |r| r.recall_at_1),
        ("recall_at_k", |r| r.recall_at_k),
        ("mrr", |r| r.mrr),
        ("num_chunks", |r| r.num_chunks as f64),
        ("mean_chunk_len", |r| r.mean_chunk_len),
    ];
    for (name, get) in metrics {
        let path = dir.join(format!("{name}.csv"));
        let mut body = String::from("method,dataset,value\n");
        for r in &report.records {
            body.push_str(&format!(
                "{},{},{}\n",
                r.method,
                csv_field(&report.dataset),
                get(r)
            ));
        }
        std::fs::write(&path, body).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}
