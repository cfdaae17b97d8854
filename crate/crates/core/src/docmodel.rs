//! Documents, sentences, chunks, and the JSONL formats that carry them.
//!
//! A [`Document`] owns its raw text plus a sentence segmentation computed by
//! [`split_sentences`]. All spans are character offsets into the raw text,
//! not byte offsets, so they stay meaningful for non-ASCII content. Chunks
//! reference sentences by inclusive index range; chunk text is the sentence
//! texts joined with single spaces.

use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens that end with a period without ending a sentence.
///
/// Compared case-insensitively against the whitespace-delimited token that
/// precedes a candidate boundary, including its trailing period.
pub const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.", "ave.", "blvd.", "rd.",
    "no.", "vs.", "etc.", "i.e.", "e.g.", "cf.", "fig.", "figs.", "eq.", "eqs.", "sec.", "ch.",
    "dept.", "univ.", "inc.", "corp.", "ltd.", "co.", "jan.", "feb.", "mar.", "apr.", "jun.",
    "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "approx.", "al.",
];

#[derive(Debug, Error)]
pub enum DocError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid JSONL record: {source}")]
    Jsonl {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("sentence range {start}..={end} out of bounds for document with {len} sentences")]
    InvalidRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("chunks do not form a partition of 0..{n}: {reason}")]
    NotAPartition { n: usize, reason: String },
}

/// One sentence of a document, with its trimmed text and character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    /// Half-open `(start, end)` character offsets into the raw text.
    pub char_span: (usize, usize),
}

/// A document plus its derived sentence and paragraph structure.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub sentences: Vec<Sentence>,
    /// Indices of sentences that begin a paragraph; starts with 0 when
    /// the document is non-empty.
    pub paragraph_starts: Vec<usize>,
}

impl Document {
    /// Builds a document by splitting `text` into sentences and paragraphs.
    pub fn build(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let raw_text = text.into();
        let sentences = split_sentences(&raw_text);
        let paragraph_starts = detect_paragraphs(&raw_text, &sentences);
        Document {
            doc_id: doc_id.into(),
            raw_text,
            sentences,
            paragraph_starts,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// A contiguous run of sentences emitted by a chunking method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    /// Inclusive first sentence index.
    pub start: usize,
    /// Inclusive last sentence index.
    pub end: usize,
    pub text: String,
    /// Intent relevance of the chunk, when produced by the intent segmenter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<f64>,
    /// Index of the best-matching intent, when produced by the intent segmenter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_intent: Option<usize>,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The chunking method that produced a segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Idc,
    Fixed,
    Sliding,
    Coherence,
    Paragraph,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Idc,
        Method::Fixed,
        Method::Sliding,
        Method::Coherence,
        Method::Paragraph,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Idc => "idc",
            Method::Fixed => "fixed",
            Method::Sliding => "sliding",
            Method::Coherence => "coherence",
            Method::Paragraph => "paragraph",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idc" => Ok(Method::Idc),
            "fixed" => Ok(Method::Fixed),
            "sliding" => Ok(Method::Sliding),
            "coherence" => Ok(Method::Coherence),
            "paragraph" => Ok(Method::Paragraph),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// A document's chunking under one method.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub doc_id: String,
    pub method: Method,
    pub chunks: Vec<Chunk>,
    /// Objective value reported by the segmenter, when applicable.
    pub utility: Option<f64>,
}

impl Segmentation {
    /// Checks that the chunks exactly partition sentences `0..n`.
    pub fn validate_partition(&self, n: usize) -> Result<(), DocError> {
        if self.chunks.is_empty() {
            if n == 0 {
                return Ok(());
            }
            return Err(DocError::NotAPartition {
                n,
                reason: "no chunks".into(),
            });
        }
        if self.chunks[0].start != 0 {
            return Err(DocError::NotAPartition {
                n,
                reason: format!("first chunk starts at {}", self.chunks[0].start),
            });
        }
        for w in self.chunks.windows(2) {
            if w[1].start != w[0].end + 1 {
                return Err(DocError::NotAPartition {
                    n,
                    reason: format!("gap or overlap between {} and {}", w[0].end, w[1].start),
                });
            }
        }
        let last = self.chunks.last().expect("non-empty");
        if last.end + 1 != n {
            return Err(DocError::NotAPartition {
                n,
                reason: format!("last chunk ends at {} for n={n}", last.end),
            });
        }
        for c in &self.chunks {
            if c.start > c.end {
                return Err(DocError::NotAPartition {
                    n,
                    reason: format!("inverted chunk {}..={}", c.start, c.end),
                });
            }
        }
        Ok(())
    }
}

/// A question/answer pair used for retrieval evaluation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

/// Splits raw text into sentences on terminal punctuation.
///
/// A boundary is a run of `.`, `!`, or `?` followed by whitespace and then
/// an uppercase letter or digit. Runs ending in a period are suppressed when
/// the preceding token is in [`ABBREVIATIONS`]. Text after the last boundary
/// becomes the final sentence. Rejoining the returned texts with single
/// spaces preserves every non-whitespace character in order.
pub fn split_sentences(raw: &str) -> Vec<Sentence> {
    let chars: Vec<char> = raw.chars().collect();
    let n = chars.len();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < n {
        if is_terminal(chars[i]) {
            let mut run_end = i;
            while run_end + 1 < n && is_terminal(chars[run_end + 1]) {
                run_end += 1;
            }
            if is_boundary(&chars, start, run_end) {
                push_trimmed(&chars, start, run_end + 1, &mut sentences);
                start = run_end + 1;
            }
            i = run_end + 1;
        } else {
            i += 1;
        }
    }
    if start < n {
        push_trimmed(&chars, start, n, &mut sentences);
    }
    sentences
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Decides whether the punctuation run ending at `run_end` closes a sentence.
fn is_boundary(chars: &[char], sent_start: usize, run_end: usize) -> bool {
    let next = run_end + 1;
    if next >= chars.len() || !chars[next].is_whitespace() {
        return false;
    }
    let follow = chars[next..].iter().find(|c| !c.is_whitespace());
    let starts_new = match follow {
        Some(c) => c.is_uppercase() || c.is_numeric(),
        None => false,
    };
    if !starts_new {
        return false;
    }
    if chars[run_end] == '.' {
        let mut tok_start = run_end;
        while tok_start > sent_start && !chars[tok_start - 1].is_whitespace() {
            tok_start -= 1;
        }
        let token: String = chars[tok_start..=run_end]
            .iter()
            .collect::<String>()
            .to_lowercase();
        if ABBREVIATIONS.contains(&token.as_str()) {
            return false;
        }
    }
    true
}

/// Appends the whitespace-trimmed sentence covering chars `[from, to)`.
fn push_trimmed(chars: &[char], from: usize, to: usize, out: &mut Vec<Sentence>) {
    let mut s = from;
    while s < to && chars[s].is_whitespace() {
        s += 1;
    }
    if s == to {
        return;
    }
    let mut e = to;
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    out.push(Sentence {
        index: out.len(),
        text: chars[s..e].iter().collect(),
        char_span: (s, e),
    });
}

/// Returns indices of sentences that begin a paragraph.
///
/// Sentence 0 always starts a paragraph. A later sentence does when the
/// whitespace gap separating it from the previous sentence contains two or
/// more newlines, i.e. at least one blank line (the blank line may carry
/// horizontal whitespace).
pub fn detect_paragraphs(raw: &str, sentences: &[Sentence]) -> Vec<usize> {
    if sentences.is_empty() {
        return Vec::new();
    }
    let chars: Vec<char> = raw.chars().collect();
    let mut starts = vec![0usize];
    for s in 1..sentences.len() {
        let gap_start = sentences[s - 1].char_span.1;
        let gap_end = sentences[s].char_span.0;
        let newlines = chars[gap_start..gap_end]
            .iter()
            .filter(|&&c| c == '\n')
            .count();
        if newlines >= 2 {
            starts.push(s);
        }
    }
    starts
}

/// Builds the chunk covering sentences `start..=end` of `doc`.
pub fn chunk_text(doc: &Document, start: usize, end: usize) -> Result<Chunk, DocError> {
    if start > end || end >= doc.sentences.len() {
        return Err(DocError::InvalidRange {
            start,
            end,
            len: doc.sentences.len(),
        });
    }
    let text = doc.sentences[start..=end]
        .iter()
        .map(|s| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Chunk {
        doc_id: doc.doc_id.clone(),
        start,
        end,
        text,
        relevance: None,
        best_intent: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    doc_id: String,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChunkRecord {
    start: usize,
    end: usize,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relevance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    best_intent: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentationRecord {
    doc_id: String,
    method: Method,
    chunks: Vec<ChunkRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    utility: Option<f64>,
}

pub(crate) fn open_lines(
    path: &Path,
) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>, DocError> {
    let file = std::fs::File::open(path).map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(std::io::BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

pub(crate) fn parse_line<T: serde::de::DeserializeOwned>(
    path: &Path,
    line_no: usize,
    line: std::io::Result<String>,
) -> Result<Option<T>, DocError> {
    let line = line.map_err(|source| DocError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if line.trim().is_empty() {
        return Ok(None);
    }
    serde_json::from_str(&line)
        .map(Some)
        .map_err(|source| DocError::Jsonl {
            path: path.display().to_string(),
            line: line_no,
            source,
        })
}

/// Reads a corpus JSONL file (`{"doc_id", "text"}` per line) into documents.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>, DocError> {
    let mut docs = Vec::new();
    for (line_no, line) in open_lines(path)? {
        if let Some(rec) = parse_line::<CorpusRecord>(path, line_no, line)? {
            docs.push(Document::build(rec.doc_id, rec.text));
        }
    }
    Ok(docs)
}

/// Writes documents as corpus JSONL.
pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<(), DocError> {
    let to_io = |source| DocError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(to_io)?;
    let mut w = BufWriter::new(file);
    for doc in docs {
        let rec = CorpusRecord {
            doc_id: doc.doc_id.clone(),
            text: doc.raw_text.clone(),
        };
        serde_json::to_writer(&mut w, &rec)
            .map_err(|e| to_io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        writeln!(w).map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// Reads a QA JSONL file (`{"question", "answer", "doc_id"?}` per line).
pub fn read_qa(path: &Path) -> Result<Vec<QAPair>, DocError> {
    let mut pairs = Vec::new();
    for (line_no, line) in open_lines(path)? {
        if let Some(rec) = parse_line::<QAPair>(path, line_no, line)? {
            pairs.push(rec);
        }
    }
    Ok(pairs)
}

/// Writes QA pairs as JSONL.
pub fn write_qa(path: &Path, pairs: &[QAPair]) -> Result<(), DocError> {
    let to_io = |source| DocError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(to_io)?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        serde_json::to_writer(&mut w, p)
            .map_err(|e| to_io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        writeln!(w).map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// Writes segmentations as JSONL, one document per line.
pub fn write_segmentations(path: &Path, segs: &[Segmentation]) -> Result<(), DocError> {
    let to_io = |source| DocError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(to_io)?;
    let mut w = BufWriter::new(file);
    for seg in segs {
        let rec = SegmentationRecord {
            doc_id: seg.doc_id.clone(),
            method: seg.method,
            chunks: seg
                .chunks
                .iter()
                .map(|c| ChunkRecord {
                    start: c.start,
                    end: c.end,
                    text: c.text.clone(),
                    relevance: c.relevance,
                    best_intent: c.best_intent,
                })
                .collect(),
            utility: seg.utility,
        };
        serde_json::to_writer(&mut w, &rec)
            .map_err(|e| to_io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        writeln!(w).map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// Reads segmentations from JSONL.
pub fn read_segmentations(path: &Path) -> Result<Vec<Segmentation>, DocError> {
    let mut segs = Vec::new();
    for (line_no, line) in open_lines(path)? {
        if let Some(rec) = parse_line::<SegmentationRecord>(path, line_no, line)? {
            segs.push(Segmentation {
                chunks: rec
                    .chunks
                    .into_iter()
                    .map(|c| Chunk {
                        doc_id: rec.doc_id.clone(),
                        start: c.start,
                        end: c.end,
                        text: c.text,
                        relevance: c.relevance,
                        best_intent: c.best_intent,
                    })
                    .collect(),
                doc_id: rec.doc_id,
                method: rec.method,
                utility: rec.utility,
            });
        }
    }
    Ok(segs)
}
