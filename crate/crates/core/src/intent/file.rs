//! File-backed question source: replays pre-generated questions from JSONL
//! (`{"doc_id", "question"}` per line) so experiments are reproducible.

use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_question, IntentError, IntentGenerator, IntentPlan, IntentSource};
use crate::docmodel::{open_lines, parse_line, DocError, Document};

/// One question line in the intents JSONL format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub doc_id: String,
    pub question: String,
}

/// Reads an intents JSONL file, preserving line order.
pub fn read_intents_file(path: &Path) -> Result<Vec<IntentRecord>, DocError> {
    let mut records = Vec::new();
    for (line_no, line) in open_lines(path)? {
        if let Some(rec) = parse_line::<IntentRecord>(path, line_no, line)? {
            records.push(rec);
        }
    }
    Ok(records)
}

/// Writes intents JSONL, one record per line.
pub fn write_intents_file(path: &Path, records: &[IntentRecord]) -> Result<(), DocError> {
    let to_io = |source| DocError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(to_io)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, rec)
            .map_err(|e| to_io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        writeln!(w).map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// Serves stored questions per document, ignoring section plans (the stored
/// questions already reflect whatever plan produced them).
#[derive(Debug)]
pub struct FileIntentGenerator {
    by_doc: HashMap<String, Vec<String>>,
}

impl FileIntentGenerator {
    pub fn from_records(records: Vec<IntentRecord>) -> Self {
        let mut by_doc: HashMap<String, Vec<String>> = HashMap::new();
        for rec in records {
            by_doc.entry(rec.doc_id).or_default().push(rec.question);
        }
        FileIntentGenerator { by_doc }
    }

    pub fn from_path(path: &Path) -> Result<Self, IntentError> {
        Ok(Self::from_records(read_intents_file(path)?))
    }
}

impl IntentGenerator for FileIntentGenerator {
    fn source(&self) -> IntentSource {
        IntentSource::File
    }

    fn generate_section(
        &self,
        _doc: &Document,
        _range: (usize, usize),
        _count: usize,
    ) -> Result<Vec<String>, IntentError> {
        Err(IntentError::Unsupported(
            "stored questions are not generated per section",
        ))
    }

    fn generate(&self, doc: &Document, _plan: &IntentPlan) -> Result<Vec<String>, IntentError> {
        if doc.is_empty() {
            return Err(IntentError::EmptyDocument);
        }
        let raw = self
            .by_doc
            .get(&doc.doc_id)
            .ok_or_else(|| IntentError::MissingDoc(doc.doc_id.clone()))?;
        let qs: Vec<String> = raw.iter().filter_map(|q| normalize_question(q)).collect();
        if qs.is_empty() {
            return Err(IntentError::NoQuestions);
        }
        Ok(qs)
    }
}
