//! Deterministic question generator for tests and offline runs: questions
//! quote the most central sentences of each section.

use std::sync::{Arc, Mutex};

use super::{IntentError, IntentGenerator, IntentSource};
use crate::docmodel::Document;
use crate::embedding::{Embedder, EmbeddingMatrix};

/// Picks each section's most central sentences (highest mean cosine to all
/// other sentences in the document) and templates them into questions.
/// Deterministic: same document and embedder always yield the same questions.
pub struct StubIntentGenerator {
    embedder: Arc<dyn Embedder>,
    /// Centrality scores for the most recently seen document.
    cache: Mutex<Option<(String, Arc<Vec<f64>>)>>,
}

impl StubIntentGenerator {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        StubIntentGenerator {
            embedder,
            cache: Mutex::new(None),
        }
    }

    fn cached(&self, doc_id: &str) -> Option<Arc<Vec<f64>>> {
        let guard = self.cache.lock().expect("centrality cache poisoned");
        guard
            .as_ref()
            .filter(|(id, _)| id == doc_id)
            .map(|(_, c)| c.clone())
    }

    fn store(&self, doc_id: &str, scores: Vec<f64>) -> Arc<Vec<f64>> {
        let scores = Arc::new(scores);
        *self.cache.lock().expect("centrality cache poisoned") =
            Some((doc_id.to_string(), scores.clone()));
        scores
    }

    fn centralities(&self, doc: &Document) -> Result<Arc<Vec<f64>>, IntentError> {
        if let Some(c) = self.cached(&doc.doc_id) {
            return Ok(c);
        }
        let texts: Vec<&str> = doc.sentences.iter().map(|s| s.text.as_str()).collect();
        let rows = self.embedder.embed(&texts)?;
        let scores = centrality_scores(rows.len(), self.embedder.dim(), |i| &rows[i]);
        Ok(self.store(&doc.doc_id, scores))
    }
}

/// Mean cosine of each sentence to all the others, computed in O(N·d) via
/// the normalized-sum identity: avg_j≠i cos(ŝ_i, ŝ_j) = (ŝ_i·S − 1)/(N−1)
/// with S = Σ_j ŝ_j.
fn centrality_scores<'a>(n: usize, dim: usize, row: impl Fn(usize) -> &'a [f64]) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.0];
    }
    let mut norms = vec![0.0f64; n];
    let mut sum = vec![0.0f64; dim];
    for (i, slot) in norms.iter_mut().enumerate() {
        let r = row(i);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        *slot = norm;
        if norm > 0.0 {
            for (s, x) in sum.iter_mut().zip(r) {
                *s += x / norm;
            }
        }
    }
    let mut scores = Vec::with_capacity(n);
    for (i, &norm) in norms.iter().enumerate() {
        if norm == 0.0 {
            scores.push(0.0);
            continue;
        }
        let r = row(i);
        let dot: f64 = r.iter().zip(&sum).map(|(x, s)| x * s).sum::<f64>() / norm;
        scores.push((dot - 1.0) / (n - 1) as f64);
    }
    scores
}

impl IntentGenerator for StubIntentGenerator {
    fn source(&self) -> IntentSource {
        IntentSource::Stub
    }

    fn prime(&self, doc: &Document, matrix: &EmbeddingMatrix) {
        if self.cached(&doc.doc_id).is_some() {
            return;
        }
        let scores = centrality_scores(matrix.n_rows(), matrix.dim(), |i| matrix.row(i));
        self.store(&doc.doc_id, scores);
    }

    fn generate_section(
        &self,
        doc: &Document,
        (lo, hi): (usize, usize),
        count: usize,
    ) -> Result<Vec<String>, IntentError> {
        let scores = self.centralities(doc)?;
        let mut idx: Vec<usize> = (lo..hi.min(doc.len())).collect();
        idx.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("finite centrality")
                .then(a.cmp(&b))
        });
        idx.truncate(count);
        Ok(idx
            .into_iter()
            .map(|i| {
                let topic = doc.sentences[i]
                    .text
                    .trim_end_matches(['.', '!', '?'])
                    .trim_end();
                format!("What does the document say about: {topic}?")
            })
            .collect())
    }
}
