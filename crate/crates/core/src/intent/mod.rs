//! Question prediction for documents: adaptive count planning, section-wise
//! generation, question normalization, and embedding-based deduplication.
//!
//! The question set drives segmentation scoring, so everything here is
//! deterministic given its inputs; the one stochastic source (a remote
//! language model) is isolated behind [`IntentGenerator`] and its output is
//! persisted to files so experiments can be replayed.

mod file;
mod llm;
mod stub;

pub use file::{read_intents_file, write_intents_file, FileIntentGenerator, IntentRecord};
pub use llm::LlmIntentGenerator;
pub use stub::StubIntentGenerator;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docmodel::{DocError, Document};
use crate::embedding::{cosine, EmbedError, Embedder, EmbeddingMatrix};
use crate::httpapi::HttpError;

/// Fewest questions planned for any document.
pub const MIN_TARGET: usize = 12;
/// Most questions planned for any document.
pub const MAX_TARGET: usize = 38;
/// Documents at or above this sentence count are planned section-wise.
pub const SECTION_MODE_MIN: usize = 150;
/// Approximate sentences per planned section.
pub const SECTION_LEN: usize = 80;
/// Cosine threshold above which two questions count as duplicates.
pub const DEDUP_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error)]
pub enum IntentError {
    #[error("empty document")]
    EmptyDocument,
    #[error("section {section} failed ({} questions from earlier sections preserved): {source}", partial.len())]
    Section {
        section: usize,
        /// Questions gathered from sections that completed before the failure.
        partial: Vec<String>,
        #[source]
        source: Box<IntentError>,
    },
    #[error("generator produced no questions")]
    NoQuestions,
    #[error("no questions on file for document '{0}'")]
    MissingDoc(String),
    #[error("question service response malformed: {0}")]
    BadResponse(String),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    File(#[from] DocError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Http(#[from] HttpError),
}

/// Where a question set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntentSource {
    Llm,
    Stub,
    File,
}

impl std::fmt::Display for IntentSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IntentSource::Llm => "llm",
            IntentSource::Stub => "stub",
            IntentSource::File => "file",
        })
    }
}

/// One planned generation pass over a sentence range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionPlan {
    /// Half-open sentence range `start..end`.
    pub range: (usize, usize),
    /// Questions to request for this range (may be 0 when a document has
    /// more sections than total questions).
    pub count: usize,
}

/// How many questions to generate and over which sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntentPlan {
    pub target_count: usize,
    /// Sections partition `0..num_sentences`; a single entry means one pass
    /// over the whole document.
    pub sections: Vec<SectionPlan>,
}

impl IntentPlan {
    pub fn section_wise(&self) -> bool {
        self.sections.len() > 1
    }
}

/// Questions with their embeddings, pairwise-deduplicated.
#[derive(Debug, Clone)]
pub struct IntentSet {
    pub questions: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
    pub source: IntentSource,
}

impl IntentSet {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }
}

/// Decides the question budget for a document of `num_sentences` sentences.
///
/// Short documents (< 100 sentences) get 12 questions in one pass; very long
/// ones (> 400) get 38; in between the budget interpolates linearly. From
/// 150 sentences up, generation is planned over ~80-sentence sections, with
/// the budget apportioned by section length (largest-remainder rounding).
pub fn plan_intent_count(num_sentences: usize) -> IntentPlan {
    let n = num_sentences;
    let target = if n < 100 {
        MIN_TARGET
    } else if n > 400 {
        MAX_TARGET
    } else {
        (MIN_TARGET as f64 + (n as f64 - 100.0) / 300.0 * (MAX_TARGET - MIN_TARGET) as f64).round()
            as usize
    };
    let ranges = if n >= SECTION_MODE_MIN {
        uniform_ranges(n, n.div_ceil(SECTION_LEN))
    } else {
        vec![(0, n)]
    };
    IntentPlan {
        target_count: target,
        sections: plan_sections(target, ranges),
    }
}

/// Like [`plan_intent_count`], but snaps section starts to the document's
/// paragraph starts (nearest within half a section, ties toward the earlier
/// paragraph) so generation passes align with natural topic boundaries.
pub fn plan_for_document(doc: &Document) -> IntentPlan {
    let base = plan_intent_count(doc.len());
    if base.sections.len() <= 1 || doc.paragraph_starts.len() <= 1 {
        return base;
    }
    let n = doc.len();
    let mut bounds: Vec<usize> = Vec::with_capacity(base.sections.len());
    bounds.push(0);
    for sec in &base.sections[1..] {
        let b = sec.range.0;
        let snapped = nearest_paragraph(doc, b)
            .filter(|&p| p.abs_diff(b) <= SECTION_LEN / 2)
            .unwrap_or(b);
        let prev = *bounds.last().expect("non-empty");
        let chosen = if snapped > prev && snapped < n {
            snapped
        } else if b > prev && b < n {
            b
        } else {
            continue; // collapse this section into the previous one
        };
        bounds.push(chosen);
    }
    let mut ranges = Vec::with_capacity(bounds.len());
    for (i, &lo) in bounds.iter().enumerate() {
        let hi = bounds.get(i + 1).copied().unwrap_or(n);
        ranges.push((lo, hi));
    }
    IntentPlan {
        target_count: base.target_count,
        sections: plan_sections(base.target_count, ranges),
    }
}

fn nearest_paragraph(doc: &Document, b: usize) -> Option<usize> {
    let ps = &doc.paragraph_starts;
    if ps.is_empty() {
        return None;
    }
    let at = ps.partition_point(|&p| p < b);
    let after = ps.get(at).copied();
    let before = at.checked_sub(1).map(|i| ps[i]);
    match (before, after) {
        (Some(lo), Some(hi)) => {
            // Tie goes to the earlier paragraph.
            if b - lo <= hi - b {
                Some(lo)
            } else {
                Some(hi)
            }
        }
        (Some(lo), None) => Some(lo),
        (None, Some(hi)) => Some(hi),
        (None, None) => None,
    }
}

/// Splits `0..n` into `k` contiguous ranges whose lengths differ by at most 1.
fn uniform_ranges(n: usize, k: usize) -> Vec<(usize, usize)> {
    let k = k.max(1);
    let base = n / k;
    let rem = n % k;
    let mut out = Vec::with_capacity(k);
    let mut lo = 0;
    for i in 0..k {
        let len = base + usize::from(i < rem);
        out.push((lo, lo + len));
        lo += len;
    }
    out
}

/// Apportions `target` question slots across ranges proportionally to their
/// lengths, using largest-remainder rounding (ties to the earlier section).
fn plan_sections(target: usize, ranges: Vec<(usize, usize)>) -> Vec<SectionPlan> {
    let n: usize = ranges.iter().map(|(lo, hi)| hi - lo).sum();
    if n == 0 || ranges.len() == 1 {
        return ranges
            .into_iter()
            .map(|range| SectionPlan {
                range,
                count: target,
            })
            .collect();
    }
    let mut counts: Vec<usize> = Vec::with_capacity(ranges.len());
    let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(ranges.len());
    let mut assigned = 0usize;
    for (i, (lo, hi)) in ranges.iter().enumerate() {
        let quota = target as f64 * (hi - lo) as f64 / n as f64;
        let floor = quota.floor() as usize;
        counts.push(floor);
        assigned += floor;
        fracs.push((quota - floor as f64, i));
    }
    fracs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite quotas")
            .then(a.1.cmp(&b.1))
    });
    for &(_, i) in fracs.iter().take(target.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    ranges
        .into_iter()
        .zip(counts)
        .map(|(range, count)| SectionPlan { range, count })
        .collect()
}

/// Produces candidate questions for documents. Implementations must be
/// deterministic given their configuration except for the live LLM client.
pub trait IntentGenerator: Send + Sync {
    fn source(&self) -> IntentSource;

    /// Optional hook letting a pipeline share an already-built sentence
    /// embedding matrix instead of re-embedding the document.
    fn prime(&self, _doc: &Document, _matrix: &EmbeddingMatrix) {}

    /// Generates up to `count` questions about sentences `range.0..range.1`.
    fn generate_section(
        &self,
        doc: &Document,
        range: (usize, usize),
        count: usize,
    ) -> Result<Vec<String>, IntentError>;

    /// Runs every planned section in order, normalizing the questions. A
    /// section failure reports the section index and preserves questions
    /// gathered from earlier sections.
    fn generate(&self, doc: &Document, plan: &IntentPlan) -> Result<Vec<String>, IntentError> {
        if doc.is_empty() {
            return Err(IntentError::EmptyDocument);
        }
        let mut all: Vec<String> = Vec::new();
        for (idx, sec) in plan.sections.iter().enumerate() {
            if sec.count == 0 {
                continue;
            }
            match self.generate_section(doc, sec.range, sec.count) {
                Ok(qs) => all.extend(qs.iter().filter_map(|q| normalize_question(q))),
                Err(source) => {
                    return Err(IntentError::Section {
                        section: idx,
                        partial: all,
                        source: Box::new(source),
                    })
                }
            }
        }
        if all.is_empty() {
            return Err(IntentError::NoQuestions);
        }
        Ok(all)
    }
}

/// Generates candidate questions for `doc` following `plan`.
pub fn generate_intents(
    generator: &dyn IntentGenerator,
    doc: &Document,
    plan: &IntentPlan,
) -> Result<Vec<String>, IntentError> {
    generator.generate(doc, plan)
}

/// Cleans one raw generated line into a question: strips list markers and
/// trailing terminal punctuation, guarantees a trailing `?`. Returns `None`
/// for lines with no content.
pub fn normalize_question(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    // Leading bullet markers.
    s = s.trim_start_matches(['-', '*', '•']).trim_start();
    // Leading "1." / "2)" style numbering.
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &s[digits..];
        if let Some(stripped) = rest.strip_prefix(['.', ')']) {
            s = stripped.trim_start();
        }
    }
    let s = s.trim_end().trim_end_matches(['.', '!', '?']).trim_end();
    if s.is_empty() {
        return None;
    }
    Some(format!("{s}?"))
}

/// Greedy first-wins deduplication over precomputed embeddings: a question
/// is kept iff its cosine to every already-kept question is ≤ `threshold`.
pub fn dedup_with_embeddings(
    questions: Vec<String>,
    embeddings: Vec<Vec<f64>>,
    threshold: f64,
) -> (Vec<String>, Vec<Vec<f64>>) {
    assert_eq!(
        questions.len(),
        embeddings.len(),
        "questions and embeddings must align"
    );
    let mut kept_q: Vec<String> = Vec::new();
    let mut kept_e: Vec<Vec<f64>> = Vec::new();
    for (q, e) in questions.into_iter().zip(embeddings) {
        let dup = kept_e
            .iter()
            .any(|k| cosine(k, &e).expect("uniform embedding dimensions") > threshold);
        if !dup {
            kept_q.push(q);
            kept_e.push(e);
        }
    }
    (kept_q, kept_e)
}

/// Embeds `questions` and removes near-duplicates (cosine > `threshold`),
/// keeping the earliest of each duplicate group.
pub fn dedup_intents(
    questions: &[String],
    embedder: &dyn Embedder,
    threshold: f64,
    source: IntentSource,
) -> Result<IntentSet, IntentError> {
    let refs: Vec<&str> = questions.iter().map(String::as_str).collect();
    let embeddings = embedder.embed(&refs)?;
    let (questions, embeddings) = dedup_with_embeddings(questions.to_vec(), embeddings, threshold);
    Ok(IntentSet {
        questions,
        embeddings,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::OfflineEmbedder;
    use proptest::prelude::*;

    #[test]
    fn plan_small_doc_is_single_pass() {
        let plan = plan_intent_count(50);
        assert_eq!(plan.target_count, 12);
        assert!(!plan.section_wise());
        assert_eq!(
            plan.sections,
            vec![SectionPlan {
                range: (0, 50),
                count: 12
            }]
        );
    }

    #[test]
    fn plan_interpolates_midrange() {
        assert_eq!(plan_intent_count(250).target_count, 25);
        assert_eq!(plan_intent_count(100).target_count, 12);
        assert_eq!(plan_intent_count(400).target_count, 38);
    }

    #[test]
    fn plan_long_doc_caps_at_max() {
        let plan = plan_intent_count(495);
        assert_eq!(plan.target_count, 38);
        assert!(plan.section_wise());
    }

    #[test]
    fn plan_section_mode_threshold() {
        assert!(!plan_intent_count(149).section_wise());
        let plan = plan_intent_count(150);
        assert!(plan.section_wise());
        assert_eq!(plan.sections.len(), 2);
        assert_eq!(plan.sections[0].range, (0, 75));
        assert_eq!(plan.sections[1].range, (75, 150));
    }

    #[test]
    fn plan_counts_sum_to_target() {
        for n in [150usize, 200, 333, 495, 1000, 4200] {
            let plan = plan_intent_count(n);
            let total: usize = plan.sections.iter().map(|s| s.count).sum();
            assert_eq!(total, plan.target_count, "n={n}");
        }
    }

    #[test]
    fn plan_for_document_snaps_to_paragraphs() {
        // Four paragraphs of 50, 50, 50, 30 sentences.
        let mut blocks = Vec::new();
        for (b, len) in [50usize, 50, 50, 30].iter().enumerate() {
            let sents: Vec<String> = (0..*len)
                .map(|i| format!("Block {b} sentence {i} stands alone."))
                .collect();
            blocks.push(sents.join(" "));
        }
        let doc = Document::build("d", blocks.join("\n\n"));
        assert_eq!(doc.len(), 180);
        assert_eq!(doc.paragraph_starts, vec![0, 50, 100, 150]);
        let plan = plan_for_document(&doc);
        // Uniform bounds 60 and 120 snap to paragraph starts 50 and 100.
        let starts: Vec<usize> = plan.sections.iter().map(|s| s.range.0).collect();
        assert_eq!(starts, vec![0, 50, 100]);
        assert_eq!(plan.sections.last().unwrap().range.1, 180);
        let total: usize = plan.sections.iter().map(|s| s.count).sum();
        assert_eq!(total, plan.target_count);
    }

    #[test]
    fn normalize_question_cases() {
        assert_eq!(
            normalize_question("  What is X.  "),
            Some("What is X?".into())
        );
        assert_eq!(normalize_question("1. Why now?"), Some("Why now?".into()));
        assert_eq!(normalize_question("2) How come"), Some("How come?".into()));
        assert_eq!(
            normalize_question("- Where is it?!"),
            Some("Where is it?".into())
        );
        assert_eq!(normalize_question("   "), None);
        assert_eq!(normalize_question("?.!"), None);
        assert_eq!(normalize_question("42"), Some("42?".into()));
    }

    #[test]
    fn dedup_identical_keeps_one() {
        let e = OfflineEmbedder::new(64);
        let qs = vec!["What is water?".to_string(), "What is water?".to_string()];
        let set = dedup_intents(&qs, &e, DEDUP_THRESHOLD, IntentSource::Stub).unwrap();
        assert_eq!(set.questions, vec!["What is water?"]);
        assert_eq!(set.embeddings.len(), 1);
        assert_eq!(set.source, IntentSource::Stub);
    }

    #[test]
    fn dedup_orthogonal_keeps_both() {
        let qs = vec!["A".to_string(), "B".to_string()];
        let emb = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (kept, _) = dedup_with_embeddings(qs, emb, DEDUP_THRESHOLD);
        assert_eq!(kept, vec!["A", "B"]);
    }

    #[test]
    fn dedup_drops_near_duplicate_keeping_first() {
        // cos(A, A') = 0.9 > 0.85; both are far from B.
        let qs = vec!["A".to_string(), "A'".to_string(), "B".to_string()];
        let s = (1.0f64 - 0.9 * 0.9).sqrt();
        let emb = vec![vec![1.0, 0.0, 0.0], vec![0.9, s, 0.0], vec![0.0, 0.0, 1.0]];
        let (kept, kept_e) = dedup_with_embeddings(qs, emb, DEDUP_THRESHOLD);
        assert_eq!(kept, vec!["A", "B"]);
        assert_eq!(kept_e.len(), 2);
    }

    #[test]
    fn generate_rejects_empty_document() {
        let e = std::sync::Arc::new(OfflineEmbedder::new(32));
        let gen = StubIntentGenerator::new(e);
        let doc = Document::build("d", "");
        let plan = plan_intent_count(1);
        let err = generate_intents(&gen, &doc, &plan).unwrap_err();
        assert!(err.to_string().contains("empty document"));
    }

    proptest! {
        #[test]
        fn plan_target_is_monotone(a in 1usize..1200, b in 1usize..1200) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(plan_intent_count(lo).target_count <= plan_intent_count(hi).target_count);
        }

        #[test]
        fn plan_sections_partition_the_document(n in 1usize..1500) {
            let plan = plan_intent_count(n);
            prop_assert!(plan.target_count >= 1);
            let mut expect = 0usize;
            for sec in &plan.sections {
                prop_assert_eq!(sec.range.0, expect);
                prop_assert!(sec.range.1 > sec.range.0);
                expect = sec.range.1;
            }
            prop_assert_eq!(expect, n);
            let total: usize = plan.sections.iter().map(|s| s.count).sum();
            prop_assert_eq!(total, plan.target_count);
        }

        #[test]
        fn dedup_is_idempotent_and_under_threshold(
            words in proptest::collection::vec("[a-z]{3,8}", 2..20),
            threshold in 0.3f64..0.99,
        ) {
            let e = OfflineEmbedder::new(48);
            let qs: Vec<String> =
                words.iter().map(|w| format!("What about {w}?")).collect();
            let set = dedup_intents(&qs, &e, threshold, IntentSource::Stub).unwrap();
            for i in 0..set.embeddings.len() {
                for j in 0..i {
                    let c = cosine(&set.embeddings[i], &set.embeddings[j]).unwrap();
                    prop_assert!(c <= threshold, "pair ({j},{i}) cos {c} > {threshold}");
                }
            }
            let again = dedup_intents(&set.questions, &e, threshold, IntentSource::Stub).unwrap();
            prop_assert_eq!(again.questions, set.questions);
        }

        #[test]
        fn tighter_threshold_keeps_no_more(
            words in proptest::collection::vec("[a-z]{3,8}", 2..15),
        ) {
            let e = OfflineEmbedder::new(48);
            let qs: Vec<String> =
                words.iter().map(|w| format!("Tell me about {w} now?")).collect();
            let loose = dedup_intents(&qs, &e, 0.9, IntentSource::Stub).unwrap();
            let tight = dedup_intents(&qs, &e, 0.5, IntentSource::Stub).unwrap();
            prop_assert!(tight.len() <= loose.len());
        }
    }
}
