//! Seeded synthetic corpora for benchmarks: topic blocks of pseudo-word
//! sentences plus extractive question/answer pairs.
//!
//! Every pseudo-word is globally unique to its topic, so topics share no
//! vocabulary and lexical retrieval has an unambiguous signal. Each topic is
//! emitted as one paragraph.
//!
//! Two optional uniformity modes support controlled benchmarks:
//! [`CorpusSpec::repeat_sentences`] renders each topic as a single sentence
//! repeated for the whole block, and [`CorpusSpec::shared_header`] opens every
//! block with one copy of a document-wide boilerplate sentence (the only
//! vocabulary topics then share).

use std::collections::HashSet;

use crate::docmodel::{Document, QAPair, ABBREVIATIONS};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
}

/// Shape of a generated corpus.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    /// Number of documents.
    pub docs: usize,
    /// Topic blocks per document; each becomes one paragraph.
    pub topics: usize,
    /// Sentences per topic block.
    pub sentences_per_topic: usize,
    /// Filler words in each topic's private vocabulary.
    pub topic_vocab: usize,
    /// Filler words per sentence (all distinct within the sentence).
    pub words_per_sentence: usize,
    /// Probability that a sentence also carries its topic's marker word.
    pub topic_word_prob: f64,
    /// Number of question/answer pairs drawn from the text.
    pub qa_pairs: usize,
    /// Render one sentence per topic and repeat it for the whole block,
    /// making content uniform within each topic.
    pub repeat_sentences: bool,
    /// Start every topic block with one copy of a document-wide recurring
    /// sentence (boilerplate shared by all blocks).
    pub shared_header: bool,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            docs: 1,
            topics: 12,
            sentences_per_topic: 40,
            topic_vocab: 120,
            words_per_sentence: 9,
            topic_word_prob: 0.6,
            qa_pairs: 20,
            repeat_sentences: false,
            shared_header: false,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.docs == 0 || self.topics == 0 || self.sentences_per_topic == 0 {
            return Err(CorpusError::InvalidSpec(
                "docs, topics, and sentences-per-topic must all be at least 1".into(),
            ));
        }
        if self.words_per_sentence < 3 {
            return Err(CorpusError::InvalidSpec(
                "words-per-sentence must be at least 3 (answers are 3-word spans)".into(),
            ));
        }
        if self.topic_vocab < self.words_per_sentence {
            return Err(CorpusError::InvalidSpec(format!(
                "topic-vocab {} is smaller than words-per-sentence {}",
                self.topic_vocab, self.words_per_sentence
            )));
        }
        if !(0.0..=1.0).contains(&self.topic_word_prob) {
            return Err(CorpusError::InvalidSpec(
                "topic-word-prob must be in [0, 1]".into(),
            ));
        }
        if self.shared_header && self.sentences_per_topic < 2 {
            return Err(CorpusError::InvalidSpec(
                "shared-header needs at least 2 sentences per topic".into(),
            ));
        }
        Ok(())
    }
}

/// A fresh lowercase pseudo-word of 5–9 letters, distinct from everything
/// minted so far and from known abbreviations (which would confuse sentence
/// splitting when they precede a period).
fn mint_word(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let len = rng.gen_range(5..=9);
        let w: String = (0..len)
            .map(|_| rng.gen_range(b'a'..=b'z') as char)
            .collect();
        let dotted = format!("{w}.");
        if !used.contains(&w) && !ABBREVIATIONS.contains(&dotted.as_str()) {
            used.insert(w.clone());
            return w;
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut cs = w.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().collect::<String>() + cs.as_str(),
        None => String::new(),
    }
}

/// Generates `spec.docs` documents and `spec.qa_pairs` QA pairs, fully
/// determined by `seed`. Answers are three consecutive words from one
/// sentence, so any chunk containing that sentence contains the answer.
pub fn generate_corpus(
    spec: &CorpusSpec,
    seed: u64,
) -> Result<(Vec<Document>, Vec<QAPair>), CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<String> = HashSet::new();

    let mut docs = Vec::with_capacity(spec.docs);
    // Per document, per sentence: the lowercase word list (pre-rendering).
    let mut word_lists: Vec<Vec<Vec<String>>> = Vec::with_capacity(spec.docs);

    for d in 0..spec.docs {
        let mut sentences_words: Vec<Vec<String>> =
            Vec::with_capacity(spec.topics * spec.sentences_per_topic);
        let mut blocks: Vec<String> = Vec::with_capacity(spec.topics);
        let header: Option<Vec<String>> = spec.shared_header.then(|| {
            (0..spec.words_per_sentence)
                .map(|_| mint_word(&mut rng, &mut used))
                .collect()
        });
        for _topic in 0..spec.topics {
            let marker = mint_word(&mut rng, &mut used);
            let vocab: Vec<String> = (0..spec.topic_vocab)
                .map(|_| mint_word(&mut rng, &mut used))
                .collect();
            let draw_words = |rng: &mut ChaCha8Rng| {
                let picks = sample(rng, vocab.len(), spec.words_per_sentence);
                let mut words: Vec<String> = picks.iter().map(|i| vocab[i].clone()).collect();
                if rng.gen_bool(spec.topic_word_prob) {
                    let pos = rng.gen_range(0..=words.len());
                    words.insert(pos, marker.clone());
                }
                words
            };
            let mut block_words: Vec<Vec<String>> = Vec::with_capacity(spec.sentences_per_topic);
            if let Some(h) = &header {
                block_words.push(h.clone());
            }
            let remaining = spec.sentences_per_topic - block_words.len();
            if spec.repeat_sentences {
                let words = draw_words(&mut rng);
                block_words.extend(std::iter::repeat_n(words, remaining));
            } else {
                for _ in 0..remaining {
                    block_words.push(draw_words(&mut rng));
                }
            }
            let rendered: Vec<String> = block_words
                .iter()
                .map(|words| {
                    let mut text = capitalize(&words.join(" "));
                    text.push('.');
                    text
                })
                .collect();
            blocks.push(rendered.join(" "));
            sentences_words.extend(block_words);
        }
        let raw = blocks.join("\n\n");
        docs.push(Document::build(format!("doc-{d:04}"), raw));
        word_lists.push(sentences_words);
    }

    let mut qa = Vec::with_capacity(spec.qa_pairs);
    for _ in 0..spec.qa_pairs {
        let d = rng.gen_range(0..spec.docs);
        let sentences = &word_lists[d];
        let s = rng.gen_range(0..sentences.len());
        let words = &sentences[s];
        let start = rng.gen_range(0..=words.len() - 3);
        let span = &words[start..start + 3];
        qa.push(QAPair {
            question: format!("What is stated about {} {} {}?", span[0], span[1], span[2]),
            answer: span.join(" "),
            doc_id: Some(docs[d].doc_id.clone()),
        });
    }

    Ok((docs, qa))
}
