//! Intent-driven dynamic chunking for retrieval pipelines.
//!
//! The crate splits documents into retrieval chunks by first predicting the
//! questions a reader is likely to ask (`intent`), then choosing the
//! partition of the document's sentences that maximizes total intent
//! relevance minus length and boundary penalties (`segmenter`). Around that
//! core sit the supporting subsystems:
//!
//! * [`docmodel`] — documents, sentences, chunks, and JSONL corpus I/O
//! * [`embedding`] — embedding providers and prefix-sum chunk means
//! * [`intent`] — question planning, generation, and deduplication
//! * [`segmenter`] — the dynamic-programming segmenter and its oracle
//! * [`baselines`] — fixed, sliding, coherence, and paragraph chunkers
//! * [`retrieval`] — hybrid dense + BM25 search over chunk indexes
//! * [`eval`] — retrieval metrics and method comparison reports
//! * [`corpus`] — seeded synthetic corpus generation for experiments

pub mod baselines;
pub mod corpus;
pub mod docmodel;
pub mod embedding;
pub mod eval;
pub mod httpapi;
pub mod intent;
pub mod retrieval;
pub mod segmenter;
pub mod text;
