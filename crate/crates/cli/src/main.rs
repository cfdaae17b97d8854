//! `idc` — corpus generation, question-driven chunking, indexing, search,
//! and method comparison from the command line.
//!
//! Every command is deterministic with `--seed` and the offline providers;
//! the remote providers read their credentials from `IDC_API_KEY` /
//! `IDC_API_URL` only (never from flags or config files). A TOML config file
//! may set any shared knob; command-line flags win over the file, and both
//! win over built-in defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use idc_core::baselines::{
    coherence_segment, fixed_length, paragraph_segment, sliding_window, DEFAULT_BLOCK,
    DEFAULT_STRIDE,
};
use idc_core::corpus::{generate_corpus, CorpusSpec};
use idc_core::docmodel::{
    read_corpus, read_qa, read_segmentations, write_corpus, write_qa, write_segmentations,
    Document, Method, Segmentation,
};
use idc_core::embedding::{embed_document, ApiEmbedder, Embedder, OfflineEmbedder};
use idc_core::eval::{
    answer_coverage, answer_ranks, chunk_stats, compare_methods, mrr, recall_at_k, report_to_json,
    write_figures, write_report_csv, write_report_json, CompareConfig, EvalReport, MethodRecord,
};
use idc_core::intent::{
    dedup_intents, generate_intents, plan_for_document, write_intents_file, FileIntentGenerator,
    IntentGenerator, IntentRecord, LlmIntentGenerator, StubIntentGenerator, DEDUP_THRESHOLD,
};
use idc_core::retrieval::{
    build_index, hybrid_search, load_index, save_index, BM25_WEIGHT, DENSE_WEIGHT,
};
use idc_core::segmenter::{postprocess, segment_dp, SegmenterConfig};
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "idc",
    version,
    about = "Question-driven document chunking, hybrid retrieval, and evaluation",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    shared: SharedFlags,

    #[command(subcommand)]
    command: Command,
}

/// Knobs accepted by every subcommand (config-file keys use the same names
/// in snake_case). A flag beats the config file; the file beats defaults.
#[derive(Debug, Args)]
struct SharedFlags {
    /// TOML config file with default values for the shared flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every random choice (corpus generation).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for document-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Embedding provider.
    #[arg(long, global = true, value_enum)]
    embedder: Option<EmbedderKind>,

    /// Question generator for the question-driven method.
    #[arg(long, global = true, value_enum)]
    generator: Option<GeneratorKind>,

    /// Embedding dimension (offline default 64, api default 1536).
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Model name sent to the remote embedding / chat services.
    #[arg(long, global = true)]
    model: Option<String>,

    /// Pre-generated questions JSONL, required by --generator file.
    #[arg(long, global = true, value_name = "FILE")]
    intents_file: Option<PathBuf>,

    /// Weight of the quadratic chunk-length penalty.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Flat penalty charged per chunk.
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Hard chunk-length cap (sentences) during optimization.
    #[arg(long, global = true)]
    max_len: Option<usize>,

    /// Post-processing merges chunks shorter than this.
    #[arg(long, global = true)]
    merge_min_len: Option<usize>,

    /// Post-processing splits chunks longer than this.
    #[arg(long, global = true)]
    split_max_len: Option<usize>,

    /// Chunk width for fixed-length chunking and span for sliding windows.
    #[arg(long, global = true)]
    window: Option<usize>,

    /// Step between sliding-window chunk starts.
    #[arg(long, global = true)]
    stride: Option<usize>,

    /// Block size for the topic-shift baseline.
    #[arg(long, global = true)]
    block: Option<usize>,

    /// Hits to retrieve per query; also the recall cutoff in reports.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Weight of the dense cosine signal in hybrid search.
    #[arg(long, global = true)]
    dense_weight: Option<f64>,

    /// Weight of the BM25 signal in hybrid search.
    #[arg(long, global = true)]
    bm25_weight: Option<f64>,

    /// Cosine threshold above which two questions count as duplicates.
    #[arg(long, global = true)]
    dedup_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderKind {
    /// Deterministic hashing embedder; no network.
    Offline,
    /// Remote embedding service (IDC_API_URL + IDC_API_KEY).
    Api,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorKind {
    /// Deterministic generator quoting central sentences; no network.
    Stub,
    /// Remote chat model (IDC_API_URL + IDC_API_KEY).
    Llm,
    /// Replay questions from --intents-file.
    File,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus with QA pairs.
    GenCorpus(GenCorpusArgs),
    /// Generate and persist candidate questions per document.
    Intents(IntentsArgs),
    /// Chunk a corpus with one method and write segmentations JSONL.
    Chunk(ChunkArgs),
    /// Build and persist a search index over chunked documents.
    Index(IndexArgs),
    /// Search a persisted index and print the top hits as JSON.
    Query(QueryArgs),
    /// Score one segmentation file against a QA set.
    Eval(EvalArgs),
    /// Run every chunking method over a corpus and report all metrics.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    /// Corpus JSONL output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// QA JSONL output path.
    #[arg(long, value_name = "FILE")]
    qa_out: PathBuf,
    /// Number of documents.
    #[arg(long, default_value_t = CorpusSpec::default().docs)]
    docs: usize,
    /// Topic blocks per document (one paragraph each).
    #[arg(long, default_value_t = CorpusSpec::default().topics)]
    topics: usize,
    /// Sentences per topic block.
    #[arg(long, default_value_t = CorpusSpec::default().sentences_per_topic)]
    sentences_per_topic: usize,
    /// Words in each topic's private vocabulary.
    #[arg(long, default_value_t = CorpusSpec::default().topic_vocab)]
    topic_vocab: usize,
    /// Words per sentence.
    #[arg(long, default_value_t = CorpusSpec::default().words_per_sentence)]
    words_per_sentence: usize,
    /// Probability that a sentence carries its topic's marker word.
    #[arg(long, default_value_t = CorpusSpec::default().topic_word_prob)]
    topic_word_prob: f64,
    /// Number of QA pairs to draw.
    #[arg(long, default_value_t = CorpusSpec::default().qa_pairs)]
    qa_pairs: usize,
    /// Repeat one sentence for each whole topic block.
    #[arg(long)]
    repeat_sentences: bool,
    /// Open every topic block with a document-wide boilerplate sentence.
    #[arg(long)]
    shared_header: bool,
}

#[derive(Debug, Args)]
struct IntentsArgs {
    /// Corpus JSONL to generate questions for.
    corpus: PathBuf,
    /// Intents JSONL output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ChunkArgs {
    /// Corpus JSONL to chunk.
    corpus: PathBuf,
    /// Chunking method.
    #[arg(long)]
    method: Method,
    /// Segmentations JSONL output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Segmentations JSONL (output of `chunk`) to index.
    segmentations: PathBuf,
    /// Index file output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Index file written by `index`.
    index: PathBuf,
    /// The question to search for.
    question: String,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Segmentations JSONL (output of `chunk`) to score.
    segmentations: PathBuf,
    /// QA JSONL with the questions and expected answers.
    qa: PathBuf,
    /// Report JSON output path (omit to print to stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the per-method table as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Also write one small CSV per headline metric into this directory.
    #[arg(long, value_name = "DIR")]
    figures: Option<PathBuf>,
    /// Dataset label recorded in the report.
    #[arg(long, default_value = "corpus")]
    dataset: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Corpus JSONL to chunk with every method.
    corpus: PathBuf,
    /// QA JSONL with the questions and expected answers.
    qa: PathBuf,
    /// Report JSON output path (omit to print to stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the per-method table as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Also write one small CSV per headline metric into this directory.
    #[arg(long, value_name = "DIR")]
    figures: Option<PathBuf>,
    /// Dataset label recorded in the report.
    #[arg(long, default_value = "corpus")]
    dataset: String,
    /// Omit timing fields so repeat runs produce byte-identical reports.
    #[arg(long)]
    no_timings: bool,
}

// ---------------------------------------------------------------------------
// Settings: defaults <- config file <- flags
// ---------------------------------------------------------------------------

/// Optional values read from the TOML config file. Unknown keys are
/// rejected so typos (or misplaced credentials) fail loudly.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    embedder: Option<String>,
    generator: Option<String>,
    dim: Option<usize>,
    model: Option<String>,
    intents_file: Option<PathBuf>,
    lambda: Option<f64>,
    beta: Option<f64>,
    max_len: Option<usize>,
    merge_min_len: Option<usize>,
    split_max_len: Option<usize>,
    window: Option<usize>,
    stride: Option<usize>,
    block: Option<usize>,
    k: Option<usize>,
    dense_weight: Option<f64>,
    bm25_weight: Option<f64>,
    dedup_threshold: Option<f64>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("failed to read config file {}", path.display()))?;
        toml::from_str(&raw).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Fully resolved settings every command runs with.
#[derive(Debug)]
struct Settings {
    seed: u64,
    jobs: Option<usize>,
    embedder: EmbedderKind,
    generator: GeneratorKind,
    dim: Option<usize>,
    model: String,
    intents_file: Option<PathBuf>,
    seg: SegmenterConfig,
    window: usize,
    stride: usize,
    block: usize,
    k: usize,
    dense_weight: f64,
    bm25_weight: f64,
    dedup_threshold: f64,
}

fn parse_kind<T: ValueEnum>(what: &str, raw: &str) -> Result<T> {
    T::from_str(raw, true).map_err(|_| {
        let options: Vec<String> = T::value_variants()
            .iter()
            .filter_map(|v| v.to_possible_value().map(|p| p.get_name().to_string()))
            .collect();
        anyhow!(
            "invalid {what} '{raw}' in config file (expected one of: {})",
            options.join(", ")
        )
    })
}

impl Settings {
    fn resolve(flags: &SharedFlags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let embedder = match (flags.embedder, &file.embedder) {
            (Some(kind), _) => kind,
            (None, Some(raw)) => parse_kind("embedder", raw)?,
            (None, None) => EmbedderKind::Offline,
        };
        let generator = match (flags.generator, &file.generator) {
            (Some(kind), _) => kind,
            (None, Some(raw)) => parse_kind("generator", raw)?,
            (None, None) => GeneratorKind::Stub,
        };
        let defaults = SegmenterConfig::default();
        let seg = SegmenterConfig {
            lambda: flags.lambda.or(file.lambda).unwrap_or(defaults.lambda),
            beta: flags.beta.or(file.beta).unwrap_or(defaults.beta),
            max_len: flags.max_len.or(file.max_len).unwrap_or(defaults.max_len),
            merge_min_len: flags
                .merge_min_len
                .or(file.merge_min_len)
                .unwrap_or(defaults.merge_min_len),
            split_max_len: flags
                .split_max_len
                .or(file.split_max_len)
                .unwrap_or(defaults.split_max_len),
        };
        Ok(Settings {
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs: flags.jobs.or(file.jobs),
            embedder,
            generator,
            dim: flags.dim.or(file.dim),
            model: flags
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| "default".to_string()),
            intents_file: flags.intents_file.clone().or(file.intents_file),
            seg,
            window: flags
                .window
                .or(file.window)
                .unwrap_or(idc_core::baselines::DEFAULT_WIDTH),
            stride: flags.stride.or(file.stride).unwrap_or(DEFAULT_STRIDE),
            block: flags.block.or(file.block).unwrap_or(DEFAULT_BLOCK),
            k: flags.k.or(file.k).unwrap_or(5),
            dense_weight: flags
                .dense_weight
                .or(file.dense_weight)
                .unwrap_or(DENSE_WEIGHT),
            bm25_weight: flags
                .bm25_weight
                .or(file.bm25_weight)
                .unwrap_or(BM25_WEIGHT),
            dedup_threshold: flags
                .dedup_threshold
                .or(file.dedup_threshold)
                .unwrap_or(DEDUP_THRESHOLD),
        })
    }

    fn build_embedder(&self) -> Result<Arc<dyn Embedder>> {
        match self.embedder {
            EmbedderKind::Offline => Ok(Arc::new(OfflineEmbedder::new(
                self.dim.unwrap_or(OfflineEmbedder::DEFAULT_DIM),
            ))),
            EmbedderKind::Api => {
                let dim = self.dim.unwrap_or(ApiEmbedder::DEFAULT_DIM);
                Ok(Arc::new(ApiEmbedder::from_env(self.model.clone(), dim)?))
            }
        }
    }

    fn build_generator(&self, embedder: &Arc<dyn Embedder>) -> Result<Box<dyn IntentGenerator>> {
        match self.generator {
            GeneratorKind::Stub => Ok(Box::new(StubIntentGenerator::new(embedder.clone()))),
            GeneratorKind::Llm => Ok(Box::new(LlmIntentGenerator::from_env(
                self.model.clone(),
                LlmIntentGenerator::DEFAULT_TEMPERATURE,
                LlmIntentGenerator::DEFAULT_TOP_K,
            )?)),
            GeneratorKind::File => {
                let path = self.intents_file.as_ref().ok_or_else(|| {
                    anyhow!(
                        "--generator file requires --intents-file (or intents_file in the config)"
                    )
                })?;
                Ok(Box::new(FileIntentGenerator::from_path(path)?))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let settings = Settings::resolve(&cli.shared)?;
    if let Some(jobs) = settings.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("failed to configure the worker pool")?;
    }
    match cli.command {
        Command::GenCorpus(args) => cmd_gen_corpus(&settings, &args),
        Command::Intents(args) => cmd_intents(&settings, &args),
        Command::Chunk(args) => cmd_chunk(&settings, &args),
        Command::Index(args) => cmd_index(&settings, &args),
        Command::Query(args) => cmd_query(&settings, &args),
        Command::Eval(args) => cmd_eval(&settings, &args),
        Command::Compare(args) => cmd_compare(&settings, &args),
    }
}

fn cmd_gen_corpus(settings: &Settings, args: &GenCorpusArgs) -> Result<()> {
    let spec = CorpusSpec {
        docs: args.docs,
        topics: args.topics,
        sentences_per_topic: args.sentences_per_topic,
        topic_vocab: args.topic_vocab,
        words_per_sentence: args.words_per_sentence,
        topic_word_prob: args.topic_word_prob,
        qa_pairs: args.qa_pairs,
        repeat_sentences: args.repeat_sentences,
        shared_header: args.shared_header,
    };
    let (docs, qa) = generate_corpus(&spec, settings.seed)?;
    write_corpus(&args.out, &docs)?;
    write_qa(&args.qa_out, &qa)?;
    let sentences: usize = docs.iter().map(Document::len).sum();
    println!(
        "wrote {} documents ({sentences} sentences) to {} and {} QA pairs to {}",
        docs.len(),
        args.out.display(),
        qa.len(),
        args.qa_out.display()
    );
    Ok(())
}

fn cmd_intents(settings: &Settings, args: &IntentsArgs) -> Result<()> {
    let docs = read_corpus(&args.corpus)?;
    let embedder = settings.build_embedder()?;
    let generator = settings.build_generator(&embedder)?;
    let mut per_doc: Vec<(usize, &Document, Vec<String>)> = docs
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            let plan = plan_for_document(doc);
            let questions = generate_intents(generator.as_ref(), doc, &plan)?;
            Ok((i, doc, questions))
        })
        .collect::<Result<_>>()?;
    per_doc.sort_by(|a, b| a.1.doc_id.cmp(&b.1.doc_id).then(a.0.cmp(&b.0)));
    let records: Vec<IntentRecord> = per_doc
        .iter()
        .flat_map(|(_, doc, questions)| {
            questions.iter().map(|q| IntentRecord {
                doc_id: doc.doc_id.clone(),
                question: q.clone(),
            })
        })
        .collect();
    write_intents_file(&args.out, &records)?;
    println!(
        "wrote {} questions for {} documents to {}",
        records.len(),
        docs.len(),
        args.out.display()
    );
    Ok(())
}

/// Chunks one document with one method; for the question-driven method the
/// caller supplies the generator and the error is reported, not fatal.
fn segment_document(
    doc: &Document,
    method: Method,
    settings: &Settings,
    embedder: &Arc<dyn Embedder>,
    generator: &dyn IntentGenerator,
) -> Result<Segmentation> {
    let seg = match method {
        Method::Fixed => fixed_length(doc, settings.window)?,
        Method::Sliding => sliding_window(doc, settings.window, settings.stride)?,
        Method::Paragraph => paragraph_segment(doc)?,
        Method::Coherence => {
            let matrix = embed_document(embedder.as_ref(), doc)?;
            coherence_segment(doc, &matrix, settings.block)?
        }
        Method::Idc => {
            let matrix = embed_document(embedder.as_ref(), doc)?;
            let plan = plan_for_document(doc);
            generator.prime(doc, &matrix);
            let questions = generate_intents(generator, doc, &plan)?;
            let intents = dedup_intents(
                &questions,
                embedder.as_ref(),
                settings.dedup_threshold,
                generator.source(),
            )?;
            let seg = segment_dp(doc, &matrix, &intents, &settings.seg)?;
            postprocess(&seg, doc, &matrix, &intents, &settings.seg)?
        }
    };
    Ok(seg)
}

fn cmd_chunk(settings: &Settings, args: &ChunkArgs) -> Result<()> {
    let docs = read_corpus(&args.corpus)?;
    let embedder = settings.build_embedder()?;
    let generator = settings.build_generator(&embedder)?;

    // (input position, doc, segmentation, fallback error if any)
    let mut results: Vec<(usize, &Document, Segmentation, Option<String>)> = docs
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            let t0 = Instant::now();
            let outcome =
                segment_document(doc, args.method, settings, &embedder, generator.as_ref());
            let (seg, failure) = match outcome {
                Ok(seg) => (seg, None),
                Err(err) if args.method == Method::Idc => {
                    // Keep going: chunk the document with the topic-shift
                    // baseline and report the failure at the end.
                    let matrix = embed_document(embedder.as_ref(), doc)?;
                    let seg = coherence_segment(doc, &matrix, settings.block)?;
                    (seg, Some(format!("{err:#}")))
                }
                Err(err) => return Err(err),
            };
            log::info!(
                "{}: {} chunks via {} in {:.1} ms",
                doc.doc_id,
                seg.chunks.len(),
                args.method,
                t0.elapsed().as_secs_f64() * 1e3
            );
            Ok((i, doc, seg, failure))
        })
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| a.1.doc_id.cmp(&b.1.doc_id).then(a.0.cmp(&b.0)));

    let segs: Vec<Segmentation> = results.iter().map(|(_, _, seg, _)| seg.clone()).collect();
    write_segmentations(&args.out, &segs)?;
    let chunks: usize = segs.iter().map(|s| s.chunks.len()).sum();
    println!(
        "wrote {} segmentations ({chunks} chunks) to {}",
        segs.len(),
        args.out.display()
    );

    let fallbacks: Vec<(&str, &str)> = results
        .iter()
        .filter_map(|(_, doc, _, failure)| failure.as_deref().map(|f| (doc.doc_id.as_str(), f)))
        .collect();
    if !fallbacks.is_empty() {
        let mut summary = String::new();
        for (doc_id, failure) in &fallbacks {
            let _ = writeln!(summary, "  {doc_id}: {failure}");
        }
        bail!(
            "{} of {} documents fell back to the topic-shift baseline:\n{}",
            fallbacks.len(),
            docs.len(),
            summary.trim_end()
        );
    }
    Ok(())
}

fn cmd_index(settings: &Settings, args: &IndexArgs) -> Result<()> {
    let segs = read_segmentations(&args.segmentations)?;
    let embedder = settings.build_embedder()?;
    let chunks: Vec<_> = segs.iter().flat_map(|s| s.chunks.iter().cloned()).collect();
    let index = build_index(chunks, embedder.as_ref())?;
    save_index(&index, &args.out)?;
    println!(
        "indexed {} chunks from {} documents into {}",
        index.len(),
        segs.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_query(settings: &Settings, args: &QueryArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    let embedder = settings.build_embedder()?;
    let hits = hybrid_search(
        &index,
        embedder.as_ref(),
        &args.question,
        settings.k,
        settings.dense_weight,
        settings.bm25_weight,
    )?;
    println!("{}", serde_json::to_string_pretty(&hits)?);
    Ok(())
}

fn cmd_eval(settings: &Settings, args: &EvalArgs) -> Result<()> {
    let segs = read_segmentations(&args.segmentations)?;
    if segs.is_empty() {
        bail!("no segmentations in {}", args.segmentations.display());
    }
    let qa = read_qa(&args.qa)?;
    if qa.is_empty() {
        bail!("no QA pairs");
    }
    let method = segs[0].method;
    if let Some(other) = segs.iter().find(|s| s.method != method) {
        bail!(
            "segmentation file mixes methods ({method} and {}); evaluate one method at a time",
            other.method
        );
    }

    let embedder = settings.build_embedder()?;
    let chunks: Vec<_> = segs.iter().flat_map(|s| s.chunks.iter().cloned()).collect();
    let index = build_index(chunks, embedder.as_ref())?;
    let depth = settings.k.max(5);
    let ranks = answer_ranks(
        &index,
        embedder.as_ref(),
        &qa,
        depth,
        settings.dense_weight,
        settings.bm25_weight,
    )?;
    let stats = chunk_stats(&segs);
    let report = EvalReport {
        dataset: args.dataset.clone(),
        records: vec![MethodRecord {
            method,
            num_docs: segs.len(),
            num_chunks: stats.count,
            mean_chunk_len: stats.mean_len,
            max_chunk_len: stats.max_len,
            coverage: answer_coverage(&segs, &qa),
            recall_at_1: recall_at_k(&ranks, 1),
            recall_at_k: recall_at_k(&ranks, settings.k),
            k: settings.k,
            mrr: mrr(&ranks),
            embed_seconds: None,
            intent_seconds: None,
            segment_seconds: None,
            fallback_docs: Vec::new(),
        }],
    };
    emit_report(
        &report,
        args.out.as_deref(),
        args.csv.as_deref(),
        args.figures.as_deref(),
    )
}

fn cmd_compare(settings: &Settings, args: &CompareArgs) -> Result<()> {
    let docs = read_corpus(&args.corpus)?;
    let qa = read_qa(&args.qa)?;
    let embedder = settings.build_embedder()?;
    let generator = settings.build_generator(&embedder)?;
    let config = CompareConfig {
        dataset: args.dataset.clone(),
        seg: settings.seg,
        fixed_width: settings.window,
        window: settings.window,
        stride: settings.stride,
        block: settings.block,
        k: settings.k,
        dense_weight: settings.dense_weight,
        bm25_weight: settings.bm25_weight,
        dedup_threshold: settings.dedup_threshold,
        with_timings: !args.no_timings,
    };
    let report = compare_methods(&docs, &qa, generator.as_ref(), embedder.as_ref(), &config)?;
    for record in &report.records {
        if !record.fallback_docs.is_empty() {
            log::warn!(
                "{} documents fell back to the topic-shift baseline: {}",
                record.fallback_docs.len(),
                record.fallback_docs.join(", ")
            );
        }
    }
    emit_report(
        &report,
        args.out.as_deref(),
        args.csv.as_deref(),
        args.figures.as_deref(),
    )
}

fn emit_report(
    report: &EvalReport,
    out: Option<&Path>,
    csv: Option<&Path>,
    figures: Option<&Path>,
) -> Result<()> {
    match out {
        Some(path) => {
            write_report_json(report, path)?;
            println!("wrote report to {}", path.display());
        }
        None => print!("{}", report_to_json(report)?),
    }
    if let Some(path) = csv {
        write_report_csv(report, path)?;
        println!("wrote CSV to {}", path.display());
    }
    if let Some(dir) = figures {
        write_figures(report, dir)?;
        println!("wrote metric CSVs to {}", dir.display());
    }
    Ok(())
}
