//! Command-line front end.
//!
//! Results go to standard output as TSV with floats at six decimals;
//! diagnostics go to standard error. Exit codes: 0 success, 1 usage error,
//! 2 data or model error.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::corpus::{self, encode_document_counted, is_delimiter, Document, Vocabulary, DEFAULT_SENTENCE_DELIMS};
use crate::error::{Error, Result};
use crate::model_store::{load_model, save_model, topic_top_words, word_topic_distribution, StoredModel};
use crate::sampler::{infer_gibbs, infer_mh, train, ModelKind, TopicDistribution, TopicModelParams};
use crate::semantics::{
    cluster_topic_distributions, cosine_similarity, embed_short_text, hellinger_distance, jensen_shannon_divergence,
    keyword_scores, short_long_similarity, topic_entropy,
};
use crate::svdfeature::{
    evaluate_ranking, load_interactions, svdf_train, Candidate, FeatureDims, SvdFeatureModel, SvdTrainConfig,
};
use crate::twe::{nearest_words, train_twe, EmbeddingTable, Query, TweConfig};

pub const THREADS_ENV: &str = "FAMILIA_NUM_THREADS";

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "familia",
    version,
    about = "Topic modeling toolkit: train, infer, inspect and match with LDA, SentenceLDA and topical word embeddings",
    after_help = "Set FAMILIA_NUM_THREADS to fan document inference across workers (default 1)."
)]
pub struct Cli {
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an LDA or SentenceLDA model by collapsed Gibbs sampling
    Train(TrainArgs),
    /// Infer topic distributions for documents
    Infer(InferArgs),
    /// Train topical word embeddings on a topic-annotated corpus
    TweTrain(TweTrainArgs),
    /// Most probable words of a topic
    TopicWords(TopicWordsArgs),
    /// Topic distribution of a word, P(z | w)
    WordTopics(WordTopicsArgs),
    /// Nearest words to a word or topic vector by cosine
    Nearest(NearestArgs),
    /// Entropy of a document's topic distribution
    Entropy(EntropyArgs),
    /// Semantic matching scores
    #[command(subcommand)]
    Match(MatchCommand),
    /// Rank a document's words by embedding similarity to its topics
    Keywords(KeywordsArgs),
    /// K-means over topic distributions
    Cluster(ClusterArgs),
    /// Train a feature-based matrix factorization model
    SvdfTrain(SvdfTrainArgs),
    /// Predict targets for interactions
    SvdfPredict(SvdfPredictArgs),
    /// Precision@n and NDCG@n per-user ranking evaluation
    SvdfEval(SvdfEvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Lda,
    Slda,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lda => ModelKind::Lda,
            KindArg::Slda => ModelKind::SentenceLda,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Gibbs,
    Mh,
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn non_negative_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("`{s}` is not a non-negative number")),
    }
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(x) if x >= 1 => Ok(x),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

/// Comma-separated floats as a single flag value.
#[derive(Debug, Clone)]
struct Floats(Vec<f64>);

fn float_list(s: &str) -> std::result::Result<Floats, String> {
    parse_floats(s).map(Floats)
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(v)
}

fn simplex(s: &str) -> std::result::Result<Floats, String> {
    let v = parse_floats(s)?;
    TopicDistribution::new(v)
        .map(|d| Floats(d.into_inner()))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct TextOptions {
    /// Characters that form sentence-delimiter tokens
    #[arg(long, default_value_t = DEFAULT_SENTENCE_DELIMS.iter().collect::<String>())]
    delims: String,
}

impl TextOptions {
    fn delims(&self) -> Vec<char> {
        self.delims.chars().collect()
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus file, one `doc_id<TAB>tokens` line per document
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "lda")]
    kind: KindArg,
    /// Number of topics
    #[arg(long, value_parser = positive_usize)]
    topics: usize,
    /// Document-topic prior [default: 50 / topics]
    #[arg(long, value_parser = positive_f64)]
    alpha: Option<f64>,
    /// Topic-word prior
    #[arg(long, value_parser = positive_f64, default_value_t = 0.01)]
    beta: f64,
    /// Gibbs sweeps
    #[arg(long, value_parser = positive_usize, default_value_t = 300)]
    iters: usize,
    /// Minimum corpus count for a token to enter the vocabulary
    #[arg(long, value_parser = positive_usize, default_value_t = 1)]
    min_count: usize,
    /// File of stopwords, one per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[command(flatten)]
    text: TextOptions,
    /// Output model directory
    #[arg(long)]
    out: PathBuf,
    /// Also write final per-token topic assignments here (input to twe-train)
    #[arg(long)]
    assignments: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelOptions {
    /// Model directory written by `train`
    #[arg(long)]
    model: PathBuf,
    /// Override the stored topic-word prior
    #[arg(long, value_parser = positive_f64)]
    beta: Option<f64>,
}

impl ModelOptions {
    fn load(&self) -> Result<StoredModel> {
        let mut stored = load_model(&self.model)?;
        if let Some(beta) = self.beta {
            stored.model = stored.model.with_beta(beta)?;
        }
        Ok(stored)
    }
}

#[derive(Debug, Args)]
struct InferOptions {
    #[arg(long, value_enum, default_value = "gibbs")]
    method: MethodArg,
    /// Sweeps discarded before averaging
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    /// Sweeps averaged into the result
    #[arg(long, value_parser = positive_usize, default_value_t = 100)]
    samples: usize,
    /// Metropolis-Hastings proposals per token per sweep
    #[arg(long, value_parser = positive_usize, default_value_t = 2)]
    mh_steps: usize,
}

impl InferOptions {
    fn run(&self, stored: &StoredModel, doc: &Document, seed: u64) -> Result<TopicDistribution> {
        match self.method {
            MethodArg::Gibbs => infer_gibbs(&stored.model, doc, self.burn_in, self.samples, seed),
            MethodArg::Mh => infer_mh(&stored.model, doc, self.burn_in, self.samples, self.mh_steps, seed),
        }
    }
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    model: ModelOptions,
    /// A single document's text
    #[arg(long, conflicts_with = "docs", required_unless_present = "docs")]
    doc: Option<String>,
    /// Corpus-format file of documents
    #[arg(long)]
    docs: Option<PathBuf>,
    #[command(flatten)]
    infer: InferOptions,
    #[command(flatten)]
    text: TextOptions,
}

#[derive(Debug, Args)]
struct TweTrainArgs {
    /// Corpus the model was trained on
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    model: ModelOptions,
    /// Assignments file written by `train --assignments`
    #[arg(long)]
    assignments: PathBuf,
    #[command(flatten)]
    text: TextOptions,
    #[arg(long, value_parser = positive_usize, default_value_t = 100)]
    dim: usize,
    /// Context radius
    #[arg(long, value_parser = positive_usize, default_value_t = 5)]
    window: usize,
    /// Negative samples per positive pair
    #[arg(long, value_parser = positive_usize, default_value_t = 5)]
    negatives: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 5)]
    epochs: usize,
    /// Initial learning rate, decayed linearly to 1% of itself
    #[arg(long, value_parser = positive_f64, default_value_t = 0.025)]
    step_size: f64,
    /// Output embedding file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TopicWordsArgs {
    #[command(flatten)]
    model: ModelOptions,
    /// Topic id [default: every topic]
    #[arg(long)]
    topic: Option<usize>,
    #[arg(long, default_value_t = 10)]
    n: usize,
}

#[derive(Debug, Args)]
struct WordTopicsArgs {
    #[command(flatten)]
    model: ModelOptions,
    #[arg(long)]
    word: String,
}

#[derive(Debug, Args)]
struct NearestArgs {
    /// Embedding file written by `twe-train`
    #[arg(long)]
    emb: PathBuf,
    #[arg(long, conflicts_with = "topic", required_unless_present = "topic")]
    word: Option<String>,
    #[arg(long)]
    topic: Option<usize>,
    #[arg(long, default_value_t = 10)]
    n: usize,
}

/// A topic distribution given directly or inferred from text.
#[derive(Debug, Args)]
struct DistSource {
    /// Topic distribution as comma-separated probabilities
    #[arg(long, value_parser = simplex, conflicts_with = "doc")]
    p: Option<Floats>,
    /// Document text, inferred with --model
    #[arg(long, requires = "model")]
    doc: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    infer: InferOptions,
    #[command(flatten)]
    text: TextOptions,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    #[command(flatten)]
    source: DistSource,
}

#[derive(Debug, Subcommand)]
enum MatchCommand {
    /// Cosine similarity of two vectors or two embedded short texts
    Cos(CosArgs),
    /// Log-probability of a short query under a long document's topics
    Sl(SlArgs),
    /// Hellinger distance between two topic distributions
    Hd(PairArgs),
    /// Jensen-Shannon divergence between two topic distributions
    Jsd(PairArgs),
}

#[derive(Debug, Args)]
struct CosArgs {
    #[arg(long, value_parser = float_list, requires = "b", conflicts_with_all = ["emb", "text1", "text2"])]
    a: Option<Floats>,
    #[arg(long, value_parser = float_list)]
    b: Option<Floats>,
    /// Embedding file for --text1/--text2
    #[arg(long, requires_all = ["text1", "text2"])]
    emb: Option<PathBuf>,
    #[arg(long)]
    text1: Option<String>,
    #[arg(long)]
    text2: Option<String>,
}

#[derive(Debug, Args)]
struct SlArgs {
    #[command(flatten)]
    model: ModelOptions,
    /// Short text
    #[arg(long)]
    query: String,
    /// Long text, inferred with the model
    #[arg(long, conflicts_with = "dist", required_unless_present = "dist")]
    doc: Option<String>,
    /// Long text's topic distribution
    #[arg(long, value_parser = simplex)]
    dist: Option<Floats>,
    #[command(flatten)]
    infer: InferOptions,
    #[command(flatten)]
    text: TextOptions,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long, value_parser = simplex, requires = "q", conflicts_with_all = ["doc1", "doc2"])]
    p: Option<Floats>,
    #[arg(long, value_parser = simplex)]
    q: Option<Floats>,
    /// First document text, inferred with --model
    #[arg(long, requires_all = ["doc2", "model"])]
    doc1: Option<String>,
    #[arg(long)]
    doc2: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    infer: InferOptions,
    #[command(flatten)]
    text: TextOptions,
}

#[derive(Debug, Args)]
struct KeywordsArgs {
    #[command(flatten)]
    model: ModelOptions,
    /// Embedding file trained with the same vocabulary
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    doc: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// File of stopwords, one per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[command(flatten)]
    infer: InferOptions,
    #[command(flatten)]
    text: TextOptions,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// TSV of `id<TAB>p0<TAB>p1...` lines, as printed by `infer`
    #[arg(long)]
    dists: PathBuf,
    #[arg(long, value_parser = positive_usize)]
    k: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 100)]
    max_iters: usize,
}

#[derive(Debug, Args)]
struct SvdfTrainArgs {
    /// Interaction file: `y | g idx:val ... | u idx:val ... | i idx:val ...`
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = positive_usize, default_value_t = 8)]
    factor_dim: usize,
    #[arg(long, value_parser = positive_usize, default_value_t = 100)]
    epochs: usize,
    #[arg(long, value_parser = positive_f64, default_value_t = 0.01)]
    step_size: f64,
    #[arg(long, value_parser = non_negative_f64, default_value_t = 0.004)]
    l2: f64,
    /// Feature space sizes as `global,user,item` [default: largest index + 1]
    #[arg(long)]
    dims: Option<String>,
}

#[derive(Debug, Args)]
struct SvdfPredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
#[command(
    after_help = "Candidates are grouped by their first user feature index; the first item feature index \
                  identifies the item and the target is its relevance label."
)]
struct SvdfEvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = positive_usize, default_value_t = 5)]
    n: usize,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<O: Write, E: Write>(argv: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Err(_) => 1,
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                let _ = writeln!(err, "error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return EXIT_USAGE;
            }
        },
    };
    let mut buf = Vec::new();
    let result = dispatch(&cli, threads, &mut buf, err);
    let _ = out.write_all(&buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn tsv_floats(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join("\t")
}

fn read_stopwords(path: Option<&PathBuf>) -> Result<Option<HashSet<String>>> {
    path.map(|p| {
        fs::read_to_string(p)
            .map_err(|e| Error::io(p, e))
            .map(|t| t.split_whitespace().map(str::to_string).collect())
    })
    .transpose()
}

fn encode_text(text: &str, vocab: &Vocabulary, opts: &TextOptions) -> Result<Document> {
    match encode_document_counted("doc", text, vocab, &opts.delims()) {
        Err(Error::EmptyDocument) if !text.split_whitespace().all(|t| is_delimiter(t, &opts.delims())) => {
            Err(Error::AllOutOfVocabulary)
        }
        r => r.map(|(d, _)| d),
    }
}

fn infer_text(model_dir: &Path, text: &str, infer: &InferOptions, opts: &TextOptions, seed: u64) -> Result<Vec<f64>> {
    let stored = load_model(model_dir)?;
    let doc = encode_text(text, &stored.vocab, opts)?;
    Ok(infer.run(&stored, &doc, seed)?.into_inner())
}

fn dispatch<E: Write>(cli: &Cli, threads: usize, out: &mut Vec<u8>, err: &mut E) -> Result<()> {
    let seed = cli.seed;
    let io_err = |e: std::io::Error| Error::io("<stdout>", e);
    match &cli.command {
        Command::Train(a) => {
            let stop = read_stopwords(a.stopwords.as_ref())?;
            let loaded = corpus::load_corpus(&a.corpus, None, a.min_count as u64, stop.as_ref(), &a.text.delims())?;
            if loaded.skipped_docs > 0 {
                let _ = writeln!(err, "skipped {} documents with no in-vocabulary tokens", loaded.skipped_docs);
            }
            let alpha = a.alpha.unwrap_or(50.0 / a.topics as f64);
            let params = TopicModelParams::new(a.topics, alpha, a.beta)?;
            let c = &loaded.corpus;
            let trained = train(c, params, a.kind.into(), a.iters, seed)?;
            save_model(&trained.model, &c.vocab, &a.out)?;
            if let Some(path) = &a.assignments {
                let mut text = String::new();
                for (doc, z) in c.docs.iter().zip(&trained.assignments) {
                    let z: Vec<String> = z.iter().map(u32::to_string).collect();
                    text.push_str(&format!("{}\t{}\n", doc.doc_id, z.join(" ")));
                }
                fs::write(path, text).map_err(|e| Error::io(path, e))?;
            }
            writeln!(out, "docs\t{}", c.docs.len()).map_err(io_err)?;
            writeln!(out, "tokens\t{}", c.num_tokens()).map_err(io_err)?;
            writeln!(out, "vocab\t{}", c.vocab.len()).map_err(io_err)?;
            writeln!(out, "skipped\t{}", loaded.skipped_docs).map_err(io_err)?;
        }
        Command::Infer(a) => {
            let stored = a.model.load()?;
            let delims = a.text.delims();
            let docs: Vec<(String, Result<Document>)> = match (&a.doc, &a.docs) {
                (Some(text), _) => vec![("doc".to_string(), encode_text(text, &stored.vocab, &a.text))],
                (None, Some(path)) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let mut docs = Vec::new();
                    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                        let (id, body) = corpus::split_corpus_line(line)
                            .ok_or_else(|| Error::malformed(path, i + 1, "missing TAB between doc_id and tokens"))?;
                        docs.push((
                            id.to_string(),
                            encode_document_counted(id, body, &stored.vocab, &delims).map(|(d, _)| d),
                        ));
                    }
                    docs
                }
                (None, None) => unreachable!("clap enforces one of --doc/--docs"),
            };
            let single = a.doc.is_some();
            let work = |(i, (_, doc)): (usize, &(String, Result<Document>))| -> Result<TopicDistribution> {
                match doc {
                    Ok(d) => a.infer.run(&stored, d, seed.wrapping_add(i as u64)),
                    Err(Error::EmptyDocument) => Err(Error::EmptyDocument),
                    Err(e) => Err(Error::InvalidParameter(e.to_string())),
                }
            };
            let results: Vec<Result<TopicDistribution>> = if threads > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                pool.install(|| docs.par_iter().enumerate().map(work).collect())
            } else {
                docs.iter().enumerate().map(work).collect()
            };
            for ((id, _), res) in docs.iter().zip(results) {
                match res {
                    Ok(p) => writeln!(out, "{id}\t{}", tsv_floats(&p)).map_err(io_err)?,
                    Err(e) if !single => {
                        let _ = writeln!(err, "skipping {id}: {e}");
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Command::TweTrain(a) => {
            let stored = a.model.load()?;
            let loaded = corpus::load_corpus(&a.corpus, Some(stored.vocab.clone()), 1, None, &a.text.delims())?;
            let text = fs::read_to_string(&a.assignments).map_err(|e| Error::io(&a.assignments, e))?;
            let mut assignments = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let (_, z) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::malformed(&a.assignments, i + 1, "expected `doc_id<TAB>topics`"))?;
                let z: Vec<u32> = z
                    .split_whitespace()
                    .map(|t| t.parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::malformed(&a.assignments, i + 1, "bad topic id"))?;
                assignments.push(z);
            }
            let cfg = TweConfig {
                dim: a.dim,
                window: a.window,
                negatives: a.negatives,
                epochs: a.epochs,
                step_size: a.step_size,
                seed,
            };
            let trained = train_twe(&loaded.corpus, &assignments, stored.model.num_topics(), &cfg)?;
            trained.table.save(&a.out)?;
            for (e, l) in trained.epoch_losses.iter().enumerate() {
                writeln!(out, "{}\t{}", e + 1, fmt(*l)).map_err(io_err)?;
            }
        }
        Command::TopicWords(a) => {
            let stored = a.model.load()?;
            let topics: Vec<usize> = match a.topic {
                Some(k) => vec![k],
                None => (0..stored.model.num_topics()).collect(),
            };
            for k in topics {
                for (tok, p) in topic_top_words(&stored.model, &stored.vocab, k, a.n)? {
                    writeln!(out, "{k}\t{tok}\t{}", fmt(p)).map_err(io_err)?;
                }
            }
        }
        Command::WordTopics(a) => {
            let stored = a.model.load()?;
            let w = stored.vocab.id(&a.word).ok_or(Error::AllOutOfVocabulary)?;
            for (k, p) in word_topic_distribution(&stored.model, w)?.iter().enumerate() {
                writeln!(out, "{k}\t{}", fmt(*p)).map_err(io_err)?;
            }
        }
        Command::Nearest(a) => {
            let table = EmbeddingTable::load(&a.emb)?;
            let query = match (&a.word, a.topic) {
                (Some(w), _) => Query::Word(table.word_id(w).ok_or(Error::AllOutOfVocabulary)?),
                (None, Some(k)) => Query::Topic(k),
                (None, None) => unreachable!("clap enforces one of --word/--topic"),
            };
            for (tok, c) in nearest_words(&table, query, a.n)? {
                writeln!(out, "{tok}\t{}", fmt(c)).map_err(io_err)?;
            }
        }
        Command::Entropy(a) => {
            let p = dist_from_source(&a.source, seed)?;
            writeln!(out, "{}", fmt(topic_entropy(&p)?)).map_err(io_err)?;
        }
        Command::Match(m) => run_match(m, seed, out)?,
        Command::Keywords(a) => {
            let stored = a.model.load()?;
            let table = EmbeddingTable::load(&a.emb)?;
            let stop = read_stopwords(a.stopwords.as_ref())?;
            let doc = encode_text(&a.doc, &stored.vocab, &a.text)?;
            let dist = a.infer.run(&stored, &doc, seed)?;
            let delims = a.text.delims();
            let ids: Vec<u32> = a
                .doc
                .split_whitespace()
                .filter(|t| !is_delimiter(t, &delims))
                .filter_map(|t| table.word_id(t))
                .collect();
            let table_doc = Document::single_sentence("doc", ids)?;
            for sw in keyword_scores(&table_doc, &dist, &table, a.n, stop.as_ref())? {
                writeln!(out, "{}\t{}", sw.token, fmt(sw.score)).map_err(io_err)?;
            }
        }
        Command::Cluster(a) => {
            let text = fs::read_to_string(&a.dists).map_err(|e| Error::io(&a.dists, e))?;
            let mut ids = Vec::new();
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let mut fields = line.split('\t');
                let id = fields.next().unwrap_or_default().to_string();
                let p: Vec<f64> = fields
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::malformed(&a.dists, i + 1, "bad probability"))?;
                if p.is_empty() {
                    return Err(Error::malformed(&a.dists, i + 1, "no probabilities"));
                }
                ids.push(id);
                points.push(p);
            }
            if points.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            let c = cluster_topic_distributions(&points, a.k, a.max_iters, seed)?;
            let _ = writeln!(err, "inertia {} after {} iterations", fmt(c.inertia), c.iterations);
            for (id, cl) in ids.iter().zip(&c.assignments) {
                writeln!(out, "{id}\t{cl}").map_err(io_err)?;
            }
        }
        Command::SvdfTrain(a) => {
            let data = load_interactions(&a.data)?;
            let dims = match &a.dims {
                Some(s) => parse_dims(s)?,
                None => FeatureDims::covering(&data),
            };
            let cfg = SvdTrainConfig {
                factor_dim: a.factor_dim,
                epochs: a.epochs,
                step_size: a.step_size,
                l2: a.l2,
                seed,
            };
            let trained = svdf_train(&data, dims, &cfg)?;
            trained.model.save(&a.out)?;
            for (e, r) in trained.epoch_rmse.iter().enumerate() {
                writeln!(out, "{}\t{}", e + 1, fmt(*r)).map_err(io_err)?;
            }
        }
        Command::SvdfPredict(a) => {
            let model = SvdFeatureModel::load(&a.model)?;
            for x in load_interactions(&a.data)? {
                writeln!(out, "{}", fmt(model.predict(&x)?)).map_err(io_err)?;
            }
        }
        Command::SvdfEval(a) => {
            let model = SvdFeatureModel::load(&a.model)?;
            let mut users: Vec<(usize, Vec<Candidate>)> = Vec::new();
            for x in load_interactions(&a.data)? {
                let user = x.user_feats.first().map(|f| f.0).ok_or_else(|| {
                    Error::InvalidParameter("every evaluation interaction needs a user feature".into())
                })?;
                let item = x.item_feats.first().map(|f| f.0).ok_or_else(|| {
                    Error::InvalidParameter("every evaluation interaction needs an item feature".into())
                })?;
                let cand = Candidate {
                    item,
                    relevance: x.target,
                    interaction: x,
                };
                match users.iter_mut().find(|u| u.0 == user) {
                    Some(u) => u.1.push(cand),
                    None => users.push((user, vec![cand])),
                }
            }
            users.sort_by_key(|u| u.0);
            let per_user: Vec<Vec<Candidate>> = users.into_iter().map(|u| u.1).collect();
            let (p, ndcg) = evaluate_ranking(&model, &per_user, a.n)?;
            writeln!(out, "precision@{}\t{}", a.n, fmt(p)).map_err(io_err)?;
            writeln!(out, "ndcg@{}\t{}", a.n, fmt(ndcg)).map_err(io_err)?;
        }
    }
    Ok(())
}

fn parse_dims(s: &str) -> Result<FeatureDims> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter(format!("bad --dims `{s}`")))?;
    match v[..] {
        [global, user, item] => Ok(FeatureDims { global, user, item }),
        _ => Err(Error::InvalidParameter(format!("--dims needs three values, got `{s}`"))),
    }
}

fn dist_from_source(src: &DistSource, seed: u64) -> Result<Vec<f64>> {
    match (&src.p, &src.doc, &src.model) {
        (Some(p), _, _) => Ok(p.0.clone()),
        (None, Some(doc), Some(model)) => infer_text(model, doc, &src.infer, &src.text, seed),
        _ => Err(Error::InvalidParameter("give --p, or --doc with --model".into())),
    }
}

fn run_match(cmd: &MatchCommand, seed: u64, out: &mut Vec<u8>) -> Result<()> {
    let io_err = |e: std::io::Error| Error::io("<stdout>", e);
    match cmd {
        MatchCommand::Cos(a) => {
            let (x, y) = match (&a.a, &a.b, &a.emb, &a.text1, &a.text2) {
                (Some(x), Some(y), ..) => (x.0.clone(), y.0.clone()),
                (_, _, Some(emb), Some(t1), Some(t2)) => {
                    let table = EmbeddingTable::load(emb)?;
                    let e1 = embed_short_text(&t1.split_whitespace().collect::<Vec<_>>(), &table)?;
                    let e2 = embed_short_text(&t2.split_whitespace().collect::<Vec<_>>(), &table)?;
                    (e1, e2)
                }
                _ => return Err(Error::InvalidParameter("give --a and --b, or --emb with --text1 and --text2".into())),
            };
            writeln!(out, "{}", fmt(cosine_similarity(&x, &y)?)).map_err(io_err)?;
        }
        MatchCommand::Sl(a) => {
            let stored = a.model.load()?;
            let dist = match (&a.dist, &a.doc) {
                (Some(d), _) => d.0.clone(),
                (None, Some(text)) => {
                    let doc = encode_text(text, &stored.vocab, &a.text)?;
                    a.infer.run(&stored, &doc, seed)?.into_inner()
                }
                (None, None) => unreachable!("clap enforces one of --doc/--dist"),
            };
            let query: Vec<&str> = a.query.split_whitespace().collect();
            let s = short_long_similarity(&query, &dist, &stored.model, &stored.vocab)?;
            let prob = s.log_prob.exp();
            let prob = if prob > 0.0 { format!("{prob:.6e}") } else { "underflow".into() };
            writeln!(out, "{}\t{}\t{}", fmt(s.log_prob), prob, s.skipped_oov).map_err(io_err)?;
        }
        MatchCommand::Hd(a) | MatchCommand::Jsd(a) => {
            let (p, q) = match (&a.p, &a.q, &a.doc1, &a.doc2, &a.model) {
                (Some(p), Some(q), ..) => (p.0.clone(), q.0.clone()),
                (_, _, Some(d1), Some(d2), Some(model)) => (
                    infer_text(model, d1, &a.infer, &a.text, seed)?,
                    infer_text(model, d2, &a.infer, &a.text, seed)?,
                ),
                _ => return Err(Error::InvalidParameter("give --p and --q, or --doc1/--doc2 with --model".into())),
            };
            let v = match cmd {
                MatchCommand::Hd(_) => hellinger_distance(&p, &q)?,
                _ => jensen_shannon_divergence(&p, &q)?,
            };
            writeln!(out, "{}", fmt(v)).map_err(io_err)?;
        }
    }
    Ok(())
}
