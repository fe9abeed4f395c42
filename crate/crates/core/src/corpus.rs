//! Vocabulary construction and id-encoding of pre-tokenized text.
//!
//! Corpus files hold one document per line as `doc_id<TAB>token token ...`.
//! Tokens made entirely of sentence-delimiter characters split the document
//! into sentences and are not themselves encoded.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentence delimiters used when none are given.
pub const DEFAULT_SENTENCE_DELIMS: &[char] = &['.', '!', '?', '；', '。', '！', '？'];

/// Bijection between surface tokens and dense ids `0..V`, ordered by
/// descending corpus frequency then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, u32>,
    freq: Vec<u64>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, freq)` pairs already in id order.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut tokens = Vec::with_capacity(entries.len());
        let mut freq = Vec::with_capacity(entries.len());
        let mut id_of = HashMap::with_capacity(entries.len());
        for (id, (token, f)) in entries.into_iter().enumerate() {
            if id_of.insert(token.clone(), id as u32).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate token `{token}`")));
            }
            tokens.push(token);
            freq.push(f);
        }
        Ok(Self { tokens, id_of, freq })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freq(&self) -> &[u64] {
        &self.freq
    }

    /// Writes `id\ttoken\tfreq` lines in ascending id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, (tok, f)) in self.tokens.iter().zip(&self.freq).enumerate() {
            out.push_str(&format!("{id}\t{tok}\t{f}\n"));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let mut fields = line.split('\t');
            let (Some(id), Some(tok), Some(f), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::malformed(path, lineno, "expected `id\\ttoken\\tfreq`"));
            };
            let id: usize = id
                .parse()
                .map_err(|_| Error::malformed(path, lineno, format!("bad id `{id}`")))?;
            if id != entries.len() {
                return Err(Error::malformed(path, lineno, format!("expected id {}", entries.len())));
            }
            let f: u64 = f
                .parse()
                .map_err(|_| Error::malformed(path, lineno, format!("bad frequency `{f}`")))?;
            entries.push((tok.to_string(), f));
        }
        Self::from_entries(entries)
    }
}

/// An id-encoded document partitioned into non-empty sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    token_ids: Vec<u32>,
    sentence_bounds: Vec<usize>,
}

impl Document {
    /// `sentence_bounds` must start at 0, end at `token_ids.len()` and be
    /// strictly ascending.
    pub fn new(doc_id: impl Into<String>, token_ids: Vec<u32>, sentence_bounds: Vec<usize>) -> Result<Self> {
        if token_ids.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let ok = sentence_bounds.first() == Some(&0)
            && sentence_bounds.last() == Some(&token_ids.len())
            && sentence_bounds.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "sentence bounds {sentence_bounds:?} do not partition {} tokens",
                token_ids.len()
            )));
        }
        Ok(Self {
            doc_id: doc_id.into(),
            token_ids,
            sentence_bounds,
        })
    }

    /// A document made of a single sentence.
    pub fn single_sentence(doc_id: impl Into<String>, token_ids: Vec<u32>) -> Result<Self> {
        let n = token_ids.len();
        Self::new(doc_id, token_ids, vec![0, n])
    }

    pub fn token_ids(&self) -> &[u32] {
        &self.token_ids
    }

    pub fn sentence_bounds(&self) -> &[usize] {
        &self.sentence_bounds
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentence_bounds.len() - 1
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.sentence_bounds
            .windows(2)
            .map(move |w| &self.token_ids[w[0]..w[1]])
    }

    pub fn max_token_id(&self) -> u32 {
        self.token_ids.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }
}

/// Result of reading a corpus file.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// Lines whose documents had no in-vocabulary tokens.
    pub skipped_docs: usize,
    /// Out-of-vocabulary tokens dropped while encoding.
    pub oov_tokens: usize,
}

/// Token, delimiter-set membership: non-empty and made only of delimiter chars.
pub fn is_delimiter(token: &str, delims: &[char]) -> bool {
    !token.is_empty() && token.chars().all(|c| delims.contains(&c))
}

pub fn build_vocabulary<S: AsRef<str>>(
    raw_docs: &[S],
    min_count: u64,
    stopwords: Option<&HashSet<String>>,
) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidParameter("min_count must be positive".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in raw_docs {
        for tok in doc.as_ref().split_whitespace() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(tok, c)| c >= min_count && !stopwords.is_some_and(|s| s.contains(tok)))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_entries(kept.into_iter().map(|(t, c)| (t.to_string(), c)).collect())
}

/// Encodes one whitespace-tokenized line. Returns the document and the number
/// of out-of-vocabulary tokens dropped.
pub fn encode_document_counted(
    doc_id: &str,
    line: &str,
    vocab: &Vocabulary,
    delims: &[char],
) -> Result<(Document, usize)> {
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut ids = Vec::new();
    let mut bounds = vec![0];
    let mut oov = 0;
    for tok in line.split_whitespace() {
        if is_delimiter(tok, delims) {
            if *bounds.last().unwrap() < ids.len() {
                bounds.push(ids.len());
            }
            continue;
        }
        match vocab.id(tok) {
            Some(id) => ids.push(id),
            None => oov += 1,
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyDocument);
    }
    if *bounds.last().unwrap() < ids.len() {
        bounds.push(ids.len());
    }
    Ok((Document::new(doc_id, ids, bounds)?, oov))
}

pub fn encode_document(line: &str, vocab: &Vocabulary, delims: &[char]) -> Result<Document> {
    encode_document_counted("", line, vocab, delims).map(|(d, _)| d)
}

/// Splits a corpus line into `(doc_id, text)`.
pub fn split_corpus_line(line: &str) -> Option<(&str, &str)> {
    line.split_once('\t')
}

/// Reads a corpus file. Builds the vocabulary from the file when `vocab` is
/// `None`; delimiter tokens never enter a built vocabulary.
pub fn load_corpus(
    path: &Path,
    vocab: Option<Vocabulary>,
    min_count: u64,
    stopwords: Option<&HashSet<String>>,
    delims: &[char],
) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = split_corpus_line(line)
            .ok_or_else(|| Error::malformed(path, i + 1, "missing TAB between doc_id and tokens"))?;
        rows.push((id, body));
    }
    if rows.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = match vocab {
        Some(v) => v,
        None => {
            let mut excluded: HashSet<String> = stopwords.cloned().unwrap_or_default();
            let bodies: Vec<&str> = rows.iter().map(|r| r.1).collect();
            for body in &bodies {
                for tok in body.split_whitespace() {
                    if is_delimiter(tok, delims) {
                        excluded.insert(tok.to_string());
                    }
                }
            }
            build_vocabulary(&bodies, min_count, Some(&excluded))?
        }
    };
    let mut docs = Vec::with_capacity(rows.len());
    let mut skipped_docs = 0;
    let mut oov_tokens = 0;
    for (id, body) in rows {
        match encode_document_counted(id, body, &vocab, delims) {
            Ok((doc, oov)) => {
                oov_tokens += oov;
                docs.push(doc);
            }
            Err(Error::EmptyDocument) => {
                oov_tokens += body.split_whitespace().filter(|t| !is_delimiter(t, delims)).count();
                skipped_docs += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(LoadedCorpus {
        corpus: Corpus { docs, vocab },
        skipped_docs,
        oov_tokens,
    })
}
