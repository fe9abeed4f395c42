use rand::Rng as _;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::{rng_from_seed, Rng};

use super::conditional::{lda_conditional, slda_conditional};
use super::{ModelKind, TopicModel, TopicModelParams, WordTopicCounts};

/// Trained model plus the final per-token topic assignments (for SentenceLDA
/// every token carries its sentence's topic).
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: TopicModel,
    pub assignments: Vec<Vec<u32>>,
}

/// Collapsed Gibbs sampler over a corpus. Owns the count tables for the
/// duration of training.
pub struct Trainer<'a> {
    corpus: &'a Corpus,
    params: TopicModelParams,
    kind: ModelKind,
    counts: WordTopicCounts,
    doc_topic: Vec<Vec<u32>>,
    // one entry per token (LDA) or per sentence (SentenceLDA)
    topics: Vec<Vec<u32>>,
    rng: Rng,
    scratch: Vec<f64>,
}

impl<'a> Trainer<'a> {
    /// Assigns every token (or sentence) a uniformly random topic.
    pub fn new(corpus: &'a Corpus, params: TopicModelParams, kind: ModelKind, seed: u64) -> Result<Self> {
        params.validate()?;
        if corpus.docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = params.num_topics;
        let v = corpus.vocab.len();
        for doc in &corpus.docs {
            if doc.max_token_id() as usize >= v {
                return Err(Error::OutOfRange {
                    what: "word id",
                    index: doc.max_token_id() as usize,
                    limit: v,
                });
            }
        }
        let mut rng = rng_from_seed(seed);
        let mut counts = WordTopicCounts::zeros(k, v);
        let mut doc_topic = Vec::with_capacity(corpus.docs.len());
        let mut topics = Vec::with_capacity(corpus.docs.len());
        for doc in &corpus.docs {
            let mut nd = vec![0u32; k];
            let z: Vec<u32> = match kind {
                ModelKind::Lda => doc
                    .token_ids()
                    .iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        nd[t] += 1;
                        counts.add(t, w);
                        t as u32
                    })
                    .collect(),
                ModelKind::SentenceLda => doc
                    .sentences()
                    .map(|s| {
                        let t = rng.random_range(0..k);
                        nd[t] += 1;
                        s.iter().for_each(|&w| counts.add(t, w));
                        t as u32
                    })
                    .collect(),
            };
            doc_topic.push(nd);
            topics.push(z);
        }
        Ok(Self {
            corpus,
            params,
            kind,
            counts,
            doc_topic,
            topics,
            rng,
            scratch: vec![0.0; k],
        })
    }

    pub fn counts(&self) -> &WordTopicCounts {
        &self.counts
    }

    pub fn doc_topic(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    /// Resamples every assignment once.
    pub fn sweep(&mut self) {
        match self.kind {
            ModelKind::Lda => self.sweep_lda(),
            ModelKind::SentenceLda => self.sweep_slda(),
        }
    }

    fn sweep_lda(&mut self) {
        let v = self.counts.vocab_size();
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let nd = &mut self.doc_topic[d];
            for (i, &w) in doc.token_ids().iter().enumerate() {
                let old = self.topics[d][i] as usize;
                nd[old] -= 1;
                self.counts.remove(old, w);
                lda_conditional(
                    &self.params,
                    v,
                    nd,
                    self.counts.row(w),
                    self.counts.totals(),
                    &mut self.scratch,
                );
                let new = draw(&self.scratch, &mut self.rng);
                nd[new] += 1;
                self.counts.add(new, w);
                self.topics[d][i] = new as u32;
            }
        }
    }

    fn sweep_slda(&mut self) {
        let v = self.counts.vocab_size();
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let nd = &mut self.doc_topic[d];
            for (s, sentence) in doc.sentences().enumerate() {
                let old = self.topics[d][s] as usize;
                nd[old] -= 1;
                sentence.iter().for_each(|&w| self.counts.remove(old, w));
                slda_conditional(
                    &self.params,
                    v,
                    nd,
                    sentence,
                    self.counts.as_word_major(),
                    self.counts.totals(),
                    &mut self.scratch,
                )
                .expect("sentences are non-empty");
                super::normalize_log(&mut self.scratch);
                let new = draw(&self.scratch, &mut self.rng);
                nd[new] += 1;
                sentence.iter().for_each(|&w| self.counts.add(new, w));
                self.topics[d][s] = new as u32;
            }
        }
    }

    /// Per-token topic ids.
    pub fn token_assignments(&self) -> Vec<Vec<u32>> {
        match self.kind {
            ModelKind::Lda => self.topics.clone(),
            ModelKind::SentenceLda => self
                .corpus
                .docs
                .iter()
                .zip(&self.topics)
                .map(|(doc, z)| {
                    doc.sentences()
                        .zip(z)
                        .flat_map(|(s, &t)| std::iter::repeat_n(t, s.len()))
                        .collect()
                })
                .collect(),
        }
    }

    /// Drops the document table and freezes the counts into a model.
    pub fn finish(self) -> Result<TrainOutput> {
        let assignments = self.token_assignments();
        let model = TopicModel::new(self.params, self.kind, self.counts)?;
        Ok(TrainOutput { model, assignments })
    }
}

/// Draws an index proportionally to positive weights.
#[inline]
pub(crate) fn draw(weights: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

pub fn train(
    corpus: &Corpus,
    params: TopicModelParams,
    kind: ModelKind,
    iters: usize,
    seed: u64,
) -> Result<TrainOutput> {
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    let mut trainer = Trainer::new(corpus, params, kind, seed)?;
    for _ in 0..iters {
        trainer.sweep();
    }
    trainer.finish()
}
