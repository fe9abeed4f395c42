//! Text serialization of topic models and model-inspection queries.
//!
//! A model directory holds three files:
//!
//! * `model.meta`: one line, `kind K V alpha beta total_tokens`;
//! * `word_topic.txt`: one line per word id, `word_id k1:c1 k2:c2 ...` with
//!   only non-zero counts, topics ascending;
//! * `vocab.txt`: `id\ttoken\tfreq` lines.
//!
//! Counts rather than probabilities are stored, so `beta` can be overridden
//! at load time.

use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::sampler::{ModelKind, TopicDistribution, TopicModel, TopicModelParams, WordTopicCounts};

pub const META_FILE: &str = "model.meta";
pub const WORD_TOPIC_FILE: &str = "word_topic.txt";
pub const VOCAB_FILE: &str = "vocab.txt";

/// A model together with the vocabulary its word ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub model: TopicModel,
    pub vocab: Vocabulary,
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn save_model(model: &TopicModel, vocab: &Vocabulary, dir: &Path) -> Result<()> {
    if vocab.len() != model.vocab_size() {
        return Err(Error::DimensionMismatch(vocab.len(), model.vocab_size()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = model.params();
    let meta = format!(
        "{} {} {} {} {} {}\n",
        model.kind(),
        p.num_topics,
        model.vocab_size(),
        format_float(p.alpha),
        format_float(p.beta),
        model.counts().total_tokens()
    );
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let mut rows = String::new();
    for w in 0..model.vocab_size() as u32 {
        rows.push_str(&w.to_string());
        for (k, &c) in model.counts().row(w).iter().enumerate() {
            if c > 0 {
                rows.push_str(&format!(" {k}:{c}"));
            }
        }
        rows.push('\n');
    }
    let wt_path = dir.join(WORD_TOPIC_FILE);
    fs::write(&wt_path, rows).map_err(|e| Error::io(&wt_path, e))?;
    vocab.save(&dir.join(VOCAB_FILE))
}

struct Meta {
    kind: ModelKind,
    num_topics: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    total_tokens: u64,
}

fn parse_meta(text: &str) -> Result<Meta> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let [kind, k, v, alpha, beta, total] = fields[..] else {
        return Err(Error::CorruptModel(format!(
            "{META_FILE} must have 6 fields, found {}",
            fields.len()
        )));
    };
    let bad = |name: &str, val: &str| Error::CorruptModel(format!("{META_FILE}: bad {name} `{val}`"));
    Ok(Meta {
        kind: kind.parse()?,
        num_topics: k.parse().map_err(|_| bad("K", k))?,
        vocab_size: v.parse().map_err(|_| bad("V", v))?,
        alpha: alpha.parse().map_err(|_| bad("alpha", alpha))?,
        beta: beta.parse().map_err(|_| bad("beta", beta))?,
        total_tokens: total.parse().map_err(|_| bad("total_tokens", total))?,
    })
}

fn parse_rows(text: &str, k: usize, v: usize) -> Result<Vec<u32>> {
    let corrupt = |line: usize, msg: String| Error::CorruptModel(format!("{WORD_TOPIC_FILE}:{line}: {msg}"));
    let mut counts = vec![0u32; k * v];
    let mut rows = 0usize;
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else {
            return Err(corrupt(i + 1, "empty line".into()));
        };
        let id: usize = id.parse().map_err(|_| corrupt(i + 1, format!("bad word id `{id}`")))?;
        if id != rows {
            return Err(corrupt(i + 1, format!("expected word id {rows}, found {id}")));
        }
        if id >= v {
            return Err(corrupt(i + 1, format!("more rows than declared V = {v}")));
        }
        let mut prev: Option<usize> = None;
        for cell in fields {
            let (t, c) = cell
                .split_once(':')
                .ok_or_else(|| corrupt(i + 1, format!("bad cell `{cell}`")))?;
            let t: usize = t.parse().map_err(|_| corrupt(i + 1, format!("bad topic `{t}`")))?;
            let c: u32 = c.parse().map_err(|_| corrupt(i + 1, format!("bad count `{c}`")))?;
            if t >= k || prev.is_some_and(|p| p >= t) {
                return Err(corrupt(i + 1, format!("topic {t} out of order or range")));
            }
            prev = Some(t);
            counts[id * k + t] = c;
        }
        rows += 1;
    }
    if rows != v {
        return Err(Error::CorruptModel(format!(
            "{WORD_TOPIC_FILE} has {rows} rows, header declares V = {v}"
        )));
    }
    Ok(counts)
}

pub fn load_model(dir: &Path) -> Result<StoredModel> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta = parse_meta(&meta_text)?;
    let params = TopicModelParams::new(meta.num_topics, meta.alpha, meta.beta)
        .map_err(|e| Error::CorruptModel(e.to_string()))?;

    let wt_path = dir.join(WORD_TOPIC_FILE);
    let wt_text = fs::read_to_string(&wt_path).map_err(|e| Error::io(&wt_path, e))?;
    let counts = parse_rows(&wt_text, meta.num_topics, meta.vocab_size)?;
    let counts = WordTopicCounts::from_word_major(meta.num_topics, meta.vocab_size, counts)?;
    if counts.total_tokens() != meta.total_tokens {
        return Err(Error::CorruptModel(format!(
            "count total {} does not match header total {}",
            counts.total_tokens(),
            meta.total_tokens
        )));
    }

    let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
    if vocab.len() != meta.vocab_size {
        return Err(Error::CorruptModel(format!(
            "{VOCAB_FILE} has {} entries, header declares V = {}",
            vocab.len(),
            meta.vocab_size
        )));
    }
    let model = TopicModel::new(params, meta.kind, counts)?;
    Ok(StoredModel { model, vocab })
}

/// Top `n` words of topic `k` by `phi`, ties broken by ascending word id.
pub fn topic_top_words(model: &TopicModel, vocab: &Vocabulary, k: usize, n: usize) -> Result<Vec<(String, f64)>> {
    if k >= model.num_topics() {
        return Err(Error::OutOfRange {
            what: "topic",
            index: k,
            limit: model.num_topics(),
        });
    }
    let mut words: Vec<(u32, f64)> = (0..model.vocab_size() as u32).map(|w| (w, model.phi(k, w))).collect();
    words.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    words.truncate(n);
    Ok(words
        .into_iter()
        .map(|(w, p)| (vocab.token(w).unwrap_or_default().to_string(), p))
        .collect())
}

/// `P(z = k | w) ∝ n_kw + β`.
pub fn word_topic_distribution(model: &TopicModel, w: u32) -> Result<TopicDistribution> {
    if w as usize >= model.vocab_size() {
        return Err(Error::OutOfRange {
            what: "word id",
            index: w as usize,
            limit: model.vocab_size(),
        });
    }
    let beta = model.params().beta;
    TopicDistribution::from_weights(model.counts().row(w).iter().map(|&c| f64::from(c) + beta).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[(&str, u64)]) -> Vocabulary {
        Vocabulary::from_entries(tokens.iter().map(|(t, f)| (t.to_string(), *f)).collect()).unwrap()
    }

    fn model(k: usize, v: usize, alpha: f64, beta: f64, counts: Vec<u32>) -> TopicModel {
        let c = WordTopicCounts::from_word_major(k, v, counts).unwrap();
        TopicModel::new(TopicModelParams::new(k, alpha, beta).unwrap(), ModelKind::Lda, c).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let m = model(3, 4, 0.1 + 0.2, 1.0 / 3.0, vec![1, 0, 5, 2, 2, 0, 0, 7, 1, 0, 0, 0]);
        let v = vocab(&[("a", 6), ("b", 4), ("c", 8), ("d", 0)]);
        save_model(&m, &v, dir.path()).unwrap();
        let loaded = load_model(dir.path()).unwrap();
        assert_eq!(loaded.model, m);
        assert_eq!(loaded.vocab, v);
        assert_eq!(loaded.model.params().alpha.to_bits(), m.params().alpha.to_bits());
        for w in 0..4 {
            for k in 0..3 {
                assert_eq!(loaded.model.phi(k, w).to_bits(), m.phi(k, w).to_bits());
            }
        }
        let wt = fs::read_to_string(dir.path().join(WORD_TOPIC_FILE)).unwrap();
        assert_eq!(wt, "0 0:1 2:5\n1 0:2 1:2\n2 1:7 2:1\n3\n");
    }

    #[test]
    fn tampered_count_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let m = model(2, 2, 0.5, 0.1, vec![3, 1, 0, 2]);
        save_model(&m, &vocab(&[("a", 4), ("b", 2)]), dir.path()).unwrap();
        let p = dir.path().join(WORD_TOPIC_FILE);
        let text = fs::read_to_string(&p).unwrap().replace("0:3", "0:4");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn missing_meta_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_model(dir.path()).unwrap_err();
        assert!(err.to_string().contains(META_FILE), "{err}");
    }

    #[test]
    fn unknown_kind_and_row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let m = model(1, 2, 0.5, 0.1, vec![3, 1]);
        save_model(&m, &vocab(&[("a", 3), ("b", 1)]), dir.path()).unwrap();
        let meta = dir.path().join(META_FILE);
        let text = fs::read_to_string(&meta).unwrap();
        fs::write(&meta, text.replacen("lda", "hdp", 1)).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::UnknownModelKind(_))));
        fs::write(&meta, text.replacen(" 2 ", " 3 ", 1)).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn minimal_model_loads_with_expected_phi() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(META_FILE), "lda 1 2 1.0 0.5 4\n").unwrap();
        fs::write(dir.path().join(WORD_TOPIC_FILE), "0 0:3\n1 0:1\n").unwrap();
        fs::write(dir.path().join(VOCAB_FILE), "0\ta\t3\n1\tb\t1\n").unwrap();
        let s = load_model(dir.path()).unwrap();
        assert_eq!(s.model.phi(0, 0), 3.5 / 5.0);
        assert_eq!(s.model.phi(0, 1), 1.5 / 5.0);
    }

    #[test]
    fn top_words() {
        let m = model(1, 2, 1.0, 0.5, vec![3, 1]);
        let v = vocab(&[("a", 3), ("b", 1)]);
        let top = topic_top_words(&m, &v, 0, 2).unwrap();
        assert_eq!(top, vec![("a".to_string(), 3.5 / 5.0), ("b".to_string(), 1.5 / 5.0)]);
        assert_eq!(topic_top_words(&m, &v, 0, 10).unwrap().len(), 2);
        assert!(topic_top_words(&m, &v, 1, 1).is_err());
    }

    #[test]
    fn top_word_ties_by_id() {
        let m = model(1, 3, 1.0, 0.5, vec![2, 2, 2]);
        let v = vocab(&[("x", 2), ("y", 2), ("z", 2)]);
        let top: Vec<String> = topic_top_words(&m, &v, 0, 3).unwrap().into_iter().map(|t| t.0).collect();
        assert_eq!(top, ["x", "y", "z"]);
    }

    #[test]
    fn word_topic_queries() {
        let m = model(3, 1, 1.0, 0.5, vec![0, 0, 0]);
        assert_eq!(&*word_topic_distribution(&m, 0).unwrap(), &[1.0 / 3.0; 3]);

        let m = model(2, 1, 1.0, 1e-9, vec![9, 1]);
        let p = word_topic_distribution(&m, 0).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-9 && (p[1] - 0.1).abs() < 1e-9);

        let m = model(2, 1, 1.0, 0.5, vec![3, 1]);
        let p = word_topic_distribution(&m, 0).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15);
        assert!(word_topic_distribution(&m, 1).is_err());
    }
}
