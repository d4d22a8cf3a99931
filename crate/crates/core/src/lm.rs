//! Word n-gram language models.
//!
//! A trained [`NgramModel`] is a backoff table: for every observed n-gram a
//! conditional log-probability, and for every observed context a log backoff
//! weight. Scoring follows the usual backoff rule
//!
//! ```text
//! log p(w | h) = logprob(h w)                     if h w is listed
//!              = backoff(h) + log p(w | h[1..])   otherwise
//! ```
//!
//! Both smoothing methods are compiled into this form at training time:
//!
//! * interpolated Kneser-Ney with a single absolute discount `D`; lower orders
//!   use continuation counts (n-grams starting with `<s>` keep raw counts) and
//!   the unigram level is interpolated with the uniform distribution, so every
//!   probability is strictly positive;
//! * add-k, where each context receives `k * |V|` pseudo-counts spread in
//!   proportion to the next-lower order. At order 1 that lower order is uniform
//!   and this is plain add-k.
//!
//! The predicted vocabulary `V` is the kept training words plus `<unk>` and
//! `</s>`. All logarithms are natural. Reserved tags such as `<BT>` are
//! dropped from the token stream before counting and scoring.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::text::is_reserved_tag;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Smoothing {
    AddK { k: f64 },
    KneserNey { discount: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub order: usize,
    pub smoothing: Smoothing,
    /// Words seen fewer times than this are mapped to `<unk>`.
    pub min_count: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 5,
            smoothing: Smoothing::KneserNey { discount: 0.75 },
            min_count: 2,
        }
    }
}

impl LmConfig {
    pub fn new(order: usize, smoothing: Smoothing) -> Self {
        LmConfig {
            order,
            smoothing,
            ..LmConfig::default()
        }
    }

    pub fn with_min_count(mut self, min_count: u64) -> Self {
        self.min_count = min_count;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::param("order", "must be at least 1"));
        }
        match self.smoothing {
            Smoothing::AddK { k } if !(k >= 0.0 && k.is_finite()) => {
                Err(Error::param("k", "must be finite and non-negative"))
            }
            Smoothing::KneserNey { discount } if !(discount > 0.0 && discount < 1.0) => {
                Err(Error::param("discount", "must lie strictly between 0 and 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    config: LmConfig,
    vocab: Vec<String>,
    ids: HashMap<String, u32>,
    /// `tables[k - 1]` holds the order-k n-grams.
    tables: Vec<HashMap<Vec<u32>, Entry>>,
}

fn content_tokens(s: &Sentence) -> impl Iterator<Item = &str> {
    s.tokens().filter(|t| !is_reserved_tag(t))
}

impl NgramModel {
    pub fn train(c: &Corpus, config: LmConfig) -> Result<Self> {
        config.validate()?;
        let sentences = c.sentences()?;
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n = config.order;

        let mut word_counts: HashMap<&str, u64> = HashMap::new();
        for s in sentences {
            for t in content_tokens(s) {
                *word_counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<&str> = word_counts
            .iter()
            .filter(|(w, &c)| c >= config.min_count && ![BOS, EOS, UNK].contains(w))
            .map(|(w, _)| *w)
            .collect();
        kept.sort_unstable();
        let vocab: Vec<String> = [BOS, EOS, UNK]
            .into_iter()
            .chain(kept)
            .map(str::to_owned)
            .collect();
        let ids: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();

        // Raw counts of every order-k window ending at each predicted position.
        let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); n];
        let mut seq = Vec::new();
        for s in sentences {
            seq.clear();
            seq.push(BOS_ID);
            seq.extend(content_tokens(s).map(|t| ids.get(t).copied().unwrap_or(UNK_ID)));
            seq.push(EOS_ID);
            for t in 1..seq.len() {
                for k in 1..=n.min(t + 1) {
                    *raw[k - 1].entry(seq[t + 1 - k..=t].to_vec()).or_insert(0) += 1;
                }
            }
        }

        let counts = match config.smoothing {
            Smoothing::KneserNey { .. } => adjusted_counts(raw),
            Smoothing::AddK { .. } => raw,
        };

        let mut model = NgramModel {
            config,
            vocab,
            ids,
            tables: vec![HashMap::new(); n],
        };
        model.build(&counts);
        Ok(model)
    }

    fn predicted_size(&self) -> f64 {
        (self.vocab.len() - 1) as f64
    }

    fn build(&mut self, counts: &[HashMap<Vec<u32>, u64>]) {
        let v = self.predicted_size();
        let smoothing = self.config.smoothing;

        // Unigrams: every predicted word is listed.
        let total: u64 = counts[0].values().sum();
        let distinct = counts[0].values().filter(|&&c| c > 0).count() as f64;
        let total_f = total as f64;
        for id in 1..self.vocab.len() as u32 {
            let c = counts[0].get(&vec![id]).copied().unwrap_or(0) as f64;
            let p = match smoothing {
                Smoothing::KneserNey { discount: d } => {
                    (c - d).max(0.0) / total_f + d * distinct / total_f / v
                }
                Smoothing::AddK { k } => (c + k) / (total_f + k * v),
            };
            self.tables[0].insert(vec![id], Entry { logprob: p.ln(), backoff: 0.0 });
        }

        for k in 2..=self.config.order {
            let mut ctx_stats: HashMap<&[u32], (u64, u64)> = HashMap::new();
            for (g, &c) in &counts[k - 1] {
                let e = ctx_stats.entry(&g[..k - 1]).or_insert((0, 0));
                e.0 += c;
                e.1 += 1;
            }
            let mut entries = Vec::with_capacity(counts[k - 1].len());
            for (g, &c) in &counts[k - 1] {
                let (ctx_total, ctx_distinct) = ctx_stats[&g[..k - 1]];
                let lower = self.lookup(&g[1..k - 1], g[k - 1]).exp();
                let (c, total, distinct) = (c as f64, ctx_total as f64, ctx_distinct as f64);
                let p = match smoothing {
                    Smoothing::KneserNey { discount: d } => (c - d) / total + d * distinct / total * lower,
                    Smoothing::AddK { k } => (c + k * v * lower) / (total + k * v),
                };
                entries.push((g.clone(), p.ln()));
            }
            let backoffs: Vec<(Vec<u32>, f64)> = ctx_stats
                .iter()
                .map(|(h, &(total, distinct))| {
                    let (total, distinct) = (total as f64, distinct as f64);
                    let w = match smoothing {
                        Smoothing::KneserNey { discount: d } => d * distinct / total,
                        Smoothing::AddK { k } => k * v / (total + k * v),
                    };
                    (h.to_vec(), w.ln())
                })
                .collect();
            for (h, bow) in backoffs {
                self.tables[k - 2]
                    .entry(h)
                    .or_insert(Entry { logprob: f64::NEG_INFINITY, backoff: 0.0 })
                    .backoff = bow;
            }
            for (g, lp) in entries {
                self.tables[k - 1].insert(g, Entry { logprob: lp, backoff: 0.0 });
            }
        }
    }

    /// `log p(w | ctx)` by the backoff rule; `ctx` is at most `order - 1` ids.
    fn lookup(&self, ctx: &[u32], w: u32) -> f64 {
        let mut key = Vec::with_capacity(ctx.len() + 1);
        let mut acc = 0.0;
        for start in 0..=ctx.len() {
            let h = &ctx[start..];
            key.clear();
            key.extend_from_slice(h);
            key.push(w);
            if let Some(e) = self.tables[h.len()].get(key.as_slice()) {
                return acc + e.logprob;
            }
            if !h.is_empty() {
                if let Some(e) = self.tables[h.len() - 1].get(h) {
                    acc += e.backoff;
                }
            }
        }
        f64::NEG_INFINITY
    }

    fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    fn sentence_ids(&self, s: &Sentence) -> Vec<u32> {
        let mut seq = vec![BOS_ID];
        seq.extend(content_tokens(s).map(|t| self.id(t)));
        seq.push(EOS_ID);
        seq
    }

    /// Per-position log-probabilities, one per token plus one for `</s>`.
    pub fn token_logprobs(&self, s: &Sentence) -> Vec<f64> {
        let seq = self.sentence_ids(s);
        let hist = self.config.order - 1;
        (1..seq.len())
            .map(|t| self.lookup(&seq[t.saturating_sub(hist)..t], seq[t]))
            .collect()
    }

    /// Natural-log probability of the sentence including `</s>`.
    pub fn logprob(&self, s: &Sentence) -> f64 {
        self.token_logprobs(s).iter().sum()
    }

    /// Number of predicted positions for `s` (tokens plus `</s>`).
    pub fn scored_length(s: &Sentence) -> usize {
        content_tokens(s).count() + 1
    }

    /// Per-word cross-entropy in nats: `-logprob / (tokens + 1)`.
    pub fn cross_entropy(&self, s: &Sentence) -> f64 {
        -self.logprob(s) / Self::scored_length(s) as f64
    }

    /// `log p(word | context)` with string tokens; `context` may include `<s>`.
    pub fn logprob_next(&self, context: &[&str], word: &str) -> f64 {
        let ctx: Vec<u32> = context.iter().map(|t| self.id(t)).collect();
        let hist = self.config.order - 1;
        let start = ctx.len().saturating_sub(hist);
        self.lookup(&ctx[start..], self.id(word))
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Predictable tokens: kept words, `<unk>` and `</s>`.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocab[1..].iter().map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    /// Every context the model saw during training, as token strings.
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = self
            .tables
            .iter()
            .flat_map(|t| t.iter())
            .filter(|(_, e)| e.backoff != 0.0)
            .map(|(g, _)| g.iter().map(|&i| self.vocab[i as usize].as_str()).collect())
            .collect();
        out.sort();
        out
    }

    pub fn ngram_count(&self) -> usize {
        self.tables.iter().map(HashMap::len).sum()
    }

    /// Sorted text listing; the grammar is documented in the repository README.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#lowres-ngram v1");
        let _ = writeln!(out, "order={}", self.config.order);
        match self.config.smoothing {
            Smoothing::KneserNey { discount } => {
                let _ = writeln!(out, "smoothing=kneser_ney discount={discount}");
            }
            Smoothing::AddK { k } => {
                let _ = writeln!(out, "smoothing=add_k k={k}");
            }
        }
        let _ = writeln!(out, "min_count={}", self.config.min_count);
        for (k, table) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "\\{}-grams: {}", k + 1, table.len());
            let mut rows: Vec<(String, &Entry)> = table
                .iter()
                .map(|(g, e)| {
                    let words: Vec<&str> = g.iter().map(|&i| self.vocab[i as usize].as_str()).collect();
                    (words.join(" "), e)
                })
                .collect();
            rows.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            for (g, e) in rows {
                let _ = writeln!(out, "{g}\t{}\t{}", e.logprob, e.backoff);
            }
        }
        out.push_str("\\end\\\n");
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::parse(origin, line, why.to_owned());
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&"#lowres-ngram v1") {
            return Err(bad(1, "missing `#lowres-ngram v1` header"));
        }
        let field = |i: usize, key: &str| -> Result<&str> {
            lines
                .get(i)
                .and_then(|l| l.strip_prefix(key))
                .ok_or_else(|| bad(i + 1, &format!("expected `{key}...`")))
        };
        let order: usize = field(1, "order=")?.parse().map_err(|_| bad(2, "bad order"))?;
        let smoothing_line = field(2, "smoothing=")?;
        let smoothing = if let Some(d) = smoothing_line.strip_prefix("kneser_ney discount=") {
            Smoothing::KneserNey { discount: d.parse().map_err(|_| bad(3, "bad discount"))? }
        } else if let Some(k) = smoothing_line.strip_prefix("add_k k=") {
            Smoothing::AddK { k: k.parse().map_err(|_| bad(3, "bad k"))? }
        } else {
            return Err(bad(3, "unknown smoothing"));
        };
        let min_count: u64 = field(3, "min_count=")?.parse().map_err(|_| bad(4, "bad min_count"))?;
        let config = LmConfig { order, smoothing, min_count };
        config.validate()?;

        let mut raw_tables: Vec<Vec<(Vec<&str>, Entry)>> = Vec::new();
        let mut i = 4;
        for k in 1..=order {
            let header = lines.get(i).ok_or_else(|| bad(i + 1, "truncated model"))?;
            let rest = header
                .strip_prefix(&format!("\\{k}-grams: "))
                .ok_or_else(|| bad(i + 1, "expected section header"))?;
            let count: usize = rest.parse().map_err(|_| bad(i + 1, "bad section count"))?;
            i += 1;
            let mut rows = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.get(i).ok_or_else(|| bad(i + 1, "truncated section"))?;
                let mut cols = line.split('\t');
                let (Some(g), Some(lp), Some(bo), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                    return Err(bad(i + 1, "expected `<ngram>\\t<logprob>\\t<backoff>`"));
                };
                let words: Vec<&str> = g.split(' ').collect();
                if words.len() != k {
                    return Err(bad(i + 1, "n-gram length does not match section"));
                }
                let logprob: f64 = lp.parse().map_err(|_| bad(i + 1, "bad logprob"))?;
                let backoff: f64 = bo.parse().map_err(|_| bad(i + 1, "bad backoff"))?;
                rows.push((words, Entry { logprob, backoff }));
                i += 1;
            }
            raw_tables.push(rows);
        }
        if lines.get(i) != Some(&"\\end\\") {
            return Err(bad(i + 1, "missing \\end\\"));
        }

        let mut words: Vec<&str> = raw_tables[0]
            .iter()
            .map(|(g, _)| g[0])
            .filter(|w| ![BOS, EOS, UNK].contains(w))
            .collect();
        words.sort_unstable();
        let vocab: Vec<String> = [BOS, EOS, UNK].into_iter().chain(words).map(str::to_owned).collect();
        let ids: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let mut tables = Vec::with_capacity(order);
        for rows in raw_tables {
            let mut table = HashMap::with_capacity(rows.len());
            for (g, e) in rows {
                let key = g
                    .iter()
                    .map(|w| ids.get(*w).copied().ok_or_else(|| Error::parse(origin, 0, format!("`{w}` missing from unigrams"))))
                    .collect::<Result<Vec<u32>>>()?;
                table.insert(key, e);
            }
            tables.push(table);
        }
        Ok(NgramModel { config, vocab, ids, tables })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        corpus::write_bytes(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Kneser-Ney count adjustment: below the top order, an n-gram's count is the
/// number of distinct words seen to its left, except for n-grams that start
/// with `<s>`, which have no left context and keep their raw count.
fn adjusted_counts(raw: Vec<HashMap<Vec<u32>, u64>>) -> Vec<HashMap<Vec<u32>, u64>> {
    let n = raw.len();
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        if k == n {
            out.push(raw[k - 1].clone());
            continue;
        }
        let mut left: HashMap<&[u32], u64> = HashMap::new();
        for g in raw[k].keys() {
            *left.entry(&g[1..]).or_insert(0) += 1;
        }
        let adjusted = raw[k - 1]
            .iter()
            .map(|(g, &c)| {
                let a = if g[0] == BOS_ID { c } else { left.get(g.as_slice()).copied().unwrap_or(c) };
                (g.clone(), a)
            })
            .collect();
        out.push(adjusted);
    }
    out
}

pub fn train_ngram(c: &Corpus, config: LmConfig) -> Result<NgramModel> {
    NgramModel::train(c, config)
}

pub fn logprob(m: &NgramModel, s: &Sentence) -> f64 {
    m.logprob(s)
}

/// `exp(-total logprob / total scored length)` over a monolingual corpus.
pub fn perplexity(m: &NgramModel, c: &Corpus) -> Result<f64> {
    let sentences = c.sentences()?;
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (lp, len) = sentences.iter().fold((0.0, 0usize), |(lp, len), s| {
        (lp + m.logprob(s), len + NgramModel::scored_length(s))
    });
    Ok((-lp / len as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(lines: &[&str]) -> Corpus {
        Corpus::mono_from_strs(lines).unwrap()
    }

    fn s(x: &str) -> Sentence {
        Sentence::new(x).unwrap()
    }

    fn assert_normalized(m: &NgramModel) {
        let vocab: Vec<&str> = m.vocabulary().collect();
        let mut contexts = m.observed_contexts();
        contexts.push(Vec::new());
        for ctx in contexts {
            let total: f64 = vocab.iter().map(|w| m.logprob_next(&ctx, w).exp()).sum();
            assert!((total - 1.0).abs() < 1e-9, "context {ctx:?} sums to {total}");
        }
    }

    #[test]
    fn unigram_mle() {
        let m = train_ngram(&mono(&["a a b"]), LmConfig::new(1, Smoothing::AddK { k: 0.0 }).with_min_count(1)).unwrap();
        // counts: a=2, b=1, </s>=1
        let pa = m.logprob_next(&[], "a").exp();
        let pb = m.logprob_next(&[], "b").exp();
        let peos = m.logprob_next(&[], EOS).exp();
        assert!((pa / (1.0 - peos) - 2.0 / 3.0).abs() < 1e-12);
        assert!((pb - 0.25).abs() < 1e-12);
    }

    #[test]
    fn add_one_gives_unk_mass() {
        let m = train_ngram(&mono(&["a b", "b a"]), LmConfig::new(1, Smoothing::AddK { k: 1.0 }).with_min_count(1)).unwrap();
        assert!(m.logprob_next(&[], UNK).exp() > 0.0);
        assert!(m.logprob(&s("zzz")).is_finite());
    }

    #[test]
    fn empty_sentence_is_eos_only() {
        let m = train_ngram(&mono(&["a b c", "a c"]), LmConfig::new(3, Smoothing::KneserNey { discount: 0.75 }).with_min_count(1)).unwrap();
        assert_eq!(m.logprob(&s("")), m.logprob_next(&[BOS], EOS));
    }

    #[test]
    fn kneser_ney_normalizes_every_context() {
        let c = mono(&["the cat sat on the mat", "the dog sat on the log", "a cat and a dog", "the cat sat", "rare words here"]);
        for order in 1..=4 {
            let m = train_ngram(&c, LmConfig::new(order, Smoothing::KneserNey { discount: 0.75 })).unwrap();
            assert_normalized(&m);
        }
    }

    #[test]
    fn add_k_normalizes_every_context() {
        let c = mono(&["the cat sat on the mat", "the dog sat on the log", "a cat and a dog"]);
        for order in 1..=3 {
            let m = train_ngram(&c, LmConfig::new(order, Smoothing::AddK { k: 0.5 }).with_min_count(1)).unwrap();
            assert_normalized(&m);
        }
    }

    #[test]
    fn logprob_decomposes() {
        let c = mono(&["x y z", "y z x", "z"]);
        let m = train_ngram(&c, LmConfig::new(3, Smoothing::KneserNey { discount: 0.75 }).with_min_count(1)).unwrap();
        let sent = s("x z y q");
        let direct = m.logprob_next(&[BOS], "x")
            + m.logprob_next(&[BOS, "x"], "z")
            + m.logprob_next(&["x", "z"], "y")
            + m.logprob_next(&["z", "y"], "q")
            + m.logprob_next(&["y", "q"], EOS);
        assert_eq!(m.logprob(&sent), direct);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(train_ngram(&mono(&[]), LmConfig::default()), Err(Error::EmptyCorpus)));
        assert!(train_ngram(&mono(&["a"]), LmConfig::new(0, Smoothing::AddK { k: 1.0 })).is_err());
        assert!(train_ngram(&mono(&["a"]), LmConfig::new(2, Smoothing::KneserNey { discount: 1.5 })).is_err());
        assert!(perplexity(&train_ngram(&mono(&["a"]), LmConfig::default()).unwrap(), &mono(&[])).is_err());
    }

    #[test]
    fn uniform_perplexity() {
        // a, b, c and </s> each make up a quarter of the training tokens.
        let c = mono(&["a b c", "c b a", "b a c"]);
        let m = train_ngram(&c, LmConfig::new(1, Smoothing::AddK { k: 0.0 }).with_min_count(1)).unwrap();
        assert!((perplexity(&m, &c).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn text_roundtrip() {
        let c = mono(&["the cat sat on the mat", "the dog sat", "<BT> the cat"]);
        for smoothing in [Smoothing::KneserNey { discount: 0.75 }, Smoothing::AddK { k: 0.1 }] {
            let m = train_ngram(&c, LmConfig::new(3, smoothing).with_min_count(1)).unwrap();
            assert!(!m.contains("<BT>"));
            let text = m.to_text();
            let back = NgramModel::from_text(&text, Path::new("m")).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_text(), text);
        }
    }
}
