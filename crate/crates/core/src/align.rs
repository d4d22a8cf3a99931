//! IBM Model 1 and Model 2 word alignment trained by EM.
//!
//! The model is `p(target | source)`: lexical probabilities `t(f | e)` for
//! target word `f` given source word `e`, with a NULL source word at position
//! 0. Model 2 adds a distortion table `a(i | j, l, m)` over source positions
//! `i` (0 = NULL) for target position `j`, source length `l` and target
//! length `m`; positions and lengths above [`DISTORTION_CAP`] share the cap
//! bucket and rows are renormalized over the actual sentence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, Sentence, SentencePair};
use crate::error::{Error, Result};

pub const NULL_WORD: &str = "<null>";
pub const PROB_FLOOR: f64 = 1e-12;
pub const DISTORTION_CAP: usize = 100;

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ibm1")]
    Ibm1,
    #[serde(rename = "ibm2")]
    Ibm2,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "ibm1" => Ok(ModelKind::Ibm1),
            "2" | "ibm2" => Ok(ModelKind::Ibm2),
            _ => Err(Error::param("model", format!("unknown model `{s}` (ibm1, ibm2)"))),
        }
    }
}

type DistKey = (u16, u16, u16, u16);

fn dist_key(i: usize, j: usize, l: usize, m: usize) -> DistKey {
    let c = |x: usize| x.min(DISTORTION_CAP) as u16;
    (c(i), c(j), c(l), c(m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    kind: ModelKind,
    iterations: usize,
    /// Index 0 is the NULL word.
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    /// Compressed rows: targets `cols[row_start[e]..row_start[e + 1]]` with `probs` alongside.
    row_start: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
    distortion: Vec<(DistKey, f64)>,
    log_likelihood: Vec<f64>,
    #[serde(skip)]
    index: Option<Index>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Index {
    src: HashMap<String, u32>,
    tgt: HashMap<String, u32>,
    distortion: HashMap<DistKey, f64>,
}

struct IndexedPair {
    l: usize,
    m: usize,
    /// `links[j * (l + 1) + i]` is the slot of `t(f_j | e_i)`.
    links: Vec<u32>,
}

impl AlignmentModel {
    fn build_index(&mut self) {
        self.index = Some(Index {
            src: self.src_vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect(),
            tgt: self.tgt_vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect(),
            distortion: self.distortion.iter().copied().collect(),
        });
    }

    fn idx(&self) -> &Index {
        self.index.as_ref().expect("index built on construction")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Training log-likelihood before each iteration and after the last one
    /// (`iterations + 1` values, natural log).
    pub fn log_likelihood(&self) -> &[f64] {
        &self.log_likelihood
    }

    fn slot(&self, e: u32, f: u32) -> Option<usize> {
        let (lo, hi) = (self.row_start[e as usize], self.row_start[e as usize + 1]);
        self.cols[lo..hi].binary_search(&f).ok().map(|k| lo + k)
    }

    fn t_ids(&self, e: Option<u32>, f: Option<u32>) -> f64 {
        match (e, f) {
            (Some(e), Some(f)) => self.slot(e, f).map_or(0.0, |k| self.probs[k]),
            _ => 0.0,
        }
    }

    /// `t(f | e)` without flooring; `e = "<null>"` addresses the NULL word.
    pub fn lexical(&self, e: &str, f: &str) -> f64 {
        self.t_ids(self.idx().src.get(e).copied(), self.idx().tgt.get(f).copied())
    }

    /// Source vocabulary including the NULL word.
    pub fn source_words(&self) -> &[String] {
        &self.src_vocab
    }

    /// `(target, probability)` pairs of one lexical row, by target id.
    pub fn row(&self, e: &str) -> Vec<(&str, f64)> {
        let Some(&e) = self.idx().src.get(e) else { return Vec::new() };
        let (lo, hi) = (self.row_start[e as usize], self.row_start[e as usize + 1]);
        (lo..hi).map(|k| (self.tgt_vocab[self.cols[k] as usize].as_str(), self.probs[k])).collect()
    }

    /// Most probable target for `e`; ties go to the smallest string.
    pub fn best_translation(&self, e: &str) -> Option<&str> {
        self.row(e)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(w, _)| w)
    }

    /// `a(i | j, l, m)` for every `i` in `0..=l`, with `j` 1-based.
    fn distortion_row(&self, j: usize, l: usize, m: usize) -> Vec<f64> {
        if self.kind == ModelKind::Ibm1 {
            return vec![1.0 / (l + 1) as f64; l + 1];
        }
        let d = &self.idx().distortion;
        if !d.contains_key(&dist_key(0, j, l, m)) {
            return vec![1.0 / (l + 1) as f64; l + 1];
        }
        let mut row: Vec<f64> = (0..=l).map(|i| d.get(&dist_key(i, j, l, m)).copied().unwrap_or(0.0)).collect();
        let z: f64 = row.iter().sum();
        if z > 0.0 {
            row.iter_mut().for_each(|x| *x /= z);
        } else {
            row.fill(1.0 / (l + 1) as f64);
        }
        row
    }

    pub fn distortion(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        if i > l {
            return 0.0;
        }
        self.distortion_row(j, l, m)[i]
    }

    fn sentence_ids(&self, p: &SentencePair) -> (Vec<Option<u32>>, Vec<Option<u32>>) {
        let idx = self.idx();
        let src = std::iter::once(Some(0)).chain(p.src.tokens().map(|w| idx.src.get(w).copied())).collect();
        let tgt = p.tgt.tokens().map(|w| idx.tgt.get(w).copied()).collect();
        (src, tgt)
    }

    /// Per target position (1-based order), the best source position; 0 = NULL.
    /// Ties go to the smallest index.
    pub fn viterbi_align(&self, p: &SentencePair) -> Vec<usize> {
        let (src, tgt) = self.sentence_ids(p);
        let (l, m) = (src.len() - 1, tgt.len());
        (0..m)
            .map(|j| {
                let d = self.distortion_row(j + 1, l, m);
                let mut best = (0usize, f64::NEG_INFINITY);
                for (i, e) in src.iter().enumerate() {
                    let score = self.t_ids(*e, tgt[j]).max(PROB_FLOOR) * d[i];
                    if score > best.1 {
                        best = (i, score);
                    }
                }
                best.0
            })
            .collect()
    }

    /// `(1 / m) * log p(target | source)`, summing over alignments, with
    /// lexical probabilities floored at [`PROB_FLOOR`]. 0 for an empty target.
    pub fn score_pair(&self, p: &SentencePair) -> f64 {
        let (src, tgt) = self.sentence_ids(p);
        let (l, m) = (src.len() - 1, tgt.len());
        if m == 0 {
            return 0.0;
        }
        let total: f64 = (0..m)
            .map(|j| {
                let d = self.distortion_row(j + 1, l, m);
                src.iter()
                    .enumerate()
                    .map(|(i, e)| self.t_ids(*e, tgt[j]).max(PROB_FLOOR) * d[i])
                    .sum::<f64>()
                    .ln()
            })
            .sum();
        total / m as f64
    }

    /// Mean `-log2 t(f_j | e_{a_j})` over the target tokens of one pair
    /// under its Viterbi alignment, or `None` for an empty target.
    pub fn pair_complexity(&self, p: &SentencePair) -> Option<f64> {
        let (src, tgt) = self.sentence_ids(p);
        if tgt.is_empty() {
            return None;
        }
        let a = self.viterbi_align(p);
        let sum: f64 = a
            .iter()
            .zip(&tgt)
            .map(|(&i, &f)| -self.t_ids(src[i], f).max(PROB_FLOOR).log2())
            .sum();
        Some(sum / tgt.len() as f64)
    }

    /// `<src>\t<tgt>\t<prob>` sorted by source then target.
    pub fn lexical_dump(&self) -> String {
        let mut rows: Vec<(&str, &str, f64)> = Vec::with_capacity(self.probs.len());
        for (e, w) in self.src_vocab.iter().enumerate() {
            for k in self.row_start[e]..self.row_start[e + 1] {
                rows.push((w, &self.tgt_vocab[self.cols[k] as usize], self.probs[k]));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = String::new();
        for (e, f, p) in rows {
            let _ = writeln!(out, "{e}\t{f}\t{p}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: AlignmentModel = serde_json::from_str(text)?;
        if m.row_start.len() != m.src_vocab.len() + 1 || m.cols.len() != m.probs.len() {
            return Err(Error::param("model", "inconsistent lexical table"));
        }
        m.build_index();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        corpus::write_bytes(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Pharaoh-style `src-tgt` pairs (0-based), NULL links omitted.
pub fn pharaoh(alignment: &[usize]) -> String {
    let links: Vec<String> = alignment
        .iter()
        .enumerate()
        .filter(|(_, &i)| i > 0)
        .map(|(j, &i)| format!("{}-{}", i - 1, j))
        .collect();
    links.join(" ")
}

struct Trainer {
    model: AlignmentModel,
    pairs: Vec<IndexedPair>,
}

impl Trainer {
    fn new(c: &Corpus, kind: ModelKind) -> Result<Self> {
        let pairs = c.pairs()?;
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let src_words: BTreeSet<&str> = pairs.iter().flat_map(|p| p.src.tokens()).collect();
        let tgt_words: BTreeSet<&str> = pairs.iter().flat_map(|p| p.tgt.tokens()).collect();
        let src_vocab: Vec<String> = std::iter::once(NULL_WORD)
            .chain(src_words.into_iter().filter(|w| *w != NULL_WORD))
            .map(str::to_owned)
            .collect();
        let tgt_vocab: Vec<String> = tgt_words.into_iter().map(str::to_owned).collect();
        let src_ids: HashMap<&str, u32> = src_vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        let tgt_ids: HashMap<&str, u32> = tgt_vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();

        let ids: Vec<(Vec<u32>, Vec<u32>)> = pairs
            .iter()
            .map(|p| {
                let s = std::iter::once(0).chain(p.src.tokens().map(|w| src_ids[w])).collect();
                let t = p.tgt.tokens().map(|w| tgt_ids[w]).collect();
                (s, t)
            })
            .collect();

        let mut cooc: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); src_vocab.len()];
        for (s, t) in &ids {
            for &e in s {
                cooc[e as usize].extend(t.iter().copied());
            }
        }
        let mut row_start = Vec::with_capacity(src_vocab.len() + 1);
        let mut cols = Vec::new();
        let mut probs = Vec::new();
        for row in &cooc {
            row_start.push(cols.len());
            let u = 1.0 / row.len().max(1) as f64;
            for &f in row {
                cols.push(f);
                probs.push(u);
            }
        }
        row_start.push(cols.len());

        let mut model = AlignmentModel {
            kind,
            iterations: 0,
            src_vocab,
            tgt_vocab,
            row_start,
            cols,
            probs,
            distortion: Vec::new(),
            log_likelihood: Vec::new(),
            index: None,
        };
        model.build_index();
        let indexed = ids
            .iter()
            .map(|(s, t)| {
                let (l, m) = (s.len() - 1, t.len());
                let mut links = Vec::with_capacity((l + 1) * m);
                for &f in t {
                    for &e in s {
                        links.push(model.slot(e, f).expect("co-occurring pair") as u32);
                    }
                }
                IndexedPair { l, m, links }
            })
            .collect();
        Ok(Trainer { model, pairs: indexed })
    }

    /// One E-step: returns the log-likelihood of the current parameters and,
    /// per chunk in corpus order, the posterior of every link.
    fn expect(&self, kind: ModelKind) -> (f64, Vec<Vec<f64>>) {
        let model = &self.model;
        let chunks: Vec<(f64, Vec<f64>)> = self
            .pairs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut ll = 0.0;
                let mut post = Vec::with_capacity(chunk.iter().map(|p| p.links.len()).sum());
                for p in chunk {
                    let w = p.l + 1;
                    for j in 0..p.m {
                        let d = match kind {
                            ModelKind::Ibm1 => vec![1.0 / w as f64; w],
                            ModelKind::Ibm2 => model.distortion_row(j + 1, p.l, p.m),
                        };
                        let start = post.len();
                        let mut z = 0.0;
                        for i in 0..w {
                            let x = model.probs[p.links[j * w + i] as usize] * d[i];
                            post.push(x);
                            z += x;
                        }
                        ll += z.ln();
                        post[start..].iter_mut().for_each(|x| *x /= z);
                    }
                }
                (ll, post)
            })
            .collect();
        let ll = chunks.iter().map(|c| c.0).sum();
        (ll, chunks.into_iter().map(|c| c.1).collect())
    }

    fn log_likelihood(&self, kind: ModelKind) -> f64 {
        self.expect(kind).0
    }

    fn iterate(&mut self, kind: ModelKind) -> f64 {
        let (ll, posts) = self.expect(kind);
        let mut counts = vec![0.0; self.model.probs.len()];
        let mut dcounts: BTreeMap<DistKey, f64> = BTreeMap::new();
        let mut pair_iter = self.pairs.iter();
        for chunk_post in posts {
            let mut offset = 0;
            while offset < chunk_post.len() {
                let p = pair_iter.next().expect("posteriors match pairs");
                let w = p.l + 1;
                for j in 0..p.m {
                    for i in 0..w {
                        let x = chunk_post[offset + j * w + i];
                        counts[p.links[j * w + i] as usize] += x;
                        if kind == ModelKind::Ibm2 {
                            *dcounts.entry(dist_key(i, j + 1, p.l, p.m)).or_insert(0.0) += x;
                        }
                    }
                }
                offset += p.links.len();
            }
        }
        let m = &mut self.model;
        for e in 0..m.src_vocab.len() {
            let (lo, hi) = (m.row_start[e], m.row_start[e + 1]);
            let z: f64 = counts[lo..hi].iter().sum();
            if z > 0.0 {
                for k in lo..hi {
                    m.probs[k] = counts[k] / z;
                }
            }
        }
        if kind == ModelKind::Ibm2 {
            let mut z: HashMap<(u16, u16, u16), f64> = HashMap::new();
            for (&(_, j, l, mm), &c) in &dcounts {
                *z.entry((j, l, mm)).or_insert(0.0) += c;
            }
            m.distortion = dcounts
                .into_iter()
                .map(|(k, c)| (k, c / z[&(k.1, k.2, k.3)]))
                .collect();
            m.build_index();
        }
        ll
    }
}

/// Trains by EM. Model 2 first runs `iterations` rounds of Model 1, then
/// `iterations` rounds of Model 2 starting from uniform distortion; the
/// recorded log-likelihood covers the Model 2 rounds.
pub fn train_ibm(c: &Corpus, kind: ModelKind, iterations: usize) -> Result<AlignmentModel> {
    let mut trainer = Trainer::new(c, kind)?;
    let mut history = Vec::with_capacity(iterations + 1);
    if kind == ModelKind::Ibm2 {
        for _ in 0..iterations {
            trainer.iterate(ModelKind::Ibm1);
        }
    }
    for _ in 0..iterations {
        history.push(trainer.iterate(kind));
    }
    history.push(trainer.log_likelihood(kind));
    trainer.model.iterations = iterations;
    trainer.model.log_likelihood = history;
    Ok(trainer.model)
}

pub fn viterbi_align(m: &AlignmentModel, p: &SentencePair) -> Vec<usize> {
    m.viterbi_align(p)
}

pub fn score_pair(m: &AlignmentModel, p: &SentencePair) -> f64 {
    m.score_pair(p)
}

/// Mean over pairs with a non-empty target of [`AlignmentModel::pair_complexity`].
pub fn corpus_complexity(m: &AlignmentModel, c: &Corpus) -> Result<f64> {
    let values: Vec<f64> = c.pairs()?.par_iter().filter_map(|p| m.pair_complexity(p)).collect();
    if values.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Word-by-word translation with the most probable target of each source
/// word; unknown words pass through.
pub fn dictionary_translate(m: &AlignmentModel, s: &Sentence) -> Sentence {
    Sentence::from_tokens(s.tokens().map(|w| m.best_translation(w).unwrap_or(w)))
}
