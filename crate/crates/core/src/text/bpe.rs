//! Byte-pair encoding over characters within whitespace tokens.
//!
//! End of word is implicit: every non-final piece of a word carries the
//! continuation marker (`@@` by default), so reverting is a plain deletion of
//! `"@@ "`. Training greedily merges the most frequent adjacent symbol pair;
//! ties go to the lexicographically smallest `(left, right)` pair.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{self, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::text::is_reserved_tag;

pub const DEFAULT_MERGES: usize = 32_000;
pub const DEFAULT_MARKER: &str = "@@";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    marker: String,
    ranks: HashMap<String, usize>,
}

fn rank_key(left: &str, right: &str) -> String {
    format!("{left} {right}")
}

impl BpeModel {
    pub fn new(merges: Vec<(String, String)>, marker: impl Into<String>) -> Result<Self> {
        let marker = marker.into();
        if marker.is_empty() || marker.contains(char::is_whitespace) {
            return Err(Error::param("marker", "must be non-empty and contain no whitespace"));
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, (l, r)) in merges.iter().enumerate() {
            if l.is_empty() || r.is_empty() || l.contains(char::is_whitespace) || r.contains(char::is_whitespace) {
                return Err(Error::param("merges", format!("malformed pair at rank {i}")));
            }
            if ranks.insert(rank_key(l, r), i).is_some() {
                return Err(Error::param("merges", format!("duplicate pair `{l} {r}`")));
            }
        }
        Ok(BpeModel { merges, marker, ranks })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn merge_count(&self) -> usize {
        self.merges.len()
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Splits one word into subword pieces (without markers).
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&rank_key(&w[0], &w[1])).copied())
                .min();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == l && &symbols[i + 1] == r {
                    merged.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Segments tokenized text. Reserved tags pass through untouched.
    pub fn apply(&self, s: &Sentence) -> Sentence {
        let mut pieces: Vec<String> = Vec::new();
        for tok in s.tokens() {
            if is_reserved_tag(tok) {
                pieces.push(tok.to_owned());
                continue;
            }
            let segs = self.segment_word(tok);
            let last = segs.len() - 1;
            for (i, seg) in segs.into_iter().enumerate() {
                if i < last {
                    pieces.push(seg + &self.marker);
                } else {
                    pieces.push(seg);
                }
            }
        }
        Sentence::from_tokens(pieces)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#bpe v1 merges={} marker={}\n", self.merges.len(), self.marker);
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l} {r}");
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let mut fields = header.split(' ');
        if fields.next() != Some("#bpe") || fields.next() != Some("v1") {
            return Err(Error::parse(origin, 1, "expected `#bpe v1 merges=<n> marker=<m>`"));
        }
        let n: usize = fields
            .next()
            .and_then(|f| f.strip_prefix("merges="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(origin, 1, "bad merges field"))?;
        let marker = fields
            .next()
            .and_then(|f| f.strip_prefix("marker="))
            .ok_or_else(|| Error::parse(origin, 1, "bad marker field"))?;
        let merges = lines
            .enumerate()
            .map(|(i, line)| match line.split_once(' ') {
                Some((l, r)) if !l.is_empty() && !r.is_empty() && !r.contains(' ') => Ok((l.to_owned(), r.to_owned())),
                _ => Err(Error::parse(origin, i + 2, "expected `<left> <right>`")),
            })
            .collect::<Result<Vec<_>>>()?;
        if merges.len() != n {
            return Err(Error::parse(origin, 1, format!("header says {n} merges, file has {}", merges.len())));
        }
        BpeModel::new(merges, marker)
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

/// Deletes every `marker + " "`.
pub fn revert_bpe(s: &Sentence, marker: &str) -> Sentence {
    Sentence::new_unchecked(s.as_str().replace(&format!("{marker} "), ""))
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Trainer {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    counts: HashMap<(u32, u32), u64>,
    occurs: HashMap<(u32, u32), HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl Trainer {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_owned());
        self.ids.insert(s.to_owned(), id);
        id
    }

    fn push(&mut self, pair: (u32, u32)) {
        let count = self.counts.get(&pair).copied().unwrap_or(0);
        if count > 0 {
            self.heap.push(Candidate {
                count,
                left: self.symbols[pair.0 as usize].clone(),
                right: self.symbols[pair.1 as usize].clone(),
                pair,
            });
        }
    }

    fn add_word_pairs(&mut self, w: usize, sign: bool, touched: &mut HashSet<(u32, u32)>) {
        let (syms, freq) = &self.words[w];
        for win in syms.windows(2) {
            let pair = (win[0], win[1]);
            let c = self.counts.entry(pair).or_insert(0);
            if sign {
                *c += freq;
                self.occurs.entry(pair).or_default().insert(w);
            } else {
                *c -= freq;
            }
            touched.insert(pair);
        }
    }

    fn best(&mut self) -> Option<(u32, u32)> {
        while let Some(top) = self.heap.pop() {
            if self.counts.get(&top.pair).copied() == Some(top.count) && top.count > 0 {
                return Some(top.pair);
            }
        }
        None
    }

    fn merge(&mut self, pair: (u32, u32)) {
        let merged = format!("{}{}", self.symbols[pair.0 as usize], self.symbols[pair.1 as usize]);
        let new_id = self.intern(&merged);
        let mut affected: Vec<usize> = self.occurs.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        let mut touched = HashSet::new();
        for w in affected {
            let syms = &self.words[w].0;
            if !syms.windows(2).any(|win| (win[0], win[1]) == pair) {
                continue;
            }
            self.add_word_pairs(w, false, &mut touched);
            let syms = &self.words[w].0;
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            self.words[w].0 = out;
            self.add_word_pairs(w, true, &mut touched);
        }
        let mut touched: Vec<_> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            self.push(p);
        }
    }
}

fn learn_from_counts(word_counts: HashMap<&str, u64>, merges: usize) -> Result<BpeModel> {
    if merges == 0 {
        return Err(Error::param("merges", "must be at least 1"));
    }
    if word_counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut words: Vec<(&str, u64)> = word_counts.into_iter().collect();
    words.sort_unstable();
    let mut t = Trainer {
        symbols: Vec::new(),
        ids: HashMap::new(),
        words: Vec::with_capacity(words.len()),
        counts: HashMap::new(),
        occurs: HashMap::new(),
        heap: BinaryHeap::new(),
    };
    for (w, f) in words {
        let syms = w.chars().map(|c| t.intern(c.encode_utf8(&mut [0; 4]))).collect();
        t.words.push((syms, f));
    }
    let mut touched = HashSet::new();
    for w in 0..t.words.len() {
        t.add_word_pairs(w, true, &mut touched);
    }
    let mut touched: Vec<_> = touched.into_iter().collect();
    touched.sort_unstable();
    for p in touched {
        t.push(p);
    }
    let mut learned = Vec::new();
    while learned.len() < merges {
        let Some(pair) = t.best() else { break };
        learned.push((t.symbols[pair.0 as usize].clone(), t.symbols[pair.1 as usize].clone()));
        t.merge(pair);
    }
    BpeModel::new(learned, DEFAULT_MARKER)
}

fn count_words<'a>(corpora: &[&'a Corpus], counts: &mut HashMap<&'a str, u64>) {
    for c in corpora {
        for s in c.all_sentences() {
            for tok in s.tokens().filter(|t| !is_reserved_tag(t)) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
}

/// Learns up to `merges` merge operations. Fewer are returned when the corpus
/// runs out of pairs; compare [`BpeModel::merge_count`] with the request.
pub fn learn_bpe(c: &Corpus, merges: usize) -> Result<BpeModel> {
    learn_bpe_joint(&[c], merges)
}

/// One shared merge table learned over several corpora (e.g. both languages).
pub fn learn_bpe_joint(corpora: &[&Corpus], merges: usize) -> Result<BpeModel> {
    let mut counts = HashMap::new();
    count_words(corpora, &mut counts);
    learn_from_counts(counts, merges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Sentence {
        Sentence::new(x).unwrap()
    }

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn first_merge_low_lower() {
        // pair counts: (l,o)=3, (o,w)=3, (w,e)=1, (e,r)=1; tie broken lexicographically
        let c = Corpus::mono_from_strs(&["low low lower"]).unwrap();
        let m = learn_bpe(&c, 1).unwrap();
        assert_eq!(m.merges(), &pairs(&[("l", "o")])[..]);
    }

    #[test]
    fn saturates_when_pairs_run_out() {
        let c = Corpus::mono_from_strs(&["ab ab"]).unwrap();
        let m = learn_bpe(&c, 10).unwrap();
        assert_eq!(m.merge_count(), 1);
    }

    #[test]
    fn rejects_empty_and_zero() {
        assert!(matches!(learn_bpe(&Corpus::mono_from_strs(&[""]).unwrap(), 5), Err(Error::EmptyCorpus)));
        assert!(learn_bpe(&Corpus::mono_from_strs(&["a b"]).unwrap(), 0).is_err());
    }

    #[test]
    fn digit_hyphen_example() {
        let m = BpeModel::new(pairs(&[("2", "0"), ("20", "0"), ("200", "6"), ("0", "7")]), "@@").unwrap();
        assert_eq!(m.apply(&s("2006 -07")).as_str(), "2006 -@@ 07");
        assert_eq!(m.apply(&s("2006 - 07")).as_str(), "2006 - 07");
        assert_eq!(revert_bpe(&m.apply(&s("2006 -07")), "@@").as_str(), "2006 -07");
    }

    #[test]
    fn known_words_unchanged_and_tags_reserved() {
        let c = Corpus::mono_from_strs(&["hello world", "hello"]).unwrap();
        let m = learn_bpe(&c, 100).unwrap();
        assert_eq!(m.apply(&s("hello world")).as_str(), "hello world");
        assert_eq!(m.apply(&s("<BT> hello")).as_str(), "<BT> hello");
        assert!(m.merges().iter().all(|(l, r)| !l.contains('<') && !r.contains('<')));
    }

    #[test]
    fn file_roundtrip() {
        let c = Corpus::mono_from_strs(&["the cat sat on the mat", "the hat"]).unwrap();
        let m = learn_bpe(&c, 20).unwrap();
        let text = m.to_text();
        assert!(text.starts_with(&format!("#bpe v1 merges={} marker=@@\n", m.merge_count())));
        assert_eq!(BpeModel::from_text(&text, Path::new("x")).unwrap(), m);
        assert!(BpeModel::from_text("#bpe v1 merges=2 marker=@@\na b\n", Path::new("x")).is_err());
    }

    #[test]
    fn duplicate_merges_rejected() {
        assert!(BpeModel::new(pairs(&[("a", "b"), ("a", "b")]), "@@").is_err());
    }
}
