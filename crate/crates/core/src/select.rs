//! In-domain data selection: rule filters and Moore-Lewis ranking.
//!
//! The Moore-Lewis score of a sentence is its per-word cross-entropy (nats)
//! under an in-domain model minus that under a general-domain model; lower
//! means more in-domain. Several model pairs ("slots") can be combined by
//! summing each sentence's rank under every slot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::lm::NgramModel;

pub const REASON_ILLEGAL: &str = "illegal_chars";
pub const REASON_WORD_COUNT: &str = "word_count";

/// Rule-based filter. Illegal characters are control characters other than
/// tab, private-use code points, and U+FFFD; the ratio is over code points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub max_illegal_char_ratio: f64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            max_illegal_char_ratio: 0.0,
            min_words: 1,
            max_words: 250,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_illegal_char_ratio) {
            return Err(Error::param("max_illegal_char_ratio", "must lie in [0, 1]"));
        }
        if self.min_words > self.max_words {
            return Err(Error::param("min_words", "exceeds max_words"));
        }
        Ok(())
    }

    /// `None` if the sentence passes, otherwise the first failing rule.
    pub fn check(&self, s: &Sentence) -> Option<&'static str> {
        if illegal_char_ratio(s.as_str()) > self.max_illegal_char_ratio {
            return Some(REASON_ILLEGAL);
        }
        let n = s.token_count();
        if n < self.min_words || n > self.max_words {
            return Some(REASON_WORD_COUNT);
        }
        None
    }
}

pub fn is_illegal_char(c: char) -> bool {
    (c.is_control() && c != '\t')
        || matches!(c, '\u{E000}'..='\u{F8FF}' | '\u{F0000}'..='\u{FFFFD}' | '\u{100000}'..='\u{10FFFD}')
        || c == '\u{FFFD}'
}

pub fn illegal_char_ratio(s: &str) -> f64 {
    let (mut total, mut bad) = (0usize, 0usize);
    for c in s.chars() {
        total += 1;
        bad += is_illegal_char(c) as usize;
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub removed: BTreeMap<String, usize>,
}

fn filter_indices(sentences: &[Sentence], spec: &FilterSpec) -> (Vec<usize>, FilterReport) {
    let mut report = FilterReport {
        input: sentences.len(),
        kept: 0,
        removed: [REASON_ILLEGAL, REASON_WORD_COUNT].iter().map(|r| (r.to_string(), 0)).collect(),
    };
    let verdicts: Vec<Option<&str>> = sentences.par_iter().map(|s| spec.check(s)).collect();
    let mut kept = Vec::with_capacity(sentences.len());
    for (i, v) in verdicts.into_iter().enumerate() {
        match v {
            None => kept.push(i),
            Some(reason) => *report.removed.get_mut(reason).expect("known reason") += 1,
        }
    }
    report.kept = kept.len();
    (kept, report)
}

/// Keeps sentences that pass every rule, in their original order.
pub fn rule_filter(c: &Corpus, spec: &FilterSpec) -> Result<(Corpus, FilterReport)> {
    spec.validate()?;
    let (kept, report) = filter_indices(c.sentences()?, spec);
    Ok((corpus::select_indices(c, &kept), report))
}

fn check_compatible(lm_in: &NgramModel, lm_gen: &NgramModel) -> Result<()> {
    let (a, b) = (lm_in.config(), lm_gen.config());
    if a.order != b.order || a.smoothing != b.smoothing {
        return Err(Error::ModelMismatch(format!(
            "in-domain model is order {} {:?}, general model is order {} {:?}",
            a.order, a.smoothing, b.order, b.smoothing
        )));
    }
    Ok(())
}

/// Cross-entropy difference `H_in(s) - H_gen(s)` in nats per word.
pub fn moore_lewis_score(s: &Sentence, lm_in: &NgramModel, lm_gen: &NgramModel) -> Result<f64> {
    check_compatible(lm_in, lm_gen)?;
    Ok(lm_in.cross_entropy(s) - lm_gen.cross_entropy(s))
}

/// An in-domain / general-domain model pair.
#[derive(Clone, Copy, Debug)]
pub struct Slot<'a> {
    pub name: &'a str,
    pub lm_in: &'a NgramModel,
    pub lm_gen: &'a NgramModel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SelectionMode {
    /// Rule filter, then rank by combined score.
    #[default]
    FilterThenRank,
    /// Rule filter, drop sentences whose score exceeds `max_score` under any
    /// slot, then rank.
    Thresholds { max_score: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    pub index: usize,
    pub sentence: Sentence,
    /// Score under the first slot.
    pub ml_score: f64,
    pub slot_scores: Vec<f64>,
    pub rank_sum: usize,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub selected: Corpus,
    /// Every ranked candidate, best first.
    pub ranked: Vec<ScoredSentence>,
    pub filter: FilterReport,
    pub over_threshold: usize,
}

/// Ranks of `scores` under an ascending stable sort (ties by position).
fn ranks(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut r = vec![0; scores.len()];
    for (rank, i) in order.into_iter().enumerate() {
        r[i] = rank;
    }
    r
}

pub fn select_topk_slots(c: &Corpus, slots: &[Slot<'_>], spec: &FilterSpec, mode: SelectionMode, k: usize) -> Result<Selection> {
    spec.validate()?;
    if slots.is_empty() {
        return Err(Error::param("slots", "at least one model pair is required"));
    }
    for s in slots {
        check_compatible(s.lm_in, s.lm_gen)?;
    }
    let sentences = c.sentences()?;
    let (mut kept, filter) = filter_indices(sentences, spec);

    let score_of = |i: usize| -> Vec<f64> {
        slots
            .iter()
            .map(|slot| slot.lm_in.cross_entropy(&sentences[i]) - slot.lm_gen.cross_entropy(&sentences[i]))
            .collect()
    };
    let mut scores: Vec<Vec<f64>> = kept.par_iter().map(|&i| score_of(i)).collect();

    let mut over_threshold = 0;
    if let SelectionMode::Thresholds { max_score } = mode {
        let before = kept.len();
        let (k2, s2): (Vec<usize>, Vec<Vec<f64>>) = kept
            .into_iter()
            .zip(scores)
            .filter(|(_, s)| s.iter().all(|&x| x <= max_score))
            .unzip();
        over_threshold = before - k2.len();
        kept = k2;
        scores = s2;
    }

    if k > kept.len() {
        return Err(Error::InsufficientData { requested: k, available: kept.len() });
    }

    let mut rank_sum = vec![0usize; kept.len()];
    for slot in 0..slots.len() {
        let column: Vec<f64> = scores.iter().map(|s| s[slot]).collect();
        for (acc, r) in rank_sum.iter_mut().zip(ranks(&column)) {
            *acc += r;
        }
    }
    let mut order: Vec<usize> = (0..kept.len()).collect();
    if slots.len() == 1 {
        order.sort_by(|&a, &b| scores[a][0].total_cmp(&scores[b][0]).then(kept[a].cmp(&kept[b])));
    } else {
        order.sort_by(|&a, &b| rank_sum[a].cmp(&rank_sum[b]).then(kept[a].cmp(&kept[b])));
    }

    let ranked: Vec<ScoredSentence> = order
        .iter()
        .map(|&j| ScoredSentence {
            index: kept[j],
            sentence: sentences[kept[j]].clone(),
            ml_score: scores[j][0],
            slot_scores: scores[j].clone(),
            rank_sum: rank_sum[j],
        })
        .collect();
    let top: Vec<usize> = ranked[..k].iter().map(|r| r.index).collect();
    Ok(Selection {
        selected: corpus::select_indices(c, &top),
        ranked,
        filter,
        over_threshold,
    })
}

/// Filter, rank by Moore-Lewis score and keep the best `k`, best first.
pub fn select_topk(c: &Corpus, lm_in: &NgramModel, lm_gen: &NgramModel, spec: &FilterSpec, k: usize) -> Result<Corpus> {
    let slot = Slot { name: "ngram", lm_in, lm_gen };
    Ok(select_topk_slots(c, &[slot], spec, SelectionMode::FilterThenRank, k)?.selected)
}

/// `<ml_score>\t<rank>\t<sentence>` per line, ranks from 1.
pub fn scored_dump(ranked: &[ScoredSentence]) -> String {
    let mut out = String::new();
    for (rank, r) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{}", r.ml_score, rank + 1, r.sentence);
    }
    out
}

pub fn write_scored_dump(ranked: &[ScoredSentence], path: impl AsRef<Path>) -> Result<()> {
    corpus::write_bytes(path.as_ref(), scored_dump(ranked).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{train_ngram, LmConfig, Smoothing};

    fn mono(lines: &[&str]) -> Corpus {
        Corpus::mono_from_strs(lines).unwrap()
    }

    fn models() -> (NgramModel, NgramModel) {
        let cfg = LmConfig::new(2, Smoothing::KneserNey { discount: 0.75 }).with_min_count(1);
        let a = train_ngram(&mono(&["a1 a2 a3", "a2 a3 a1", "a3 a1 a2"]), cfg).unwrap();
        let g = train_ngram(&mono(&["a1 a2 a3", "b1 b2 b3", "b2 b3 b1", "b3 b1 b2"]), cfg).unwrap();
        (a, g)
    }

    #[test]
    fn control_characters_are_illegal() {
        let c = mono(&["ok line", "bad\u{0} line", "tab\there"]);
        let (out, report) = rule_filter(&c, &FilterSpec::default()).unwrap();
        assert_eq!(out, mono(&["ok line", "tab\there"]));
        assert_eq!(report.removed[REASON_ILLEGAL], 1);
        assert_eq!(report.removed[REASON_WORD_COUNT], 0);
    }

    #[test]
    fn long_sentences_removed() {
        let long = vec!["w"; 300].join(" ");
        let c = mono(&[long.as_str(), "short"]);
        let (out, report) = rule_filter(&c, &FilterSpec::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(report.removed[REASON_WORD_COUNT], 1);
    }

    #[test]
    fn identical_models_score_zero() {
        let (a, _) = models();
        assert_eq!(moore_lewis_score(&Sentence::new("a1 zz").unwrap(), &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_models_rejected() {
        let (a, _) = models();
        let b = train_ngram(&mono(&["x"]), LmConfig::new(3, Smoothing::KneserNey { discount: 0.75 })).unwrap();
        assert!(matches!(moore_lewis_score(&Sentence::new("x").unwrap(), &a, &b), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn topk_prefers_in_domain_and_names_maximum() {
        let (a, g) = models();
        let c = mono(&["b1 b2 b3", "a1 a2 a3", "b3 b1", "a3 a1", "\u{FFFD}"]);
        let out = select_topk(&c, &a, &g, &FilterSpec::default(), 2).unwrap();
        let mut got: Vec<&str> = out.sentences().unwrap().iter().map(Sentence::as_str).collect();
        got.sort_unstable();
        assert_eq!(got, ["a1 a2 a3", "a3 a1"]);
        match select_topk(&c, &a, &g, &FilterSpec::default(), 5) {
            Err(Error::InsufficientData { available, .. }) => assert_eq!(available, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thresholds_mode_drops_high_scores() {
        let (a, g) = models();
        let c = mono(&["b1 b2 b3", "a1 a2 a3"]);
        let slot = Slot { name: "ngram", lm_in: &a, lm_gen: &g };
        let sel = select_topk_slots(&c, &[slot], &FilterSpec::default(), SelectionMode::Thresholds { max_score: 0.0 }, 1).unwrap();
        assert_eq!(sel.over_threshold, 1);
        assert_eq!(sel.selected, mono(&["a1 a2 a3"]));
    }
}
