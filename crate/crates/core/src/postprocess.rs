//! Hypothesis post-processing: de-BPE, de-truecase, detokenize, BT-tag
//! stripping and number repair.
//!
//! Number repair works on spans: maximal runs of ASCII digits joined by `.`,
//! `,`, `:` or by `-`, `–`, `/` with optional surrounding spaces. A
//! hypothesis span whose surface equals some source span is left alone.
//! Otherwise it is replaced by the most similar source span, where similarity
//! is `1 - lev(a, b) / max(|a|, |b|)` over the concatenated digits, provided
//! it is at least [`SIMILARITY_THRESHOLD`]; ties go to the leftmost source
//! span. Before that, the pattern `<span> <word> <span>` is rewritten as one
//! source span when the digit runs of the two hypothesis spans, taken
//! together, are exactly those of that source span (`2006 at 07` →
//! `2006-07`) and neither span is itself a source span.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::text::{detokenize, revert_bpe, truecase, TruecaseMode, TruecaseModel};

pub const SIMILARITY_THRESHOLD: f64 = 0.5;

/// Removes one leading `tag` (and the following space), if present.
pub fn strip_tag(s: &Sentence, tag: &str) -> Sentence {
    let text = s.as_str();
    if text == tag {
        return Sentence::default();
    }
    match text.strip_prefix(tag).and_then(|r| r.strip_prefix(' ')) {
        Some(rest) => Sentence::new_unchecked(rest.to_owned()),
        None => s.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Separator {
    Hyphen,
    Slash,
    Dot,
    Comma,
    Colon,
    Space,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberSpan {
    pub surface: String,
    pub runs: Vec<String>,
    /// `separators[k]` joins `runs[k]` and `runs[k + 1]`.
    pub separators: Vec<Separator>,
    /// Byte offsets into the sentence.
    pub start: usize,
    pub end: usize,
}

impl NumberSpan {
    pub fn digits(&self) -> String {
        self.runs.concat()
    }
}

fn span_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+(?:(?:[.,:]| *[-–/] *)[0-9]+)*").expect("valid regex"))
}

fn digit_run_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+").expect("valid regex"))
}

fn classify(sep: &str) -> Separator {
    let trimmed = sep.trim();
    match trimmed {
        "-" | "–" => Separator::Hyphen,
        "/" => Separator::Slash,
        "." => Separator::Dot,
        "," => Separator::Comma,
        ":" => Separator::Colon,
        _ => Separator::Space,
    }
}

pub fn number_spans(text: &str) -> Vec<NumberSpan> {
    span_regex()
        .find_iter(text)
        .map(|m| {
            let surface = m.as_str();
            let runs: Vec<regex::Match> = digit_run_regex().find_iter(surface).collect();
            let separators = runs.windows(2).map(|w| classify(&surface[w[0].end()..w[1].start()])).collect();
            NumberSpan {
                surface: surface.to_owned(),
                runs: runs.iter().map(|r| r.as_str().to_owned()).collect(),
                separators,
                start: m.start(),
                end: m.end(),
            }
        })
        .collect()
}

fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + (x != y) as usize).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn digit_similarity(a: &str, b: &str) -> f64 {
    let n = a.len().max(b.len());
    if n == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a.as_bytes(), b.as_bytes()) as f64 / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Repair {
    pub segment: usize,
    pub original: String,
    pub replacement: String,
    pub similarity: f64,
}

fn is_bridge_word(between: &str) -> bool {
    let Some(inner) = between.strip_prefix(' ').and_then(|b| b.strip_suffix(' ')) else {
        return false;
    };
    !inner.is_empty() && !inner.contains(|c: char| c.is_whitespace() || c.is_ascii_digit())
}

/// Repairs number spans of `hyp` against the raw source; see the module docs.
pub fn fix_numbers_report(src_raw: &Sentence, hyp: &Sentence, segment: usize) -> (Sentence, Vec<Repair>) {
    let src_spans = number_spans(src_raw.as_str());
    if src_spans.is_empty() {
        return (hyp.clone(), Vec::new());
    }
    let text = hyp.as_str();
    let hyp_spans = number_spans(text);
    let in_source = |s: &NumberSpan| src_spans.iter().any(|x| x.surface == s.surface);

    let mut out = String::with_capacity(text.len());
    let mut repairs = Vec::new();
    let mut cursor = 0;
    let mut k = 0;
    while k < hyp_spans.len() {
        let span = &hyp_spans[k];
        if let Some(next) = hyp_spans.get(k + 1) {
            if is_bridge_word(&text[span.end..next.start]) && !in_source(span) && !in_source(next) {
                let joined: Vec<&String> = span.runs.iter().chain(&next.runs).collect();
                if let Some(target) = src_spans.iter().find(|s| s.runs.iter().eq(joined.iter().copied())) {
                    out.push_str(&text[cursor..span.start]);
                    out.push_str(&target.surface);
                    repairs.push(Repair {
                        segment,
                        original: text[span.start..next.end].to_owned(),
                        replacement: target.surface.clone(),
                        similarity: 1.0,
                    });
                    cursor = next.end;
                    k += 2;
                    continue;
                }
            }
        }
        if !in_source(span) {
            let digits = span.digits();
            let mut best: Option<(&NumberSpan, f64)> = None;
            for s in &src_spans {
                let sim = digit_similarity(&digits, &s.digits());
                if best.map_or(true, |(_, b)| sim > b) {
                    best = Some((s, sim));
                }
            }
            if let Some((s, sim)) = best.filter(|(_, sim)| *sim >= SIMILARITY_THRESHOLD) {
                out.push_str(&text[cursor..span.start]);
                out.push_str(&s.surface);
                repairs.push(Repair {
                    segment,
                    original: span.surface.clone(),
                    replacement: s.surface.clone(),
                    similarity: sim,
                });
                cursor = span.end;
            }
        }
        k += 1;
    }
    out.push_str(&text[cursor..]);
    (Sentence::new_unchecked(out), repairs)
}

pub fn fix_numbers(src_raw: &Sentence, hyp: &Sentence) -> Sentence {
    fix_numbers_report(src_raw, hyp, 0).0
}

/// Every intermediate of [`postprocess_chain`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub input: Sentence,
    pub debpe: Sentence,
    pub detruecased: Sentence,
    pub detokenized: Sentence,
    pub output: Sentence,
}

/// `revert_bpe` → truecase revert → detokenize → `fix_numbers`.
pub fn postprocess_chain(src_raw: &Sentence, hyp_bpe: &Sentence, tc: &TruecaseModel, marker: &str) -> ChainTrace {
    let debpe = revert_bpe(hyp_bpe, marker);
    let detruecased = truecase(&debpe, tc, TruecaseMode::Revert).sentence;
    let detokenized = detokenize(&detruecased);
    let output = fix_numbers(src_raw, &detokenized);
    ChainTrace {
        input: hyp_bpe.clone(),
        debpe,
        detruecased,
        detokenized,
        output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Sentence {
        Sentence::new(x).unwrap()
    }

    #[test]
    fn strip() {
        assert_eq!(strip_tag(&s("<BT> habari"), "<BT>").as_str(), "habari");
        assert_eq!(strip_tag(&s("habari"), "<BT>").as_str(), "habari");
        assert_eq!(strip_tag(&s("<BT>"), "<BT>").as_str(), "");
        assert_eq!(strip_tag(&s("<BT>x"), "<BT>").as_str(), "<BT>x");
    }

    #[test]
    fn spans() {
        let sp = number_spans("in 2006-07, 3.5 and 12 / 4 then 7 - 8");
        let surfaces: Vec<&str> = sp.iter().map(|x| x.surface.as_str()).collect();
        assert_eq!(surfaces, ["2006-07", "3.5", "12 / 4", "7 - 8"]);
        assert_eq!(sp[0].separators, [Separator::Hyphen]);
        assert_eq!(sp[2].runs, ["12", "4"]);
    }

    #[test]
    fn date_range_repair() {
        let src = s("Msimu uliopita wa Siltala kwenye ligi ilikuwa 2006-07");
        let hyp = s("Siltala's previous season in the league was 2006 at 07");
        let (out, rep) = fix_numbers_report(&src, &hyp, 3);
        assert_eq!(out.as_str(), "Siltala's previous season in the league was 2006-07");
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].original, "2006 at 07");
    }

    #[test]
    fn untouched_cases() {
        assert_eq!(fix_numbers(&s("born 1999"), &s("born 1999")).as_str(), "born 1999");
        assert_eq!(fix_numbers(&s("born 1999"), &s("no digits")).as_str(), "no digits");
        assert_eq!(fix_numbers(&s("no numbers"), &s("year 12")).as_str(), "year 12");
        assert_eq!(fix_numbers(&s("x 1999"), &s("x 42")).as_str(), "x 42");
    }

    #[test]
    fn nearest_replacement() {
        assert_eq!(fix_numbers(&s("in 1999 and 2000"), &s("in 1999 and 2001")).as_str(), "in 1999 and 2000");
        assert_eq!(digit_similarity("2001", "2000"), 0.75);
    }

    #[test]
    fn chain() {
        let tc = TruecaseModel::default();
        let t = postprocess_chain(&s("ilikuwa 2006-07"), &s("2006 -@@ 07"), &tc, "@@");
        assert_eq!(t.debpe.as_str(), "2006 -07");
        assert_eq!(t.output.as_str(), "2006-07");
        let clean = postprocess_chain(&s("mwaka 1999"), &s("in 1999 ."), &tc, "@@");
        assert_eq!(clean.output.as_str(), "in 1999.");
    }
}
