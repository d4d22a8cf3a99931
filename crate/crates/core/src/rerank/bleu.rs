use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and hypothesis n-gram totals for orders 1..=4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NgramStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl NgramStats {
    pub fn compute(hyp: &Sentence, reference: &Sentence) -> Self {
        let h: Vec<&str> = hyp.tokens().collect();
        let r: Vec<&str> = reference.tokens().collect();
        let mut stats = NgramStats {
            hyp_len: h.len() as u64,
            ref_len: r.len() as u64,
            ..NgramStats::default()
        };
        for n in 1..=MAX_ORDER {
            if h.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in r.windows(n) {
                *ref_counts.entry(g).or_insert(0) += 1;
            }
            let mut hyp_counts: HashMap<&[&str], u64> = HashMap::new();
            for g in h.windows(n) {
                *hyp_counts.entry(g).or_insert(0) += 1;
            }
            stats.totals[n - 1] = (h.len() + 1 - n) as u64;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    fn add(&mut self, o: &NgramStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn brevity_penalty(c: u64, r: u64) -> f64 {
    if c >= r {
        1.0
    } else if c == 0 {
        0.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

/// Smoothed sentence-level BLEU on the 0-100 scale.
///
/// Unigram precision is `m1 / t1`; for n > 1 it is `(m_n + 1) / (t_n + 1)`.
/// An empty hypothesis scores 0 against a non-empty reference and 100
/// against an empty one.
pub fn sentence_bleu(hyp: &Sentence, reference: &Sentence) -> f64 {
    let s = NgramStats::compute(hyp, reference);
    if s.hyp_len == 0 {
        return if s.ref_len == 0 { 100.0 } else { 0.0 };
    }
    if s.matches[0] == 0 {
        return 0.0;
    }
    let mut log_sum = (s.matches[0] as f64 / s.totals[0] as f64).ln();
    for n in 1..MAX_ORDER {
        log_sum += ((s.matches[n] + 1) as f64 / (s.totals[n] + 1) as f64).ln();
    }
    100.0 * brevity_penalty(s.hyp_len, s.ref_len) * (log_sum / MAX_ORDER as f64).exp()
}

/// Unsmoothed corpus BLEU. Orders with no hypothesis n-grams at all are left
/// out of the geometric mean.
pub fn corpus_bleu(hyps: &[Sentence], refs: &[Sentence]) -> Result<BleuScore> {
    if refs.is_empty() {
        return Err(Error::param("refs", "empty reference set"));
    }
    if hyps.len() != refs.len() {
        return Err(Error::param("hyps", format!("{} hypotheses for {} references", hyps.len(), refs.len())));
    }
    let mut s = NgramStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        s.add(&NgramStats::compute(h, r));
    }
    Ok(score_stats(&s))
}

pub(crate) fn score_stats(s: &NgramStats) -> BleuScore {
    let mut precisions = [0.0; MAX_ORDER];
    let mut log_sum = 0.0;
    let mut used = 0;
    let mut zero = false;
    for n in 0..MAX_ORDER {
        if s.totals[n] == 0 {
            continue;
        }
        precisions[n] = s.matches[n] as f64 / s.totals[n] as f64;
        used += 1;
        if s.matches[n] == 0 {
            zero = true;
        } else {
            log_sum += precisions[n].ln();
        }
    }
    let bp = brevity_penalty(s.hyp_len, s.ref_len);
    let bleu = if s.hyp_len == 0 && s.ref_len == 0 {
        100.0
    } else if zero || used == 0 {
        0.0
    } else {
        100.0 * bp * (log_sum / used as f64).exp()
    };
    BleuScore {
        bleu,
        precisions,
        brevity_penalty: bp,
        hyp_len: s.hyp_len,
        ref_len: s.ref_len,
    }
}
