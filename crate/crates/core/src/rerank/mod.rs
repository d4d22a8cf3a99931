//! N-best reranking: features, weights, k-best batch MIRA and BLEU.

mod bleu;
mod mira;
mod nbest;

pub use bleu::{corpus_bleu, sentence_bleu, BleuScore, NgramStats, MAX_ORDER};
pub use mira::{train_mira, MiraConfig, MiraResult};
pub use nbest::{attach_sources, format_nbest, parse_nbest, read_nbest, write_nbest, DEFAULT_BEAM, DELIMITER};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignmentModel;
use crate::corpus::{self, Sentence, SentencePair};
use crate::error::{Error, Result};
use crate::lm::NgramModel;

pub const MODEL_SCORE: &str = "model_score";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: Sentence,
    /// Decoder score; always available to the weights as `model_score`.
    pub model_score: f64,
    pub features: BTreeMap<String, f64>,
}

impl Hypothesis {
    pub fn new(text: Sentence, model_score: f64) -> Self {
        Hypothesis {
            text,
            model_score,
            features: BTreeMap::new(),
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        if name == MODEL_SCORE {
            Some(self.model_score)
        } else {
            self.features.get(name).copied()
        }
    }

    pub fn feature_names(&self) -> BTreeSet<&str> {
        std::iter::once(MODEL_SCORE).chain(self.features.keys().map(String::as_str)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    pub segment_id: u64,
    pub source: Sentence,
    pub hypotheses: Vec<Hypothesis>,
}

impl NBestList {
    /// Index of the hypothesis with the highest decoder score (ties: lowest index).
    pub fn decoder_best(&self) -> usize {
        argmax(self.hypotheses.iter().map(|h| h.model_score))
    }
}

/// First index of the maximum.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureWeights {
    pub weights: BTreeMap<String, f64>,
}

impl FeatureWeights {
    pub fn zeros<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        FeatureWeights {
            weights: names.into_iter().map(|n| (n.as_ref().to_owned(), 0.0)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.weights.insert(name.to_owned(), value);
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.weights.keys().map(String::as_str).collect()
    }

    pub fn dot(&self, h: &Hypothesis) -> f64 {
        self.weights.iter().map(|(k, w)| w * h.value(k).unwrap_or(0.0)).sum()
    }

    pub fn check(&self, h: &Hypothesis) -> Result<()> {
        let have = h.feature_names();
        let want = self.names();
        if have != want {
            return Err(Error::FeatureMismatch(format!("hypothesis has {have:?}, weights have {want:?}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        corpus::write_bytes(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Index of `argmax w·Φ`, ties to the lowest index.
pub fn rerank(nb: &NBestList, w: &FeatureWeights) -> Result<usize> {
    if nb.hypotheses.is_empty() {
        return Err(Error::param("nbest", format!("segment {} has no hypotheses", nb.segment_id)));
    }
    for h in &nb.hypotheses {
        w.check(h)?;
    }
    Ok(argmax(nb.hypotheses.iter().map(|h| w.dot(h))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Forward LM log-probability per scored token.
    Lm,
    /// LM over token-reversed text, applied to the reversed hypothesis.
    R2l,
    /// Target-to-source alignment score of (hypothesis, source).
    T2s,
    /// Source-to-target alignment score of (source, hypothesis).
    Align,
    Wordcount,
}

impl Feature {
    pub const ALL: [Feature; 5] = [Feature::Lm, Feature::R2l, Feature::T2s, Feature::Align, Feature::Wordcount];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Lm => "lm",
            Feature::R2l => "r2l",
            Feature::T2s => "t2s",
            Feature::Align => "align",
            Feature::Wordcount => "wordcount",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FeatureResources<'a> {
    pub lm: Option<&'a NgramModel>,
    pub r2l: Option<&'a NgramModel>,
    pub t2s: Option<&'a AlignmentModel>,
    pub align: Option<&'a AlignmentModel>,
}

pub fn reverse_tokens(s: &Sentence) -> Sentence {
    let mut t: Vec<&str> = s.tokens().collect();
    t.reverse();
    Sentence::from_tokens(t)
}

fn lm_per_token(m: &NgramModel, s: &Sentence) -> f64 {
    m.logprob(s) / NgramModel::scored_length(s) as f64
}

/// Adds the requested features to every hypothesis, in parallel over lists.
pub fn extract_features(lists: &mut [NBestList], res: &FeatureResources<'_>, features: &[Feature]) -> Result<()> {
    for f in features {
        let missing = match f {
            Feature::Lm => res.lm.is_none(),
            Feature::R2l => res.r2l.is_none(),
            Feature::T2s => res.t2s.is_none(),
            Feature::Align => res.align.is_none(),
            Feature::Wordcount => false,
        };
        if missing {
            return Err(Error::MissingResource(format!("{} model", f.name())));
        }
    }
    lists.par_iter_mut().for_each(|nb| {
        for h in &mut nb.hypotheses {
            for &f in features {
                let v = match f {
                    Feature::Lm => lm_per_token(res.lm.unwrap(), &h.text),
                    Feature::R2l => lm_per_token(res.r2l.unwrap(), &reverse_tokens(&h.text)),
                    Feature::T2s => res.t2s.unwrap().score_pair(&SentencePair::new(h.text.clone(), nb.source.clone())),
                    Feature::Align => res.align.unwrap().score_pair(&SentencePair::new(nb.source.clone(), h.text.clone())),
                    Feature::Wordcount => h.text.token_count() as f64,
                };
                h.features.insert(f.name().to_owned(), v);
            }
        }
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(scores: &[(f64, f64)]) -> NBestList {
        NBestList {
            segment_id: 0,
            source: Sentence::default(),
            hypotheses: scores
                .iter()
                .enumerate()
                .map(|(i, &(ms, f))| {
                    let mut h = Hypothesis::new(Sentence::new(format!("h{i}")).unwrap(), ms);
                    h.features.insert("f".into(), f);
                    h
                })
                .collect(),
        }
    }

    #[test]
    fn zero_weights_pick_first() {
        let nb = list(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(rerank(&nb, &FeatureWeights::zeros([MODEL_SCORE, "f"])).unwrap(), 0);
    }

    #[test]
    fn model_score_only_matches_decoder() {
        let nb = list(&[(1.0, 9.0), (3.0, 0.0), (2.0, 5.0)]);
        let mut w = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        w.set(MODEL_SCORE, 1.0);
        assert_eq!(rerank(&nb, &w).unwrap(), nb.decoder_best());
        w.set(MODEL_SCORE, 0.0);
        w.set("f", 1.0);
        assert_eq!(rerank(&nb, &w).unwrap(), 0);
    }

    #[test]
    fn mismatch_rejected() {
        let nb = list(&[(1.0, 2.0)]);
        assert!(matches!(rerank(&nb, &FeatureWeights::zeros([MODEL_SCORE])), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn reversal() {
        assert_eq!(reverse_tokens(&Sentence::new("a b c d").unwrap()).as_str(), "d c b a");
        let p = Sentence::new("a b a").unwrap();
        assert_eq!(reverse_tokens(&p), p);
    }

    #[test]
    fn missing_resource_named() {
        let mut lists = vec![list(&[(0.0, 0.0)])];
        match extract_features(&mut lists, &FeatureResources::default(), &[Feature::Wordcount, Feature::R2l]) {
            Err(Error::MissingResource(m)) => assert!(m.contains("r2l")),
            other => panic!("{other:?}"),
        }
        extract_features(&mut lists, &FeatureResources::default(), &[Feature::Wordcount]).unwrap();
        assert_eq!(lists[0].hypotheses[0].features["wordcount"], 1.0);
    }
}
