//! Seeded synthetic bilingual data for demos, fixtures and the shipped
//! pipeline configs.
//!
//! A [`ToyLanguage`] has two made-up vocabularies of pseudo-words and a
//! lexicon mapping each source word to a preferred target word and an
//! alternative. Sentence lengths are uniform in a range; word choice is
//! Zipfian. Authentic translations pick the alternative with probability
//! `ambiguity`, which gives the data some lexical uncertainty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Provenance, Sentence, SentencePair};
use crate::rerank::{sentence_bleu, Hypothesis, NBestList, MODEL_SCORE};
use crate::seed;

const SRC_ONSETS: &[&str] = &["b", "ch", "d", "f", "g", "h", "j", "k", "l", "m", "mb", "n", "nd", "ny", "p", "s", "t", "w", "z"];
const SRC_VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const TGT_ONSETS: &[&str] = &["b", "br", "c", "d", "f", "fl", "g", "gr", "h", "l", "m", "n", "p", "pl", "r", "s", "st", "t", "th", "w"];
const TGT_VOWELS: &[&str] = &["a", "e", "i", "o", "ou", "ea"];
const TGT_CODAS: &[&str] = &["", "n", "t", "s", "r", "ck", "ll"];

#[derive(Clone, Debug)]
pub struct ToyLanguage {
    pub src_words: Vec<String>,
    pub tgt_words: Vec<String>,
    /// Source word index → (preferred target index, alternative target index).
    pub lexicon: Vec<(usize, usize)>,
    pub min_len: usize,
    pub max_len: usize,
    pub ambiguity: f64,
    cumulative: Vec<f64>,
}

fn make_words(n: usize, rng: &mut ChaCha8Rng, build: impl Fn(&mut ChaCha8Rng) -> String) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = build(rng);
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

impl ToyLanguage {
    pub fn new(vocab: usize, seed: u64) -> Self {
        assert!(vocab >= 2, "vocabulary needs at least two words");
        let mut rng = seed::derived_rng(seed, &[0x70]);
        let src_words = make_words(vocab, &mut rng, |r| {
            let syll = r.gen_range(2..=3);
            (0..syll).map(|_| format!("{}{}", pick(r, SRC_ONSETS), pick(r, SRC_VOWELS))).collect()
        });
        let tgt_words = make_words(vocab, &mut rng, |r| {
            let syll = r.gen_range(1..=2);
            (0..syll)
                .map(|_| format!("{}{}{}", pick(r, TGT_ONSETS), pick(r, TGT_VOWELS), pick(r, TGT_CODAS)))
                .collect()
        });
        let lexicon = (0..vocab)
            .map(|i| {
                let mut alt = rng.gen_range(0..vocab - 1);
                if alt >= i {
                    alt += 1;
                }
                (i, alt)
            })
            .collect();
        let mut acc = 0.0;
        let cumulative = (0..vocab)
            .map(|r| {
                acc += 1.0 / (r + 1) as f64;
                acc
            })
            .collect();
        ToyLanguage {
            src_words,
            tgt_words,
            lexicon,
            min_len: 3,
            max_len: 12,
            ambiguity: 0.15,
            cumulative,
        }
    }

    pub fn with_lengths(mut self, min_len: usize, max_len: usize) -> Self {
        assert!(1 <= min_len && min_len <= max_len);
        self.min_len = min_len;
        self.max_len = max_len;
        self
    }

    pub fn with_ambiguity(mut self, p: f64) -> Self {
        self.ambiguity = p;
        self
    }

    fn zipf(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    fn source_ids(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = rng.gen_range(self.min_len..=self.max_len);
        (0..n).map(|_| self.zipf(rng)).collect()
    }

    fn words(vocab: &[String], ids: &[usize]) -> Sentence {
        Sentence::from_tokens(ids.iter().map(|&i| vocab[i].as_str()))
    }

    fn translate_ids(&self, ids: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
        ids.iter()
            .map(|&i| {
                let (pref, alt) = self.lexicon[i];
                if rng.gen::<f64>() < self.ambiguity {
                    alt
                } else {
                    pref
                }
            })
            .collect()
    }

    fn long_target(&self, rng: &mut ChaCha8Rng) -> Sentence {
        let n = rng.gen_range(self.min_len.max(4)..=self.max_len.max(4) + 8);
        let ids: Vec<usize> = (0..n).map(|_| self.zipf(rng)).collect();
        Self::words(&self.tgt_words, &ids)
    }

    /// Reference word-by-word translation with the preferred lexicon entries.
    pub fn gold(&self, src: &Sentence) -> Sentence {
        Sentence::from_tokens(src.tokens().map(|w| match self.src_words.iter().position(|x| x == w) {
            Some(i) => self.tgt_words[self.lexicon[i].0].as_str(),
            None => w,
        }))
    }

    /// `n` authentic pairs; each sentence draws from its own RNG stream.
    pub fn parallel(&self, n: usize, seed: u64) -> Corpus {
        let pairs = (0..n)
            .map(|i| {
                let mut rng = seed::derived_rng(seed, &[1, i as u64]);
                let ids = self.source_ids(&mut rng);
                let tgt = self.translate_ids(&ids, &mut rng);
                SentencePair::new(Self::words(&self.src_words, &ids), Self::words(&self.tgt_words, &tgt))
            })
            .collect();
        Corpus::parallel(pairs).with_provenance(Provenance::Authentic).with_seed(Some(seed))
    }

    pub fn mono_src(&self, n: usize, seed: u64) -> Corpus {
        let lines = (0..n)
            .map(|i| {
                let mut rng = seed::derived_rng(seed, &[2, i as u64]);
                Self::words(&self.src_words, &self.source_ids(&mut rng))
            })
            .collect();
        Corpus::mono(lines).with_provenance(Provenance::Authentic).with_seed(Some(seed))
    }

    pub fn mono_tgt(&self, n: usize, seed: u64) -> Corpus {
        let lines = (0..n)
            .map(|i| {
                let mut rng = seed::derived_rng(seed, &[3, i as u64]);
                let ids = self.source_ids(&mut rng);
                let tgt = self.translate_ids(&ids, &mut rng);
                Self::words(&self.tgt_words, &tgt)
            })
            .collect();
        Corpus::mono(lines).with_provenance(Provenance::Authentic).with_seed(Some(seed))
    }
}

/// Reranking dev set: each segment has a random reference and `beam`
/// hypotheses made by corrupting it to varying degrees. The decoder score is
/// unrelated to quality; feature `planted` is sentence BLEU / 100 plus
/// uniform noise in `[-noise, noise]`; `wordcount` is the length.
pub fn planted_nbest(lang: &ToyLanguage, segments: usize, beam: usize, noise: f64, seed: u64) -> Vec<(NBestList, Sentence)> {
    (0..segments)
        .map(|s| {
            let mut rng = seed::derived_rng(seed, &[4, s as u64]);
            let reference = lang.long_target(&mut rng);
            let ref_tokens: Vec<&str> = reference.tokens().collect();
            let hypotheses = (0..beam)
                .map(|_| {
                    let edits = rng.gen_range(0..=ref_tokens.len() / 2 + 1);
                    let mut toks: Vec<&str> = ref_tokens.clone();
                    for _ in 0..edits {
                        let p = rng.gen_range(0..toks.len().max(1));
                        if toks.len() > 1 && rng.gen_bool(0.3) {
                            toks.remove(p);
                        } else if !toks.is_empty() {
                            toks[p] = lang.tgt_words[rng.gen_range(0..lang.tgt_words.len())].as_str();
                        }
                    }
                    let text = Sentence::from_tokens(toks);
                    let bleu = sentence_bleu(&text, &reference);
                    let mut h = Hypothesis::new(text, rng.gen_range(-10.0..0.0));
                    h.features.insert("planted".into(), bleu / 100.0 + rng.gen_range(-noise..=noise));
                    h.features.insert("wordcount".into(), h.text.token_count() as f64);
                    h
                })
                .collect();
            let nb = NBestList {
                segment_id: s as u64,
                source: Sentence::default(),
                hypotheses,
            };
            (nb, reference)
        })
        .collect()
}

/// Names of the features produced by [`planted_nbest`], including `model_score`.
pub fn planted_feature_names() -> [&'static str; 3] {
    [MODEL_SCORE, "planted", "wordcount"]
}
