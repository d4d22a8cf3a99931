use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Provenance, Sentence, SentencePair};
use crate::error::{Error, Result};
use crate::seed;
use crate::text::is_reserved_tag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseOp {
    Remove,
    Replace,
    SwapNearby,
}

impl NoiseOp {
    pub const ALL: [NoiseOp; 3] = [NoiseOp::Remove, NoiseOp::Replace, NoiseOp::SwapNearby];
}

/// Where replacement words come from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementPool {
    /// Vocabulary of the side being noised (sources for sources, targets for targets).
    #[default]
    Side,
    /// Vocabulary of both sides together.
    Corpus,
    Explicit(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub operations: Vec<NoiseOp>,
    pub edits_per_sentence: usize,
    #[serde(default)]
    pub replacement_pool: ReplacementPool,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(seed: u64) -> Self {
        NoiseSpec {
            operations: NoiseOp::ALL.to_vec(),
            edits_per_sentence: 1,
            replacement_pool: ReplacementPool::Side,
            seed,
        }
    }

    pub fn with_operations(mut self, ops: &[NoiseOp]) -> Self {
        self.operations = ops.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.operations.is_empty() {
            return Err(Error::param("operations", "at least one operation is required"));
        }
        let unique: BTreeSet<_> = self.operations.iter().collect();
        if unique.len() != self.operations.len() {
            return Err(Error::param("operations", "duplicate operation"));
        }
        if self.edits_per_sentence == 0 {
            return Err(Error::param("edits_per_sentence", "must be at least 1"));
        }
        Ok(())
    }
}

/// Sorted, de-duplicated replacement vocabulary. Reserved tags are excluded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary(Vec<String>);

impl Vocabulary {
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let set: BTreeSet<&str> = sentences
            .into_iter()
            .flat_map(|s| s.tokens())
            .filter(|t| !is_reserved_tag(t))
            .collect();
        Vocabulary(set.into_iter().map(str::to_owned).collect())
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let set: BTreeSet<&str> = words.iter().map(AsRef::as_ref).collect();
        Vocabulary(set.into_iter().map(str::to_owned).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.0
    }

    /// Uniform draw from the vocabulary minus `current`, or `None` if nothing else is available.
    fn draw_other<R: Rng>(&self, current: &str, rng: &mut R) -> Option<&str> {
        match self.0.binary_search_by(|w| w.as_str().cmp(current)) {
            Ok(ci) => {
                if self.0.len() < 2 {
                    return None;
                }
                let mut r = rng.gen_range(0..self.0.len() - 1);
                if r >= ci {
                    r += 1;
                }
                Some(&self.0[r])
            }
            Err(_) if self.0.is_empty() => None,
            Err(_) => Some(&self.0[rng.gen_range(0..self.0.len())]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedEdit {
    /// Operation drawn from the `NoiseSpec` weights.
    pub chosen: NoiseOp,
    /// Operation actually performed after degenerate-case fallbacks.
    pub effective: NoiseOp,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Noised {
    pub sentence: Sentence,
    pub edits: Vec<AppliedEdit>,
}

/// Applies `spec.edits_per_sentence` word-level edits.
///
/// Each edit draws an operation uniformly from `spec.operations` and a
/// position uniformly over the current tokens. Fallbacks: `swap_nearby` on a
/// single token, or on two identical neighbours, becomes `replace`; `replace`
/// with no other word in the vocabulary becomes `remove`. An empty sentence is
/// returned unchanged with no edits.
pub fn apply_noise<R: Rng>(s: &Sentence, spec: &NoiseSpec, vocab: &Vocabulary, rng: &mut R) -> Noised {
    let mut tokens: Vec<String> = s.tokens().map(str::to_owned).collect();
    let mut edits = Vec::with_capacity(spec.edits_per_sentence);
    for _ in 0..spec.edits_per_sentence {
        if tokens.is_empty() {
            break;
        }
        let n = tokens.len();
        let chosen = spec.operations[rng.gen_range(0..spec.operations.len())];
        let position = rng.gen_range(0..n);
        let mut effective = chosen;
        if effective == NoiseOp::SwapNearby {
            let neighbour = if position + 1 < n { position + 1 } else { position.wrapping_sub(1) };
            if n == 1 || tokens[position] == tokens[neighbour] {
                effective = NoiseOp::Replace;
            } else {
                tokens.swap(position, neighbour);
            }
        }
        if effective == NoiseOp::Replace {
            match vocab.draw_other(&tokens[position], rng) {
                Some(w) => tokens[position] = w.to_owned(),
                None => effective = NoiseOp::Remove,
            }
        }
        if effective == NoiseOp::Remove {
            tokens.remove(position);
        }
        edits.push(AppliedEdit { chosen, effective, position });
    }
    Noised {
        sentence: Sentence::from_tokens(tokens),
        edits,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub seed: u64,
    pub sentences: u64,
    pub op_counts: BTreeMap<NoiseOp, u64>,
    pub effective_op_counts: BTreeMap<NoiseOp, u64>,
    pub position_histogram: BTreeMap<usize, u64>,
    /// Sentences with no tokens, passed through unedited.
    pub skipped_empty: u64,
}

impl NoiseReport {
    fn record(&mut self, n: &Noised) {
        self.sentences += 1;
        if n.edits.is_empty() {
            self.skipped_empty += 1;
        }
        for e in &n.edits {
            *self.op_counts.entry(e.chosen).or_insert(0) += 1;
            *self.effective_op_counts.entry(e.effective).or_insert(0) += 1;
            *self.position_histogram.entry(e.position).or_insert(0) += 1;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn vocab_for(pool: &ReplacementPool, side: &[&Sentence], both: &Corpus) -> Vocabulary {
    match pool {
        ReplacementPool::Side => Vocabulary::from_sentences(side.iter().copied()),
        ReplacementPool::Corpus => Vocabulary::from_sentences(both.all_sentences()),
        ReplacementPool::Explicit(words) => Vocabulary::from_words(words),
    }
}

/// Noises each sentence with its own RNG stream derived from `(seed, stream, index)`.
fn noise_all(sentences: &[&Sentence], spec: &NoiseSpec, vocab: &Vocabulary, stream: u64) -> Vec<Noised> {
    sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = seed::derived_rng(spec.seed, &[stream, i as u64]);
            apply_noise(s, spec, vocab, &mut rng)
        })
        .collect()
}

/// Noises every sentence of a monolingual corpus.
pub fn noise_corpus(c: &Corpus, spec: &NoiseSpec) -> Result<(Corpus, NoiseReport)> {
    spec.validate()?;
    let sentences: Vec<&Sentence> = c.sentences()?.iter().collect();
    let vocab = vocab_for(&spec.replacement_pool, &sentences, c);
    let noised = noise_all(&sentences, spec, &vocab, 0);
    let mut report = NoiseReport { seed: spec.seed, ..NoiseReport::default() };
    noised.iter().for_each(|n| report.record(n));
    let out = Corpus::mono(noised.into_iter().map(|n| n.sentence).collect())
        .with_provenance_set(c.provenance().iter().copied())
        .with_provenance(Provenance::Noised)
        .with_seed(Some(spec.seed));
    Ok((out, report))
}

/// `S_src ∪ S_tgt`: every source `x` gives `(noise(x), x)`, then every
/// target `y` gives `(noise(y), y)`. Output length is `2 * |b|`.
pub fn build_denoising(b: &Corpus, spec: &NoiseSpec) -> Result<(Corpus, NoiseReport)> {
    spec.validate()?;
    let pairs = b.pairs()?;
    let srcs: Vec<&Sentence> = pairs.iter().map(|p| &p.src).collect();
    let tgts: Vec<&Sentence> = pairs.iter().map(|p| &p.tgt).collect();
    let mut report = NoiseReport { seed: spec.seed, ..NoiseReport::default() };
    let mut out = Vec::with_capacity(2 * pairs.len());
    for (stream, side) in [(0u64, &srcs), (1u64, &tgts)] {
        let vocab = vocab_for(&spec.replacement_pool, side, b);
        for (clean, n) in side.iter().zip(noise_all(side, spec, &vocab, stream)) {
            report.record(&n);
            out.push(SentencePair::new(n.sentence, (*clean).clone()));
        }
    }
    let out = Corpus::parallel(out)
        .with_provenance_set(b.provenance().iter().copied())
        .with_provenance(Provenance::Noised)
        .with_seed(Some(spec.seed));
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Sentence {
        Sentence::new(x).unwrap()
    }

    #[test]
    fn single_token_swap_falls_back_to_replace() {
        let spec = NoiseSpec::new(1).with_operations(&[NoiseOp::SwapNearby]);
        let vocab = Vocabulary::from_words(&["a", "b"]);
        let out = apply_noise(&s("a"), &spec, &vocab, &mut seed::rng(3));
        assert_eq!(out.edits[0].effective, NoiseOp::Replace);
        assert_eq!(out.sentence.as_str(), "b");
    }

    #[test]
    fn replace_without_alternatives_removes() {
        let spec = NoiseSpec::new(1).with_operations(&[NoiseOp::Replace]);
        let vocab = Vocabulary::from_words(&["a"]);
        let out = apply_noise(&s("a a"), &spec, &vocab, &mut seed::rng(0));
        assert_eq!(out.edits[0].effective, NoiseOp::Remove);
        assert_eq!(out.sentence.as_str(), "a");
    }

    #[test]
    fn identical_neighbours_are_replaced_not_swapped() {
        let spec = NoiseSpec::new(1).with_operations(&[NoiseOp::SwapNearby]);
        let vocab = Vocabulary::from_words(&["x", "y"]);
        let out = apply_noise(&s("x x"), &spec, &vocab, &mut seed::rng(9));
        assert_eq!(out.edits[0].effective, NoiseOp::Replace);
        assert_ne!(out.sentence.as_str(), "x x");
    }

    #[test]
    fn empty_sentence_passes_through() {
        let spec = NoiseSpec::new(1);
        let out = apply_noise(&s(""), &spec, &Vocabulary::default(), &mut seed::rng(0));
        assert!(out.edits.is_empty());
        assert!(out.sentence.is_empty());
    }

    #[test]
    fn swap_last_uses_left_neighbour() {
        let spec = NoiseSpec::new(1).with_operations(&[NoiseOp::SwapNearby]);
        let vocab = Vocabulary::from_words(&["a", "b", "c"]);
        for seed in 0..50 {
            let out = apply_noise(&s("a b c"), &spec, &vocab, &mut seed::rng(seed));
            let expected = match out.edits[0].position {
                0 => "b a c",
                1 => "a c b",
                _ => "a c b",
            };
            assert_eq!(out.sentence.as_str(), expected);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::new(0).with_operations(&[]).validate().is_err());
        let mut spec = NoiseSpec::new(0);
        spec.edits_per_sentence = 0;
        assert!(spec.validate().is_err());
        assert!(NoiseSpec::new(0).with_operations(&[NoiseOp::Remove, NoiseOp::Remove]).validate().is_err());
    }

    #[test]
    fn report_json_roundtrip() {
        let b = Corpus::parallel_from_strs(&[("a b c", "x y"), ("d", "z z z")]).unwrap();
        let (_, report) = build_denoising(&b, &NoiseSpec::new(5)).unwrap();
        assert_eq!(report.sentences, 4);
        let back: NoiseReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
