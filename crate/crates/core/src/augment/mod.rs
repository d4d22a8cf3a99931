//! Dataset builders for pretraining and augmentation.

mod noise;
mod schedule;

pub use noise::{
    apply_noise, build_denoising, noise_corpus, AppliedEdit, NoiseOp, NoiseReport, NoiseSpec, Noised,
    ReplacementPool, Vocabulary,
};
pub use schedule::{build_schedule, Direction, ScheduleDatasets, ScheduleKind, ScheduleStage, Steps, TrainingSchedule};

use crate::corpus::{self, Corpus, Provenance, Sentence, SentencePair};
use crate::error::{Error, Result};
use crate::text::is_reserved_tag;

pub const DEFAULT_BT_TAG: &str = "<BT>";

/// The corpus followed by its swapped copy.
pub fn build_bidirectional(b: &Corpus) -> Result<Corpus> {
    corpus::concat(b, &corpus::swap_directions(b)?)
}

/// Prefixes every source with `tag`. Only corpora flagged synthetic and not
/// authentic are accepted.
pub fn tag_back_translation(c: &Corpus, tag: &str) -> Result<Corpus> {
    if !is_reserved_tag(tag) {
        return Err(Error::param("tag", format!("`{tag}` is not of the form <...>")));
    }
    if !c.has(Provenance::Synthetic) || c.has(Provenance::Authentic) {
        let flags: Vec<String> = c.provenance().iter().map(|p| format!("{p:?}").to_lowercase()).collect();
        return Err(Error::NotSynthetic(if flags.is_empty() { "none".into() } else { flags.join(",") }));
    }
    let pairs = c
        .pairs()?
        .iter()
        .map(|p| {
            let src = if p.src.is_empty() {
                tag.to_owned()
            } else {
                format!("{tag} {}", p.src.as_str())
            };
            SentencePair::new(Sentence::new(src).expect("tag has no line breaks"), p.tgt.clone())
        })
        .collect();
    Ok(Corpus::parallel(pairs)
        .with_provenance_set(c.provenance().iter().copied())
        .with_provenance(Provenance::Tagged)
        .with_seed(c.seed()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bidirectional_single() {
        let b = Corpus::parallel_from_strs(&[("a", "b")]).unwrap();
        let out = build_bidirectional(&b).unwrap();
        assert_eq!(out, Corpus::parallel_from_strs(&[("a", "b"), ("b", "a")]).unwrap().with_provenance(Provenance::Swapped));
    }

    #[test]
    fn tagging() {
        let c = Corpus::parallel_from_strs(&[("habari", "hello")]).unwrap().with_provenance(Provenance::Synthetic);
        let t = tag_back_translation(&c, DEFAULT_BT_TAG).unwrap();
        assert_eq!(t.pairs().unwrap()[0], SentencePair::from_strs("<BT> habari", "hello").unwrap());
        assert!(t.has(Provenance::Tagged));
    }

    #[test]
    fn tagging_guards_authentic() {
        let c = Corpus::parallel_from_strs(&[("a", "b")]).unwrap();
        assert!(matches!(tag_back_translation(&c, "<BT>"), Err(Error::NotSynthetic(_))));
        let c = c.with_provenance(Provenance::Synthetic).with_provenance(Provenance::Authentic);
        assert!(matches!(tag_back_translation(&c, "<BT>"), Err(Error::NotSynthetic(_))));
        let c = Corpus::parallel_from_strs(&[("a", "b")]).unwrap().with_provenance(Provenance::Synthetic);
        assert!(tag_back_translation(&c, "BT").is_err());
    }
}
