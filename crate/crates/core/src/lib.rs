pub mod align;
pub mod augment;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod pipeline;
pub mod postprocess;
pub mod rerank;
pub mod seed;
pub mod select;
pub mod selftrain;
pub mod text;
pub mod toydata;

pub use corpus::{Corpus, CorpusKind, Provenance, Sentence, SentencePair};
pub use error::{Error, Result};
