//! Reversible surface-form processing: tokenization, truecasing and BPE.

mod bpe;
mod tokenize;
mod truecase;

pub use bpe::{learn_bpe, learn_bpe_joint, revert_bpe, BpeModel, DEFAULT_MARKER, DEFAULT_MERGES};
pub use tokenize::{detokenize, tokenize};
pub use truecase::{truecase, TruecaseMode, TruecaseModel, Truecased};

/// Control tags such as `<BT>`: a token that starts with `<`, ends with `>`
/// and has something in between. They are never split by BPE and never enter
/// language-model vocabularies.
pub fn is_reserved_tag(token: &str) -> bool {
    token.len() >= 3 && token.starts_with('<') && token.ends_with('>')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_tags() {
        assert!(is_reserved_tag("<BT>"));
        assert!(!is_reserved_tag("<>"));
        assert!(!is_reserved_tag("<a"));
        assert!(!is_reserved_tag("a<b>"));
    }
}
