use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{self, Corpus, Sentence};
use crate::error::{Error, Result};

/// Surface-casing statistics keyed by lowercased token.
///
/// Only non-initial tokens are counted: the casing of a sentence-initial word
/// says nothing about the word itself.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TruecaseModel {
    table: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruecaseMode {
    Apply,
    Revert,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truecased {
    pub sentence: Sentence,
    /// Set when the model is empty and the input was returned untouched.
    pub passthrough: bool,
}

impl TruecaseModel {
    /// Counts casings over every sentence of `c` (both sides if parallel).
    pub fn train(c: &Corpus) -> Self {
        let mut model = TruecaseModel::default();
        for s in c.all_sentences() {
            for tok in s.tokens().skip(1) {
                model.observe(tok, 1);
            }
        }
        model
    }

    fn observe(&mut self, surface: &str, count: u64) {
        *self
            .table
            .entry(surface.to_lowercase())
            .or_default()
            .entry(surface.to_owned())
            .or_insert(0) += count;
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    /// Most frequent surface form; ties go to the lexicographically smallest.
    pub fn dominant(&self, lowercased: &str) -> Option<&str> {
        let forms = self.table.get(lowercased)?;
        forms
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(s, _)| s.as_str())
    }

    pub fn count(&self, lowercased: &str, surface: &str) -> u64 {
        self.table
            .get(lowercased)
            .and_then(|m| m.get(surface))
            .copied()
            .unwrap_or(0)
    }

    /// `<lowercased> <surface> <count>` per line, sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (lower, forms) in &self.table {
            for (surface, count) in forms {
                let _ = writeln!(out, "{lower} {surface} {count}");
            }
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut model = TruecaseModel::default();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split(' ').collect();
            let [lower, surface, count] = fields[..] else {
                return Err(Error::parse(origin, i + 1, "expected `<lowercased> <surface> <count>`"));
            };
            let count: u64 = count
                .parse()
                .map_err(|e| Error::parse(origin, i + 1, format!("bad count: {e}")))?;
            if count == 0 || surface.to_lowercase() != lower {
                return Err(Error::parse(origin, i + 1, "count must be positive and surface must lowercase to key"));
            }
            model.observe(surface, count);
        }
        Ok(model)
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

fn upper_first(token: &str) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Truecases (or reverts) the sentence-initial token of tokenized text.
/// Interior tokens are never touched.
pub fn truecase(s: &Sentence, model: &TruecaseModel, mode: TruecaseMode) -> Truecased {
    if model.is_empty() {
        return Truecased {
            sentence: s.clone(),
            passthrough: true,
        };
    }
    let mut tokens: Vec<String> = s.tokens().map(str::to_owned).collect();
    if let Some(first) = tokens.first_mut() {
        match mode {
            TruecaseMode::Apply => {
                let lower = first.to_lowercase();
                if model.dominant(&lower) == Some(lower.as_str()) {
                    *first = lower;
                }
            }
            TruecaseMode::Revert => *first = upper_first(first),
        }
    }
    Truecased {
        sentence: Sentence::from_tokens(tokens),
        passthrough: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TruecaseModel {
        TruecaseModel::train(
            &Corpus::mono_from_strs(&[
                "In the house the cat sleeps",
                "We saw the USA and the dog",
                "Visit the USA",
            ])
            .unwrap(),
        )
    }

    fn apply(s: &str, m: &TruecaseModel) -> String {
        truecase(&Sentence::new(s).unwrap(), m, TruecaseMode::Apply).sentence.into_string()
    }

    #[test]
    fn lowercases_dominantly_lowercase_initial() {
        let m = model();
        assert_eq!(m.dominant("the"), Some("the"));
        assert_eq!(apply("The house", &m), "the house");
    }

    #[test]
    fn keeps_acronyms() {
        let m = model();
        assert_eq!(m.dominant("usa"), Some("USA"));
        assert_eq!(apply("USA wins", &m), "USA wins");
    }

    #[test]
    fn revert_restores_title_case() {
        let m = model();
        let s = Sentence::new("The cat sleeps").unwrap();
        let applied = truecase(&s, &m, TruecaseMode::Apply).sentence;
        assert_eq!(truecase(&applied, &m, TruecaseMode::Revert).sentence, s);
    }

    #[test]
    fn empty_model_passes_through() {
        let out = truecase(&Sentence::new("The x").unwrap(), &TruecaseModel::default(), TruecaseMode::Apply);
        assert!(out.passthrough);
        assert_eq!(out.sentence.as_str(), "The x");
    }

    #[test]
    fn file_roundtrip() {
        let m = model();
        let text = m.to_text();
        assert!(text.contains("usa USA 2\n"));
        assert_eq!(TruecaseModel::from_text(&text, Path::new("m")).unwrap(), m);
        assert!(TruecaseModel::from_text("the The 0\n", Path::new("m")).is_err());
        assert!(TruecaseModel::from_text("x Y 1\n", Path::new("m")).is_err());
    }
}
