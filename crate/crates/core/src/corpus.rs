//! Monolingual and parallel corpora.
//!
//! A [`Corpus`] is an ordered, immutable list of entries of a single kind plus
//! a set of [`Provenance`] flags. All operations here are pure: they take a
//! corpus by reference and return a new one, so the same inputs always yield
//! the same bytes on disk.
//!
//! On disk a monolingual corpus is one sentence per LF-terminated line. A
//! parallel corpus is either a TSV file with exactly one tab per line or a pair
//! of aligned `<prefix>.src` / `<prefix>.tgt` files.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// One line of text. Never contains `\n` or `\r`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sentence(String);

impl Sentence {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if let Some(c) = text.chars().find(|&c| c == '\n' || c == '\r') {
            return Err(Error::InvalidSentence {
                line: 0,
                reason: format!("contains line terminator {:?}", c),
            });
        }
        Ok(Sentence(text))
    }

    /// Joins tokens with single spaces. Tokens must not contain line breaks.
    pub fn from_tokens<S: AsRef<str>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut out = String::new();
        for (i, t) in tokens.into_iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(t.as_ref());
        }
        debug_assert!(!out.contains(['\n', '\r']));
        Sentence(out)
    }

    /// Wraps text already known to be free of line terminators.
    pub(crate) fn new_unchecked(text: String) -> Self {
        debug_assert!(!text.contains(['\n', '\r']), "{text:?}");
        Sentence(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    pub fn tokens(&self) -> std::str::SplitWhitespace<'_> {
        self.0.split_whitespace()
    }

    pub fn token_count(&self) -> usize {
        self.tokens().count()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Sentence {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Sentence {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Sentence::new(value)
    }
}

impl TryFrom<&str> for Sentence {
    type Error = Error;
    fn try_from(value: &str) -> Result<Self> {
        Sentence::new(value)
    }
}

impl From<Sentence> for String {
    fn from(s: Sentence) -> String {
        s.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentencePair {
    pub src: Sentence,
    pub tgt: Sentence,
}

impl SentencePair {
    pub fn new(src: Sentence, tgt: Sentence) -> Self {
        SentencePair { src, tgt }
    }

    /// Convenience constructor for literals; fails on embedded line breaks.
    pub fn from_strs(src: &str, tgt: &str) -> Result<Self> {
        Ok(SentencePair::new(Sentence::new(src)?, Sentence::new(tgt)?))
    }

    pub fn swapped(&self) -> Self {
        SentencePair {
            src: self.tgt.clone(),
            tgt: self.src.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Mono,
    Parallel,
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::Mono => "mono",
            CorpusKind::Parallel => "parallel",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Authentic,
    Synthetic,
    Swapped,
    Noised,
    Tagged,
    Transductive,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Authentic => "authentic",
            Provenance::Synthetic => "synthetic",
            Provenance::Swapped => "swapped",
            Provenance::Noised => "noised",
            Provenance::Tagged => "tagged",
            Provenance::Transductive => "transductive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entries {
    Mono(Vec<Sentence>),
    Parallel(Vec<SentencePair>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    entries: Entries,
    provenance: BTreeSet<Provenance>,
    seed: Option<u64>,
}

impl Corpus {
    pub fn mono(sentences: Vec<Sentence>) -> Self {
        Corpus {
            entries: Entries::Mono(sentences),
            provenance: BTreeSet::new(),
            seed: None,
        }
    }

    pub fn parallel(pairs: Vec<SentencePair>) -> Self {
        Corpus {
            entries: Entries::Parallel(pairs),
            provenance: BTreeSet::new(),
            seed: None,
        }
    }

    pub fn empty(kind: CorpusKind) -> Self {
        match kind {
            CorpusKind::Mono => Corpus::mono(Vec::new()),
            CorpusKind::Parallel => Corpus::parallel(Vec::new()),
        }
    }

    /// Builds a monolingual corpus from string literals.
    pub fn mono_from_strs<S: AsRef<str>>(lines: &[S]) -> Result<Self> {
        let sentences = lines
            .iter()
            .map(|s| Sentence::new(s.as_ref()))
            .collect::<Result<_>>()?;
        Ok(Corpus::mono(sentences))
    }

    /// Builds a parallel corpus from `(src, tgt)` string literals.
    pub fn parallel_from_strs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|(s, t)| SentencePair::from_strs(s.as_ref(), t.as_ref()))
            .collect::<Result<_>>()?;
        Ok(Corpus::parallel(pairs))
    }

    pub fn with_provenance(mut self, flag: Provenance) -> Self {
        self.provenance.insert(flag);
        self
    }

    pub fn with_provenance_set(mut self, flags: impl IntoIterator<Item = Provenance>) -> Self {
        self.provenance.extend(flags);
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> CorpusKind {
        match self.entries {
            Entries::Mono(_) => CorpusKind::Mono,
            Entries::Parallel(_) => CorpusKind::Parallel,
        }
    }

    pub fn len(&self) -> usize {
        match &self.entries {
            Entries::Mono(v) => v.len(),
            Entries::Parallel(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    pub fn provenance(&self) -> &BTreeSet<Provenance> {
        &self.provenance
    }

    pub fn has(&self, flag: Provenance) -> bool {
        self.provenance.contains(&flag)
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn sentences(&self) -> Result<&[Sentence]> {
        match &self.entries {
            Entries::Mono(v) => Ok(v),
            Entries::Parallel(_) => Err(Error::KindMismatch {
                expected: CorpusKind::Mono,
                found: CorpusKind::Parallel,
            }),
        }
    }

    pub fn pairs(&self) -> Result<&[SentencePair]> {
        match &self.entries {
            Entries::Parallel(v) => Ok(v),
            Entries::Mono(_) => Err(Error::KindMismatch {
                expected: CorpusKind::Parallel,
                found: CorpusKind::Mono,
            }),
        }
    }

    /// Source sides of a parallel corpus as a monolingual corpus.
    pub fn sources(&self) -> Result<Corpus> {
        let pairs = self.pairs()?;
        Ok(Corpus::mono(pairs.iter().map(|p| p.src.clone()).collect())
            .with_provenance_set(self.provenance.iter().copied()))
    }

    /// Target sides of a parallel corpus as a monolingual corpus.
    pub fn targets(&self) -> Result<Corpus> {
        let pairs = self.pairs()?;
        Ok(Corpus::mono(pairs.iter().map(|p| p.tgt.clone()).collect())
            .with_provenance_set(self.provenance.iter().copied()))
    }

    /// Text of every sentence in the corpus, both sides for parallel data.
    pub fn all_sentences(&self) -> Box<dyn Iterator<Item = &Sentence> + '_> {
        match &self.entries {
            Entries::Mono(v) => Box::new(v.iter()),
            Entries::Parallel(v) => Box::new(v.iter().flat_map(|p| [&p.src, &p.tgt])),
        }
    }

    fn map_entries(&self, entries: Entries) -> Corpus {
        Corpus {
            entries,
            provenance: self.provenance.clone(),
            seed: self.seed,
        }
    }

    /// Canonical on-disk bytes: one LF-terminated line per entry, pairs
    /// joined by a single tab.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.entries {
            Entries::Mono(v) => {
                for s in v {
                    out.extend_from_slice(s.as_str().as_bytes());
                    out.push(b'\n');
                }
            }
            Entries::Parallel(v) => {
                for p in v {
                    out.extend_from_slice(p.src.as_str().as_bytes());
                    out.push(b'\t');
                    out.extend_from_slice(p.tgt.as_str().as_bytes());
                    out.push(b'\n');
                }
            }
        }
        out
    }

    pub fn sha256(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            kind: self.kind(),
            count: self.len(),
            provenance: self.provenance.iter().copied().collect(),
            seed: self.seed,
            sha256: self.sha256(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sidecar record written next to every corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub kind: CorpusKind,
    pub count: usize,
    pub provenance: Vec<Provenance>,
    pub seed: Option<u64>,
    pub sha256: String,
}

fn require_same_kind(a: &Corpus, b: &Corpus) -> Result<()> {
    if a.kind() != b.kind() {
        return Err(Error::KindMismatch {
            expected: a.kind(),
            found: b.kind(),
        });
    }
    Ok(())
}

/// Exchanges source and target of every pair.
pub fn swap_directions(c: &Corpus) -> Result<Corpus> {
    let pairs = c.pairs()?;
    let swapped = pairs.iter().map(SentencePair::swapped).collect();
    Ok(c.map_entries(Entries::Parallel(swapped))
        .with_provenance(Provenance::Swapped))
}

/// `a` followed by `b`. Provenance is the union of both.
pub fn concat(a: &Corpus, b: &Corpus) -> Result<Corpus> {
    require_same_kind(a, b)?;
    let entries = match (&a.entries, &b.entries) {
        (Entries::Mono(x), Entries::Mono(y)) => Entries::Mono(x.iter().chain(y).cloned().collect()),
        (Entries::Parallel(x), Entries::Parallel(y)) => {
            Entries::Parallel(x.iter().chain(y).cloned().collect())
        }
        _ => unreachable!("kinds checked above"),
    };
    let seed = if a.seed == b.seed { a.seed } else { None };
    Ok(Corpus {
        entries,
        provenance: a.provenance.union(&b.provenance).copied().collect(),
        seed,
    })
}

/// Repeats the corpus `k` times in block order.
pub fn upsample(c: &Corpus, k: usize) -> Result<Corpus> {
    if k == 0 {
        return Err(Error::param("k", "upsampling factor must be at least 1"));
    }
    fn repeat<T: Clone>(v: &[T], k: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(v.len() * k);
        for _ in 0..k {
            out.extend_from_slice(v);
        }
        out
    }
    let entries = match &c.entries {
        Entries::Mono(v) => Entries::Mono(repeat(v, k)),
        Entries::Parallel(v) => Entries::Parallel(repeat(v, k)),
    };
    Ok(c.map_entries(entries))
}

/// Keeps the first occurrence of every distinct entry.
pub fn dedup(c: &Corpus) -> Corpus {
    fn first_occurrences<T: Clone + Eq + std::hash::Hash>(v: &[T]) -> Vec<T> {
        let mut seen = HashSet::with_capacity(v.len());
        v.iter().filter(|e| seen.insert(*e)).cloned().collect()
    }
    let entries = match &c.entries {
        Entries::Mono(v) => Entries::Mono(first_occurrences(v)),
        Entries::Parallel(v) => Entries::Parallel(first_occurrences(v)),
    };
    c.map_entries(entries)
}

/// Selects entries by index, preserving the given order.
pub fn select_indices(c: &Corpus, indices: &[usize]) -> Corpus {
    let entries = match &c.entries {
        Entries::Mono(v) => Entries::Mono(indices.iter().map(|&i| v[i].clone()).collect()),
        Entries::Parallel(v) => Entries::Parallel(indices.iter().map(|&i| v[i].clone()).collect()),
    };
    c.map_entries(entries)
}

/// Seeded permutation of a corpus.
pub fn shuffle(c: &Corpus, seed: u64) -> Corpus {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    select_indices(c, &idx).with_seed(Some(seed))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

/// Samples `n_valid` and `n_test` entries without replacement; the rest is
/// the training set. Each output keeps the original relative order.
pub fn split_random(c: &Corpus, n_valid: usize, n_test: usize, seed: u64) -> Result<Split> {
    let held_out = n_valid
        .checked_add(n_test)
        .ok_or_else(|| Error::param("n_valid", "overflow"))?;
    if held_out > c.len() {
        return Err(Error::InsufficientData {
            requested: held_out,
            available: c.len(),
        });
    }
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let mut valid = idx[..n_valid].to_vec();
    let mut test = idx[n_valid..held_out].to_vec();
    let mut train = idx[held_out..].to_vec();
    valid.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    let pick = |ix: &[usize]| select_indices(c, ix).with_seed(Some(seed));
    Ok(Split {
        train: pick(&train),
        valid: pick(&valid),
        test: pick(&test),
    })
}

// ---------------------------------------------------------------------------
// IO
// ---------------------------------------------------------------------------

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::parse(path, 0, format!("invalid UTF-8: {e}")))
}

fn parse_lines(path: &Path, text: &str) -> Result<Vec<Sentence>> {
    text.split_terminator('\n')
        .enumerate()
        .map(|(i, line)| {
            if line.contains('\r') {
                return Err(Error::InvalidSentence {
                    line: i + 1,
                    reason: format!("carriage return in {}", path.display()),
                });
            }
            Ok(Sentence::new_unchecked(line.to_owned()))
        })
        .collect()
}

/// Number of lines as counted by the readers: LF-terminated lines plus a
/// trailing unterminated one.
pub fn count_lines(bytes: &[u8]) -> usize {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count();
    if bytes.last().is_some_and(|&b| b != b'\n') {
        newlines + 1
    } else {
        newlines
    }
}

pub fn read_mono(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = read_text(path)?;
    Ok(Corpus::mono(parse_lines(path, &text)?))
}

/// Reads a TSV parallel corpus; every line must contain exactly one tab.
pub fn read_parallel_tsv(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let lines = parse_lines(path, &text)?;
    let pairs = lines
        .into_iter()
        .enumerate()
        .map(|(i, line)| {
            let s = line.as_str();
            let mut parts = s.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(src), Some(tgt), None) => Ok(SentencePair::new(
                    Sentence::new_unchecked(src.to_owned()),
                    Sentence::new_unchecked(tgt.to_owned()),
                )),
                _ => Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected exactly one tab, found {}", s.matches('\t').count()),
                )),
            }
        })
        .collect::<Result<_>>()?;
    Ok(Corpus::parallel(pairs))
}

/// Reads aligned `<prefix>.src` and `<prefix>.tgt` files.
pub fn read_parallel_files(prefix: impl AsRef<Path>) -> Result<Corpus> {
    let (src_path, tgt_path) = side_paths(prefix.as_ref());
    let src = read_mono(&src_path)?.sentences()?.to_vec();
    let tgt = read_mono(&tgt_path)?.sentences()?.to_vec();
    if src.len() != tgt.len() {
        return Err(Error::parse(
            &tgt_path,
            tgt.len().min(src.len()) + 1,
            format!("line count {} differs from {} in {}", tgt.len(), src.len(), src_path.display()),
        ));
    }
    Ok(Corpus::parallel(
        src.into_iter().zip(tgt).map(|(s, t)| SentencePair::new(s, t)).collect(),
    ))
}

/// Reads a parallel corpus from a `.tsv` file or a `.src`/`.tgt` prefix.
pub fn read_parallel(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    if path.is_file() {
        read_parallel_tsv(path)
    } else {
        read_parallel_files(path)
    }
}

fn side_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let mut src = prefix.as_os_str().to_owned();
    src.push(".src");
    let mut tgt = prefix.as_os_str().to_owned();
    tgt.push(".tgt");
    (PathBuf::from(src), PathBuf::from(tgt))
}

pub fn read(path: impl AsRef<Path>, kind: CorpusKind) -> Result<Corpus> {
    match kind {
        CorpusKind::Mono => read_mono(path),
        CorpusKind::Parallel => read_parallel(path),
    }
}

/// Writes the canonical bytes. Parallel corpora are written as TSV, so a tab
/// inside a sentence is rejected.
pub fn write(c: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Entries::Parallel(pairs) = &c.entries {
        if let Some(i) = pairs
            .iter()
            .position(|p| p.src.as_str().contains('\t') || p.tgt.as_str().contains('\t'))
        {
            return Err(Error::InvalidSentence {
                line: i + 1,
                reason: "tab inside a parallel sentence cannot be written as TSV".into(),
            });
        }
    }
    write_bytes(path, &c.to_bytes())
}

/// Writes a parallel corpus as `<prefix>.src` and `<prefix>.tgt`.
pub fn write_parallel_files(c: &Corpus, prefix: impl AsRef<Path>) -> Result<()> {
    let (src_path, tgt_path) = side_paths(prefix.as_ref());
    write_bytes(&src_path, &c.sources()?.to_bytes())?;
    write_bytes(&tgt_path, &c.targets()?.to_bytes())
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
    let mut p = path.as_ref().as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

/// Writes the corpus and its `<path>.manifest.json` sidecar.
pub fn write_with_manifest(c: &Corpus, path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    write(c, path)?;
    let manifest = c.manifest();
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_bytes(&sidecar_path(path), &json)?;
    Ok(manifest)
}

/// Reads a corpus back together with the provenance and seed recorded in its
/// sidecar, if one exists.
pub fn read_with_manifest(path: impl AsRef<Path>, kind: CorpusKind) -> Result<Corpus> {
    let path = path.as_ref();
    let corpus = read(path, kind)?;
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(corpus);
    }
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    let m: CorpusManifest = serde_json::from_slice(&bytes)?;
    if m.kind != kind {
        return Err(Error::KindMismatch {
            expected: kind,
            found: m.kind,
        });
    }
    Ok(corpus.with_provenance_set(m.provenance).with_seed(m.seed))
}
