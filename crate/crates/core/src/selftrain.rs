//! Iterative bidirectional self-training and transductive fine-tune sets.
//!
//! Teachers are anything implementing [`Translator`]. A forward teacher maps
//! source-language text to target-language text, a backward teacher the
//! reverse. Synthetic pairs are always stored source→target, so backward
//! teacher output ends up on the source side (back-translation).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignmentModel;
use crate::augment::{Direction, ScheduleStage, Steps};
use crate::corpus::{self, Corpus, Provenance, Sentence, SentencePair};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherDirection {
    /// Source language to target language.
    Forward,
    /// Target language to source language.
    Backward,
}

pub trait Translator: Sync {
    fn direction(&self) -> TeacherDirection;

    /// One output per input, same order.
    fn translate(&self, batch: &[Sentence]) -> Result<Vec<Sentence>>;
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityTranslator(pub TeacherDirection);

impl Translator for IdentityTranslator {
    fn direction(&self) -> TeacherDirection {
        self.0
    }

    fn translate(&self, batch: &[Sentence]) -> Result<Vec<Sentence>> {
        Ok(batch.to_vec())
    }
}

/// Word-by-word lexical argmax of an alignment model; unknown words pass through.
#[derive(Clone, Debug)]
pub struct DictionaryTranslator {
    direction: TeacherDirection,
    table: BTreeMap<String, String>,
}

impl DictionaryTranslator {
    /// `model` must be trained in the teacher's direction (its source side is
    /// the language being translated from).
    pub fn from_model(model: &AlignmentModel, direction: TeacherDirection) -> Self {
        let table = model
            .source_words()
            .iter()
            .skip(1)
            .filter_map(|w| model.best_translation(w).map(|t| (w.clone(), t.to_owned())))
            .collect();
        DictionaryTranslator { direction, table }
    }

    pub fn lookup(&self, word: &str) -> Option<&str> {
        self.table.get(word).map(String::as_str)
    }

    pub fn translate_one(&self, s: &Sentence) -> Sentence {
        Sentence::from_tokens(s.tokens().map(|w| self.lookup(w).unwrap_or(w)))
    }
}

impl Translator for DictionaryTranslator {
    fn direction(&self) -> TeacherDirection {
        self.direction
    }

    fn translate(&self, batch: &[Sentence]) -> Result<Vec<Sentence>> {
        Ok(batch.par_iter().map(|s| self.translate_one(s)).collect())
    }
}

/// Runs an external program that reads one sentence per line on standard
/// input and writes one translation per line on standard output.
#[derive(Clone, Debug)]
pub struct CommandTranslator {
    pub direction: TeacherDirection,
    pub program: String,
    pub args: Vec<String>,
}

impl Translator for CommandTranslator {
    fn direction(&self) -> TeacherDirection {
        self.direction
    }

    fn translate(&self, batch: &[Sentence]) -> Result<Vec<Sentence>> {
        let fail = |what: &str, e: std::io::Error| Error::Translator(format!("{} {what}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| fail("spawn", e))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input: Vec<u8> = batch.iter().flat_map(|s| [s.as_str().as_bytes(), b"\n"].concat()).collect();
        let writer = std::thread::spawn(move || stdin.write_all(&input));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut out = Vec::with_capacity(batch.len());
        for line in BufReader::new(stdout).lines() {
            let line = line.map_err(|e| fail("read", e))?;
            out.push(Sentence::new(line)?);
        }
        writer
            .join()
            .map_err(|_| Error::Translator("stdin writer panicked".into()))?
            .map_err(|e| fail("write", e))?;
        let status = child.wait().map_err(|e| fail("wait", e))?;
        if !status.success() {
            return Err(Error::Translator(format!("{} exited with {status}", self.program)));
        }
        if out.len() != batch.len() {
            return Err(Error::TranslatorCount { expected: batch.len(), got: out.len() });
        }
        Ok(out)
    }
}

/// Translates every sentence of `c` and pairs it with its input, oriented
/// source→target. Flagged synthetic only.
pub fn generate_synthetic(t: &dyn Translator, c: &Corpus) -> Result<Corpus> {
    let inputs = c.sentences()?;
    let outputs = t.translate(inputs)?;
    if outputs.len() != inputs.len() {
        return Err(Error::TranslatorCount { expected: inputs.len(), got: outputs.len() });
    }
    let pairs = inputs
        .iter()
        .zip(outputs)
        .map(|(x, y)| match t.direction() {
            TeacherDirection::Forward => SentencePair::new(x.clone(), y),
            TeacherDirection::Backward => SentencePair::new(y, x.clone()),
        })
        .collect();
    Ok(Corpus::parallel(pairs).with_provenance(Provenance::Synthetic))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundInputs {
    /// Authentic parallel corpus; both sides are also translated in round 1.
    pub parallel: String,
    pub mono_src: String,
    pub mono_tgt: String,
    /// Previous round's combined corpus (round 2 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round: u32,
    pub upsample: usize,
    pub inputs: RoundInputs,
}

impl RoundPlan {
    pub fn validate(&self) -> Result<()> {
        if self.upsample < 1 {
            return Err(Error::param("upsample", "must be at least 1"));
        }
        match (self.round, &self.inputs.previous) {
            (1, _) => Ok(()),
            (2, Some(_)) => Ok(()),
            (2, None) => Err(Error::param("previous", "round 2 needs the previous combined corpus")),
            (r, _) => Err(Error::param("round", format!("{r} is not 1 or 2"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub row: String,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub round: u32,
    pub upsample: usize,
    pub rows: Vec<LedgerRow>,
}

impl RoundLedger {
    fn push(&mut self, row: &str, count: usize) {
        self.rows.push(LedgerRow { row: row.to_owned(), count });
    }

    pub fn get(&self, row: &str) -> Option<usize> {
        self.rows.iter().find(|r| r.row == row).map(|r| r.count)
    }

    /// Re-evaluates the count recurrences; returns the violated ones.
    pub fn check(&self) -> Vec<String> {
        let g = |r: &str| self.get(r).unwrap_or(usize::MAX);
        let mut bad = Vec::new();
        let mut expect = |name: &str, got: usize, want: usize| {
            if got != want {
                bad.push(format!("{name}: {got} != {want}"));
            }
        };
        expect("authentic.upsampled", g("authentic.upsampled"), g("authentic").saturating_mul(self.upsample));
        match self.round {
            1 => {
                let parts = ["synthetic.mono_tgt", "synthetic.mono_src", "synthetic.parallel_tgt", "synthetic.parallel_src"]
                    .iter()
                    .map(|r| g(r))
                    .fold(0usize, |a, b| a.saturating_add(b));
                expect("synthetic", g("synthetic"), parts);
                expect("combined", g("combined"), g("synthetic").saturating_add(g("authentic.upsampled")));
            }
            _ => {
                expect("refined", g("refined"), g("previous"));
                expect("concat", g("concat"), g("previous").saturating_add(g("refined")));
                expect("combined", g("combined"), g("concat").saturating_add(g("authentic.upsampled")));
            }
        }
        bad
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

#[derive(Clone, Debug)]
pub struct RoundOutput {
    pub combined: Corpus,
    pub ledger: RoundLedger,
}

fn resolve<'a>(store: &'a BTreeMap<String, Corpus>, name: &str) -> Result<&'a Corpus> {
    store
        .get(name)
        .ok_or_else(|| Error::MissingResource(format!("corpus `{name}`")))
}

/// One self-training round.
///
/// Round 1 translates monolingual target text and the authentic target side
/// with the backward teacher, monolingual source text and the authentic
/// source side with the forward teacher, and appends the authentic corpus
/// upsampled by the plan factor. Round 2 regenerates the targets of the
/// previous combined corpus with the forward teacher, appends that to the
/// previous corpus, then appends upsampled authentic data again.
pub fn run_round(
    plan: &RoundPlan,
    store: &BTreeMap<String, Corpus>,
    fwd: &dyn Translator,
    bwd: &dyn Translator,
) -> Result<RoundOutput> {
    plan.validate()?;
    if fwd.direction() != TeacherDirection::Forward || bwd.direction() != TeacherDirection::Backward {
        return Err(Error::param("teachers", "expected a forward and a backward teacher"));
    }
    let authentic = resolve(store, &plan.inputs.parallel)?;
    authentic.pairs()?;
    let mut ledger = RoundLedger {
        round: plan.round,
        upsample: plan.upsample,
        rows: Vec::new(),
    };
    let mut parts: Vec<Corpus> = Vec::new();
    if plan.round == 1 {
        let mono_src = resolve(store, &plan.inputs.mono_src)?;
        let mono_tgt = resolve(store, &plan.inputs.mono_tgt)?;
        let sources = [
            ("synthetic.mono_tgt", bwd, mono_tgt.clone()),
            ("synthetic.mono_src", fwd, mono_src.clone()),
            ("synthetic.parallel_tgt", bwd, authentic.targets()?),
            ("synthetic.parallel_src", fwd, authentic.sources()?),
        ];
        let mut synthetic = Corpus::empty(corpus::CorpusKind::Parallel).with_provenance(Provenance::Synthetic);
        for (row, teacher, input) in sources {
            let part = generate_synthetic(teacher, &input)?;
            ledger.push(row, part.len());
            synthetic = corpus::concat(&synthetic, &part)?;
        }
        ledger.push("synthetic", synthetic.len());
        parts.push(synthetic);
    } else {
        let previous = resolve(store, plan.inputs.previous.as_deref().expect("validated"))?;
        let refined = generate_synthetic(fwd, &previous.sources()?)?;
        ledger.push("previous", previous.len());
        ledger.push("refined", refined.len());
        ledger.push("concat", previous.len() + refined.len());
        parts.push(previous.clone());
        parts.push(refined);
    }
    let upsampled = corpus::upsample(authentic, plan.upsample)?;
    ledger.push("authentic", authentic.len());
    ledger.push("authentic.upsampled", upsampled.len());
    parts.push(upsampled);
    let mut combined = parts[0].clone();
    for p in &parts[1..] {
        combined = corpus::concat(&combined, p)?;
    }
    ledger.push("combined", combined.len());
    Ok(RoundOutput { combined, ledger })
}

/// Translates test-time sources with the forward teacher and returns the
/// pairs plus an open-ended forward fine-tune stage named `dataset`.
pub fn build_transductive(t: &dyn Translator, sources: &Corpus, dataset: &str) -> Result<(Corpus, ScheduleStage)> {
    if t.direction() != TeacherDirection::Forward {
        return Err(Error::param("translator", "transductive data needs a forward teacher"));
    }
    if sources.sentences()?.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let pairs = generate_synthetic(t, sources)?.with_provenance(Provenance::Transductive);
    let stage = ScheduleStage {
        dataset: dataset.to_owned(),
        steps: Steps::Open,
        direction: Direction::Forward,
    };
    Ok((pairs, stage))
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<RoundPlan> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{train_ibm, ModelKind};

    fn mono(lines: &[&str]) -> Corpus {
        Corpus::mono_from_strs(lines).unwrap()
    }

    #[test]
    fn identity_synthetic() {
        let out = generate_synthetic(&IdentityTranslator(TeacherDirection::Forward), &mono(&["a", "b"])).unwrap();
        assert_eq!(out.pairs().unwrap(), Corpus::parallel_from_strs(&[("a", "a"), ("b", "b")]).unwrap().pairs().unwrap());
        assert!(out.has(Provenance::Synthetic) && !out.has(Provenance::Authentic));
    }

    #[test]
    fn backward_output_goes_to_source() {
        struct Upper;
        impl Translator for Upper {
            fn direction(&self) -> TeacherDirection {
                TeacherDirection::Backward
            }
            fn translate(&self, batch: &[Sentence]) -> Result<Vec<Sentence>> {
                Ok(batch.iter().map(|s| Sentence::new(s.as_str().to_uppercase()).unwrap()).collect())
            }
        }
        let out = generate_synthetic(&Upper, &mono(&["hello"])).unwrap();
        assert_eq!(out.pairs().unwrap()[0], SentencePair::from_strs("HELLO", "hello").unwrap());
    }

    #[test]
    fn count_mismatch_is_error() {
        struct Short;
        impl Translator for Short {
            fn direction(&self) -> TeacherDirection {
                TeacherDirection::Forward
            }
            fn translate(&self, _: &[Sentence]) -> Result<Vec<Sentence>> {
                Ok(Vec::new())
            }
        }
        assert!(matches!(generate_synthetic(&Short, &mono(&["a"])), Err(Error::TranslatorCount { .. })));
    }

    #[test]
    fn command_translator() {
        let cat = CommandTranslator {
            direction: TeacherDirection::Forward,
            program: "cat".into(),
            args: vec![],
        };
        let out = generate_synthetic(&cat, &mono(&["x y", "", "z"])).unwrap();
        assert_eq!(out.targets().unwrap().sentences().unwrap(), mono(&["x y", "", "z"]).sentences().unwrap());
        let head = CommandTranslator {
            program: "head".into(),
            args: vec!["-n".into(), "1".into()],
            ..cat
        };
        assert!(generate_synthetic(&head, &mono(&["a", "b"])).is_err());
    }

    #[test]
    fn dictionary_matches_table() {
        let c = Corpus::parallel_from_strs(&[("das haus", "the house"), ("das buch", "the book"), ("ein buch", "a book")]).unwrap();
        let m = train_ibm(&c, ModelKind::Ibm1, 10).unwrap();
        let t = DictionaryTranslator::from_model(&m, TeacherDirection::Forward);
        for w in ["das", "haus", "buch", "ein"] {
            let row = m.row(w);
            let best = row.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(m.lexical(w, t.lookup(w).unwrap()), best);
        }
        assert_eq!(t.translate_one(&Sentence::new("das zzz").unwrap()).as_str(), "the zzz");
    }

    fn store() -> BTreeMap<String, Corpus> {
        let mut s = BTreeMap::new();
        s.insert("par".into(), Corpus::parallel_from_strs(&[("a", "x"), ("b", "y")]).unwrap().with_provenance(Provenance::Authentic));
        s.insert("msrc".into(), mono(&["c"]));
        s.insert("mtgt".into(), mono(&["z", "w", "v"]));
        s
    }

    #[test]
    fn rounds_follow_recurrences() {
        let mut s = store();
        let fwd = IdentityTranslator(TeacherDirection::Forward);
        let bwd = IdentityTranslator(TeacherDirection::Backward);
        let inputs = RoundInputs {
            parallel: "par".into(),
            mono_src: "msrc".into(),
            mono_tgt: "mtgt".into(),
            previous: None,
        };
        let r1 = run_round(&RoundPlan { round: 1, upsample: 4, inputs: inputs.clone() }, &s, &fwd, &bwd).unwrap();
        assert_eq!(r1.ledger.get("synthetic"), Some(3 + 1 + 2 + 2));
        assert_eq!(r1.ledger.get("combined"), Some(8 + 8));
        assert!(r1.ledger.check().is_empty());
        s.insert("r1".into(), r1.combined);
        let plan2 = RoundPlan { round: 2, upsample: 5, inputs: RoundInputs { previous: Some("r1".into()), ..inputs } };
        let r2 = run_round(&plan2, &s, &fwd, &bwd).unwrap();
        assert_eq!(r2.ledger.get("concat"), Some(32));
        assert_eq!(r2.ledger.get("combined"), Some(42));
        assert!(r2.ledger.check().is_empty());
        assert!(r2.combined.has(Provenance::Authentic) && r2.combined.has(Provenance::Synthetic));
    }

    #[test]
    fn missing_reference() {
        let plan = RoundPlan {
            round: 1,
            upsample: 1,
            inputs: RoundInputs {
                parallel: "nope".into(),
                mono_src: "msrc".into(),
                mono_tgt: "mtgt".into(),
                previous: None,
            },
        };
        let id = IdentityTranslator(TeacherDirection::Forward);
        let bid = IdentityTranslator(TeacherDirection::Backward);
        assert!(matches!(run_round(&plan, &store(), &id, &bid), Err(Error::MissingResource(_))));
    }

    #[test]
    fn transductive() {
        let (pairs, stage) = build_transductive(&IdentityTranslator(TeacherDirection::Forward), &mono(&["p", "q"]), "td").unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs.has(Provenance::Transductive));
        assert_eq!(stage.dataset, "td");
    }
}
