//! Stage operations. Each op declares its input and output roles and the
//! parameters it accepts; `execute` maps resolved inputs to named outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{self, AlignmentModel, ModelKind};
use crate::augment::{self, build_schedule, NoiseOp, NoiseSpec, ScheduleDatasets, ScheduleKind, TrainingSchedule};
use crate::corpus::{self, Corpus, CorpusKind, Provenance};
use crate::error::{Error, Result};
use crate::lm::{LmConfig, NgramModel, Smoothing};
use crate::postprocess;
use crate::select::{self, FilterSpec, SelectionMode, Slot};
use crate::selftrain::{self, CommandTranslator, DictionaryTranslator, IdentityTranslator, RoundInputs, RoundLedger, RoundPlan, TeacherDirection, Translator};
use crate::text::{self, BpeModel, TruecaseMode, TruecaseModel};
use crate::toydata::ToyLanguage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Mono,
    Parallel,
    Alignment,
    Lm,
    Bpe,
    Truecase,
    Text,
}

#[derive(Clone, Debug)]
pub enum Artifact {
    Corpus(Corpus),
    Alignment(AlignmentModel),
    Lm(NgramModel),
    Bpe(BpeModel),
    Truecase(TruecaseModel),
    Text(String),
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::Corpus(c) => match c.kind() {
                CorpusKind::Mono => ArtifactKind::Mono,
                CorpusKind::Parallel => ArtifactKind::Parallel,
            },
            Artifact::Alignment(_) => ArtifactKind::Alignment,
            Artifact::Lm(_) => ArtifactKind::Lm,
            Artifact::Bpe(_) => ArtifactKind::Bpe,
            Artifact::Truecase(_) => ArtifactKind::Truecase,
            Artifact::Text(_) => ArtifactKind::Text,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Artifact::Corpus(c) => c.to_bytes(),
            Artifact::Alignment(m) => m.to_json().into_bytes(),
            Artifact::Lm(m) => m.to_text().into_bytes(),
            Artifact::Bpe(m) => m.to_text().into_bytes(),
            Artifact::Truecase(m) => m.to_text().into_bytes(),
            Artifact::Text(s) => s.clone().into_bytes(),
        }
    }

    pub fn load(path: &Path, kind: ArtifactKind) -> Result<Self> {
        Ok(match kind {
            ArtifactKind::Mono => Artifact::Corpus(corpus::read(path, CorpusKind::Mono)?),
            ArtifactKind::Parallel => Artifact::Corpus(corpus::read(path, CorpusKind::Parallel)?),
            ArtifactKind::Alignment => Artifact::Alignment(AlignmentModel::load(path)?),
            ArtifactKind::Lm => Artifact::Lm(NgramModel::load(path)?),
            ArtifactKind::Bpe => Artifact::Bpe(BpeModel::load(path)?),
            ArtifactKind::Truecase => Artifact::Truecase(TruecaseModel::load(path)?),
            ArtifactKind::Text => Artifact::Text(std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Role {
    pub name: &'static str,
    pub required: bool,
}

const fn req(name: &'static str) -> Role {
    Role { name, required: true }
}

const fn opt(name: &'static str) -> Role {
    Role { name, required: false }
}

#[derive(Clone, Copy, Debug)]
pub struct OpSpec {
    pub name: &'static str,
    pub inputs: &'static [Role],
    pub outputs: &'static [Role],
    pub params: &'static [&'static str],
}

const CORPUS_IN: &[Role] = &[req("corpus")];
const CORPUS_OUT: &[Role] = &[req("corpus")];
const FILTER_PARAMS: [&str; 3] = ["max_illegal_char_ratio", "min_words", "max_words"];

pub const OPS: &[OpSpec] = &[
    OpSpec {
        name: "toy.generate",
        inputs: &[],
        outputs: &[opt("parallel"), opt("mono_src"), opt("mono_tgt")],
        params: &["vocab", "parallel", "mono_src", "mono_tgt", "ambiguity", "min_len", "max_len", "language_seed"],
    },
    OpSpec { name: "corpus.swap", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &[] },
    OpSpec { name: "corpus.concat", inputs: &[req("a"), req("b")], outputs: CORPUS_OUT, params: &[] },
    OpSpec { name: "corpus.upsample", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &["factor"] },
    OpSpec { name: "corpus.dedup", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &[] },
    OpSpec { name: "corpus.shuffle", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &[] },
    OpSpec {
        name: "corpus.split",
        inputs: CORPUS_IN,
        outputs: &[req("train"), opt("valid"), opt("test")],
        params: &["valid", "test"],
    },
    OpSpec { name: "corpus.side", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &["side"] },
    OpSpec { name: "text.tokenize", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &[] },
    OpSpec { name: "text.truecase", inputs: CORPUS_IN, outputs: &[req("corpus"), opt("model")], params: &[] },
    OpSpec { name: "text.bpe", inputs: CORPUS_IN, outputs: &[req("corpus"), opt("model")], params: &["merges", "marker"] },
    OpSpec { name: "augment.bidir", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &[] },
    OpSpec {
        name: "augment.denoise",
        inputs: CORPUS_IN,
        outputs: &[req("corpus"), opt("report")],
        params: &["operations", "edits", "pool"],
    },
    OpSpec { name: "augment.tag", inputs: CORPUS_IN, outputs: CORPUS_OUT, params: &["tag"] },
    OpSpec {
        name: "augment.schedule",
        inputs: &[opt("bidirectional"), opt("denoising"), req("forward")],
        outputs: &[req("schedule")],
        params: &["kind", "total_steps"],
    },
    OpSpec {
        name: "lm.train",
        inputs: CORPUS_IN,
        outputs: &[req("model")],
        params: &["order", "smoothing", "discount", "k", "min_count", "side"],
    },
    OpSpec {
        name: "select.filter",
        inputs: CORPUS_IN,
        outputs: &[req("corpus"), opt("report")],
        params: &FILTER_PARAMS,
    },
    OpSpec {
        name: "select.topk",
        inputs: &[req("corpus"), req("lm_in"), req("lm_gen")],
        outputs: &[req("corpus"), opt("scores")],
        params: &["k", "max_score", "max_illegal_char_ratio", "min_words", "max_words"],
    },
    OpSpec {
        name: "align.train",
        inputs: CORPUS_IN,
        outputs: &[req("model")],
        params: &["model", "iterations", "reverse"],
    },
    OpSpec {
        name: "align.complexity",
        inputs: &[req("corpus"), req("model")],
        outputs: &[req("report")],
        params: &[],
    },
    OpSpec {
        name: "selftrain.round",
        inputs: &[req("parallel"), opt("mono_src"), opt("mono_tgt"), opt("previous"), opt("forward"), opt("backward")],
        outputs: &[req("combined"), opt("ledger")],
        params: &["round", "upsample", "teacher", "forward_command", "backward_command"],
    },
    OpSpec {
        name: "selftrain.transductive",
        inputs: &[req("sources"), opt("forward")],
        outputs: &[req("corpus"), opt("schedule")],
        params: &["teacher", "forward_command", "dataset"],
    },
    OpSpec {
        name: "post.fix_numbers",
        inputs: &[req("source"), req("hypotheses")],
        outputs: &[req("corpus"), opt("report")],
        params: &[],
    },
];

pub fn spec(op: &str) -> Option<&'static OpSpec> {
    OPS.iter().find(|s| s.name == op)
}

/// Typed access to a stage's parameter table.
pub struct Params<'a> {
    stage: &'a str,
    table: &'a toml::Table,
}

impl<'a> Params<'a> {
    pub fn new(stage: &'a str, table: &'a toml::Table) -> Self {
        Params { stage, table }
    }

    fn bad(&self, key: &str, reason: impl Into<String>) -> Error {
        Error::Config {
            stage: self.stage.to_owned(),
            field: format!("params.{key}"),
            reason: reason.into(),
        }
    }

    pub fn get<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v.clone().try_into().map(Some).map_err(|e| self.bad(key, e.to_string())),
        }
    }

    pub fn or<T: for<'de> Deserialize<'de>>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn required<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| self.bad(key, "required"))
    }

    fn parse<T: std::str::FromStr<Err = Error>>(&self, key: &str, default: &str) -> Result<T> {
        let s: String = self.or(key, default.to_owned())?;
        s.parse().map_err(|e: Error| self.bad(key, e.to_string()))
    }
}

/// What one stage produced: role → artifact, plus an optional ledger.
pub struct Produced {
    pub outputs: BTreeMap<String, Artifact>,
    pub ledger: Option<RoundLedger>,
}

pub struct Inputs<'a> {
    stage: &'a str,
    map: BTreeMap<&'a str, (&'a str, &'a Artifact)>,
}

impl<'a> Inputs<'a> {
    pub fn new(stage: &'a str, map: BTreeMap<&'a str, (&'a str, &'a Artifact)>) -> Self {
        Inputs { stage, map }
    }

    fn bad(&self, role: &str, reason: String) -> Error {
        Error::Config {
            stage: self.stage.to_owned(),
            field: format!("inputs.{role}"),
            reason,
        }
    }

    fn get(&self, role: &str) -> Option<&'a Artifact> {
        self.map.get(role).map(|(_, a)| *a)
    }

    fn name(&self, role: &str) -> Option<&'a str> {
        self.map.get(role).map(|(n, _)| *n)
    }

    fn corpus(&self, role: &str) -> Result<&'a Corpus> {
        match self.get(role) {
            Some(Artifact::Corpus(c)) => Ok(c),
            Some(other) => Err(self.bad(role, format!("expected a corpus, got {:?}", other.kind()))),
            None => Err(self.bad(role, "required".into())),
        }
    }

    fn alignment(&self, role: &str) -> Result<Option<&'a AlignmentModel>> {
        match self.get(role) {
            Some(Artifact::Alignment(m)) => Ok(Some(m)),
            Some(other) => Err(self.bad(role, format!("expected an alignment model, got {:?}", other.kind()))),
            None => Ok(None),
        }
    }

    fn lm(&self, role: &str) -> Result<&'a NgramModel> {
        match self.get(role) {
            Some(Artifact::Lm(m)) => Ok(m),
            Some(other) => Err(self.bad(role, format!("expected a language model, got {:?}", other.kind()))),
            None => Err(self.bad(role, "required".into())),
        }
    }
}

fn one(role: &str, a: Artifact) -> Produced {
    Produced {
        outputs: BTreeMap::from([(role.to_owned(), a)]),
        ledger: None,
    }
}

fn json<T: Serialize>(v: &T) -> Artifact {
    Artifact::Text(serde_json::to_string_pretty(v).expect("serializes") + "\n")
}

fn filter_spec(p: &Params<'_>) -> Result<FilterSpec> {
    let d = FilterSpec::default();
    Ok(FilterSpec {
        max_illegal_char_ratio: p.or("max_illegal_char_ratio", d.max_illegal_char_ratio)?,
        min_words: p.or("min_words", d.min_words)?,
        max_words: p.or("max_words", d.max_words)?,
    })
}

fn teacher(
    p: &Params<'_>,
    direction: TeacherDirection,
    model: Option<&AlignmentModel>,
    role: &str,
) -> Result<Box<dyn Translator>> {
    let kind: String = p.or("teacher", "dictionary".to_owned())?;
    let cmd_key = match direction {
        TeacherDirection::Forward => "forward_command",
        TeacherDirection::Backward => "backward_command",
    };
    match kind.as_str() {
        "identity" => Ok(Box::new(IdentityTranslator(direction))),
        "dictionary" => {
            let m = model.ok_or_else(|| p.bad("teacher", format!("the dictionary teacher needs input `{role}`")))?;
            Ok(Box::new(DictionaryTranslator::from_model(m, direction)))
        }
        "command" => {
            let argv: Vec<String> = p.required(cmd_key)?;
            let (program, args) = argv.split_first().ok_or_else(|| p.bad(cmd_key, "empty command"))?;
            Ok(Box::new(CommandTranslator {
                direction,
                program: program.clone(),
                args: args.to_vec(),
            }))
        }
        other => Err(p.bad("teacher", format!("unknown teacher `{other}` (dictionary, identity, command)"))),
    }
}

pub fn execute(op: &str, p: &Params<'_>, inputs: &Inputs<'_>, outputs: &BTreeMap<String, String>, seed: u64) -> Result<Produced> {
    let wants = |role: &str| outputs.contains_key(role);
    let corpus_out = |c: Corpus| Ok(one("corpus", Artifact::Corpus(c)));
    match op {
        "toy.generate" => {
            let lang = ToyLanguage::new(p.or("vocab", 2000)?, p.or("language_seed", seed)?)
                .with_lengths(p.or("min_len", 3)?, p.or("max_len", 12)?)
                .with_ambiguity(p.or("ambiguity", 0.15)?);
            let mut out = BTreeMap::new();
            if wants("parallel") {
                out.insert("parallel".into(), Artifact::Corpus(lang.parallel(p.required("parallel")?, seed)));
            }
            if wants("mono_src") {
                out.insert("mono_src".into(), Artifact::Corpus(lang.mono_src(p.required("mono_src")?, seed)));
            }
            if wants("mono_tgt") {
                out.insert("mono_tgt".into(), Artifact::Corpus(lang.mono_tgt(p.required("mono_tgt")?, seed)));
            }
            Ok(Produced { outputs: out, ledger: None })
        }
        "corpus.swap" => corpus_out(corpus::swap_directions(inputs.corpus("corpus")?)?),
        "corpus.concat" => corpus_out(corpus::concat(inputs.corpus("a")?, inputs.corpus("b")?)?),
        "corpus.upsample" => corpus_out(corpus::upsample(inputs.corpus("corpus")?, p.required("factor")?)?),
        "corpus.dedup" => corpus_out(corpus::dedup(inputs.corpus("corpus")?)),
        "corpus.shuffle" => corpus_out(corpus::shuffle(inputs.corpus("corpus")?, seed)),
        "corpus.split" => {
            let s = corpus::split_random(inputs.corpus("corpus")?, p.or("valid", 0)?, p.or("test", 0)?, seed)?;
            let mut out = BTreeMap::from([("train".to_owned(), Artifact::Corpus(s.train))]);
            if wants("valid") {
                out.insert("valid".into(), Artifact::Corpus(s.valid));
            }
            if wants("test") {
                out.insert("test".into(), Artifact::Corpus(s.test));
            }
            Ok(Produced { outputs: out, ledger: None })
        }
        "corpus.side" => {
            let c = inputs.corpus("corpus")?;
            match p.required::<String>("side")?.as_str() {
                "src" => corpus_out(c.sources()?),
                "tgt" => corpus_out(c.targets()?),
                other => Err(p.bad("side", format!("`{other}` is not src or tgt"))),
            }
        }
        "text.tokenize" => corpus_out(map_sentences(inputs.corpus("corpus")?, text::tokenize)),
        "text.truecase" => {
            let c = inputs.corpus("corpus")?;
            let model = TruecaseModel::train(c);
            let cased = map_sentences(c, |s| text::truecase(s, &model, TruecaseMode::Apply).sentence);
            let mut produced = one("corpus", Artifact::Corpus(cased));
            if wants("model") {
                produced.outputs.insert("model".into(), Artifact::Truecase(model));
            }
            Ok(produced)
        }
        "text.bpe" => {
            let c = inputs.corpus("corpus")?;
            let model = text::learn_bpe(c, p.or("merges", text::DEFAULT_MERGES)?)?;
            let marker: String = p.or("marker", text::DEFAULT_MARKER.to_owned())?;
            let model = if marker == model.marker() { model } else { BpeModel::new(model.merges().to_vec(), marker)? };
            let segmented = map_sentences(c, |s| model.apply(s));
            let mut produced = one("corpus", Artifact::Corpus(segmented));
            if wants("model") {
                produced.outputs.insert("model".into(), Artifact::Bpe(model));
            }
            Ok(produced)
        }
        "augment.bidir" => corpus_out(augment::build_bidirectional(inputs.corpus("corpus")?)?),
        "augment.denoise" => {
            let mut spec = NoiseSpec::new(seed);
            if let Some(ops) = p.get::<Vec<NoiseOp>>("operations")? {
                spec = spec.with_operations(&ops);
            }
            spec.edits_per_sentence = p.or("edits", 1)?;
            spec.replacement_pool = p.or("pool", spec.replacement_pool)?;
            let (c, report) = augment::build_denoising(inputs.corpus("corpus")?, &spec)?;
            let mut produced = one("corpus", Artifact::Corpus(c));
            if wants("report") {
                produced.outputs.insert("report".into(), json(&report));
            }
            Ok(produced)
        }
        "augment.tag" => {
            let tag: String = p.or("tag", augment::DEFAULT_BT_TAG.to_owned())?;
            corpus_out(augment::tag_back_translation(inputs.corpus("corpus")?, &tag)?)
        }
        "augment.schedule" => {
            let kind: ScheduleKind = p.parse("kind", "bipt")?;
            let datasets = ScheduleDatasets {
                bidirectional: inputs.name("bidirectional").map(str::to_owned),
                denoising: inputs.name("denoising").map(str::to_owned),
                forward: inputs.name("forward").map(str::to_owned),
            };
            let schedule: TrainingSchedule = build_schedule(kind, p.or("total_steps", 0)?, &datasets)?;
            Ok(one("schedule", Artifact::Text(schedule.to_json() + "\n")))
        }
        "lm.train" => {
            let c = inputs.corpus("corpus")?;
            let side: Option<String> = p.get("side")?;
            let c = match (c.kind(), side.as_deref()) {
                (CorpusKind::Mono, None) => c.clone(),
                (CorpusKind::Parallel, Some("src")) => c.sources()?,
                (CorpusKind::Parallel, Some("tgt")) => c.targets()?,
                _ => return Err(p.bad("side", "parallel input needs side = \"src\" or \"tgt\"; mono input takes none")),
            };
            let smoothing = match p.or("smoothing", "kneser_ney".to_owned())?.as_str() {
                "kneser_ney" => Smoothing::KneserNey { discount: p.or("discount", 0.75)? },
                "add_k" => Smoothing::AddK { k: p.or("k", 1.0)? },
                other => return Err(p.bad("smoothing", format!("unknown smoothing `{other}` (kneser_ney, add_k)"))),
            };
            let cfg = LmConfig::new(p.or("order", 5)?, smoothing).with_min_count(p.or("min_count", 2)?);
            Ok(one("model", Artifact::Lm(NgramModel::train(&c, cfg)?)))
        }
        "select.filter" => {
            let (c, report) = select::rule_filter(inputs.corpus("corpus")?, &filter_spec(p)?)?;
            let mut produced = one("corpus", Artifact::Corpus(c));
            if wants("report") {
                produced.outputs.insert("report".into(), json(&report));
            }
            Ok(produced)
        }
        "select.topk" => {
            let slot = Slot {
                name: "ngram",
                lm_in: inputs.lm("lm_in")?,
                lm_gen: inputs.lm("lm_gen")?,
            };
            let mode = match p.get::<f64>("max_score")? {
                Some(max_score) => SelectionMode::Thresholds { max_score },
                None => SelectionMode::FilterThenRank,
            };
            let sel = select::select_topk_slots(inputs.corpus("corpus")?, &[slot], &filter_spec(p)?, mode, p.required("k")?)?;
            let mut produced = one("corpus", Artifact::Corpus(sel.selected));
            if wants("scores") {
                produced.outputs.insert("scores".into(), Artifact::Text(select::scored_dump(&sel.ranked)));
            }
            Ok(produced)
        }
        "align.train" => {
            let c = inputs.corpus("corpus")?;
            let c = if p.or("reverse", false)? { corpus::swap_directions(c)? } else { c.clone() };
            let kind: ModelKind = p.parse("model", "ibm1")?;
            Ok(one("model", Artifact::Alignment(align::train_ibm(&c, kind, p.or("iterations", 5)?)?)))
        }
        "align.complexity" => {
            let m = inputs.alignment("model")?.ok_or_else(|| inputs.bad("model", "required".into()))?;
            let c = inputs.corpus("corpus")?;
            let value = align::corpus_complexity(m, c)?;
            Ok(one("report", json(&serde_json::json!({ "pairs": c.len(), "complexity": value }))))
        }
        "selftrain.round" => {
            let plan = RoundPlan {
                round: p.required("round")?,
                upsample: p.required("upsample")?,
                inputs: RoundInputs {
                    parallel: "parallel".into(),
                    mono_src: "mono_src".into(),
                    mono_tgt: "mono_tgt".into(),
                    previous: inputs.get("previous").map(|_| "previous".into()),
                },
            };
            let mut store = BTreeMap::new();
            for role in ["parallel", "mono_src", "mono_tgt", "previous"] {
                if inputs.get(role).is_some() {
                    store.insert(role.to_owned(), inputs.corpus(role)?.clone());
                }
            }
            let fwd = teacher(p, TeacherDirection::Forward, inputs.alignment("forward")?, "forward")?;
            let bwd = teacher(p, TeacherDirection::Backward, inputs.alignment("backward")?, "backward")?;
            let out = selftrain::run_round(&plan, &store, fwd.as_ref(), bwd.as_ref())?;
            let mut produced = one("combined", Artifact::Corpus(out.combined));
            if wants("ledger") {
                produced.outputs.insert("ledger".into(), Artifact::Text(out.ledger.to_json() + "\n"));
            }
            produced.ledger = Some(out.ledger);
            Ok(produced)
        }
        "selftrain.transductive" => {
            let t = teacher(p, TeacherDirection::Forward, inputs.alignment("forward")?, "forward")?;
            let name = outputs.get("corpus").cloned().unwrap_or_default();
            let dataset: String = p.or("dataset", name)?;
            let (c, stage) = selftrain::build_transductive(t.as_ref(), inputs.corpus("sources")?, &dataset)?;
            let mut produced = one("corpus", Artifact::Corpus(c));
            if wants("schedule") {
                let schedule = TrainingSchedule { stages: vec![stage] };
                produced.outputs.insert("schedule".into(), Artifact::Text(schedule.to_json() + "\n"));
            }
            Ok(produced)
        }
        "post.fix_numbers" => {
            let src = inputs.corpus("source")?.sentences()?;
            let hyp = inputs.corpus("hypotheses")?.sentences()?;
            if src.len() != hyp.len() {
                return Err(inputs.bad("hypotheses", format!("{} lines for {} sources", hyp.len(), src.len())));
            }
            let mut repairs = Vec::new();
            let fixed = src
                .iter()
                .zip(hyp)
                .enumerate()
                .map(|(i, (s, h))| {
                    let (out, r) = postprocess::fix_numbers_report(s, h, i);
                    repairs.extend(r);
                    out
                })
                .collect();
            let mut produced = one("corpus", Artifact::Corpus(Corpus::mono(fixed)));
            if wants("report") {
                produced.outputs.insert("report".into(), json(&repairs));
            }
            Ok(produced)
        }
        other => Err(Error::Config {
            stage: p.stage.to_owned(),
            field: "op".into(),
            reason: format!("unknown operation `{other}`"),
        }),
    }
}

/// Applies `f` to every sentence (both sides of a parallel corpus).
fn map_sentences(c: &Corpus, f: impl Fn(&corpus::Sentence) -> corpus::Sentence + Sync) -> Corpus {
    use rayon::prelude::*;
    let provenance = c.provenance().iter().copied();
    let out = match c.kind() {
        CorpusKind::Mono => Corpus::mono(c.sentences().expect("mono").par_iter().map(&f).collect()),
        CorpusKind::Parallel => Corpus::parallel(
            c.pairs()
                .expect("parallel")
                .par_iter()
                .map(|pair| corpus::SentencePair::new(f(&pair.src), f(&pair.tgt)))
                .collect(),
        ),
    };
    out.with_provenance_set(provenance).with_seed(c.seed())
}

/// Provenance flags a corpus output should carry after a reload.
pub fn provenance_of(a: &Artifact) -> Option<Vec<Provenance>> {
    match a {
        Artifact::Corpus(c) => Some(c.provenance().iter().copied().collect()),
        _ => None,
    }
}
