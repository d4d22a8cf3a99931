//! Command-line front end. Corpus arguments ending in `.tsv` (or naming a
//! `<prefix>.src`/`<prefix>.tgt` pair) are read as parallel, anything else
//! as one sentence per line; outputs use the same convention.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lowres_mt::align::{self, AlignmentModel, ModelKind};
use lowres_mt::augment::{self, NoiseOp, NoiseSpec, ScheduleDatasets, ScheduleKind};
use lowres_mt::corpus::{self, Corpus, CorpusKind, Provenance, Sentence, SentencePair};
use lowres_mt::lm::{self, LmConfig, NgramModel, Smoothing};
use lowres_mt::pipeline;
use lowres_mt::postprocess;
use lowres_mt::rerank::{self, Feature, FeatureResources, FeatureWeights, MiraConfig, MODEL_SCORE};
use lowres_mt::select::{self, FilterSpec, SelectionMode, Slot};
use lowres_mt::selftrain::{self, CommandTranslator, DictionaryTranslator, IdentityTranslator, RoundPlan, TeacherDirection, Translator};
use lowres_mt::text::{self, BpeModel, TruecaseMode, TruecaseModel};
use lowres_mt::{Error, Result};

#[derive(Parser)]
#[command(name = "lowres", version, about = "Corpus engineering for low-resource machine translation")]
struct Cli {
    /// Base seed for every random operation (overrides LOWRES_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Where to write the JSON manifest of the main output; for
    /// `pipeline verify`, the manifest to check.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Swap, concatenate, upsample, split and deduplicate corpora
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Tokenize, truecase and BPE-segment text
    #[command(subcommand)]
    Text(TextCmd),
    /// Bidirectional and denoising data, back-translation tags, training schedules
    #[command(subcommand)]
    Augment(AugmentCmd),
    /// Train and query n-gram language models
    #[command(subcommand)]
    Lm(LmCmd),
    /// Rule filtering and cross-entropy difference selection
    #[command(subcommand)]
    Select(SelectCmd),
    /// IBM Model 1/2 alignment and corpus complexity
    #[command(subcommand)]
    Align(AlignCmd),
    /// N-best features, MIRA tuning, reranking and BLEU
    #[command(subcommand)]
    Rerank(RerankCmd),
    /// Synthetic data generation and self-training rounds
    #[command(subcommand)]
    Selftrain(SelftrainCmd),
    /// Output post-processing: number repair and tag stripping
    #[command(subcommand)]
    Post(PostCmd),
    /// Run or verify a TOML pipeline
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Exchange source and target of every pair.
    Swap { input: PathBuf, output: PathBuf },
    /// Append `b` to `a`.
    Concat { a: PathBuf, b: PathBuf, output: PathBuf },
    /// Repeat the corpus `factor` times in block order.
    Upsample {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        factor: usize,
    },
    /// Seeded train/valid/test split.
    Split {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        valid: usize,
        #[arg(long, default_value_t = 0)]
        test: usize,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        valid_out: Option<PathBuf>,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Drop exact duplicate entries, keeping first occurrences.
    Dedup { input: PathBuf, output: PathBuf },
}

#[derive(Subcommand)]
enum TextCmd {
    Tokenize {
        input: PathBuf,
        output: PathBuf,
        /// Detokenize instead.
        #[arg(long)]
        revert: bool,
    },
    Truecase {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Learn the model from the input and save it first.
        #[arg(long)]
        learn: bool,
        #[arg(long)]
        revert: bool,
    },
    Bpe {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Learn a merge table from the input (saved to --model if given).
        #[arg(long)]
        learn: bool,
        #[arg(long, default_value_t = text::DEFAULT_MERGES)]
        merges: usize,
        #[arg(long, default_value = text::DEFAULT_MARKER)]
        marker: String,
        /// Undo segmentation; needs no model.
        #[arg(long)]
        revert: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Remove,
    Replace,
    SwapNearby,
}

#[derive(Subcommand)]
enum AugmentCmd {
    /// Pairs in both directions: the corpus followed by its swap.
    Bidir { input: PathBuf, output: PathBuf },
    /// (noised, clean) pairs from both sides of a parallel corpus.
    Denoise {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "remove,replace,swap-nearby")]
        ops: Vec<OpArg>,
        #[arg(long, default_value_t = 1)]
        edits: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Prefix every source with a back-translation tag.
    Tag {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = augment::DEFAULT_BT_TAG)]
        tag: String,
        /// Treat the input as synthetic even without a sidecar manifest saying so.
        #[arg(long)]
        synthetic: bool,
    },
    /// Write a training-schedule manifest.
    Schedule {
        output: PathBuf,
        #[arg(long, default_value = "bipt")]
        kind: String,
        #[arg(long, default_value_t = 0)]
        total_steps: u64,
        #[arg(long)]
        bidirectional: Option<String>,
        #[arg(long)]
        denoising: Option<String>,
        #[arg(long)]
        forward: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothingArg {
    Kn,
    AddK,
}

#[derive(Subcommand)]
enum LmCmd {
    Train {
        input: PathBuf,
        model: PathBuf,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, value_enum, default_value_t = SmoothingArg::Kn)]
        smoothing: SmoothingArg,
        #[arg(long, default_value_t = 0.75)]
        discount: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 2)]
        min_count: u64,
    },
    /// Per-sentence natural-log probability and cross-entropy (TSV).
    Score { model: PathBuf, input: PathBuf, output: PathBuf },
    Ppl { model: PathBuf, input: PathBuf },
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, default_value_t = 0.0)]
    max_illegal_ratio: f64,
    #[arg(long, default_value_t = 1)]
    min_words: usize,
    #[arg(long, default_value_t = 250)]
    max_words: usize,
}

impl FilterArgs {
    fn spec(&self) -> FilterSpec {
        FilterSpec {
            max_illegal_char_ratio: self.max_illegal_ratio,
            min_words: self.min_words,
            max_words: self.max_words,
        }
    }
}

#[derive(Subcommand)]
enum SelectCmd {
    /// Moore-Lewis scores, best first: `score<TAB>rank<TAB>sentence`.
    Score {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        lm_in: PathBuf,
        #[arg(long)]
        lm_gen: PathBuf,
    },
    Filter {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Keep the best k. Repeat --lm-in/--lm-gen for several model pairs
    /// (combined by rank sum).
    Topk {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, required = true)]
        lm_in: Vec<PathBuf>,
        #[arg(long, required = true)]
        lm_gen: Vec<PathBuf>,
        #[arg(short, long)]
        k: usize,
        /// Drop sentences scoring above this under any model pair before ranking.
        #[arg(long)]
        max_score: Option<f64>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AlignCmd {
    Train {
        input: PathBuf,
        model: PathBuf,
        #[arg(long, default_value = "ibm1")]
        kind: String,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        /// Train target→source.
        #[arg(long)]
        reverse: bool,
        /// Also write the lexical table as TSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Viterbi alignments in `src-tgt` (Pharaoh) format.
    Align { model: PathBuf, input: PathBuf, output: PathBuf },
    /// Length-normalized alignment log-score per pair.
    Score { model: PathBuf, input: PathBuf, output: PathBuf },
    Complexity { model: PathBuf, input: PathBuf },
}

#[derive(Subcommand)]
enum RerankCmd {
    /// Add feature columns to an n-best file.
    Features {
        nbest: PathBuf,
        output: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "wordcount")]
        features: Vec<String>,
        #[arg(long)]
        lm: Option<PathBuf>,
        #[arg(long)]
        r2l: Option<PathBuf>,
        #[arg(long)]
        t2s: Option<PathBuf>,
        #[arg(long)]
        align: Option<PathBuf>,
        #[arg(long, default_value_t = rerank::DEFAULT_BEAM)]
        beam: usize,
    },
    /// Tune weights with k-best batch MIRA.
    Mira {
        nbest: PathBuf,
        weights: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        c: f64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = rerank::DEFAULT_BEAM)]
        beam: usize,
    },
    /// Pick the best hypothesis per segment.
    Select {
        nbest: PathBuf,
        output: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = rerank::DEFAULT_BEAM)]
        beam: usize,
    },
    /// Corpus BLEU as JSON.
    Bleu { hyp: PathBuf, reference: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum TeacherKind {
    Dictionary,
    Identity,
    Command,
}

#[derive(Args)]
struct TeacherArgs {
    #[arg(long, value_enum, default_value_t = TeacherKind::Dictionary)]
    teacher: TeacherKind,
    /// Alignment model trained in the teacher's direction.
    #[arg(long)]
    model: Option<PathBuf>,
    /// External translator: program followed by its arguments.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    command: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Subcommand)]
enum SelftrainCmd {
    /// Translate a monolingual corpus into synthetic pairs.
    Synth {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum)]
        direction: DirectionArg,
        #[command(flatten)]
        teacher: TeacherArgs,
    },
    /// One self-training round from a JSON plan.
    Round {
        #[arg(long)]
        plan: PathBuf,
        /// NAME=PATH bindings for the corpora the plan refers to.
        #[arg(long = "corpus", value_parser = parse_binding)]
        corpora: Vec<(String, PathBuf)>,
        #[arg(long)]
        forward_model: Option<PathBuf>,
        #[arg(long)]
        backward_model: Option<PathBuf>,
        #[arg(long)]
        identity: bool,
        output: PathBuf,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Forward-translate test-time sources into a fine-tune set.
    Transductive {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        teacher: TeacherArgs,
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<String>,
    },
}

#[derive(Subcommand)]
enum PostCmd {
    /// de-BPE, de-truecase, detokenize, fix numbers.
    Chain {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        output: PathBuf,
        #[arg(long)]
        truecase_model: Option<PathBuf>,
        #[arg(long, default_value = text::DEFAULT_MARKER)]
        marker: String,
        /// Write every intermediate as JSON lines here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    FixNumbers {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    StripTag {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = augment::DEFAULT_BT_TAG)]
        tag: String,
    },
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run {
        config: PathBuf,
        /// Output directory (default: `out_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
    /// Re-hash recorded outputs and re-check ledgers; exit code 2 on drift.
    Verify { dir: PathBuf },
}

fn parse_binding(s: &str) -> std::result::Result<(String, PathBuf), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_owned(), PathBuf::from(v)))
        .ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))
}

fn kind_of(path: &Path) -> CorpusKind {
    let tsv = path.extension().is_some_and(|e| e == "tsv");
    let prefix = !path.exists() && {
        let mut src = path.as_os_str().to_owned();
        src.push(".src");
        Path::new(&src).exists()
    };
    if tsv || prefix {
        CorpusKind::Parallel
    } else {
        CorpusKind::Mono
    }
}

fn load(path: &Path) -> Result<Corpus> {
    corpus::read_with_manifest(path, kind_of(path))
}

fn save_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn save_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    save_bytes(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

struct Ctx {
    seed: u64,
    manifest: Option<PathBuf>,
}

impl Ctx {
    /// Writes a corpus in the format its path implies, plus the manifest if requested.
    fn store(&self, c: &Corpus, path: &Path) -> Result<()> {
        match (c.kind(), kind_of(path)) {
            (CorpusKind::Parallel, CorpusKind::Mono) if path.extension().is_none() => corpus::write_parallel_files(c, path)?,
            _ => corpus::write(c, path)?,
        }
        // The sidecar carries provenance to the next command.
        save_json(&corpus::sidecar_path(path), &c.manifest())?;
        if let Some(m) = &self.manifest {
            save_json(m, &c.manifest())?;
        }
        Ok(())
    }
}

fn sentences(path: &Path) -> Result<Vec<Sentence>> {
    Ok(corpus::read_mono(path)?.sentences()?.to_vec())
}

fn teacher(args: &TeacherArgs, direction: TeacherDirection) -> Result<Box<dyn Translator>> {
    Ok(match args.teacher {
        TeacherKind::Identity => Box::new(IdentityTranslator(direction)),
        TeacherKind::Dictionary => {
            let path = args.model.as_ref().ok_or_else(|| Error::MissingResource("--model for the dictionary teacher".into()))?;
            Box::new(DictionaryTranslator::from_model(&AlignmentModel::load(path)?, direction))
        }
        TeacherKind::Command => {
            let (program, rest) = args
                .command
                .split_first()
                .ok_or_else(|| Error::MissingResource("--command for the command teacher".into()))?;
            Box::new(CommandTranslator {
                direction,
                program: program.clone(),
                args: rest.to_vec(),
            })
        }
    })
}

fn direction(d: DirectionArg) -> TeacherDirection {
    match d {
        DirectionArg::Forward => TeacherDirection::Forward,
        DirectionArg::Backward => TeacherDirection::Backward,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = match cli.seed {
        Some(s) => s,
        None => pipeline::env_seed()?.unwrap_or(0),
    };
    let ctx = Ctx {
        seed,
        manifest: cli.manifest.clone(),
    };
    match cli.cmd {
        Cmd::Corpus(c) => corpus_cmd(c, &ctx)?,
        Cmd::Text(c) => text_cmd(c, &ctx)?,
        Cmd::Augment(c) => augment_cmd(c, &ctx)?,
        Cmd::Lm(c) => lm_cmd(c)?,
        Cmd::Select(c) => select_cmd(c, &ctx)?,
        Cmd::Align(c) => align_cmd(c)?,
        Cmd::Rerank(c) => rerank_cmd(c, &ctx)?,
        Cmd::Selftrain(c) => selftrain_cmd(c, &ctx)?,
        Cmd::Post(c) => post_cmd(c, &ctx)?,
        Cmd::Pipeline(c) => return pipeline_cmd(c, cli.seed, cli.manifest),
    }
    Ok(ExitCode::SUCCESS)
}

fn corpus_cmd(cmd: CorpusCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        CorpusCmd::Swap { input, output } => ctx.store(&corpus::swap_directions(&load(&input)?)?, &output),
        CorpusCmd::Concat { a, b, output } => ctx.store(&corpus::concat(&load(&a)?, &load(&b)?)?, &output),
        CorpusCmd::Upsample { input, output, factor } => ctx.store(&corpus::upsample(&load(&input)?, factor)?, &output),
        CorpusCmd::Dedup { input, output } => ctx.store(&corpus::dedup(&load(&input)?), &output),
        CorpusCmd::Split {
            input,
            valid,
            test,
            train_out,
            valid_out,
            test_out,
        } => {
            let s = corpus::split_random(&load(&input)?, valid, test, ctx.seed)?;
            ctx.store(&s.train, &train_out)?;
            if let Some(p) = valid_out {
                corpus::write(&s.valid, p)?;
            }
            if let Some(p) = test_out {
                corpus::write(&s.test, p)?;
            }
            eprintln!("train {} / valid {} / test {}", s.train.len(), s.valid.len(), s.test.len());
            Ok(())
        }
    }
}

fn map_corpus(c: &Corpus, f: impl Fn(&Sentence) -> Sentence) -> Result<Corpus> {
    let out = match c.kind() {
        CorpusKind::Mono => Corpus::mono(c.sentences()?.iter().map(&f).collect()),
        CorpusKind::Parallel => Corpus::parallel(c.pairs()?.iter().map(|p| SentencePair::new(f(&p.src), f(&p.tgt))).collect()),
    };
    Ok(out.with_provenance_set(c.provenance().iter().copied()))
}

fn text_cmd(cmd: TextCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        TextCmd::Tokenize { input, output, revert } => {
            let f = if revert { text::detokenize } else { text::tokenize };
            ctx.store(&map_corpus(&load(&input)?, f)?, &output)
        }
        TextCmd::Truecase {
            input,
            output,
            model,
            learn,
            revert,
        } => {
            let c = load(&input)?;
            let m = if learn {
                let m = TruecaseModel::train(&c);
                m.save(&model)?;
                m
            } else {
                TruecaseModel::load(&model)?
            };
            let mode = if revert { TruecaseMode::Revert } else { TruecaseMode::Apply };
            ctx.store(&map_corpus(&c, |s| text::truecase(s, &m, mode).sentence)?, &output)
        }
        TextCmd::Bpe {
            input,
            output,
            model,
            learn,
            merges,
            marker,
            revert,
        } => {
            let c = load(&input)?;
            if revert {
                return ctx.store(&map_corpus(&c, |s| text::revert_bpe(s, &marker))?, &output);
            }
            let m = if learn {
                let m = text::learn_bpe(&c, merges)?;
                let m = BpeModel::new(m.merges().to_vec(), marker)?;
                if m.merge_count() < merges {
                    eprintln!("learned {} of {merges} merges (pairs exhausted)", m.merge_count());
                }
                if let Some(p) = &model {
                    m.save(p)?;
                }
                m
            } else {
                let p = model.ok_or_else(|| Error::MissingResource("--model (or --learn)".into()))?;
                BpeModel::load(p)?
            };
            ctx.store(&map_corpus(&c, |s| m.apply(s))?, &output)
        }
    }
}

fn augment_cmd(cmd: AugmentCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        AugmentCmd::Bidir { input, output } => ctx.store(&augment::build_bidirectional(&load(&input)?)?, &output),
        AugmentCmd::Denoise {
            input,
            output,
            ops,
            edits,
            report,
        } => {
            let ops: Vec<NoiseOp> = ops
                .iter()
                .map(|o| match o {
                    OpArg::Remove => NoiseOp::Remove,
                    OpArg::Replace => NoiseOp::Replace,
                    OpArg::SwapNearby => NoiseOp::SwapNearby,
                })
                .collect();
            let mut spec = NoiseSpec::new(ctx.seed).with_operations(&ops);
            spec.edits_per_sentence = edits;
            let (c, rep) = augment::build_denoising(&load(&input)?, &spec)?;
            if let Some(p) = report {
                save_bytes(&p, rep.to_json().as_bytes())?;
            }
            ctx.store(&c, &output)
        }
        AugmentCmd::Tag {
            input,
            output,
            tag,
            synthetic,
        } => {
            let mut c = load(&input)?;
            if synthetic {
                c = c.with_provenance(Provenance::Synthetic);
            }
            ctx.store(&augment::tag_back_translation(&c, &tag)?, &output)
        }
        AugmentCmd::Schedule {
            output,
            kind,
            total_steps,
            bidirectional,
            denoising,
            forward,
        } => {
            let kind: ScheduleKind = kind.parse()?;
            let ds = ScheduleDatasets {
                bidirectional,
                denoising,
                forward: Some(forward),
            };
            let s = augment::build_schedule(kind, total_steps, &ds)?;
            save_bytes(&output, (s.to_json() + "\n").as_bytes())
        }
    }
}

fn lm_cmd(cmd: LmCmd) -> Result<()> {
    match cmd {
        LmCmd::Train {
            input,
            model,
            order,
            smoothing,
            discount,
            k,
            min_count,
        } => {
            let smoothing = match smoothing {
                SmoothingArg::Kn => Smoothing::KneserNey { discount },
                SmoothingArg::AddK => Smoothing::AddK { k },
            };
            let m = NgramModel::train(&corpus::read_mono(&input)?, LmConfig::new(order, smoothing).with_min_count(min_count))?;
            eprintln!("{} n-grams, vocabulary {}", m.ngram_count(), m.vocabulary().count());
            m.save(model)
        }
        LmCmd::Score { model, input, output } => {
            let m = NgramModel::load(model)?;
            let mut out = String::new();
            for s in sentences(&input)? {
                out.push_str(&format!("{}\t{}\n", m.logprob(&s), m.cross_entropy(&s)));
            }
            save_bytes(&output, out.as_bytes())
        }
        LmCmd::Ppl { model, input } => {
            let ppl = lm::perplexity(&NgramModel::load(model)?, &corpus::read_mono(&input)?)?;
            println!("{ppl}");
            Ok(())
        }
    }
}

fn select_cmd(cmd: SelectCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        SelectCmd::Score { input, output, lm_in, lm_gen } => {
            let c = corpus::read_mono(&input)?;
            let (a, b) = (NgramModel::load(lm_in)?, NgramModel::load(lm_gen)?);
            let slot = Slot { name: "ngram", lm_in: &a, lm_gen: &b };
            let spec = FilterSpec {
                max_illegal_char_ratio: 1.0,
                min_words: 0,
                max_words: usize::MAX,
            };
            let sel = select::select_topk_slots(&c, &[slot], &spec, SelectionMode::FilterThenRank, 0)?;
            select::write_scored_dump(&sel.ranked, output)
        }
        SelectCmd::Filter {
            input,
            output,
            filter,
            report,
        } => {
            let (c, rep) = select::rule_filter(&load(&input)?, &filter.spec())?;
            eprintln!("kept {} of {}", rep.kept, rep.input);
            if let Some(p) = report {
                save_json(&p, &rep)?;
            }
            ctx.store(&c, &output)
        }
        SelectCmd::Topk {
            input,
            output,
            lm_in,
            lm_gen,
            k,
            max_score,
            filter,
            scores,
        } => {
            if lm_in.len() != lm_gen.len() {
                return Err(Error::MissingResource("one --lm-gen per --lm-in".into()));
            }
            let ins = lm_in.iter().map(NgramModel::load).collect::<Result<Vec<_>>>()?;
            let gens = lm_gen.iter().map(NgramModel::load).collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = (0..ins.len()).map(|i| format!("slot{i}")).collect();
            let slots: Vec<Slot> = (0..ins.len())
                .map(|i| Slot {
                    name: &names[i],
                    lm_in: &ins[i],
                    lm_gen: &gens[i],
                })
                .collect();
            let mode = max_score.map_or(SelectionMode::FilterThenRank, |max_score| SelectionMode::Thresholds { max_score });
            let sel = select::select_topk_slots(&corpus::read_mono(&input)?, &slots, &filter.spec(), mode, k)?;
            if let Some(p) = scores {
                select::write_scored_dump(&sel.ranked, p)?;
            }
            eprintln!(
                "input {} -> filtered {} -> over threshold {} -> selected {}",
                sel.filter.input,
                sel.filter.kept,
                sel.over_threshold,
                sel.selected.len()
            );
            ctx.store(&sel.selected, &output)
        }
    }
}

fn align_cmd(cmd: AlignCmd) -> Result<()> {
    match cmd {
        AlignCmd::Train {
            input,
            model,
            kind,
            iterations,
            reverse,
            table,
        } => {
            let mut c = corpus::read_parallel(&input)?;
            if reverse {
                c = corpus::swap_directions(&c)?;
            }
            let kind: ModelKind = kind.parse()?;
            let m = align::train_ibm(&c, kind, iterations)?;
            for (i, ll) in m.log_likelihood().iter().enumerate() {
                eprintln!("iteration {i}: log-likelihood {ll:.4}");
            }
            if let Some(t) = table {
                save_bytes(&t, m.lexical_dump().as_bytes())?;
            }
            m.save(model)
        }
        AlignCmd::Align { model, input, output } => {
            let m = AlignmentModel::load(model)?;
            let c = corpus::read_parallel(&input)?;
            let out: String = c.pairs()?.iter().map(|p| align::pharaoh(&m.viterbi_align(p)) + "\n").collect();
            save_bytes(&output, out.as_bytes())
        }
        AlignCmd::Score { model, input, output } => {
            let m = AlignmentModel::load(model)?;
            let c = corpus::read_parallel(&input)?;
            let out: String = c.pairs()?.iter().map(|p| format!("{}\n", m.score_pair(p))).collect();
            save_bytes(&output, out.as_bytes())
        }
        AlignCmd::Complexity { model, input } => {
            let v = align::corpus_complexity(&AlignmentModel::load(model)?, &corpus::read_parallel(&input)?)?;
            println!("{v}");
            Ok(())
        }
    }
}

fn rerank_cmd(cmd: RerankCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        RerankCmd::Features {
            nbest,
            output,
            source,
            features,
            lm,
            r2l,
            t2s,
            align,
            beam,
        } => {
            let mut lists = rerank::read_nbest(&nbest, beam)?;
            rerank::attach_sources(&mut lists, &sentences(&source)?)?;
            let feats = features
                .iter()
                .map(|f| {
                    Feature::ALL
                        .into_iter()
                        .find(|x| x.name() == f)
                        .ok_or_else(|| Error::MissingResource(format!("feature `{f}` (lm, r2l, t2s, align, wordcount)")))
                })
                .collect::<Result<Vec<_>>>()?;
            let lm = lm.map(NgramModel::load).transpose()?;
            let r2l = r2l.map(NgramModel::load).transpose()?;
            let t2s = t2s.map(AlignmentModel::load).transpose()?;
            let al = align.map(AlignmentModel::load).transpose()?;
            let res = FeatureResources {
                lm: lm.as_ref(),
                r2l: r2l.as_ref(),
                t2s: t2s.as_ref(),
                align: al.as_ref(),
            };
            rerank::extract_features(&mut lists, &res, &feats)?;
            rerank::write_nbest(&lists, output)
        }
        RerankCmd::Mira {
            nbest,
            weights,
            refs,
            c,
            epochs,
            init,
            beam,
        } => {
            let lists = rerank::read_nbest(&nbest, beam)?;
            let refs = sentences(&refs)?;
            if refs.len() != lists.len() {
                return Err(Error::MissingResource(format!("{} references for {} segments", refs.len(), lists.len())));
            }
            let init = match init {
                Some(p) => FeatureWeights::load(p)?,
                None => {
                    let first = lists.first().and_then(|l| l.hypotheses.first()).ok_or(Error::EmptyCorpus)?;
                    let mut w = FeatureWeights::zeros(first.feature_names());
                    w.set(MODEL_SCORE, 1.0);
                    w
                }
            };
            let dev: Vec<_> = lists.into_iter().zip(refs).collect();
            let cfg = MiraConfig { c, epochs, seed: ctx.seed };
            let r = rerank::train_mira(&dev, &init, &cfg)?;
            eprintln!("{} updates{}", r.updates, if r.degenerate { " (degenerate dev set)" } else { "" });
            r.weights.save(weights)
        }
        RerankCmd::Select {
            nbest,
            output,
            weights,
            beam,
        } => {
            let lists = rerank::read_nbest(&nbest, beam)?;
            let w = FeatureWeights::load(weights)?;
            let mut out = String::new();
            for nb in &lists {
                out.push_str(nb.hypotheses[rerank::rerank(nb, &w)?].text.as_str());
                out.push('\n');
            }
            save_bytes(&output, out.as_bytes())
        }
        RerankCmd::Bleu { hyp, reference } => {
            let score = rerank::corpus_bleu(&sentences(&hyp)?, &sentences(&reference)?)?;
            println!("{}", serde_json::to_string_pretty(&score)?);
            Ok(())
        }
    }
}

fn selftrain_cmd(cmd: SelftrainCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        SelftrainCmd::Synth {
            input,
            output,
            direction: d,
            teacher: t,
        } => {
            let t = teacher(&t, direction(d))?;
            ctx.store(&selftrain::generate_synthetic(t.as_ref(), &corpus::read_mono(&input)?)?, &output)
        }
        SelftrainCmd::Round {
            plan,
            corpora,
            forward_model,
            backward_model,
            identity,
            output,
            ledger,
        } => {
            let plan: RoundPlan = selftrain::load_plan(plan)?;
            let store = corpora
                .into_iter()
                .map(|(name, path)| Ok((name, load(&path)?)))
                .collect::<Result<_>>()?;
            let pick = |model: &Option<PathBuf>, dir| {
                let args = TeacherArgs {
                    teacher: if identity { TeacherKind::Identity } else { TeacherKind::Dictionary },
                    model: model.clone(),
                    command: Vec::new(),
                };
                teacher(&args, dir)
            };
            let fwd = pick(&forward_model, TeacherDirection::Forward)?;
            let bwd = pick(&backward_model, TeacherDirection::Backward)?;
            let out = selftrain::run_round(&plan, &store, fwd.as_ref(), bwd.as_ref())?;
            for row in &out.ledger.rows {
                eprintln!("{:<24} {:>12}", row.row, row.count);
            }
            if let Some(p) = ledger {
                save_bytes(&p, out.ledger.to_json().as_bytes())?;
            }
            ctx.store(&out.combined, &output)
        }
        SelftrainCmd::Transductive {
            input,
            output,
            teacher: t,
            schedule,
            dataset,
        } => {
            let t = teacher(&t, TeacherDirection::Forward)?;
            let name = dataset.unwrap_or_else(|| output.display().to_string());
            let (c, stage) = selftrain::build_transductive(t.as_ref(), &corpus::read_mono(&input)?, &name)?;
            if let Some(p) = schedule {
                let mut s = if p.exists() {
                    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                    augment::TrainingSchedule::from_json(&text)?
                } else {
                    augment::TrainingSchedule { stages: Vec::new() }
                };
                s.stages.push(stage);
                save_bytes(&p, (s.to_json() + "\n").as_bytes())?;
            }
            ctx.store(&c, &output)
        }
    }
}

fn post_cmd(cmd: PostCmd, ctx: &Ctx) -> Result<()> {
    match cmd {
        PostCmd::Chain {
            source,
            hyp,
            output,
            truecase_model,
            marker,
            trace,
        } => {
            let (src, hyp) = (sentences(&source)?, sentences(&hyp)?);
            if src.len() != hyp.len() {
                return Err(Error::MissingResource(format!("{} hypotheses for {} sources", hyp.len(), src.len())));
            }
            let tc = truecase_model.map(TruecaseModel::load).transpose()?.unwrap_or_default();
            let traces: Vec<_> = src.iter().zip(&hyp).map(|(s, h)| postprocess::postprocess_chain(s, h, &tc, &marker)).collect();
            if let Some(p) = trace {
                let mut lines = String::new();
                for t in &traces {
                    lines.push_str(&serde_json::to_string(t)?);
                    lines.push('\n');
                }
                save_bytes(&p, lines.as_bytes())?;
            }
            ctx.store(&Corpus::mono(traces.into_iter().map(|t| t.output).collect()), &output)
        }
        PostCmd::FixNumbers { source, hyp, output, report } => {
            let (src, hyp) = (sentences(&source)?, sentences(&hyp)?);
            if src.len() != hyp.len() {
                return Err(Error::MissingResource(format!("{} hypotheses for {} sources", hyp.len(), src.len())));
            }
            let mut repairs = Vec::new();
            let mut fixed = Vec::with_capacity(src.len());
            for (i, (s, h)) in src.iter().zip(&hyp).enumerate() {
                let (out, r) = postprocess::fix_numbers_report(s, h, i);
                fixed.push(out);
                repairs.extend(r);
            }
            eprintln!("{} repairs", repairs.len());
            if let Some(p) = report {
                save_json(&p, &repairs)?;
            }
            ctx.store(&Corpus::mono(fixed), &output)
        }
        PostCmd::StripTag { input, output, tag } => {
            let c = load(&input)?;
            ctx.store(&map_corpus(&c, |s| postprocess::strip_tag(s, &tag))?, &output)
        }
    }
}

fn pipeline_cmd(cmd: PipelineCmd, seed: Option<u64>, manifest: Option<PathBuf>) -> Result<ExitCode> {
    match cmd {
        PipelineCmd::Run { config, out, resume } => {
            let seed = match seed {
                Some(s) => Some(s),
                None => pipeline::env_seed()?,
            };
            let m = pipeline::run_file(&config, out, seed, resume)?;
            for st in &m.stages {
                let counts: Vec<String> = st.outputs.iter().map(|o| format!("{}={}", o.name, o.count)).collect();
                eprintln!("{:<20} {:>7} ms  {}", st.name, st.wall_ms, counts.join(" "));
            }
            if let Some(p) = manifest {
                save_bytes(&p, m.to_json().as_bytes())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        PipelineCmd::Verify { dir } => {
            let path = manifest.unwrap_or_else(|| dir.join(pipeline::MANIFEST_FILE));
            let m = pipeline::PipelineManifest::load(&path)?;
            let report = pipeline::verify(&m, &dir);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
