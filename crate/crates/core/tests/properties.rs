//! Property suites for the invariants each module promises.

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use rand::Rng;

use lowres_mt::align::{self, ModelKind};
use lowres_mt::augment::{self, build_schedule, NoiseSpec, ScheduleDatasets, ScheduleKind, Steps};
use lowres_mt::corpus::{self, Corpus, Provenance, Sentence, SentencePair};
use lowres_mt::lm::{self, LmConfig, NgramModel, Smoothing, BOS, EOS};
use lowres_mt::postprocess;
use lowres_mt::rerank::{self, FeatureWeights, Hypothesis, MiraConfig, NBestList, MODEL_SCORE};
use lowres_mt::select::{self, FilterSpec, SelectionMode, Slot};
use lowres_mt::selftrain::{self, IdentityTranslator, RoundInputs, RoundPlan, TeacherDirection};
use lowres_mt::seed;
use lowres_mt::text;
use lowres_mt::toydata::ToyLanguage;

fn s(x: &str) -> Sentence {
    Sentence::new(x).unwrap()
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "the", "cat", "sat", "mat", "on", "x", "yy", "zzz", "house", "w"]).prop_map(str::to_owned)
}

fn sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(word(), 0..8).prop_map(|w| Sentence::from_tokens(w))
}

fn nonempty_sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(word(), 1..8).prop_map(|w| Sentence::from_tokens(w))
}

fn parallel() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((sentence(), sentence()), 0..30)
        .prop_map(|v| Corpus::parallel(v.into_iter().map(|(a, b)| SentencePair::new(a, b)).collect()))
}

fn nonempty_parallel() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((nonempty_sentence(), nonempty_sentence()), 1..30)
        .prop_map(|v| Corpus::parallel(v.into_iter().map(|(a, b)| SentencePair::new(a, b)).collect()))
}

fn multiset<T: Ord + Clone>(xs: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x.clone()).or_insert(0) += 1;
    }
    m
}

fn pair_strings(c: &Corpus) -> Vec<(String, String)> {
    c.pairs().unwrap().iter().map(|p| (p.src.as_str().to_owned(), p.tgt.as_str().to_owned())).collect()
}

// ------------------------------------------------------------------ corpus

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swap_is_an_involution(c in parallel()) {
        let twice = corpus::swap_directions(&corpus::swap_directions(&c).unwrap()).unwrap();
        prop_assert_eq!(pair_strings(&twice), pair_strings(&c));
    }

    #[test]
    fn concat_is_associative(a in parallel(), b in parallel(), c in parallel()) {
        let left = corpus::concat(&corpus::concat(&a, &b).unwrap(), &c).unwrap();
        let right = corpus::concat(&a, &corpus::concat(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left.to_bytes(), right.to_bytes());
    }

    #[test]
    fn upsample_has_k_copies(c in parallel(), k in 1usize..6) {
        let up = corpus::upsample(&c, k).unwrap();
        prop_assert_eq!(up.len(), k * c.len());
        let want: BTreeMap<_, _> = multiset(&pair_strings(&c)).into_iter().map(|(p, n)| (p, n * k)).collect();
        prop_assert_eq!(multiset(&pair_strings(&up)), want);
    }

    #[test]
    fn split_partitions_the_input(c in nonempty_parallel(), seed in any::<u64>(), nv in 0usize..5, nt in 0usize..5) {
        prop_assume!(nv + nt <= c.len());
        let sp = corpus::split_random(&c, nv, nt, seed).unwrap();
        prop_assert_eq!((sp.valid.len(), sp.test.len()), (nv, nt));
        let mut all = pair_strings(&sp.train);
        all.extend(pair_strings(&sp.valid));
        all.extend(pair_strings(&sp.test));
        prop_assert_eq!(multiset(&all), multiset(&pair_strings(&c)));
        let again = corpus::split_random(&c, nv, nt, seed).unwrap();
        prop_assert_eq!(again.train.to_bytes(), sp.train.to_bytes());
    }

    #[test]
    fn shuffle_is_seeded_permutation(c in parallel(), seed in any::<u64>()) {
        let a = corpus::shuffle(&c, seed);
        prop_assert_eq!(a.to_bytes(), corpus::shuffle(&c, seed).to_bytes());
        prop_assert_eq!(multiset(&pair_strings(&a)), multiset(&pair_strings(&c)));
    }
}

// -------------------------------------------------------------------- text

/// Well-formed running text: punctuation attached the way writers attach
/// it, balanced straight quotes, digit ranges.
fn tokenizer_fixture(n: usize) -> Vec<String> {
    let words = ["the", "House", "rain", "Siltala's", "well-known", "U.S", "mvua", "3.5", "10:30", "e-mail", "Dar", "ya", "didn't"];
    let mut rng = seed::rng(1_000);
    (0..n)
        .map(|_| {
            let mut out: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(1..14) {
                let w = words[rng.gen_range(0..words.len())].to_owned();
                let piece = match rng.gen_range(0..12) {
                    0 => format!("{w},"),
                    1 => format!("({w})"),
                    2 => format!("\"{w}\""),
                    3 => format!("{}-{}", rng.gen_range(1900..2030), rng.gen_range(0..100)),
                    4 => format!("${}", rng.gen_range(1..999)),
                    5 => format!("{}%", rng.gen_range(1..100)),
                    6 => format!("[{w}]"),
                    7 => format!("«{w}»"),
                    8 => format!("{w}..."),
                    9 => format!("\"{w} {w}\"."),
                    _ => w,
                };
                out.push(piece);
            }
            let end = [".", "?", "!", ""][rng.gen_range(0..4)];
            out.join(" ") + end
        })
        .collect()
}

#[test]
fn tokenizer_round_trip_fixture() {
    let lines = tokenizer_fixture(1_000);
    assert_eq!(lines.len(), 1_000);
    for line in &lines {
        let raw = s(line);
        let tok = text::tokenize(&raw);
        assert_eq!(text::detokenize(&tok), raw, "round trip via `{tok}`");
        assert_eq!(text::tokenize(&tok), tok, "tokenize not idempotent on `{line}`");
    }
}

fn toy_words() -> Corpus {
    ToyLanguage::new(300, 17).mono_src(800, 2)
}

#[test]
fn learn_bpe_is_deterministic() {
    let c = toy_words();
    let a = text::learn_bpe(&c, 300).unwrap();
    let b = text::learn_bpe(&c, 300).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path().join("a.bpe")).unwrap();
    b.save(dir.path().join("b.bpe")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("a.bpe")).unwrap(), std::fs::read(dir.path().join("b.bpe")).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bpe_round_trip_and_characters(words in prop::collection::vec("[a-z]{1,9}|[0-9]{1,4}|<BT>", 0..10)) {
        let bpe = text::learn_bpe(&toy_words(), 200).unwrap();
        let sent = Sentence::from_tokens(&words);
        let seg = bpe.apply(&sent);
        prop_assert_eq!(text::revert_bpe(&seg, bpe.marker()), sent.clone());
        let strip = |x: &str| x.replace(bpe.marker(), "").replace(' ', "");
        prop_assert_eq!(strip(seg.as_str()), strip(sent.as_str()));
    }
}

// ----------------------------------------------------------------- augment

/// Token-level edit distance with adjacent transpositions.
fn osa(a: &[&str], b: &[&str]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        d[i][0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let mut v = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]));
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = v;
        }
    }
    d[a.len()][b.len()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bidirectional_first_half_is_input(c in parallel()) {
        let b = augment::build_bidirectional(&c).unwrap();
        prop_assert_eq!(b.len(), 2 * c.len());
        prop_assert_eq!(&pair_strings(&b)[..c.len()], &pair_strings(&c)[..]);
    }

    #[test]
    fn denoising_pairs_are_one_edit_from_clean(c in nonempty_parallel(), seed in any::<u64>()) {
        let (d, _) = augment::build_denoising(&c, &NoiseSpec::new(seed)).unwrap();
        prop_assert_eq!(d.len(), 2 * c.len());
        let clean: Vec<String> = c.all_sentences().map(|x| x.as_str().to_owned()).collect();
        let targets: Vec<String> = d.pairs().unwrap().iter().map(|p| p.tgt.as_str().to_owned()).collect();
        prop_assert_eq!(multiset(&targets), multiset(&clean));
        for p in d.pairs().unwrap() {
            let (a, b): (Vec<&str>, Vec<&str>) = (p.src.tokens().collect(), p.tgt.tokens().collect());
            prop_assert_eq!(osa(&a, &b), 1, "`{}` vs `{}`", p.src, p.tgt);
        }
        let (again, _) = augment::build_denoising(&c, &NoiseSpec::new(seed)).unwrap();
        prop_assert_eq!(again.to_bytes(), d.to_bytes());
    }

    #[test]
    fn schedule_steps_sum_to_total(total in 0u64..1_000_000, kind in prop::sample::select(vec!["bipt", "dpt"])) {
        let ds = ScheduleDatasets {
            bidirectional: Some("b".into()),
            denoising: Some("d".into()),
            forward: Some("f".into()),
        };
        let sched = build_schedule(kind.parse::<ScheduleKind>().unwrap(), total, &ds).unwrap();
        let sum: u64 = sched
            .stages
            .iter()
            .map(|st| match st.steps {
                Steps::Fixed(n) => n,
                Steps::Open => panic!("fixed schedule has an open stage"),
            })
            .sum();
        prop_assert_eq!(sum, total);
    }
}

// ---------------------------------------------------------------------- lm

fn lm_corpora() -> (ToyLanguage, Corpus, Corpus) {
    let lang = ToyLanguage::new(200, 23);
    let train = lang.mono_tgt(3_000, 1);
    let held = lang.mono_tgt(300, 2);
    (lang, train, held)
}

fn models(train: &Corpus) -> Vec<NgramModel> {
    let mut out = Vec::new();
    for order in [1, 2, 3] {
        out.push(NgramModel::train(train, LmConfig::new(order, Smoothing::KneserNey { discount: 0.75 })).unwrap());
        out.push(NgramModel::train(train, LmConfig::new(order, Smoothing::AddK { k: 0.1 })).unwrap());
    }
    out
}

#[test]
fn lm_normalizes_on_sampled_contexts() {
    let (_, train, _) = lm_corpora();
    let mut rng = seed::rng(4);
    for m in models(&train) {
        let vocab: Vec<&str> = m.vocabulary().collect();
        let contexts = m.observed_contexts();
        let mut sample: Vec<Vec<&str>> = vec![Vec::new()];
        for _ in 0..1_000.min(contexts.len()) {
            sample.push(contexts[rng.gen_range(0..contexts.len())].clone());
        }
        for ctx in sample {
            let probs: Vec<f64> = vocab.iter().map(|w| m.logprob_next(&ctx, w).exp()).collect();
            let total: f64 = probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{:?}: context {ctx:?} sums to {total}", m.config());
            if matches!(m.config().smoothing, Smoothing::KneserNey { .. }) {
                assert!(probs.iter().all(|&p| p > 0.0), "zero probability under {ctx:?}");
            }
        }
    }
}

#[test]
fn lm_single_word_sentences_have_mass_at_most_one() {
    let (_, train, _) = lm_corpora();
    for m in models(&train) {
        let total: f64 = m.vocabulary().filter(|w| *w != EOS).map(|w| m.logprob(&s(w)).exp()).sum();
        assert!(total <= 1.0 + 1e-12, "{:?}: {total}", m.config());
    }
}

#[test]
fn lm_logprob_decomposes() {
    let (_, train, held) = lm_corpora();
    for m in models(&train) {
        for sent in held.sentences().unwrap().iter().take(50) {
            let toks: Vec<&str> = sent.tokens().collect();
            let mut ctx = vec![BOS];
            let mut total = 0.0;
            for t in toks.iter().copied().chain([EOS]) {
                total += m.logprob_next(&ctx, t);
                ctx.push(t);
            }
            assert_eq!(m.logprob(sent), total);
        }
    }
}

#[test]
fn lm_prefers_fluent_order_and_training_text() {
    // Toy sentences are bags of Zipf draws, so use a grammar with real word order.
    let grammar = |n: usize, seed_: u64| {
        let (det, adj, noun, verb) = (["the", "a", "every"], ["red", "old", "small", "quiet"], ["cat", "house", "river", "farmer", "road"], ["sees", "builds", "crosses", "likes"]);
        let mut rng = seed::rng(seed_);
        let sents = (0..n)
            .map(|_| {
                let mut t = vec![det[rng.gen_range(0..3)], adj[rng.gen_range(0..4)], noun[rng.gen_range(0..5)], verb[rng.gen_range(0..4)], det[rng.gen_range(0..3)], noun[rng.gen_range(0..5)]];
                if rng.gen_bool(0.3) {
                    t.extend(["near", det[rng.gen_range(0..3)], noun[rng.gen_range(0..5)]]);
                }
                Sentence::from_tokens(t)
            })
            .collect();
        Corpus::mono(sents)
    };
    let (train, held) = (grammar(2_000, 1), grammar(300, 2));
    let m = NgramModel::train(&train, LmConfig::new(3, Smoothing::KneserNey { discount: 0.75 })).unwrap();
    let mut rng = seed::rng(11);
    let shuffled: Vec<Sentence> = held
        .sentences()
        .unwrap()
        .iter()
        .map(|x| {
            let mut t: Vec<&str> = x.tokens().collect();
            for i in (1..t.len()).rev() {
                t.swap(i, rng.gen_range(0..=i));
            }
            Sentence::from_tokens(t)
        })
        .collect();
    let shuffled = Corpus::mono(shuffled);
    let (p_held, p_shuf, p_train) = (
        lm::perplexity(&m, &held).unwrap(),
        lm::perplexity(&m, &shuffled).unwrap(),
        lm::perplexity(&m, &train).unwrap(),
    );
    assert!(p_held < p_shuf, "held-out {p_held} vs shuffled {p_shuf}");
    assert!(p_train <= p_held, "train {p_train} vs held-out {p_held}");
}

// ------------------------------------------------------------------ select

#[test]
fn selection_ranking_properties() {
    let a = ToyLanguage::new(300, 1);
    let b = ToyLanguage::new(300, 2);
    let pool = corpus::concat(&a.mono_tgt(1_500, 1), &b.mono_tgt(1_500, 2)).unwrap();
    let cfg = LmConfig::new(2, Smoothing::KneserNey { discount: 0.75 }).with_min_count(1);
    let lm_in = NgramModel::train(&a.mono_tgt(1_000, 3), cfg).unwrap();
    let lm_gen = NgramModel::train(&pool, cfg).unwrap();
    let spec = FilterSpec { min_words: 4, ..FilterSpec::default() };
    let slot = Slot { name: "n", lm_in: &lm_in, lm_gen: &lm_gen };
    let sel = select::select_topk_slots(&pool, &[slot], &spec, SelectionMode::FilterThenRank, 1_000).unwrap();
    let scores: Vec<f64> = sel.ranked.iter().map(|r| r.ml_score).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));
    let max_selected = scores[..1_000].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_rejected = scores[1_000..].iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max_selected <= min_rejected);
    for r in &sel.ranked {
        let direct = lm_in.cross_entropy(&r.sentence) - lm_gen.cross_entropy(&r.sentence);
        assert_eq!(r.ml_score, direct);
        assert!(r.sentence.token_count() >= 4);
    }
    let again = select::select_topk_slots(&pool, &[slot], &spec, SelectionMode::FilterThenRank, 1_000).unwrap();
    assert_eq!(again.selected.to_bytes(), sel.selected.to_bytes());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rule_filter_is_idempotent(lines in prop::collection::vec("[a-z \u{1}\u{fffd}]{0,40}", 0..30), min in 0usize..3, max in 3usize..8) {
        let c = Corpus::mono(lines.iter().map(|l| Sentence::from_tokens(l.split_whitespace())).collect());
        let spec = FilterSpec { max_illegal_char_ratio: 0.1, min_words: min, max_words: max };
        let (once, _) = select::rule_filter(&c, &spec).unwrap();
        let (twice, rep) = select::rule_filter(&once, &spec).unwrap();
        prop_assert_eq!(once.to_bytes(), twice.to_bytes());
        prop_assert_eq!(rep.kept, once.len());
    }
}

// ------------------------------------------------------------------- align

#[test]
fn lexical_rows_normalize_after_every_iteration() {
    let c = ToyLanguage::new(100, 5).parallel(300, 1);
    for kind in [ModelKind::Ibm1, ModelKind::Ibm2] {
        for iters in 1..=4 {
            let m = align::train_ibm(&c, kind, iters).unwrap();
            for e in m.source_words() {
                let total: f64 = m.row(e).iter().map(|(_, p)| p).sum();
                assert!((total - 1.0).abs() < 1e-9, "{kind:?} after {iters}: row {e} sums to {total}");
            }
        }
    }
}

// ------------------------------------------------------------------ rerank

fn nbest() -> impl Strategy<Value = (NBestList, Sentence)> {
    (nonempty_sentence(), prop::collection::vec((nonempty_sentence(), -10.0f64..0.0, -1.0f64..1.0), 1..8)).prop_map(|(r, hyps)| {
        let hypotheses = hyps
            .into_iter()
            .map(|(t, ms, f)| {
                let mut h = Hypothesis::new(t, ms);
                h.features.insert("f".into(), f);
                h
            })
            .collect();
        (
            NBestList {
                segment_id: 0,
                source: Sentence::default(),
                hypotheses,
            },
            r,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rerank_ignores_positive_scaling((nb, _) in nbest(), a in -3.0f64..3.0, b in -3.0f64..3.0, k in 0.01f64..100.0) {
        let mut w = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        w.set(MODEL_SCORE, a);
        w.set("f", b);
        let mut scaled = w.clone();
        scaled.set(MODEL_SCORE, a * k);
        scaled.set("f", b * k);
        let (i, j) = (rerank::rerank(&nb, &w).unwrap(), rerank::rerank(&nb, &scaled).unwrap());
        // Scaling can only break exact float ties differently.
        let di = w.dot(&nb.hypotheses[i]);
        let dj = w.dot(&nb.hypotheses[j]);
        prop_assert!(i == j || (di - dj).abs() <= 1e-9 * di.abs().max(1.0));
    }

    #[test]
    fn corpus_bleu_identity_and_permutation(hyps in prop::collection::vec(nonempty_sentence(), 1..10), refs in prop::collection::vec(nonempty_sentence(), 10), perm_seed in any::<u64>()) {
        prop_assert_eq!(rerank::corpus_bleu(&hyps, &hyps).unwrap().bleu, 100.0);
        let refs = &refs[..hyps.len()];
        let base = rerank::corpus_bleu(&hyps, refs).unwrap().bleu;
        let mut idx: Vec<usize> = (0..hyps.len()).collect();
        let mut rng = seed::rng(perm_seed);
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.gen_range(0..=i));
        }
        let ph: Vec<Sentence> = idx.iter().map(|&i| hyps[i].clone()).collect();
        let pr: Vec<Sentence> = idx.iter().map(|&i| refs[i].clone()).collect();
        let permuted = rerank::corpus_bleu(&ph, &pr).unwrap().bleu;
        prop_assert!((base - permuted).abs() < 1e-9);
    }

    #[test]
    fn mira_step_does_not_increase_its_loss(seg in nbest(), c in 0.001f64..10.0) {
        let (nb, r) = &seg;
        let bleu: Vec<f64> = nb.hypotheses.iter().map(|h| rerank::sentence_bleu(&h.text, r)).collect();
        let init = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        let res = rerank::train_mira(std::slice::from_ref(&seg), &init, &MiraConfig { c, epochs: 1, seed: 0 }).unwrap();
        prop_assume!(res.updates == 1);
        // Recompute hope and fear at the initial weights, then the loss before and after.
        let argmax = |v: Vec<f64>| v.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b }).0;
        let hope = argmax(nb.hypotheses.iter().zip(&bleu).map(|(h, b)| init.dot(h) + b).collect());
        let fear = argmax(nb.hypotheses.iter().zip(&bleu).map(|(h, b)| init.dot(h) - b).collect());
        let loss = |w: &FeatureWeights| ((bleu[hope] - bleu[fear]) - (w.dot(&nb.hypotheses[hope]) - w.dot(&nb.hypotheses[fear]))).max(0.0);
        prop_assert!(loss(&res.final_weights) <= loss(&init) + 1e-9);
    }

    #[test]
    fn rerank_never_beats_the_oracle(seg in nbest(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (nb, r) = &seg;
        let mut w = FeatureWeights::zeros([MODEL_SCORE, "f"]);
        w.set(MODEL_SCORE, a);
        w.set("f", b);
        let pick = rerank::rerank(nb, &w).unwrap();
        let best = nb.hypotheses.iter().map(|h| rerank::sentence_bleu(&h.text, r)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(rerank::sentence_bleu(&nb.hypotheses[pick].text, r) <= best);
    }
}

// --------------------------------------------------------------- selftrain

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ledger_arithmetic_at_any_scale(np in 1usize..60, ns in 0usize..40, nt in 0usize..40, k1 in 1usize..6, k2 in 1usize..6) {
        let lang = ToyLanguage::new(50, 3);
        let mut store = BTreeMap::new();
        store.insert("p".to_owned(), lang.parallel(np, 1));
        store.insert("ms".to_owned(), lang.mono_src(ns, 2));
        store.insert("mt".to_owned(), lang.mono_tgt(nt, 3));
        let inputs = RoundInputs { parallel: "p".into(), mono_src: "ms".into(), mono_tgt: "mt".into(), previous: None };
        let (f, b) = (IdentityTranslator(TeacherDirection::Forward), IdentityTranslator(TeacherDirection::Backward));
        let r1 = selftrain::run_round(&RoundPlan { round: 1, upsample: k1, inputs: inputs.clone() }, &store, &f, &b).unwrap();
        let synth = nt + ns + 2 * np;
        prop_assert_eq!(r1.ledger.get("synthetic"), Some(synth));
        prop_assert_eq!(r1.combined.len(), synth + k1 * np);
        prop_assert!(r1.ledger.check().is_empty());
        store.insert("r1".to_owned(), r1.combined.clone());
        let plan = RoundPlan { round: 2, upsample: k2, inputs: RoundInputs { previous: Some("r1".into()), ..inputs } };
        let r2 = selftrain::run_round(&plan, &store, &f, &b).unwrap();
        prop_assert_eq!(r2.combined.len(), 2 * r1.combined.len() + k2 * np);
        prop_assert!(r2.ledger.check().is_empty());
    }
}

#[test]
fn synthetic_is_never_authentic_and_only_synthetic_is_tagged() {
    let lang = ToyLanguage::new(100, 9);
    let mono = lang.mono_tgt(200, 1);
    let t = IdentityTranslator(TeacherDirection::Backward);
    let syn = selftrain::generate_synthetic(&t, &mono).unwrap();
    assert!(syn.has(Provenance::Synthetic) && !syn.has(Provenance::Authentic));
    assert_eq!(syn.to_bytes(), selftrain::generate_synthetic(&t, &mono).unwrap().to_bytes());
    assert!(augment::tag_back_translation(&syn, augment::DEFAULT_BT_TAG).is_ok());
    let authentic = lang.parallel(10, 2);
    assert!(augment::tag_back_translation(&authentic, augment::DEFAULT_BT_TAG).is_err());
    let mixed = corpus::concat(&syn, &authentic).unwrap();
    assert!(augment::tag_back_translation(&mixed, augment::DEFAULT_BT_TAG).is_err());
}

// ------------------------------------------------------------- postprocess

fn number() -> impl Strategy<Value = String> {
    ("[0-9]{1,5}", prop::option::of(("[-/.,:]| - | – ", "[0-9]{1,3}"))).prop_map(|(a, rest)| match rest {
        Some((sep, b)) => format!("{a}{sep}{b}"),
        None => a,
    })
}

fn mixed_line() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![word(), number(), Just("at".to_owned())], 0..10).prop_map(|v| v.join(" "))
}

fn non_numeric(text: &str) -> Vec<String> {
    let spans = postprocess::number_spans(text);
    let mut out = Vec::new();
    let mut cursor = 0;
    for sp in &spans {
        out.push(text[cursor..sp.start].to_owned());
        cursor = sp.end;
    }
    out.push(text[cursor..].to_owned());
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fix_numbers_properties(src in mixed_line(), hyp in mixed_line()) {
        let (src, hyp) = (s(&src), s(&hyp));
        let (once, repairs) = postprocess::fix_numbers_report(&src, &hyp, 0);
        prop_assert_eq!(postprocess::fix_numbers(&src, &once), once.clone());
        let allowed: Vec<String> = postprocess::number_spans(src.as_str()).into_iter().chain(postprocess::number_spans(hyp.as_str())).map(|x| x.surface).collect();
        for sp in postprocess::number_spans(once.as_str()) {
            prop_assert!(allowed.contains(&sp.surface), "new number `{}`", sp.surface);
        }
        // Without a bridge rewrite, text between numbers is untouched.
        let bridged = repairs.iter().any(|r| postprocess::number_spans(&r.original).len() > 1);
        if !bridged {
            prop_assert_eq!(non_numeric(once.as_str()), non_numeric(hyp.as_str()));
        }
    }

    #[test]
    fn strip_tag_inverts_tagging(sent in sentence()) {
        let tagged = Sentence::from_tokens(std::iter::once(augment::DEFAULT_BT_TAG).chain(sent.tokens()));
        prop_assert_eq!(postprocess::strip_tag(&tagged, augment::DEFAULT_BT_TAG), sent);
    }
}

// ---------------------------------------------------------------- pipeline

#[test]
fn every_written_corpus_belongs_to_one_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lowres_mt::pipeline::PipelineConfig::from_toml(
        r#"
        seed = 3
        [[stage]]
        name = "gen"
        op = "toy.generate"
        outputs = { parallel = "b.tsv", mono_tgt = "m.tgt" }
        params = { vocab = 50, parallel = 40, mono_tgt = 30 }
        [[stage]]
        name = "bidir"
        op = "augment.bidir"
        inputs = { corpus = "b.tsv" }
        outputs = { corpus = "bidir.tsv" }
        [[stage]]
        name = "noise"
        op = "augment.denoise"
        inputs = { corpus = "b.tsv" }
        outputs = { corpus = "denoise.tsv", report = "noise.json" }
        "#,
    )
    .unwrap();
    let m = lowres_mt::pipeline::run(&cfg, &lowres_mt::pipeline::RunOptions::new(dir.path())).unwrap();
    let mut owners: HashMap<String, usize> = HashMap::new();
    for st in &m.stages {
        for o in &st.outputs {
            *owners.entry(o.name.clone()).or_default() += 1;
        }
    }
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if name == lowres_mt::pipeline::MANIFEST_FILE || name == lowres_mt::pipeline::EVENTS_FILE {
            continue;
        }
        assert_eq!(owners.get(&name), Some(&1), "{name} is not owned by exactly one stage");
    }
    assert_eq!(m.output("bidir.tsv").unwrap().count, 80);
    assert_eq!(m.output("denoise.tsv").unwrap().count, 80);
}
