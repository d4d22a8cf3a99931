//! Tunes reranking weights with MIRA on planted n-best lists and compares
//! decoder-best, reranked and oracle BLEU.
//!
//!     cargo run --release --example mira_rerank

use lowres_mt::rerank::{self, FeatureWeights, MiraConfig, MODEL_SCORE};
use lowres_mt::toydata::{self, ToyLanguage};
use lowres_mt::Sentence;

fn bleu(picks: &[Sentence], refs: &[Sentence]) -> f64 {
    rerank::corpus_bleu(picks, refs).unwrap().bleu
}

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(300, 8);
    let dev = toydata::planted_nbest(&lang, 200, 10, 0.05, 1);
    let test = toydata::planted_nbest(&lang, 200, 10, 0.05, 2);
    let mut init = FeatureWeights::zeros(toydata::planted_feature_names());
    init.set(MODEL_SCORE, 1.0);
    let r = rerank::train_mira(&dev, &init, &MiraConfig { c: 0.01, epochs: 10, seed: 0 })?;
    println!("{} updates; weights {}", r.updates, r.weights.to_json());

    let refs: Vec<Sentence> = test.iter().map(|(_, r)| r.clone()).collect();
    let pick = |f: &dyn Fn(&rerank::NBestList, &Sentence) -> usize| -> Vec<Sentence> {
        test.iter().map(|(nb, r)| nb.hypotheses[f(nb, r)].text.clone()).collect()
    };
    let decoder = pick(&|nb, _| nb.decoder_best());
    let reranked = pick(&|nb, _| rerank::rerank(nb, &r.weights).unwrap());
    let oracle = pick(&|nb, r| {
        (0..nb.hypotheses.len())
            .max_by(|&a, &b| rerank::sentence_bleu(&nb.hypotheses[a].text, r).total_cmp(&rerank::sentence_bleu(&nb.hypotheses[b].text, r)))
            .unwrap()
    });
    println!("decoder {:.2}  reranked {:.2}  oracle {:.2}", bleu(&decoder, &refs), bleu(&reranked, &refs), bleu(&oracle, &refs));
    Ok(())
}
