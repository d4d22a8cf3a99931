//! Moore-Lewis selection of in-domain sentences from a mixed pool.
//!
//!     cargo run --release --example data_selection

use lowres_mt::corpus;
use lowres_mt::lm::{LmConfig, NgramModel, Smoothing};
use lowres_mt::select::{self, FilterSpec};
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let news = ToyLanguage::new(800, 1);
    let web = ToyLanguage::new(800, 2);
    let pool = corpus::shuffle(&corpus::concat(&news.mono_tgt(5_000, 10), &web.mono_tgt(5_000, 11))?, 3);
    let cfg = LmConfig::new(3, Smoothing::KneserNey { discount: 0.75 }).with_min_count(1);
    let lm_in = NgramModel::train(&news.mono_tgt(3_000, 20), cfg)?;
    let lm_gen = NgramModel::train(&pool, cfg)?;

    let spec = FilterSpec::default();
    let chosen = select::select_topk(&pool, &lm_in, &lm_gen, &spec, 5_000)?;
    let news_set: std::collections::HashSet<_> = news.mono_tgt(5_000, 10).sentences()?.to_vec().into_iter().collect();
    let hits = chosen.sentences()?.iter().filter(|s| news_set.contains(*s)).count();
    println!("selected {} of {}; {hits} are in-domain", chosen.len(), pool.len());
    Ok(())
}
