//! Trains Kneser-Ney and add-k models and compares perplexities.
//!
//!     cargo run --example ngram_lm

use lowres_mt::lm::{self, LmConfig, NgramModel, Smoothing};
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(500, 9);
    let train = lang.mono_tgt(5_000, 1);
    let held = lang.mono_tgt(500, 2);
    for (name, smoothing) in [
        ("kneser-ney", Smoothing::KneserNey { discount: 0.75 }),
        ("add-0.1", Smoothing::AddK { k: 0.1 }),
    ] {
        for order in [2, 3, 5] {
            let m = NgramModel::train(&train, LmConfig::new(order, smoothing).with_min_count(1))?;
            println!(
                "{name:<10} order {order}: train ppl {:>8.2}  held-out ppl {:>8.2}",
                lm::perplexity(&m, &train)?,
                lm::perplexity(&m, &held)?
            );
        }
    }
    Ok(())
}
