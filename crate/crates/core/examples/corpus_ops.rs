//! Swap, concatenate, upsample, dedup and split a small parallel corpus.
//!
//!     cargo run --example corpus_ops

use lowres_mt::corpus;
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(200, 7);
    let b = lang.parallel(1_000, 1);
    let swapped = corpus::swap_directions(&b)?;
    let both = corpus::concat(&b, &swapped)?;
    let up = corpus::upsample(&b, 3)?;
    println!("authentic {}  swapped {}  concat {}  x3 {}", b.len(), swapped.len(), both.len(), up.len());
    println!("dedup of x3: {}", corpus::dedup(&up).len());

    let split = corpus::split_random(&b, 100, 100, 42)?;
    println!("split: train {} valid {} test {}", split.train.len(), split.valid.len(), split.test.len());
    let m = split.train.manifest();
    println!("train manifest: {}", serde_json::to_string(&m)?);
    Ok(())
}
