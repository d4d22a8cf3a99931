//! IBM Model 1 and 2 on toy data: log-likelihood per iteration, Viterbi
//! alignments and corpus complexity.
//!
//!     cargo run --release --example word_alignment

use lowres_mt::align::{self, ModelKind};
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(200, 4);
    let b = lang.parallel(2_000, 1);
    for kind in [ModelKind::Ibm1, ModelKind::Ibm2] {
        let m = align::train_ibm(&b, kind, 5)?;
        println!("{kind:?} log-likelihood: {:?}", m.log_likelihood().iter().map(|x| x.round()).collect::<Vec<_>>());
        let p = &b.pairs()?[0];
        println!("  {}  |  {}\n  {}", p.src, p.tgt, align::pharaoh(&m.viterbi_align(p)));
        println!("  complexity {:.4}", align::corpus_complexity(&m, &b)?);
    }
    Ok(())
}
