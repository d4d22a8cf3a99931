//! The post-processing chain on a few hypotheses with broken numbers.
//!
//!     cargo run --example postprocess

use lowres_mt::postprocess;
use lowres_mt::text::TruecaseModel;
use lowres_mt::Sentence;

fn main() -> lowres_mt::Result<()> {
    let tc = TruecaseModel::default();
    let cases = [
        ("Msimu uliopita wa Siltala kwenye ligi ilikuwa 2006-07", "Siltala's previous season in the league was 2006 at 07"),
        ("Watu 1,250 walihudhuria", "1@@ 250 people attended"),
        ("Mwaka 1999 na 2000", "in 1999 and 2001 ."),
        ("Hakuna namba", "no numbers here 42 ."),
    ];
    for (src, hyp) in cases {
        let t = postprocess::postprocess_chain(&Sentence::new(src)?, &Sentence::new(hyp)?, &tc, "@@");
        println!("source  {src}\nhyp     {hyp}\nde-bpe  {}\nfinal   {}\n", t.debpe, t.output);
    }
    Ok(())
}
