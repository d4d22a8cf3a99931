//! Tokenize, truecase and BPE-segment text, then undo each step.
//!
//!     cargo run --example text_preprocess

use lowres_mt::corpus::{Corpus, Sentence};
use lowres_mt::text::{self, TruecaseMode, TruecaseModel};

fn main() -> lowres_mt::Result<()> {
    let raw = [
        "The season ended in 2006-07, didn't it?",
        "\"Hello,\" she said. The house is big.",
        "In Dar es Salaam the rain (mvua) started at 3.30pm.",
        "the house is small; the garden is smaller.",
    ];
    let tokenized: Vec<Sentence> = raw.iter().map(|r| text::tokenize(&Sentence::new(*r).unwrap())).collect();
    let corpus = Corpus::mono(tokenized.clone());
    let tc = TruecaseModel::train(&corpus);
    let bpe = text::learn_bpe(&corpus, 40)?;
    println!("learned {} merges", bpe.merge_count());

    for (r, tok) in raw.iter().zip(&tokenized) {
        let cased = text::truecase(tok, &tc, TruecaseMode::Apply).sentence;
        let seg = bpe.apply(&cased);
        println!("raw        {r}");
        println!("tokenized  {tok}");
        println!("truecased  {cased}");
        println!("bpe        {seg}");
        let back = text::revert_bpe(&seg, bpe.marker());
        let back = text::truecase(&back, &tc, TruecaseMode::Revert).sentence;
        println!("restored   {}\n", text::detokenize(&back));
    }
    Ok(())
}
