//! Two self-training rounds with dictionary teachers, printing each ledger.
//!
//!     cargo run --release --example self_training

use std::collections::BTreeMap;

use lowres_mt::align::{self, ModelKind};
use lowres_mt::corpus::{self, Corpus};
use lowres_mt::selftrain::{self, DictionaryTranslator, RoundInputs, RoundPlan, TeacherDirection};
use lowres_mt::toydata::ToyLanguage;

fn teachers(c: &Corpus) -> lowres_mt::Result<(DictionaryTranslator, DictionaryTranslator)> {
    let fwd = align::train_ibm(c, ModelKind::Ibm1, 5)?;
    let bwd = align::train_ibm(&corpus::swap_directions(c)?, ModelKind::Ibm1, 5)?;
    Ok((
        DictionaryTranslator::from_model(&fwd, TeacherDirection::Forward),
        DictionaryTranslator::from_model(&bwd, TeacherDirection::Backward),
    ))
}

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(500, 12);
    let mut store = BTreeMap::new();
    store.insert("authentic".to_owned(), lang.parallel(2_400, 1));
    store.insert("mono_src".to_owned(), lang.mono_src(400, 2));
    store.insert("mono_tgt".to_owned(), lang.mono_tgt(4_400, 3));
    let inputs = RoundInputs {
        parallel: "authentic".into(),
        mono_src: "mono_src".into(),
        mono_tgt: "mono_tgt".into(),
        previous: None,
    };

    let (f, b) = teachers(&store["authentic"])?;
    let r1 = selftrain::run_round(&RoundPlan { round: 1, upsample: 4, inputs: inputs.clone() }, &store, &f, &b)?;
    println!("{}", r1.ledger.to_json());
    store.insert("round1".to_owned(), r1.combined);

    let (f, b) = teachers(&store["round1"])?;
    let plan = RoundPlan {
        round: 2,
        upsample: 5,
        inputs: RoundInputs { previous: Some("round1".into()), ..inputs },
    };
    let r2 = selftrain::run_round(&plan, &store, &f, &b)?;
    println!("{}", r2.ledger.to_json());
    println!("ledger problems: {:?}", r2.ledger.check());
    Ok(())
}
