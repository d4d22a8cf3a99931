//! Back-translates monolingual target text with a dictionary teacher and
//! tags the synthetic sources.
//!
//!     cargo run --example tagged_back_translation

use lowres_mt::align::{self, ModelKind};
use lowres_mt::augment;
use lowres_mt::corpus;
use lowres_mt::postprocess;
use lowres_mt::selftrain::{self, DictionaryTranslator, TeacherDirection};
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let lang = ToyLanguage::new(300, 5);
    let b = lang.parallel(3_000, 1);
    let reverse = align::train_ibm(&corpus::swap_directions(&b)?, ModelKind::Ibm1, 5)?;
    let teacher = DictionaryTranslator::from_model(&reverse, TeacherDirection::Backward);

    let synthetic = selftrain::generate_synthetic(&teacher, &lang.mono_tgt(500, 2))?;
    let tagged = augment::tag_back_translation(&synthetic, augment::DEFAULT_BT_TAG)?;
    for p in tagged.pairs()?.iter().take(3) {
        println!("{}  =>  {}", p.src, p.tgt);
    }
    println!("provenance {:?}", tagged.provenance());

    // Authentic data is refused.
    match augment::tag_back_translation(&b, augment::DEFAULT_BT_TAG) {
        Err(e) => println!("tagging authentic data: {e}"),
        Ok(_) => unreachable!(),
    }
    let first = &tagged.pairs()?[0].src;
    println!("stripped: {}", postprocess::strip_tag(first, augment::DEFAULT_BT_TAG));
    Ok(())
}
