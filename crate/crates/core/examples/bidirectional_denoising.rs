//! Builds the bidirectional and denoising training sets and the three
//! training schedules that use them.
//!
//!     cargo run --example bidirectional_denoising

use lowres_mt::augment::{self, NoiseSpec, ScheduleDatasets, ScheduleKind};
use lowres_mt::toydata::ToyLanguage;

fn main() -> lowres_mt::Result<()> {
    let b = ToyLanguage::new(300, 3).parallel(2_000, 1);
    let bidir = augment::build_bidirectional(&b)?;
    let (denoise, report) = augment::build_denoising(&b, &NoiseSpec::new(11))?;
    println!("B = {}  bidirectional = {}  denoising = {}", b.len(), bidir.len(), denoise.len());
    for p in denoise.pairs()?.iter().take(3) {
        println!("  noised: {}\n  clean:  {}", p.src, p.tgt);
    }
    println!("edit counts: {:?}", report.effective_op_counts);

    let ds = ScheduleDatasets {
        bidirectional: Some("bidir.tsv".into()),
        denoising: Some("denoise.tsv".into()),
        forward: Some("forward.tsv".into()),
    };
    for kind in ["bipt", "dpt", "combined"] {
        let kind: ScheduleKind = kind.parse()?;
        println!("\n{kind:?}:\n{}", augment::build_schedule(kind, 100_000, &ds)?.to_json());
    }
    Ok(())
}
