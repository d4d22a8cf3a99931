//! Runs the shipped `table5_scale100` config into a temporary directory and
//! prints the self-training ledger.
//!
//!     cargo run --release --example pipeline_table5

use lowres_mt::pipeline::{self, verify};

fn main() -> lowres_mt::Result<()> {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/table5_scale100.toml");
    let out = std::env::temp_dir().join(format!("lowres-table5-{}", std::process::id()));
    let started = std::time::Instant::now();
    let manifest = pipeline::run_file(config, Some(out.clone()), None, false)?;
    println!("ran {} stages in {:.1?} -> {}", manifest.stages.len(), started.elapsed(), out.display());

    for stage in manifest.stages.iter().filter(|s| s.ledger.is_some()) {
        println!("\n{}", stage.name);
        for row in &stage.ledger.as_ref().unwrap().rows {
            println!("  {:<24} {:>9}", row.row, row.count);
        }
    }
    let report = verify(&manifest, &out);
    println!("\nverify: {} outputs checked, clean = {}", report.checked, report.is_clean());
    std::fs::remove_dir_all(&out).ok();
    Ok(())
}
