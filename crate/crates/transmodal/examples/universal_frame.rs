//! Build the first stages of a universal frame and print its clusters and
//! the characteristic formulas of its points.
//!
//! Run with `cargo run --example universal_frame`.

use transmodal::frames::{beta_formulas, universal_frame};
use transmodal::logics::preset;

fn main() -> transmodal::Result<()> {
    let k4 = preset("K4")?;
    let uf = universal_frame(&k4, &[0], 1, 1000)?;
    println!(
        "K4 over p0, stage 1: {} points in {} clusters",
        uf.model.len(),
        uf.clusters.len()
    );
    for (i, c) in uf.clusters.iter().enumerate() {
        println!(
            "  cluster {i}: {:?}, parameter masks {:?}, above {:?}",
            c.ri, c.e, c.upset
        );
    }

    for name in ["K4", "GL", "S4"] {
        let l = preset(name)?;
        let uf = universal_frame(&l, &[], 2, 1000)?;
        println!("{name} without parameters, stage 2: {} points", uf.model.len());
        for (w, beta) in beta_formulas(&uf)?.iter().enumerate().take(4) {
            println!("  β({w}) = {beta}");
        }
    }
    Ok(())
}
