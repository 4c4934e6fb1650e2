//! The Gödel–McKinsey–Tarski translation, boxdot, its efficient variant and
//! relativization.
//!
//! Run with `cargo run --example translations`.

use transmodal::derivability::is_theorem;
use transmodal::logics::preset;
use transmodal::syntax::{apply, parse, Atom};
use transmodal::translations::{boxdot, eff_boxdot, gmt, relativize, IntFormula};

fn main() -> transmodal::Result<()> {
    // Excluded middle is not intuitionistic, so its translation fails in S4.
    let lem = IntFormula::from_formula(&parse("x0 | ~x0")?)?;
    let t = gmt(&lem);
    println!("gmt({lem}) = {t}");
    println!("  S4 theorem: {}", is_theorem(&preset("S4")?, &t)?);

    let phi = parse("[]([]x0 -> x0) -> []x0")?;
    println!("boxdot({phi}) = {}", boxdot(&phi));
    let e = eff_boxdot(&phi);
    println!(
        "eff_boxdot: {} (size {} vs {})",
        e.formula,
        e.formula.size(),
        boxdot(&phi).size()
    );
    for (z, named) in &e.names {
        println!("  x{z} names {named}");
    }
    let k4 = preset("K4")?;
    let back = apply(&e.substitution, &e.formula);
    println!(
        "  σ(eff_boxdot) ↔ boxdot in K4: {}",
        is_theorem(&k4, &back.iff(&boxdot(&phi)))?
    );

    println!(
        "relativized to p1: {}",
        relativize(&parse("[]x0 -> <>x0")?, Atom::Param(1))?
    );
    Ok(())
}
