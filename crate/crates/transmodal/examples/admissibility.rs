//! Admissibility of rules and unifiability of formulas with parameters.
//!
//! Run with `cargo run --example admissibility`.

use transmodal::admissibility::{admissible, admissible_linear_clx, unifiable, Rule};
use transmodal::logics::preset;
use transmodal::syntax::parse;

fn main() -> transmodal::Result<()> {
    // The disjunction property holds in S4 but fails in the linear S4.3.
    let dp = Rule::parse("[]x0 | []x1", "x0; x1")?;
    for name in ["S4", "S4.3"] {
        let v = admissible(&preset(name)?, &dp, 3)?;
        println!("{name:5} {dp}: {:?} ({})", v.status, v.method);
    }
    let v = admissible_linear_clx(&preset("S4.3")?, &dp)?;
    if let Some(cex) = &v.counterexample {
        println!("      counterexample with {} points", cex.model.len());
    }

    // Parameters stay fixed under substitution: p0 has no unifier, but
    // x0 <-> p0 does.
    for (name, text) in [
        ("K4", "p0"),
        ("K4", "x0 <-> p0"),
        ("S5", "[]p0 | []~p0"),
        ("S5", "[]x0 | []~x0"),
    ] {
        let u = unifiable(&preset(name)?, &parse(text)?)?;
        let verdict = match u.value() {
            Some(true) => "unifiable",
            Some(false) => "not unifiable",
            None => "unknown",
        };
        println!("{name:5} {text}: {verdict}");
    }
    Ok(())
}
