//! The brute-force baselines: frame enumeration, countermodel search and
//! valuation search on a universal frame.
//!
//! Run with `cargo run --example oracle`.

use transmodal::frames::universal_frame;
use transmodal::logics::preset;
use transmodal::oracle::{brute_countermodel, brute_valuation_unify, enumerate_frames, EnumerationSpec};
use transmodal::syntax::parse;

fn main() -> transmodal::Result<()> {
    for n in 1..=4 {
        let all = enumerate_frames(&EnumerationSpec::up_to(n))?.len();
        let rooted_s4 = enumerate_frames(&EnumerationSpec::up_to(n).logic(&preset("S4")?).rooted())?.len();
        println!("up to {n} points: {all} transitive frames, {rooted_s4} rooted S4-frames");
    }

    let phi = parse("<>[]x0 -> []<>x0")?;
    for name in ["S4", "S4.3", "S5"] {
        match brute_countermodel(&preset(name)?, &phi, 4)? {
            Some((m, w)) => println!("{name}: {phi} fails at point {w} of a {}-point model", m.len()),
            None => println!("{name}: {phi} holds on all models up to 4 points"),
        }
    }

    let s5 = preset("S5")?;
    let uf = universal_frame(&s5, &[0], 1, 512)?;
    for text in ["x0 <-> p0", "[]x0 | []~x0", "[]p0 | []~p0"] {
        let found = brute_valuation_unify(&parse(text)?, &uf.model, 1_000_000)?.is_some();
        println!("S5, {} points: valuation for {text}: {found}", uf.model.len());
    }
    Ok(())
}
