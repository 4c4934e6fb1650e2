//! Decide derivability in a few logics and print the countermodels.
//!
//! Run with `cargo run --example derive`.

use transmodal::derivability::derives;
use transmodal::frames::FrameJson;
use transmodal::logics::preset;
use transmodal::syntax::parse;

fn main() -> transmodal::Result<()> {
    let cases = [
        ("K4", "[]x0 -> x0"),
        ("S4", "[]x0 -> x0"),
        ("GL", "[]([]x0 -> x0) -> []x0"),
        ("S4", "<>[]x0 -> []<>x0"),
        ("S4.3", "[]([]x0 -> x1) | []([]x1 -> x0)"),
        ("S4", "[]([]x0 -> x1) | []([]x1 -> x0)"),
    ];
    for (name, text) in cases {
        let l = preset(name)?;
        let phi = parse(text)?;
        let v = derives(&l, &[], std::slice::from_ref(&phi))?;
        if v.derivable {
            println!("{name:5} ⊢ {phi}");
        } else {
            println!("{name:5} ⊬ {phi}");
            if let Some(cm) = v.countermodel {
                if cm.model.len() <= 4 {
                    let json = serde_json::to_string(&FrameJson::from_model(&cm.model))?;
                    println!("      refuted at point {} of {json}", cm.root);
                } else {
                    println!("      refuted at point {} of a {}-point model", cm.root, cm.model.len());
                }
            }
        }
    }
    Ok(())
}
