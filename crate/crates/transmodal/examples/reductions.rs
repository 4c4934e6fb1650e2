//! Generate hardness instances from small sources and check the
//! explicit unifiers of the true ones.
//!
//! Run with `cargo run --release --example reductions`.

use transmodal::admissibility::{admissible_bddp, AdmStatus};
use transmodal::derivability::is_theorem;
use transmodal::logics::preset;
use transmodal::reductions::{gen_nexp, gen_qbf, Pattern, Qbf, ThirdOrderSentence, Witness};
use transmodal::syntax::apply;

fn main() -> transmodal::Result<()> {
    let k4 = preset("K4")?;
    for matrix in ["X.t0", "t0.0 & ~t0.0", "t0.0 <-> X.t0"] {
        let s = ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, matrix)?;
        let inst = gen_nexp(&s)?;
        print!("{s}: {}, |ξ| = {}", s.is_true()?, inst.stats.xi_size);
        if let Some(Witness::Substitution { substitution }) = &inst.witness {
            print!(
                ", witness unifies: {}",
                is_theorem(&k4, &apply(substitution, &inst.xi))?
            );
        }
        println!();
    }

    // QBFs with d alternations: truth is unifiability in S4Grz.3 + BD_d.
    for (d, matrix) in [
        (1, "a0 <-> b0"),
        (1, "a0 & b0"),
        (2, "(a0 <-> b0) & (a1 <-> ~b1)"),
        (2, "b0 <-> a1"),
    ] {
        let q = Qbf::parse(d, 1, matrix)?;
        let inst = gen_qbf(&q)?;
        let l = preset(&format!("S4Grz.3+BD{d}"))?;
        let v = admissible_bddp(&l, &inst.rule(), 4)?;
        let unifiable = v.status == AdmStatus::Inadmissible;
        println!(
            "{q}: {}, |ξ| = {}, unifiable in {}: {unifiable}",
            q.is_true()?,
            inst.stats.xi_size,
            l.name
        );
    }
    Ok(())
}
