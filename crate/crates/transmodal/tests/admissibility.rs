//! Cross-checks between the admissibility engines.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{points, verify_counterexample};
use transmodal::admissibility::{
    admissible, admissible_bddp, admissible_clx, admissible_clx_with, admissible_linear_clx, strong_closure,
    strongly_extensible, unifiable, AdmOptions, AdmStatus, Rule, TppMode, DEFAULT_ADM_BUDGET,
};
use transmodal::frames::Model;
use transmodal::logics::{is_l_frame, preset};
use transmodal::oracle::frames_of_size;
use transmodal::syntax::{random_formula, Atom, Formula};

fn random_rule(rng: &mut ChaCha8Rng, atoms: &[Atom]) -> Rule {
    let conclusions = rng.gen_range(0..=1);
    let pick = |rng: &mut ChaCha8Rng| {
        let size = rng.gen_range(1..=4);
        random_formula(rng, size, atoms)
    };
    let premise = pick(rng);
    let concl = (0..conclusions).map(|_| pick(rng)).collect();
    Rule::new(vec![premise], concl)
}

#[test]
fn linear_engine_agrees_with_the_general_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let atoms = [Atom::Var(0), Atom::Param(0)];
    let mut compared = 0;
    for name in ["S4.3", "GL.3", "K4.3", "S4Grz.3", "S5"] {
        let l = preset(name).unwrap();
        let mut here = 0;
        while here < 15 {
            let rule = random_rule(&mut rng, &atoms);
            if rule.context().num_kernels() > 2 {
                continue;
            }
            let lin = admissible_linear_clx(&l, &rule).unwrap();
            let gen = admissible_clx(&l, &rule, 4).unwrap();
            match (lin.status, gen.status) {
                (AdmStatus::Inadmissible, _) => {
                    verify_counterexample(&l, &rule, &lin).unwrap();
                    let size = lin.counterexample.as_ref().unwrap().model.len();
                    if size <= 4 {
                        assert_eq!(gen.status, AdmStatus::Inadmissible, "{name}: {rule}");
                    }
                }
                (AdmStatus::Admissible, s) => assert_ne!(s, AdmStatus::Inadmissible, "{name}: {rule}"),
                (AdmStatus::BoundedAdmissible, _) => panic!("the linear engine is complete"),
            }
            if gen.status == AdmStatus::Inadmissible {
                verify_counterexample(&l, &rule, &gen).unwrap();
                assert_eq!(lin.status, AdmStatus::Inadmissible, "{name}: {rule}");
            }
            here += 1;
            compared += 1;
        }
    }
    assert_eq!(compared, 75);
}

#[test]
fn pseudopredecessor_modes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let atoms = [Atom::Var(0), Atom::Param(0)];
    for name in ["K4", "S4", "GL"] {
        let l = preset(name).unwrap();
        for _ in 0..15 {
            let rule = random_rule(&mut rng, &atoms);
            let opts = |mode| AdmOptions {
                cap: 3,
                mode,
                budget: DEFAULT_ADM_BUDGET,
            };
            let a = admissible_clx_with(&l, &rule, &opts(TppMode::Displayed)).unwrap();
            let b = admissible_clx_with(&l, &rule, &opts(TppMode::FullSigma)).unwrap();
            assert_eq!(a.status, b.status, "{name}: {rule}");
        }
    }
}

#[test]
fn strong_closure_is_strongly_extensible() {
    let p = Atom::Param(0);
    for name in ["S5", "S4.3+BD2", "GL.3+BD2", "S4Grz.3+BD2"] {
        let l = preset(name).unwrap();
        let mut closed = 0;
        for n in 1..=3 {
            for (_, f) in frames_of_size(n).unwrap().iter() {
                if !is_l_frame(&l, f) {
                    continue;
                }
                for mask in 0..1u64 << n {
                    let m = Model::new(f.clone()).with(p, &points(mask, n));
                    let c = strong_closure(&l, &m).unwrap();
                    assert!(strongly_extensible(&l, &c).unwrap(), "{name}");
                    assert!(is_l_frame(&l, &c.frame), "{name}");
                    assert!(c.len() >= m.len());
                    // The original model sits on top, unchanged.
                    for w in 0..n {
                        for v in 0..n {
                            assert_eq!(c.frame.sees(w, v), m.frame.sees(w, v));
                        }
                        assert_eq!(c.holds_atom(p, w), m.holds_atom(p, w));
                    }
                    closed += 1;
                }
            }
        }
        assert!(closed > 0, "{name}");
    }
}

#[test]
fn derivable_rules_are_admissible() {
    let rules = [
        ("x0", "[]x0 -> [][]x0"),
        ("[]x0", "[][]x0"),
        ("x0 & x1", "x1"),
        ("p0", "p0 | x0"),
    ];
    for name in transmodal::logics::PRESETS {
        let l = preset(name).unwrap();
        for (p, c) in rules {
            let v = admissible(&l, &Rule::parse(p, c).unwrap(), 4).unwrap();
            assert_eq!(v.status, AdmStatus::Admissible, "{name}: {p} / {c}");
        }
    }
}

#[test]
fn disjunction_property_fails_in_linear_logics() {
    for name in ["S4.3", "K4.3", "GL.3", "S4Grz.3"] {
        let l = preset(name).unwrap();
        let rule = Rule::parse("[]x0 | []x1", "x0; x1").unwrap();
        let v = admissible_linear_clx(&l, &rule).unwrap();
        assert_eq!(v.status, AdmStatus::Inadmissible, "{name}");
        verify_counterexample(&l, &rule, &v).unwrap();
    }
    // The rule holds in the branching logics at every size searched.
    for name in ["K4", "S4", "GL"] {
        let l = preset(name).unwrap();
        let rule = Rule::parse("[]x0 | []x1", "x0; x1").unwrap();
        let v = admissible_clx(&l, &rule, 3).unwrap();
        assert_ne!(v.status, AdmStatus::Inadmissible, "{name}");
    }
}

#[test]
fn bounded_depth_verdicts_match_unifiability() {
    let rules = [
        "x0 | ~x0",
        "p0",
        "p0 | ~p0",
        "[]p0 | []~p0",
        "x0 <-> p0",
        "<>x0 & <>~x0",
    ];
    for name in ["S5", "S4.3+BD2", "S4Grz.3+BD2"] {
        let l = preset(name).unwrap();
        for r in rules {
            let phi = transmodal::syntax::parse(r).unwrap();
            let v = admissible_bddp(&l, &Rule::new(vec![phi.clone()], vec![]), 4).unwrap();
            let u = unifiable(&l, &phi).unwrap();
            assert_eq!(u.value(), v.admissible_value().map(|a| !a), "{name}: {r}");
        }
    }
    let s5 = preset("S5").unwrap();
    assert_eq!(
        unifiable(&s5, &Formula::param(0).boxed().or(&Formula::param(0).not().boxed()))
            .unwrap()
            .value(),
        Some(false)
    );
}
