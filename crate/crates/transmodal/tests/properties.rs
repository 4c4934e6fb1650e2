//! Property tests over random formulas, frames and models.

mod common;

use fixedbitset::FixedBitSet;
use proptest::prelude::*;

use common::points;
use transmodal::derivability::derives;
use transmodal::frames::{
    check_map, model_check, reflexivization, skeleton, universal_frame, FiniteFrame, FrameJson, FrameMap, MapKind,
    Model,
};
use transmodal::logics::{is_l_frame, preset, LogicSpec};
use transmodal::oracle::frames_of_size;
use transmodal::reductions::{generate, random_sentences, Family, Pattern, Source};
use transmodal::syntax::{apply, parse, Atom, Formula, Sigma, Substitution};
use transmodal::translations::eff_boxdot;

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::var(0)),
        Just(Formula::var(1)),
        Just(Formula::param(0)),
        Just(Formula::bot()),
        Just(Formula::top()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| a.not()),
            inner.clone().prop_map(|a| a.boxed()),
            inner.clone().prop_map(|a| a.dia()),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.imp(&b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.iff(&b)),
        ]
    })
}

/// A frame of at most four points, by size and index into the census.
fn frame() -> impl Strategy<Value = FiniteFrame> {
    (1usize..=4, any::<prop::sample::Index>()).prop_map(|(n, i)| {
        let all = frames_of_size(n).unwrap();
        all[i.index(all.len())].1.clone()
    })
}

/// A model over `x0`, `x1`, `p0` on a frame of at most four points.
fn model() -> impl Strategy<Value = Model> {
    (frame(), any::<[u8; 3]>()).prop_map(|(f, masks)| {
        let n = f.len();
        let atoms = [Atom::Var(0), Atom::Var(1), Atom::Param(0)];
        atoms
            .iter()
            .zip(masks)
            .fold(Model::new(f), |m, (&a, mask)| m.with(a, &points(mask as u64, n)))
    })
}

fn substitution() -> impl Strategy<Value = Substitution> {
    (formula(), formula()).prop_map(|(a, b)| Substitution::new().with(0, a).with(1, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_then_parsing_is_identity(phi in formula()) {
        prop_assert_eq!(parse(&phi.to_string()).unwrap(), phi);
    }

    #[test]
    fn substitutions_compose(phi in formula(), s in substitution(), t in substitution()) {
        prop_assert_eq!(apply(&s.compose(&t), &phi), apply(&s, &apply(&t, &phi)));
    }

    #[test]
    fn substitutions_fix_parameters(phi in formula(), s in substitution()) {
        let mut allowed = phi.params();
        for f in s.map.values() {
            allowed.extend(f.params());
        }
        prop_assert!(apply(&s, &phi).params().is_subset(&allowed));
        let ground = Substitution::new().with(0, Formula::top()).with(1, Formula::bot());
        prop_assert!(apply(&ground, &phi).vars().is_empty());
        prop_assert_eq!(apply(&ground, &phi).params(), phi.params());
    }

    #[test]
    fn closure_is_at_most_linear(phi in formula()) {
        let sigma = Sigma::new(std::slice::from_ref(&phi));
        prop_assert!(sigma.n() as u64 <= 3 * phi.size());
        prop_assert!(sigma.num_kernels() <= sigma.n());
        for (i, f) in sigma.formulas.iter().enumerate() {
            prop_assert_eq!(sigma.index_of(f), Some(i));
        }
    }

    #[test]
    fn boxdot_unfolds(m in model(), phi in formula()) {
        for w in 0..m.len() {
            let lhs = model_check(&m, w, &phi.boxdot()).unwrap();
            let rhs = model_check(&m, w, &phi).unwrap()
                && m.frame.strictly_above(w).ones().all(|v| model_check(&m, v, &phi).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn reflexivization_is_idempotent(m in model()) {
        let r = reflexivization(&m);
        prop_assert_eq!(&reflexivization(&r), &r);
        let s = skeleton(&r).unwrap();
        prop_assert_eq!(s.frame.clusters().members.len(), s.len());
    }

    #[test]
    fn frame_json_round_trips(m in model()) {
        let back = FrameJson::from_model(&m).to_model().unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn eff_boxdot_is_linear(phi in formula()) {
        let e = eff_boxdot(&phi);
        prop_assert!(e.formula.size() <= 20 * phi.size());
    }

    #[test]
    fn countermodels_refute(phi in formula()) {
        for name in ["K4", "S4", "GL", "S4.3", "S5"] {
            let l = preset(name).unwrap();
            let v = derives(&l, &[], std::slice::from_ref(&phi)).unwrap();
            if let Some(cm) = v.countermodel {
                prop_assert!(!v.derivable);
                prop_assert!(is_l_frame(&l, &cm.model.frame));
                prop_assert!(!model_check(&cm.model, cm.root, &phi).unwrap());
            }
        }
    }

    #[test]
    fn stronger_logics_derive_more(phi in formula()) {
        let k4 = preset("K4").unwrap();
        if derives(&k4, &[], std::slice::from_ref(&phi)).unwrap().derivable {
            for name in ["S4", "GL", "K4Grz", "S4.3", "GL.3", "S5", "Verum"] {
                let l = preset(name).unwrap();
                prop_assert!(derives(&l, &[], std::slice::from_ref(&phi)).unwrap().derivable, "{}", name);
            }
        }
    }

    #[test]
    fn generators_are_deterministic(seed in 0u64..1000, n in 1usize..=2, m in 1usize..=2) {
        let s = random_sentences(seed, 1, n, m, Pattern::Sigma2, 7).unwrap();
        prop_assert_eq!(&s, &random_sentences(seed, 1, n, m, Pattern::Sigma2, 7).unwrap());
        let src = Source::Sentence(s[0].clone());
        for family in [Family::Nexp, Family::Nexp0adm] {
            let a = serde_json::to_string(&generate(family, &src).unwrap()).unwrap();
            let b = serde_json::to_string(&generate(family, &src).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn weak_subreductions_lift_to_reflexivizations() {
    // Every weak subreduction W → V is a subreduction W_R → V_R.
    let frames: Vec<FiniteFrame> = (1..=3)
        .flat_map(|n| {
            frames_of_size(n)
                .unwrap()
                .iter()
                .map(|(_, f)| f.clone())
                .collect::<Vec<_>>()
        })
        .collect();
    let refl = |f: &FiniteFrame| reflexivization(&Model::new(f.clone())).frame;
    let mut weak = 0;
    for w in &frames {
        for v in &frames {
            let (n, k) = (w.len(), v.len() + 1);
            for code in 0..k.pow(n as u32) {
                let map: Vec<Option<usize>> = (0..n).map(|i| (code / k.pow(i as u32) % k).checked_sub(1)).collect();
                let fm = |kind| FrameMap {
                    map: map.clone(),
                    kind,
                    cofinal: false,
                    onto: false,
                };
                if check_map(&fm(MapKind::WeakSubreduction), w, v).unwrap() {
                    weak += 1;
                    assert!(check_map(&fm(MapKind::Subreduction), &refl(w), &refl(v)).unwrap());
                }
                if check_map(&fm(MapKind::Subreduction), w, v).unwrap() {
                    assert!(check_map(&fm(MapKind::WeakSubreduction), w, v).unwrap());
                }
            }
        }
    }
    assert!(weak > 1000);
}

#[test]
fn universal_frame_stages_are_generated_subframes() {
    let cases = [
        ("K4", vec![], 2),
        ("K4", vec![0], 1),
        ("S4", vec![0], 1),
        ("GL", vec![0], 2),
        ("S4.3", vec![0], 2),
        ("GL.3", vec![0, 1], 2),
    ];
    for (name, params, k) in cases {
        let l = preset(name).unwrap();
        let small = universal_frame(&l, &params, k, 5000).unwrap();
        let big = universal_frame(&l, &params, k + 1, 5000).unwrap();
        let pts = big.points_up_to_stage(k);
        assert_eq!(pts.len(), small.model.len(), "{name}");
        let mut s = FixedBitSet::with_capacity(big.model.len());
        pts.iter().for_each(|&w| s.insert(w));
        assert!(big.model.frame.is_upset(&s), "{name}");
        let (restricted, _) = big.model.restrict(&s);
        assert_eq!(restricted.frame, small.model.frame, "{name}");
        assert!(is_l_frame(&l, &big.model.frame), "{name}");
    }
    let k4 = preset("K4").unwrap();
    assert!(matches!(
        universal_frame(&k4, &[0], 3, 2000),
        Err(transmodal::Error::Budget(_))
    ));
}

#[test]
fn removing_base_conditions_never_admits_more_frames() {
    for name in transmodal::logics::PRESETS {
        let l = preset(name).unwrap();
        for drop in 0..l.base.len() {
            let mut base = l.base.clone();
            base.remove(drop);
            let smaller = LogicSpec::from_base("reduced", base, l.bounds);
            for n in 1..=4 {
                for (_, f) in frames_of_size(n).unwrap().iter() {
                    if is_l_frame(&smaller, f) {
                        assert!(is_l_frame(&l, f), "{name} without condition {drop}");
                    }
                }
            }
        }
    }
}
