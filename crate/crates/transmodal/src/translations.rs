//! Translations between logics and intuitionistic model checking.
//!
//! * [`gmt`]: the Gödel–McKinsey–Tarski translation of intuitionistic
//!   formulas into S4, boxing atoms and implications.
//! * [`boxdot`]: the boxdot translation of S4 into K4, replacing `□` by `⊡`.
//! * [`eff_boxdot`]: a linear-size variant of the boxdot translation that
//!   names every boxed subformula by a fresh variable.
//! * [`relativize`]: relativization of K4 to the subframe where an atom `r`
//!   holds, `r → φ^r`.
//!
//! [`ipc_check`] evaluates intuitionistic formulas on finite posets; the
//! translations are tested against it and against the modal model checker.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{skeleton, FiniteFrame, Model};
use crate::syntax::{Atom, Formula, Node, Substitution};

/// An intuitionistic formula over `→ ∧ ∨ ⊥`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IntFormula {
    Bot,
    Atom(Atom),
    And(Box<IntFormula>, Box<IntFormula>),
    Or(Box<IntFormula>, Box<IntFormula>),
    Imp(Box<IntFormula>, Box<IntFormula>),
}

impl IntFormula {
    pub fn atom(a: Atom) -> IntFormula {
        IntFormula::Atom(a)
    }

    pub fn and(a: IntFormula, b: IntFormula) -> IntFormula {
        IntFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: IntFormula, b: IntFormula) -> IntFormula {
        IntFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn imp(a: IntFormula, b: IntFormula) -> IntFormula {
        IntFormula::Imp(Box::new(a), Box::new(b))
    }

    /// `¬a`, as `a → ⊥`.
    pub fn not(a: IntFormula) -> IntFormula {
        IntFormula::imp(a, IntFormula::Bot)
    }

    /// `⊤`, as `⊥ → ⊥`.
    pub fn top() -> IntFormula {
        IntFormula::imp(IntFormula::Bot, IntFormula::Bot)
    }

    /// Read a modality-free formula intuitionistically: `~a` is `a → ⊥`,
    /// `top` is `⊥ → ⊥` and `a <-> b` is `(a → b) ∧ (b → a)`.
    pub fn from_formula(f: &Formula) -> Result<IntFormula> {
        Ok(match f.node() {
            Node::Bot => IntFormula::Bot,
            Node::Top => IntFormula::top(),
            Node::Atom(a) => IntFormula::Atom(*a),
            Node::Not(a) => IntFormula::not(IntFormula::from_formula(a)?),
            Node::And(a, b) => IntFormula::and(IntFormula::from_formula(a)?, IntFormula::from_formula(b)?),
            Node::Or(a, b) => IntFormula::or(IntFormula::from_formula(a)?, IntFormula::from_formula(b)?),
            Node::Imp(a, b) => IntFormula::imp(IntFormula::from_formula(a)?, IntFormula::from_formula(b)?),
            Node::Iff(a, b) => {
                let (a, b) = (IntFormula::from_formula(a)?, IntFormula::from_formula(b)?);
                IntFormula::and(IntFormula::imp(a.clone(), b.clone()), IntFormula::imp(b, a))
            }
            Node::Box(_) | Node::Dia(_) => {
                return Err(Error::Invalid(format!(
                    "intuitionistic formula contains a modality: {f}"
                )))
            }
        })
    }

    /// The same formula read classically, as a modal formula.
    pub fn to_formula(&self) -> Formula {
        match self {
            IntFormula::Bot => Formula::bot(),
            IntFormula::Atom(a) => Formula::atom(*a),
            IntFormula::And(a, b) => a.to_formula().and(&b.to_formula()),
            IntFormula::Or(a, b) => a.to_formula().or(&b.to_formula()),
            IntFormula::Imp(a, b) => a.to_formula().imp(&b.to_formula()),
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            IntFormula::Bot | IntFormula::Atom(_) => 1,
            IntFormula::And(a, b) | IntFormula::Or(a, b) | IntFormula::Imp(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for IntFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntFormula::Bot => write!(f, "bot"),
            IntFormula::Atom(a) => write!(f, "{a}"),
            IntFormula::And(a, b) => write!(f, "({a} & {b})"),
            IntFormula::Or(a, b) => write!(f, "({a} | {b})"),
            IntFormula::Imp(a, b) => write!(f, "({a} -> {b})"),
        }
    }
}

/// The Gödel–McKinsey–Tarski translation: atoms `a` become `□a`,
/// implications `□(T(a) → T(b))`; `∧`, `∨`, `⊥` are kept.
pub fn gmt(phi: &IntFormula) -> Formula {
    match phi {
        IntFormula::Bot => Formula::bot(),
        IntFormula::Atom(a) => Formula::atom(*a).boxed(),
        IntFormula::And(a, b) => gmt(a).and(&gmt(b)),
        IntFormula::Or(a, b) => gmt(a).or(&gmt(b)),
        IntFormula::Imp(a, b) => gmt(a).imp(&gmt(b)).boxed(),
    }
}

/// Rebuild a formula bottom-up, with `boxed` and `dia` supplying the
/// modal cases; shared subformulas are translated once.
fn map_modal(phi: &Formula, boxed: &dyn Fn(&Formula) -> Formula, dia: &dyn Fn(&Formula) -> Formula) -> Formula {
    fn go(
        f: &Formula,
        bx: &dyn Fn(&Formula) -> Formula,
        di: &dyn Fn(&Formula) -> Formula,
        memo: &mut HashMap<Formula, Formula>,
    ) -> Formula {
        if let Some(r) = memo.get(f) {
            return r.clone();
        }
        let r = match f.node() {
            Node::Bot | Node::Top | Node::Atom(_) => f.clone(),
            Node::Not(a) => go(a, bx, di, memo).not(),
            Node::And(a, b) => go(a, bx, di, memo).and(&go(b, bx, di, memo)),
            Node::Or(a, b) => go(a, bx, di, memo).or(&go(b, bx, di, memo)),
            Node::Imp(a, b) => go(a, bx, di, memo).imp(&go(b, bx, di, memo)),
            Node::Iff(a, b) => go(a, bx, di, memo).iff(&go(b, bx, di, memo)),
            Node::Box(a) => bx(&go(a, bx, di, memo)),
            Node::Dia(a) => di(&go(a, bx, di, memo)),
        };
        memo.insert(f.clone(), r.clone());
        r
    }
    go(phi, boxed, dia, &mut HashMap::new())
}

/// The boxdot translation: `□a ↦ ⊡a` and `◇a ↦ ⟐a`, Boolean connectives kept.
pub fn boxdot(phi: &Formula) -> Formula {
    map_modal(phi, &|a| a.boxdot(), &|a| a.diadot())
}

/// `φ^r`: `□a ↦ □(r → a)` and `◇a ↦ ◇(r ∧ a)`, atoms and Boolean connectives kept.
pub fn relativize_inner(phi: &Formula, r: Atom) -> Formula {
    let r = Formula::atom(r);
    map_modal(phi, &|a| r.imp(a).boxed(), &|a| r.and(a).dia())
}

/// The relativization `r → φ^r`; `r` must not occur in φ.
pub fn relativize(phi: &Formula, r: Atom) -> Result<Formula> {
    if phi.atoms().contains(&r) {
        return Err(Error::Invalid(format!("relativizing atom {r} occurs in {phi}")));
    }
    Ok(Formula::atom(r).imp(&relativize_inner(phi, r)))
}

/// Output of the efficient boxdot translation.
#[derive(Clone, Debug, Serialize)]
pub struct EffBoxdot {
    pub formula: Formula,
    /// The substitution `z ↦ boxdot(□ψ)` for the naming variables, under
    /// which the translation becomes equivalent to [`boxdot`].
    pub substitution: Substitution,
    /// Naming variable and the boxed subformula it names, in order of introduction.
    pub names: Vec<(u32, Formula)>,
}

/// The efficient boxdot translation: each boxed subformula `□ψ` of φ gets
/// a fresh variable `z`, numbered above every variable of φ, and the result is
/// `⋀ ⊡(z ↔ ⊡ψ′) → φ′`, where `′` replaces topmost boxed subformulas by
/// their names. A diamond `◇ψ` is read as `¬□¬ψ`.
///
/// The output size is linear in the size of φ.
pub fn eff_boxdot(phi: &Formula) -> EffBoxdot {
    struct Namer {
        next: u32,
        names: BTreeMap<Formula, u32>,
        order: Vec<(u32, Formula, Formula)>,
        memo: HashMap<Formula, Formula>,
    }
    impl Namer {
        /// The name of `□ψ`, where `inner` is `ψ′`.
        fn name(&mut self, boxed: &Formula, inner: Formula) -> Formula {
            if let Some(&z) = self.names.get(boxed) {
                return Formula::var(z);
            }
            let z = self.next;
            self.next += 1;
            self.names.insert(boxed.clone(), z);
            self.order.push((z, boxed.clone(), inner));
            Formula::var(z)
        }

        fn prime(&mut self, f: &Formula) -> Formula {
            if let Some(r) = self.memo.get(f) {
                return r.clone();
            }
            let r = match f.node() {
                Node::Bot | Node::Top | Node::Atom(_) => f.clone(),
                Node::Not(a) => self.prime(a).not(),
                Node::And(a, b) => self.prime(a).and(&self.prime(b)),
                Node::Or(a, b) => self.prime(a).or(&self.prime(b)),
                Node::Imp(a, b) => self.prime(a).imp(&self.prime(b)),
                Node::Iff(a, b) => self.prime(a).iff(&self.prime(b)),
                Node::Box(a) => {
                    let inner = self.prime(a);
                    self.name(f, inner)
                }
                Node::Dia(a) => {
                    let neg = a.not();
                    let inner = self.prime(&neg);
                    self.name(&neg.boxed(), inner).not()
                }
            };
            self.memo.insert(f.clone(), r.clone());
            r
        }
    }
    let next = phi.vars().into_iter().max().map_or(0, |v| v + 1);
    let mut n = Namer {
        next,
        names: BTreeMap::new(),
        order: Vec::new(),
        memo: HashMap::new(),
    };
    let body = n.prime(phi);
    let defs = n
        .order
        .iter()
        .map(|(z, _, inner)| Formula::var(*z).iff(&inner.boxdot()).boxdot());
    let formula = Formula::conj(defs).imp(&body);
    let substitution = n
        .order
        .iter()
        .fold(Substitution::new(), |s, (z, boxed, _)| s.with(*z, boxdot(boxed)));
    EffBoxdot {
        formula,
        substitution,
        names: n.order.into_iter().map(|(z, boxed, _)| (z, boxed)).collect(),
    }
}

/// The kinds of translation offered on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranslationKind {
    Gmt,
    Boxdot,
    EffBoxdot,
    Relativize(Atom),
}

/// Apply a translation to a parsed formula; `gmt` reads it intuitionistically.
pub fn translate(kind: TranslationKind, phi: &Formula) -> Result<Formula> {
    match kind {
        TranslationKind::Gmt => Ok(gmt(&IntFormula::from_formula(phi)?)),
        TranslationKind::Boxdot => Ok(boxdot(phi)),
        TranslationKind::EffBoxdot => Ok(eff_boxdot(phi).formula),
        TranslationKind::Relativize(r) => relativize(phi, r),
    }
}

// ---------------------------------------------------------------------------
// Intuitionistic models

/// A finite poset with an upward closed valuation.
#[derive(Clone, Debug)]
pub struct IpcModel {
    /// `up[w]`: the points `v ≥ w`, including `w`.
    up: Vec<FixedBitSet>,
    val: BTreeMap<Atom, FixedBitSet>,
}

impl IpcModel {
    /// Points are `0..n`; `le` lists pairs `w ≤ v` (closed reflexively and
    /// transitively). Fails on cycles or a valuation that is not upward closed.
    pub fn new(n: usize, le: &[(usize, usize)], val: BTreeMap<Atom, Vec<usize>>) -> Result<IpcModel> {
        let f = FiniteFrame::new(vec![true; n], le)?;
        let m = Model {
            frame: f,
            val: val
                .into_iter()
                .map(|(a, pts)| {
                    let mut s = FixedBitSet::with_capacity(n);
                    for w in pts {
                        s.insert(w);
                    }
                    (a, s)
                })
                .collect(),
        };
        IpcModel::from_model(&m)
    }

    /// A reflexive model without proper clusters, read as a poset.
    pub fn from_model(m: &Model) -> Result<IpcModel> {
        let n = m.len();
        if (0..n).any(|w| !m.frame.is_reflexive(w)) {
            return Err(Error::InvalidFrame("intuitionistic frames are reflexive".into()));
        }
        if m.frame.clusters().members.len() != n {
            return Err(Error::InvalidFrame("intuitionistic frames are antisymmetric".into()));
        }
        let up: Vec<FixedBitSet> = (0..n)
            .map(|w| {
                let mut s = FixedBitSet::with_capacity(n);
                for v in 0..n {
                    s.set(v, m.frame.le(w, v));
                }
                s
            })
            .collect();
        for (a, s) in &m.val {
            if s.ones().any(|w| !up[w].is_subset(s)) {
                return Err(Error::Invalid(format!("valuation of {a} is not upward closed")));
            }
        }
        Ok(IpcModel { up, val: m.val.clone() })
    }

    /// The skeleton of a reflexive model; a cluster gets an atom iff all of
    /// its points have it.
    pub fn skeleton_of(m: &Model) -> Result<IpcModel> {
        IpcModel::from_model(&skeleton(m)?)
    }

    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    /// Points where the formula is forced.
    pub fn extension(&self, phi: &IntFormula) -> Result<FixedBitSet> {
        let n = self.len();
        Ok(match phi {
            IntFormula::Bot => FixedBitSet::with_capacity(n),
            IntFormula::Atom(a) => self.val.get(a).cloned().ok_or(Error::MissingAtom(a.to_string()))?,
            IntFormula::And(a, b) => {
                let mut s = self.extension(a)?;
                s.intersect_with(&self.extension(b)?);
                s
            }
            IntFormula::Or(a, b) => {
                let mut s = self.extension(a)?;
                s.union_with(&self.extension(b)?);
                s
            }
            IntFormula::Imp(a, b) => {
                let (sa, sb) = (self.extension(a)?, self.extension(b)?);
                let mut s = FixedBitSet::with_capacity(n);
                for w in 0..n {
                    s.set(w, self.up[w].ones().all(|v| !sa.contains(v) || sb.contains(v)));
                }
                s
            }
        })
    }
}

/// Intuitionistic forcing `M, w ⊩ φ`.
pub fn ipc_check(m: &IpcModel, w: usize, phi: &IntFormula) -> Result<bool> {
    if w >= m.len() {
        return Err(Error::Invalid(format!("point {w} out of range")));
    }
    Ok(m.extension(phi)?.contains(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivability::is_theorem;
    use crate::logics::preset;
    use crate::syntax::{apply, parse};

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn translation_examples() {
        let a = Atom::Var(0);
        let b = Atom::Var(1);
        let t = gmt(&IntFormula::imp(IntFormula::atom(a), IntFormula::atom(b)));
        assert_eq!(t, f("[]([]x0 -> []x1)"));
        assert_eq!(boxdot(&f("[]x0")), f("x0 & []x0"));
        assert_eq!(relativize(&f("[]x0"), Atom::Param(0)).unwrap(), f("p0 -> [](p0 -> x0)"));
        assert!(relativize(&f("[]p0"), Atom::Param(0)).is_err());
        let e = eff_boxdot(&f("[]x0"));
        assert_eq!(e.formula, f("[.](x1 <-> [.]x0) -> x1"));
        assert_eq!(e.substitution.get(1), Some(&f("[.]x0")));
    }

    #[test]
    fn eff_boxdot_is_equiderivable() {
        let k4 = preset("K4").unwrap();
        for s in ["[][]x0", "<>x0 -> []<>x0", "[](x0 -> []x0) | <>p0"] {
            let phi = f(s);
            let e = eff_boxdot(&phi);
            let b = boxdot(&phi);
            assert!(is_theorem(&k4, &b.imp(&e.formula)).unwrap(), "{s}");
            assert!(
                is_theorem(&k4, &apply(&e.substitution, &e.formula).imp(&b)).unwrap(),
                "{s}"
            );
        }
    }

    #[test]
    fn ipc_examples() {
        let a = Atom::Var(0);
        let m = IpcModel::new(2, &[(0, 1)], BTreeMap::from([(a, vec![1])])).unwrap();
        let lem = IntFormula::or(IntFormula::atom(a), IntFormula::not(IntFormula::atom(a)));
        assert!(!ipc_check(&m, 0, &lem).unwrap());
        assert!(ipc_check(&m, 1, &lem).unwrap());
        assert!(!ipc_check(&m, 1, &IntFormula::Bot).unwrap());
        let one = IpcModel::new(1, &[], BTreeMap::from([(a, vec![0])])).unwrap();
        assert!(ipc_check(&one, 0, &IntFormula::atom(a)).unwrap());
        assert!(IpcModel::new(2, &[(0, 1)], BTreeMap::from([(a, vec![0])])).is_err());
    }
}
