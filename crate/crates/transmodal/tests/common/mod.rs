//! Shared helpers for the integration tests: exhaustive formula
//! enumeration, an independent intuitionistic evaluator, and certificate
//! re-checks written against the public API only.

#![allow(dead_code)]

use fixedbitset::FixedBitSet;
use transmodal::admissibility::{pseudoextensible, strongly_extensible, AdmVerdict, Certificate, Rule};
use transmodal::frames::{FiniteFrame, Model};
use transmodal::logics::{is_l_frame, LogicSpec};
use transmodal::syntax::{Atom, Formula};
use transmodal::translations::IntFormula;

/// How an enumerated formula is built from earlier ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Unary(usize, usize),
    Binary(usize, usize, usize),
}

/// All shapes of size at most `max_size` over `leaves` leaves, `unary`
/// unary and `binary` binary connectives (each counting one symbol).
/// Children always precede their parents, and shapes come in size order.
pub fn shapes(leaves: usize, unary: usize, binary: usize, max_size: usize) -> Vec<Shape> {
    let mut out: Vec<Shape> = Vec::new();
    let mut by_size: Vec<std::ops::Range<usize>> = vec![Default::default()];
    for size in 1..=max_size {
        let start = out.len();
        if size == 1 {
            out.extend((0..leaves).map(Shape::Leaf));
        } else {
            for op in 0..unary {
                out.extend(by_size[size - 1].clone().map(|c| Shape::Unary(op, c)));
            }
            for left in 1..size - 1 {
                let right = size - 1 - left;
                for op in 0..binary {
                    for a in by_size[left].clone() {
                        for b in by_size[right].clone() {
                            out.push(Shape::Binary(op, a, b));
                        }
                    }
                }
            }
        }
        by_size.push(start..out.len());
    }
    out
}

/// Every modal formula over `leaves` of size at most `max_size`, built
/// with `¬ □ ◇` and `∧ ∨ → ↔`.
pub fn modal_formulas(leaves: &[Formula], max_size: usize) -> Vec<Formula> {
    let mut out: Vec<Formula> = Vec::new();
    for s in shapes(leaves.len(), 3, 4, max_size) {
        let f = match s {
            Shape::Leaf(i) => leaves[i].clone(),
            Shape::Unary(0, a) => out[a].not(),
            Shape::Unary(1, a) => out[a].boxed(),
            Shape::Unary(_, a) => out[a].dia(),
            Shape::Binary(0, a, b) => out[a].and(&out[b]),
            Shape::Binary(1, a, b) => out[a].or(&out[b]),
            Shape::Binary(2, a, b) => out[a].imp(&out[b]),
            Shape::Binary(_, a, b) => out[a].iff(&out[b]),
        };
        out.push(f);
    }
    out
}

/// Every intuitionistic formula over the atoms and `⊥` of size at most
/// `max_size`, built with `∧ ∨ →`, together with its shape.
pub fn int_formulas(atoms: &[Atom], max_size: usize) -> Vec<(Shape, IntFormula)> {
    let mut out: Vec<(Shape, IntFormula)> = Vec::new();
    for s in shapes(atoms.len() + 1, 0, 3, max_size) {
        let f = match s {
            Shape::Leaf(i) if i < atoms.len() => IntFormula::atom(atoms[i]),
            Shape::Leaf(_) => IntFormula::Bot,
            Shape::Binary(0, a, b) => IntFormula::and(out[a].1.clone(), out[b].1.clone()),
            Shape::Binary(1, a, b) => IntFormula::or(out[a].1.clone(), out[b].1.clone()),
            Shape::Binary(_, a, b) => IntFormula::imp(out[a].1.clone(), out[b].1.clone()),
            Shape::Unary(..) => unreachable!("no unary connectives"),
        };
        out.push((s, f));
    }
    out
}

/// A finite poset given by `le[x][y] ⇔ x ≤ y`.
pub struct Poset {
    pub le: Vec<Vec<bool>>,
}

impl Poset {
    pub fn len(&self) -> usize {
        self.le.len()
    }

    /// Is the set (a bit mask) upward closed?
    pub fn is_upset(&self, mask: u64) -> bool {
        (0..self.len()).all(|x| mask >> x & 1 == 0 || (0..self.len()).all(|y| !self.le[x][y] || mask >> y & 1 == 1))
    }

    pub fn upsets(&self) -> Vec<u64> {
        (0..1u64 << self.len()).filter(|&m| self.is_upset(m)).collect()
    }

    /// Forcing sets (bit masks) of every formula in `shapes` order, given
    /// the atom valuations; the leaf past the last atom is `⊥`.
    pub fn force(&self, shapes: &[Shape], atoms: &[u64]) -> Vec<u64> {
        let n = self.len();
        let mut out: Vec<u64> = Vec::with_capacity(shapes.len());
        for s in shapes {
            let v = match *s {
                Shape::Leaf(i) if i < atoms.len() => atoms[i],
                Shape::Leaf(_) => 0,
                Shape::Binary(0, a, b) => out[a] & out[b],
                Shape::Binary(1, a, b) => out[a] | out[b],
                Shape::Binary(_, a, b) => {
                    let (sa, sb) = (out[a], out[b]);
                    (0..n)
                        .filter(|&x| (0..n).all(|y| !self.le[x][y] || sa >> y & 1 == 0 || sb >> y & 1 == 1))
                        .fold(0, |acc, x| acc | 1 << x)
                }
                Shape::Unary(..) => unreachable!("no unary connectives"),
            };
            out.push(v);
        }
        out
    }
}

/// The cluster poset of a frame and the cluster of each point.
pub fn cluster_poset(f: &FiniteFrame) -> (Poset, Vec<usize>) {
    let n = f.len();
    let mut of: Vec<Option<usize>> = vec![None; n];
    let mut reps: Vec<usize> = Vec::new();
    for w in 0..n {
        if of[w].is_none() {
            let c = reps.len();
            reps.push(w);
            for v in w..n {
                if v == w || (f.sees(w, v) && f.sees(v, w)) {
                    of[v] = Some(c);
                }
            }
        }
    }
    let le = reps
        .iter()
        .map(|&a| reps.iter().map(|&b| a == b || f.sees(a, b)).collect())
        .collect();
    (Poset { le }, of.into_iter().map(|c| c.unwrap()).collect())
}

pub fn bits(s: &FixedBitSet) -> u64 {
    s.ones().fold(0, |acc, w| acc | 1 << w)
}

pub fn points(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&w| mask >> w & 1 == 1).collect()
}

/// Re-check an inadmissibility counterexample from scratch: an L-model
/// where the premises hold everywhere, every conclusion fails somewhere,
/// and the extensibility certificate holds.
pub fn verify_counterexample(l: &LogicSpec, rule: &Rule, v: &AdmVerdict) -> Result<(), String> {
    let cex = v
        .counterexample
        .as_ref()
        .ok_or("inadmissible verdict without a counterexample")?;
    let m: &Model = &cex.model;
    if !is_l_frame(l, &m.frame) {
        return Err(format!("counterexample is not an {}-frame", l.name));
    }
    for g in &rule.premises {
        if !m.holds_everywhere(g).map_err(|e| e.to_string())? {
            return Err(format!("premise {g} fails in the counterexample"));
        }
    }
    for d in &rule.conclusions {
        if m.holds_everywhere(d).map_err(|e| e.to_string())? {
            return Err(format!("conclusion {d} holds in the counterexample"));
        }
    }
    match &cex.certificate {
        Certificate::Pseudoextensible { .. } => {
            let ctx = rule.context();
            for ec in l.effective_base() {
                if !pseudoextensible(m, &ctx, ec).map_err(|e| e.to_string())? {
                    return Err(format!("counterexample is not pseudoextensible for {ec:?}"));
                }
            }
        }
        Certificate::StronglyExtensible { .. } => {
            if !strongly_extensible(l, m).map_err(|e| e.to_string())? {
                return Err("counterexample is not strongly extensible".into());
            }
        }
    }
    Ok(())
}
