//! Admissibility `Γ |~_L Δ` and unifiability with parameters.
//!
//! A rule is admissible when every substitution of its variables that makes
//! the premises theorems makes some conclusion a theorem; parameters are
//! never substituted. Four procedures are provided:
//!
//! * [`admissible_clx`] searches small L-models for a counterexample that is
//!   pseudoextensible for every extension condition of the logic. A found
//!   counterexample refutes admissibility; an exhausted search below the
//!   `4^|Σ|` size bound only gives a bounded verdict.
//! * [`admissible_linear_clx`] decides admissibility exactly for linear
//!   logics by a recursion over the sets `B⁺` of boxed formulas that hold
//!   throughout a model.
//! * [`admissible_bddp`] handles logics of bounded depth through strongly
//!   extensible models: exactly for linear logics, by a bounded closure
//!   search for other tabular logics.
//! * [`unifiable`] decides unifiability (inadmissibility of `φ / ∅`) by a
//!   cascade of cheaper methods first.
//!
//! Every inadmissibility verdict carries a counterexample that is checked
//! again from scratch (frame recognition, truth of the premises,
//! refutation of the conclusions, extensibility) before it is reported.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Serialize, Serializer};

use crate::derivability::{bitset, boxes_of, derives, is_theorem, reflexive_extensions, Builder};
use crate::error::{Error, Result};
use crate::frames::{universal_frame, FiniteFrame, FrameJson, Model, Refl};
use crate::logics::{is_l_frame, ClusterKind, ExtensionCondition, LogicSpec};
use crate::oracle::{brute_valuation_unify, eval_lanes, frames_of_size, LaneBatches, MAX_ENUMERATION_POINTS};
use crate::syntax::{apply, parse_list, Atom, Formula, Sigma, Substitution};

/// Default size cap of the general counterexample search.
pub const DEFAULT_CAP: usize = 4;

/// Default bound on candidate models (or closure steps) examined.
pub const DEFAULT_ADM_BUDGET: u64 = 2_000_000;

/// Largest counterexample built by the exact engines.
pub const MAX_CERTIFICATE_POINTS: usize = 4096;

/// Largest number of atoms in a rule context.
const MAX_ATOMS: usize = 16;

/// Largest number of cluster parameter patterns `E` enumerated per cluster type.
const MAX_PATTERNS: usize = 1 << 16;

// ---------------------------------------------------------------------------
// Rules and verdicts

/// A multiple-conclusion rule `Γ / Δ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub premises: Vec<Formula>,
    pub conclusions: Vec<Formula>,
}

impl Rule {
    pub fn new(premises: Vec<Formula>, conclusions: Vec<Formula>) -> Rule {
        Rule { premises, conclusions }
    }

    /// Parse `;`-separated premise and conclusion lists.
    pub fn parse(premises: &str, conclusions: &str) -> Result<Rule> {
        Ok(Rule::new(parse_list(premises)?, parse_list(conclusions)?))
    }

    /// The subformula context Σ of the rule.
    pub fn context(&self) -> Sigma {
        let seeds: Vec<Formula> = self.premises.iter().chain(&self.conclusions).cloned().collect();
        Sigma::new(&seeds)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Formula]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
        write!(f, "{} / {}", join(&self.premises), join(&self.conclusions))
    }
}

/// Outcome of an admissibility query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmStatus {
    /// A verified counterexample exists.
    Inadmissible,
    /// Admissible; the procedure was complete.
    Admissible,
    /// No counterexample up to the reported size cap.
    BoundedAdmissible,
}

/// How the extensibility of a counterexample was established.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// One tight pseudopredecessor per extension condition, parameter
    /// pattern and realizable `B⁺` set.
    Pseudoextensible { witnesses: Vec<TppWitness> },
    /// Every root cluster with distinct parameter values that may be added
    /// below a generated submodel has a copy there; `requirements` counts them.
    StronglyExtensible { requirements: usize },
}

/// A counterexample to admissibility.
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    #[serde(serialize_with = "model_as_json")]
    pub model: Model,
    pub certificate: Certificate,
}

fn model_as_json<S: Serializer>(m: &Model, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut j = FrameJson::from_model(m);
    j.root = None;
    j.serialize(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmVerdict {
    pub status: AdmStatus,
    /// Size cap behind a bounded verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// The procedure that produced the verdict.
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl AdmVerdict {
    fn admissible(method: &str) -> AdmVerdict {
        AdmVerdict {
            status: AdmStatus::Admissible,
            cap: None,
            method: method.to_string(),
            counterexample: None,
        }
    }

    fn bounded(method: &str, cap: usize) -> AdmVerdict {
        AdmVerdict {
            status: AdmStatus::BoundedAdmissible,
            cap: Some(cap),
            method: method.to_string(),
            counterexample: None,
        }
    }

    fn inadmissible(method: &str, cex: Counterexample) -> AdmVerdict {
        AdmVerdict {
            status: AdmStatus::Inadmissible,
            cap: None,
            method: method.to_string(),
            counterexample: Some(cex),
        }
    }

    /// `Some(true)` admissible, `Some(false)` inadmissible, `None` bounded.
    pub fn admissible_value(&self) -> Option<bool> {
        match self.status {
            AdmStatus::Inadmissible => Some(false),
            AdmStatus::Admissible => Some(true),
            AdmStatus::BoundedAdmissible => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status != AdmStatus::BoundedAdmissible
    }
}

/// Which clauses a tight pseudopredecessor must satisfy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TppMode {
    /// Parameter pattern and the box conditions on `B⁺`, `B⁻` and `D`.
    #[default]
    Displayed,
    /// Additionally, each chosen point agrees on all of Σ with the
    /// corresponding point of the virtual new cluster.
    FullSigma,
}

#[derive(Clone, Copy, Debug)]
pub struct AdmOptions {
    /// Largest model size searched by the general engine.
    pub cap: usize,
    pub mode: TppMode,
    /// Bound on candidate models or closure steps.
    pub budget: u64,
}

impl Default for AdmOptions {
    fn default() -> Self {
        AdmOptions {
            cap: DEFAULT_CAP,
            mode: TppMode::Displayed,
            budget: DEFAULT_ADM_BUDGET,
        }
    }
}

// ---------------------------------------------------------------------------
// Rule contexts

/// Σ together with the atom layout used in valuation masks: variables in
/// the low bits, parameters above them.
struct Ctx {
    sigma: Sigma,
    k: usize,
    nv: usize,
    np: usize,
    gamma: Vec<usize>,
    delta: Vec<usize>,
    /// Kernel position of `δ` for each conclusion (present when conclusions are boxed into Σ).
    delta_kernels: Vec<Option<usize>>,
    var_vals: Vec<u64>,
    all_vals: Vec<u64>,
}

impl Ctx {
    fn new(rule: &Rule, box_conclusions: bool) -> Result<Ctx> {
        let mut seeds: Vec<Formula> = rule.premises.iter().chain(&rule.conclusions).cloned().collect();
        if box_conclusions {
            seeds.extend(rule.conclusions.iter().map(|d| d.boxed()));
        }
        let sigma = Sigma::new(&seeds);
        let nv = sigma.variables().len();
        let np = sigma.parameters().len();
        if nv + np > MAX_ATOMS {
            return Err(Error::Budget(format!("{} atoms in the rule", nv + np)));
        }
        let idx = |f: &Formula| sigma.index_of(f).expect("seed in Σ");
        let gamma = rule.premises.iter().map(idx).collect();
        let delta: Vec<usize> = rule.conclusions.iter().map(idx).collect();
        let delta_kernels = delta.iter().map(|&d| sigma.kernel_pos(d)).collect();
        Ok(Ctx {
            k: sigma.num_kernels(),
            nv,
            np,
            gamma,
            delta,
            delta_kernels,
            var_vals: (0..1u64 << nv).collect(),
            all_vals: (0..1u64 << (nv + np)).collect(),
            sigma,
        })
    }

    fn mask(&self, v: u64, e: u64) -> u64 {
        v | e << self.nv
    }

    fn full(&self) -> FixedBitSet {
        bitset(self.k, 0..self.k)
    }

    fn eval(&self, mask: u64, boxes: &FixedBitSet) -> Vec<bool> {
        self.sigma.eval(mask, &boxes_of(boxes, self.k))
    }

    fn gamma_ok(&self, t: &[bool]) -> bool {
        self.gamma.iter().all(|&g| t[g])
    }

    /// Kernels of `within` true in the table.
    fn true_in(&self, t: &[bool], within: &FixedBitSet) -> FixedBitSet {
        bitset(self.k, within.ones().filter(|&c| t[self.sigma.kernels[c]]))
    }
}

/// Nonempty parameter patterns `E ⊆ 2^P` for a cluster type: singletons for
/// an irreflexive point, sets of at most `cap` assignments otherwise;
/// ordered by size, then lexicographically.
fn patterns(np: usize, reflexive: bool, cap: Option<usize>) -> Result<Vec<Vec<u64>>> {
    let n = 1usize << np;
    if !reflexive {
        return Ok((0..n as u64).map(|e| vec![e]).collect());
    }
    let cap = cap.unwrap_or(n).min(n);
    let mut out: Vec<Vec<u64>> = Vec::new();
    fn go(start: u64, n: u64, cap: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) -> Result<()> {
        if cur.len() == cap {
            return Ok(());
        }
        for a in start..n {
            cur.push(a);
            out.push(cur.clone());
            if out.len() > MAX_PATTERNS {
                return Err(Error::Budget("too many parameter patterns".into()));
            }
            go(a + 1, n, cap, cur, out)?;
            cur.pop();
        }
        Ok(())
    }
    go(0, n as u64, cap, &mut Vec::new(), &mut out)?;
    out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    Ok(out)
}

/// Maximal number of points of a reflexive cluster of this kind in L.
fn refl_cap(l: &LogicSpec, kind: ClusterKind) -> Option<usize> {
    let k = kind.max_size().map(|k| k as usize);
    match (k, l.bounds.cluster_size.map(|c| c as usize)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Pick one candidate per group so that their hits cover `need`, subject
/// to `accept`. With `dedupe`, candidates with equal or dominated hits are
/// dropped first.
fn choose_cover<T: Copy>(
    groups: &[Vec<(T, FixedBitSet)>],
    need: &FixedBitSet,
    dedupe: bool,
    accept: &mut dyn FnMut(&[T]) -> bool,
) -> Option<Vec<T>> {
    let groups: Vec<Vec<(T, FixedBitSet)>> = groups
        .iter()
        .map(|g| {
            let mut g: Vec<(T, FixedBitSet)> = g
                .iter()
                .map(|(x, h)| {
                    let mut h = h.clone();
                    h.intersect_with(need);
                    (*x, h)
                })
                .collect();
            if dedupe {
                let mut kept: Vec<(T, FixedBitSet)> = Vec::new();
                for (x, h) in g.drain(..) {
                    if kept.iter().any(|(_, k)| h.is_subset(k)) {
                        continue;
                    }
                    kept.retain(|(_, k)| !k.is_subset(&h));
                    kept.push((x, h));
                }
                g = kept;
            }
            g
        })
        .collect();
    if groups.iter().any(|g| g.is_empty()) {
        return None;
    }
    let mut rest = vec![FixedBitSet::with_capacity(need.len()); groups.len() + 1];
    for i in (0..groups.len()).rev() {
        let mut u = rest[i + 1].clone();
        for (_, h) in &groups[i] {
            u.union_with(h);
        }
        rest[i] = u;
    }
    #[allow(clippy::type_complexity)]
    fn go<T: Copy>(
        i: usize,
        groups: &[Vec<(T, FixedBitSet)>],
        rest: &[FixedBitSet],
        need: &FixedBitSet,
        covered: &FixedBitSet,
        chosen: &mut Vec<T>,
        accept: &mut dyn FnMut(&[T]) -> bool,
    ) -> bool {
        let mut reach = covered.clone();
        reach.union_with(&rest[i]);
        if !need.is_subset(&reach) {
            return false;
        }
        if i == groups.len() {
            return accept(chosen);
        }
        for (x, h) in &groups[i] {
            let mut c = covered.clone();
            c.union_with(h);
            chosen.push(*x);
            if go(i + 1, groups, rest, need, &c, chosen, accept) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    let mut chosen = Vec::new();
    let covered = FixedBitSet::with_capacity(need.len());
    go(0, &groups, &rest, need, &covered, &mut chosen, accept).then_some(chosen)
}

/// Search for a reflexive cluster with one point per parameter assignment
/// of `es`, placed below a part where exactly the kernels of `s` hold
/// throughout, all of whose points satisfy Γ. The cluster's own box set T
/// (kernels of `s` true throughout the cluster) must pass `accept`.
///
/// Returns T and the valuation masks of the points.
#[allow(clippy::type_complexity)]
fn refl_search(
    ctx: &Ctx,
    s: &FixedBitSet,
    es: &[u64],
    accept: &mut dyn FnMut(&FixedBitSet) -> Result<bool>,
) -> Result<Option<(FixedBitSet, Vec<u64>)>> {
    #[allow(clippy::type_complexity)]
    fn go(
        ctx: &Ctx,
        s: &FixedBitSet,
        es: &[u64],
        i: usize,
        t: &mut FixedBitSet,
        cands: &[Vec<u64>],
        accept: &mut dyn FnMut(&FixedBitSet) -> Result<bool>,
    ) -> Result<Option<Vec<u64>>> {
        if i == ctx.k {
            let mut need = s.clone();
            need.difference_with(t);
            let groups: Vec<Vec<(u64, FixedBitSet)>> = es
                .iter()
                .zip(cands)
                .map(|(&e, cs)| {
                    cs.iter()
                        .filter_map(|&v| {
                            let mask = ctx.mask(v, e);
                            let tab = ctx.eval(mask, t);
                            if !ctx.gamma_ok(&tab) {
                                return None;
                            }
                            let hits = bitset(ctx.k, need.ones().filter(|&c| !tab[ctx.sigma.kernels[c]]));
                            Some((mask, hits))
                        })
                        .collect()
                })
                .collect();
            return Ok(match choose_cover(&groups, &need, true, &mut |_| true) {
                Some(pts) if accept(t)? => Some(pts),
                _ => None,
            });
        }
        if !s.contains(i) {
            return go(ctx, s, es, i + 1, t, cands, accept);
        }
        let node = ctx.sigma.kernels[i];
        let mut filtered: Vec<Vec<u64>> = Vec::with_capacity(es.len());
        let mut some_refuter = false;
        for (&e, cs) in es.iter().zip(cands) {
            let (yes, no): (Vec<u64>, Vec<u64>) = cs.iter().partition(|&&v| ctx.eval(ctx.mask(v, e), t)[node]);
            some_refuter |= !no.is_empty();
            filtered.push(yes);
        }
        if filtered.iter().all(|f| !f.is_empty()) {
            t.insert(i);
            let r = go(ctx, s, es, i + 1, t, &filtered, accept)?;
            t.set(i, false);
            if r.is_some() {
                return Ok(r);
            }
        }
        if some_refuter {
            return go(ctx, s, es, i + 1, t, cands, accept);
        }
        Ok(None)
    }
    let cands: Vec<Vec<u64>> = es.iter().map(|_| ctx.var_vals.clone()).collect();
    let mut t = FixedBitSet::with_capacity(ctx.k);
    Ok(go(ctx, s, es, 0, &mut t, &cands, accept)?.map(|pts| (t_result(ctx, s, es, &pts), pts)))
}

/// The box set of a reflexive cluster with the given points below `s`.
fn t_result(ctx: &Ctx, s: &FixedBitSet, _es: &[u64], pts: &[u64]) -> FixedBitSet {
    let (_, boxes) = ctx.sigma.eval_cluster(pts, &boxes_of(s, ctx.k));
    bitset(ctx.k, (0..ctx.k).filter(|&c| boxes[c]))
}

// ---------------------------------------------------------------------------
// Pseudoextensibility

/// A tight pseudopredecessor found for one requirement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TppWitness {
    pub condition: ExtensionCondition,
    /// Parameter assignments `E`, as masks over the context's parameters.
    pub assignments: Vec<u64>,
    /// Kernel positions of `B⁺`.
    pub bplus: Vec<usize>,
    /// The chosen points, one per assignment.
    pub points: Vec<usize>,
}

struct Pt {
    e: u64,
    mask: u64,
    boxes: FixedBitSet,
    holds: FixedBitSet,
    dot: FixedBitSet,
    row: Vec<bool>,
}

/// Per-point Σ-profiles of a model.
struct Probe<'a> {
    sigma: &'a Sigma,
    k: usize,
    np: usize,
    pts: Vec<Pt>,
}

impl<'a> Probe<'a> {
    fn new(sigma: &'a Sigma, m: &Model) -> Probe<'a> {
        let mut m = m.clone();
        for a in &sigma.atoms {
            if !m.val.contains_key(a) {
                m.set(*a, &[]);
            }
        }
        let truth = m.truth(sigma).expect("all atoms present");
        let k = sigma.num_kernels();
        let nv = sigma.variables().len();
        let pts = (0..m.len())
            .map(|w| {
                let mask = m.mask(w, &sigma.atoms);
                let boxes = bitset(k, (0..k).filter(|&c| truth[sigma.box_nodes[c]].contains(w)));
                let holds = bitset(k, (0..k).filter(|&c| truth[sigma.kernels[c]].contains(w)));
                let mut dot = boxes.clone();
                dot.intersect_with(&holds);
                let row = (0..sigma.n()).map(|i| truth[i].contains(w)).collect();
                Pt {
                    e: mask >> nv,
                    mask,
                    boxes,
                    holds,
                    dot,
                    row,
                }
            })
            .collect();
        Probe {
            sigma,
            k,
            np: sigma.parameters().len(),
            pts,
        }
    }

    /// A tight ⟨ri,E⟩-pseudopredecessor of any X with the given `B⁺`.
    fn tpp(&self, ri: Refl, es: &[u64], bplus: &FixedBitSet, mode: TppMode) -> Option<Vec<usize>> {
        let above = boxes_of(bplus, self.k);
        match ri {
            Refl::I => {
                let e = *es.first()?;
                (0..self.pts.len())
                    .find(|&w| {
                        let p = &self.pts[w];
                        p.e == e
                            && p.boxes == *bplus
                            && (mode == TppMode::Displayed || self.sigma.eval(p.mask, &above) == p.row)
                    })
                    .map(|w| vec![w])
            }
            Refl::R => {
                // Group candidates by their box set S = B⁺ ∖ D.
                let mut by_s: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
                for (w, p) in self.pts.iter().enumerate() {
                    if p.boxes.is_subset(bplus) && p.boxes.is_subset(&p.holds) && es.contains(&p.e) {
                        by_s.entry(p.boxes.ones().collect()).or_default().push(w);
                    }
                }
                for (s, ws) in by_s.iter().rev() {
                    let s = bitset(self.k, s.iter().copied());
                    let mut need = bplus.clone();
                    need.difference_with(&s);
                    let groups: Vec<Vec<(usize, FixedBitSet)>> = es
                        .iter()
                        .map(|&e| {
                            ws.iter()
                                .filter(|&&w| self.pts[w].e == e)
                                .map(|&w| {
                                    let mut hits = need.clone();
                                    hits.difference_with(&self.pts[w].holds);
                                    (w, hits)
                                })
                                .collect()
                        })
                        .collect();
                    let full = mode == TppMode::FullSigma;
                    let mut agree = |chosen: &[usize]| {
                        if !full {
                            return true;
                        }
                        let vals: Vec<u64> = chosen.iter().map(|&w| self.pts[w].mask).collect();
                        let (tables, _) = self.sigma.eval_cluster(&vals, &above);
                        chosen.iter().zip(&tables).all(|(&w, t)| *t == self.pts[w].row)
                    };
                    if let Some(c) = choose_cover(&groups, &need, !full, &mut agree) {
                        return Some(c);
                    }
                }
                None
            }
        }
    }

    /// The sets `B⁺(X)` for the sets X an extension condition with
    /// branching `m` quantifies over.
    fn bplus_family(&self, m: Option<u32>) -> Vec<FixedBitSet> {
        let mut profiles: Vec<FixedBitSet> = Vec::new();
        for p in &self.pts {
            if !profiles.contains(&p.dot) {
                profiles.push(p.dot.clone());
            }
        }
        let mut out: Vec<FixedBitSet> = Vec::new();
        match m {
            Some(0) => out.push(bitset(self.k, 0..self.k)),
            Some(m) => {
                // Intersections of at most m profiles.
                let mut layer: Vec<FixedBitSet> = profiles.clone();
                out.extend(layer.iter().cloned());
                for _ in 1..m {
                    let mut next = Vec::new();
                    for a in &layer {
                        for b in &profiles {
                            let mut c = a.clone();
                            c.intersect_with(b);
                            if !out.contains(&c) {
                                out.push(c.clone());
                                next.push(c);
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    layer = next;
                }
            }
            None => {
                // Closure of the profiles under intersection.
                out.extend(profiles.iter().cloned());
                let mut i = 0;
                while i < out.len() {
                    for b in &profiles {
                        let mut c = out[i].clone();
                        c.intersect_with(b);
                        if !out.contains(&c) {
                            out.push(c);
                        }
                    }
                    i += 1;
                }
            }
        }
        out
    }

    /// Witnesses for every requirement of the condition, or `None` when one is missing.
    fn check(&self, ec: ExtensionCondition, mode: TppMode) -> Result<Option<Vec<TppWitness>>> {
        let ri = if ec.cluster.is_reflexive() { Refl::R } else { Refl::I };
        let es = patterns(
            self.np,
            ec.cluster.is_reflexive(),
            ec.cluster.max_size().map(|k| k as usize),
        )?;
        let mut out = Vec::new();
        for bplus in self.bplus_family(ec.branching) {
            for e in &es {
                match self.tpp(ri, e, &bplus, mode) {
                    Some(points) => out.push(TppWitness {
                        condition: ec,
                        assignments: e.clone(),
                        bplus: bplus.ones().collect(),
                        points,
                    }),
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(out))
    }
}

/// Is there a tight ⟨ri,E⟩-pseudopredecessor with respect to Σ for a set
/// whose `B⁺` (kernels ψ with `⊡ψ` throughout it) is `bplus`?
///
/// Assignments in `e` are bit masks over the parameters of Σ.
pub fn tpp_exists(m: &Model, ctx: &Sigma, ri: Refl, e: &[u64], bplus: &FixedBitSet) -> bool {
    Probe::new(ctx, m).tpp(ri, e, bplus, TppMode::Displayed).is_some()
}

/// Is the model ⟨C,m⟩-pseudoextensible with respect to Σ?
pub fn pseudoextensible(m: &Model, ctx: &Sigma, ec: ExtensionCondition) -> Result<bool> {
    Ok(pseudoextensibility_witnesses(m, ctx, ec, TppMode::Displayed)?.is_some())
}

/// The pseudopredecessors establishing ⟨C,m⟩-pseudoextensibility, if it holds.
pub fn pseudoextensibility_witnesses(
    m: &Model,
    ctx: &Sigma,
    ec: ExtensionCondition,
    mode: TppMode,
) -> Result<Option<Vec<TppWitness>>> {
    Probe::new(ctx, m).check(ec, mode)
}

// ---------------------------------------------------------------------------
// Certificate checking

enum Extensibility {
    Pseudo,
    Strong,
}

/// Re-check a counterexample from scratch and produce its certificate.
fn verify(l: &LogicSpec, rule: &Rule, ctx: &Ctx, m: &Model, kind: Extensibility) -> Result<Certificate> {
    let fail = |what: &str| Err(Error::Invalid(format!("internal: counterexample to {rule} {what}")));
    if !is_l_frame(l, &m.frame) {
        return fail("is not an L-frame");
    }
    for g in &rule.premises {
        if !m.holds_everywhere(g)? {
            return fail("does not satisfy the premises");
        }
    }
    for d in &rule.conclusions {
        if m.holds_everywhere(d)? {
            return fail("does not refute a conclusion");
        }
    }
    match kind {
        Extensibility::Pseudo => {
            let probe = Probe::new(&ctx.sigma, m);
            let mut witnesses = Vec::new();
            for ec in l.effective_base() {
                match probe.check(ec, TppMode::FullSigma)? {
                    Some(w) => witnesses.extend(w),
                    None => return fail("is not pseudoextensible"),
                }
            }
            Ok(Certificate::Pseudoextensible { witnesses })
        }
        Extensibility::Strong => {
            let params = ctx.sigma.parameters();
            let cm = CModel::from_model(m, &ctx.sigma.atoms, &params);
            let missing = cm.requirements(l, params.len(), true)?;
            if !missing.is_empty() {
                return fail("is not strongly extensible");
            }
            let requirements = cm.requirements(l, params.len(), false)?.len();
            Ok(Certificate::StronglyExtensible { requirements })
        }
    }
}

// ---------------------------------------------------------------------------
// General search

fn check_clx(l: &LogicSpec) -> Result<()> {
    let implied_depth = l.base.iter().all(|c| c.branching == Some(0));
    if l.needs_global_check() || (l.bounds.depth.is_some() && !implied_depth) {
        return Err(Error::Unsupported(format!(
            "{} is not given by extension conditions alone; use the bounded-depth engine",
            l.name
        )));
    }
    Ok(())
}

fn derivable(l: &LogicSpec, rule: &Rule) -> Result<bool> {
    Ok(!rule.conclusions.is_empty() && derives(l, &rule.premises, &rule.conclusions)?.derivable)
}

/// Search L-models of at most `cap` points for a counterexample.
pub fn admissible_clx(l: &LogicSpec, rule: &Rule, cap: usize) -> Result<AdmVerdict> {
    admissible_clx_with(
        l,
        rule,
        &AdmOptions {
            cap,
            ..AdmOptions::default()
        },
    )
}

/// [`admissible_clx`] with explicit options.
///
/// Models are visited by size, then canonical frame order, then valuation
/// order, so the reported counterexample is the least one.
pub fn admissible_clx_with(l: &LogicSpec, rule: &Rule, opts: &AdmOptions) -> Result<AdmVerdict> {
    check_clx(l)?;
    if derivable(l, rule)? {
        return Ok(AdmVerdict::admissible("derivable"));
    }
    let ctx = Ctx::new(rule, false)?;
    let sigma = &ctx.sigma;
    let na = sigma.atoms.len();
    if opts.cap > MAX_ENUMERATION_POINTS {
        return Err(Error::Budget(format!(
            "size cap {} exceeds the enumeration limit {MAX_ENUMERATION_POINTS}",
            opts.cap
        )));
    }
    if opts.cap * na > 24 {
        return Err(Error::Budget(format!("{na} atoms on {} points", opts.cap)));
    }
    let base = l.effective_base();
    let complete = u32::try_from(sigma.n())
        .ok()
        .and_then(|n| 4usize.checked_pow(n))
        .is_some_and(|b| b <= opts.cap);
    let mut examined = 0u64;
    for size in 1..=opts.cap {
        for (_, f) in frames_of_size(size)?.iter() {
            if !is_l_frame(l, f) {
                continue;
            }
            let lb = LaneBatches::new(size, na);
            for batch in 0..lb.batches {
                let t = eval_lanes(sigma, f, &lb.words(batch));
                let mut ok = lb.lanes;
                for &g in &ctx.gamma {
                    for w in 0..size {
                        ok &= t[g][w];
                    }
                }
                for &d in &ctx.delta {
                    let mut refuted = 0;
                    for w in 0..size {
                        refuted |= !t[d][w];
                    }
                    ok &= refuted;
                }
                while ok != 0 {
                    let lane = ok.trailing_zeros();
                    ok &= ok - 1;
                    examined += 1;
                    if examined > opts.budget {
                        return Err(Error::Budget(format!(
                            "admissibility search exceeded {} candidate models",
                            opts.budget
                        )));
                    }
                    let m = lb.model(f, &sigma.atoms, batch, lane);
                    let probe = Probe::new(sigma, &m);
                    let mut good = true;
                    for ec in &base {
                        if probe.check(*ec, opts.mode)?.is_none() {
                            good = false;
                            break;
                        }
                    }
                    if good {
                        let certificate = verify(l, rule, &ctx, &m, Extensibility::Pseudo)?;
                        return Ok(AdmVerdict::inadmissible(
                            "pseudoextensible counterexample search",
                            Counterexample { model: m, certificate },
                        ));
                    }
                }
            }
        }
    }
    Ok(if complete {
        AdmVerdict::admissible("exhaustive counterexample search up to 4^|Σ| points")
    } else {
        AdmVerdict::bounded("pseudoextensible counterexample search", opts.cap)
    })
}

// ---------------------------------------------------------------------------
// Linear logics: recursion over B⁺ sets

/// A cluster added below a model, with the box set of the result.
#[derive(Clone, Debug)]
struct Ext {
    refl: bool,
    vals: Vec<u64>,
    t: FixedBitSet,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LinMode {
    /// Linear clx logics: goodness depends on `B⁺` only, and need not be
    /// re-established when a new cluster leaves `B⁺` unchanged.
    Clx,
    /// Linear logics of depth `d`: clusters have distinct parameter values
    /// and goodness is tracked per depth.
    Bounded(usize),
}

type Requirement = (bool, Vec<u64>);

struct LinSearch<'a> {
    ctx: &'a Ctx,
    mode: LinMode,
    /// Root clusters with no successor, and with one successor.
    reqs0: Vec<Requirement>,
    reqs1: Vec<Requirement>,
    /// Cluster kinds for arbitrary chains: top and middle, with size caps.
    top_kinds: Vec<(bool, Option<usize>)>,
    mid_kinds: Vec<(bool, Option<usize>)>,
    memo: HashMap<(FixedBitSet, usize), Option<Vec<Ext>>>,
    steps: u64,
    budget: u64,
}

impl<'a> LinSearch<'a> {
    fn new(ctx: &'a Ctx, l: &LogicSpec, mode: LinMode, budget: u64) -> Result<LinSearch<'a>> {
        let base = l.effective_base();
        let mut reqs0: BTreeSet<(usize, Requirement)> = BTreeSet::new();
        let mut reqs1: BTreeSet<(usize, Requirement)> = BTreeSet::new();
        let mut top: BTreeMap<bool, Option<usize>> = BTreeMap::new();
        let mut mid: BTreeMap<bool, Option<usize>> = BTreeMap::new();
        let bigger = |a: Option<usize>, b: Option<usize>| match (a, b) {
            (None, _) | (_, None) => None,
            (Some(x), Some(y)) => Some(x.max(y)),
        };
        for ec in &base {
            let refl = ec.cluster.is_reflexive();
            let cap = if refl { refl_cap(l, ec.cluster) } else { Some(1) };
            for e in patterns(ctx.np, refl, cap)? {
                let key = (e.len(), (refl, e));
                reqs0.insert(key.clone());
                if ec.branching != Some(0) {
                    reqs1.insert(key);
                }
            }
            let c = top.entry(refl).or_insert(Some(0));
            *c = bigger(*c, cap);
            if ec.branching != Some(0) {
                let c = mid.entry(refl).or_insert(Some(0));
                *c = bigger(*c, cap);
            }
        }
        Ok(LinSearch {
            ctx,
            mode,
            reqs0: reqs0.into_iter().map(|(_, r)| r).collect(),
            reqs1: reqs1.into_iter().map(|(_, r)| r).collect(),
            top_kinds: top.into_iter().collect(),
            mid_kinds: mid.into_iter().collect(),
            memo: HashMap::new(),
            steps: 0,
            budget,
        })
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::Budget(format!(
                "linear admissibility exceeded {} steps",
                self.budget
            )));
        }
        Ok(())
    }

    fn depth_key(&self, j: usize) -> usize {
        match self.mode {
            LinMode::Clx => 0,
            LinMode::Bounded(_) => j,
        }
    }

    /// Can every required cluster be added below a model with box set `s`
    /// and depth `j` so that the result satisfies Γ and is again good?
    fn good(&mut self, s: &FixedBitSet, j: usize) -> Result<bool> {
        let j = self.depth_key(j);
        let key = (s.clone(), j);
        if let Some(r) = self.memo.get(&key) {
            return Ok(r.is_some());
        }
        self.tick()?;
        let (reqs, lazy) = match self.mode {
            LinMode::Clx => (self.reqs1.clone(), true),
            LinMode::Bounded(d) if j >= d => (Vec::new(), false),
            LinMode::Bounded(_) if j == 0 => (self.reqs0.clone(), false),
            LinMode::Bounded(_) => (self.reqs1.clone(), false),
        };
        let mut wits = Vec::new();
        for (refl, es) in &reqs {
            match self.extend(s, j, *refl, es, lazy)? {
                Some(x) => wits.push(x),
                None => {
                    self.memo.insert(key, None);
                    return Ok(false);
                }
            }
        }
        self.memo.insert(key, Some(wits));
        Ok(true)
    }

    /// A cluster with one point per assignment of `es` below a model with
    /// box set `s` and depth `j`, satisfying Γ, such that the resulting
    /// model is good (or, when `lazy`, keeps the box set unchanged).
    fn extend(&mut self, s: &FixedBitSet, j: usize, refl: bool, es: &[u64], lazy: bool) -> Result<Option<Ext>> {
        let ctx = self.ctx;
        if !refl {
            let e = es[0];
            for &v in &ctx.var_vals {
                let mask = ctx.mask(v, e);
                let tab = ctx.eval(mask, s);
                if !ctx.gamma_ok(&tab) {
                    continue;
                }
                let t = ctx.true_in(&tab, s);
                if (lazy && t == *s) || self.good(&t, j + 1)? {
                    return Ok(Some(Ext {
                        refl: false,
                        vals: vec![mask],
                        t,
                    }));
                }
            }
            return Ok(None);
        }
        let found = refl_search(ctx, s, es, &mut |t| Ok((lazy && t == s) || self.good(t, j + 1)?))?;
        Ok(found.map(|(t, vals)| Ext { refl: true, vals, t }))
    }

    /// The first condition: every admissible final cluster can be realized.
    fn finals(&mut self) -> Result<Option<Vec<Ext>>> {
        let full = self.ctx.full();
        match self.mode {
            LinMode::Clx => {
                let mut out = Vec::new();
                for (refl, es) in self.reqs0.clone() {
                    match self.extend(&full, 0, refl, &es, false)? {
                        Some(x) => out.push(x),
                        None => return Ok(None),
                    }
                }
                Ok(Some(out))
            }
            LinMode::Bounded(_) => {
                if !self.good(&full, 0)? {
                    return Ok(None);
                }
                Ok(self.memo[&(full, 0)].clone())
            }
        }
    }

    /// Good chains of arbitrary clusters satisfying Γ: for each reached
    /// (box set, depth), the bottom cluster and the state above it.
    #[allow(clippy::type_complexity)]
    fn chains(&mut self) -> Result<Vec<((FixedBitSet, usize), Ext, Option<(FixedBitSet, usize)>)>> {
        let ctx = self.ctx;
        let limit = match self.mode {
            LinMode::Clx => usize::MAX,
            LinMode::Bounded(d) => d,
        };
        let mut seen: HashSet<(FixedBitSet, usize)> = HashSet::new();
        let mut out = Vec::new();
        let mut queue: VecDeque<(FixedBitSet, usize)> = VecDeque::new();
        let full = ctx.full();
        let mut frontier: Vec<(Option<(FixedBitSet, usize)>, FixedBitSet, usize)> = vec![(None, full, 0)];
        loop {
            for (above, z, j) in frontier.drain(..) {
                let kinds = if above.is_none() {
                    self.top_kinds.clone()
                } else {
                    self.mid_kinds.clone()
                };
                let mut found: Vec<Ext> = Vec::new();
                for (refl, cap) in kinds {
                    if cap == Some(0) {
                        continue;
                    }
                    if refl {
                        for (t, vals) in reflexive_extensions(&ctx.sigma, &z, &ctx.all_vals, cap, &ctx.gamma) {
                            found.push(Ext { refl: true, vals, t });
                        }
                    } else {
                        for &mask in &ctx.all_vals {
                            let tab = ctx.eval(mask, &z);
                            if ctx.gamma_ok(&tab) {
                                found.push(Ext {
                                    refl: false,
                                    vals: vec![mask],
                                    t: ctx.true_in(&tab, &z),
                                });
                            }
                        }
                    }
                }
                for x in found {
                    self.tick()?;
                    let key = (x.t.clone(), self.depth_key(j + 1));
                    if seen.contains(&key) || !self.good(&x.t, j + 1)? {
                        continue;
                    }
                    seen.insert(key.clone());
                    out.push((key.clone(), x, above.clone()));
                    if j + 1 < limit {
                        queue.push_back(key);
                    }
                }
            }
            match queue.pop_front() {
                Some((z, j)) => frontier.push((Some((z.clone(), j)), z, j)),
                None => break,
            }
        }
        Ok(out)
    }
}

/// Decide admissibility in a linear logic given by extension conditions.
pub fn admissible_linear_clx(l: &LogicSpec, rule: &Rule) -> Result<AdmVerdict> {
    if !l.flags.linear {
        return Err(Error::Unsupported(format!("{} is not linear", l.name)));
    }
    check_clx(l)?;
    linear_engine(l, rule, LinMode::Clx, DEFAULT_ADM_BUDGET)
}

fn linear_engine(l: &LogicSpec, rule: &Rule, mode: LinMode, budget: u64) -> Result<AdmVerdict> {
    let ctx = Ctx::new(rule, true)?;
    let method = match mode {
        LinMode::Clx => "linear B⁺ recursion",
        LinMode::Bounded(_) => "bounded-depth linear recursion",
    };
    let mut search = LinSearch::new(&ctx, l, mode, budget)?;
    let Some(finals) = search.finals()? else {
        return Ok(AdmVerdict::admissible(method));
    };
    let chains = search.chains()?;
    // A good chain refuting each conclusion.
    let mut refuting = Vec::new();
    for (i, dk) in ctx.delta_kernels.iter().enumerate() {
        let dk = dk.expect("conclusions are boxed into Σ");
        match chains.iter().position(|(key, _, _)| !key.0.contains(dk)) {
            Some(p) => refuting.push(p),
            None => {
                let _ = i;
                return Ok(AdmVerdict::admissible(method));
            }
        }
    }
    let m = match mode {
        LinMode::Clx => shared_counterexample(&search, &finals, &chains, &refuting)?,
        LinMode::Bounded(_) => unwound_counterexample(&search, &finals, &chains, &refuting)?,
    };
    let kind = match mode {
        LinMode::Clx => Extensibility::Pseudo,
        LinMode::Bounded(_) => Extensibility::Strong,
    };
    let certificate = verify(l, rule, &ctx, &m, kind)?;
    Ok(AdmVerdict::inadmissible(
        method,
        Counterexample { model: m, certificate },
    ))
}

/// The clusters of a chain from its bottom up, each with its state.
#[allow(clippy::type_complexity)]
fn chain_of(
    chains: &[((FixedBitSet, usize), Ext, Option<(FixedBitSet, usize)>)],
    start: usize,
) -> Vec<(Ext, (FixedBitSet, usize))> {
    let index: HashMap<&(FixedBitSet, usize), usize> = chains.iter().enumerate().map(|(i, c)| (&c.0, i)).collect();
    let mut out = Vec::new();
    let mut cur = Some(start);
    while let Some(i) = cur {
        let (key, x, above) = &chains[i];
        out.push((x.clone(), key.clone()));
        cur = above.as_ref().map(|a| index[a]);
    }
    out
}

/// Add a chain to the builder; returns the points of each cluster, bottom first.
fn build_chain(b: &mut Builder, chain: &[(Ext, (FixedBitSet, usize))]) -> Vec<Vec<usize>> {
    let mut pts: Vec<Vec<usize>> = Vec::new();
    for (x, _) in chain.iter().rev() {
        let p = b.cluster(x.refl, &x.vals);
        if let Some(prev) = pts.last() {
            b.see(&p, prev);
        }
        pts.push(p);
    }
    pts.reverse();
    pts
}

fn check_size(b: &Builder) -> Result<()> {
    if b.len() > MAX_CERTIFICATE_POINTS {
        return Err(Error::Budget(format!(
            "counterexample exceeds {MAX_CERTIFICATE_POINTS} points"
        )));
    }
    Ok(())
}

/// A pseudoextensible counterexample: one tight predecessor per
/// requirement and per realized `B⁺`, shared between models with equal `B⁺`.
#[allow(clippy::type_complexity)]
fn shared_counterexample(
    search: &LinSearch,
    finals: &[Ext],
    chains: &[((FixedBitSet, usize), Ext, Option<(FixedBitSet, usize)>)],
    refuting: &[usize],
) -> Result<Model> {
    let mut b = Builder::new();
    let mut rep: HashMap<FixedBitSet, Vec<usize>> = HashMap::new();
    let mut queue: VecDeque<FixedBitSet> = VecDeque::new();
    let note = |t: &FixedBitSet,
                pts: Vec<usize>,
                rep: &mut HashMap<FixedBitSet, Vec<usize>>,
                queue: &mut VecDeque<FixedBitSet>| {
        if !rep.contains_key(t) {
            rep.insert(t.clone(), pts);
            queue.push_back(t.clone());
        }
    };
    for x in finals {
        let p = b.cluster(x.refl, &x.vals);
        note(&x.t, p, &mut rep, &mut queue);
    }
    for &r in refuting {
        let chain = chain_of(chains, r);
        let pts = build_chain(&mut b, &chain);
        for ((_, (t, _)), p) in chain.iter().zip(pts) {
            note(t, p, &mut rep, &mut queue);
        }
    }
    while let Some(s) = queue.pop_front() {
        let wits = search.memo[&(s.clone(), 0)].clone().expect("queued box sets are good");
        for x in wits {
            let p = b.cluster(x.refl, &x.vals);
            b.see(&p, &rep[&s]);
            check_size(&b)?;
            note(&x.t, p, &mut rep, &mut queue);
        }
    }
    b.finish(&search.ctx.sigma)
}

/// A strongly extensible counterexample: every chain is extended by all
/// required root clusters, recursively up to the depth bound.
#[allow(clippy::type_complexity)]
fn unwound_counterexample(
    search: &LinSearch,
    finals: &[Ext],
    chains: &[((FixedBitSet, usize), Ext, Option<(FixedBitSet, usize)>)],
    refuting: &[usize],
) -> Result<Model> {
    let mut b = Builder::new();
    fn unwind(search: &LinSearch, b: &mut Builder, pts: &[usize], s: &FixedBitSet, j: usize) -> Result<()> {
        let LinMode::Bounded(d) = search.mode else {
            unreachable!()
        };
        if j >= d {
            return Ok(());
        }
        let wits = search.memo[&(s.clone(), j)].clone().expect("unwound states are good");
        for x in wits {
            let p = b.cluster(x.refl, &x.vals);
            b.see(&p, pts);
            check_size(b)?;
            unwind(search, b, &p, &x.t, j + 1)?;
        }
        Ok(())
    }
    for x in finals {
        let p = b.cluster(x.refl, &x.vals);
        unwind(search, &mut b, &p, &x.t, 1)?;
    }
    for &r in refuting {
        let chain = chain_of(chains, r);
        let pts = build_chain(&mut b, &chain);
        for ((_, (t, j)), p) in chain.iter().zip(pts) {
            unwind(search, &mut b, &p, t, *j)?;
        }
    }
    b.finish(&search.ctx.sigma)
}

// ---------------------------------------------------------------------------
// Bounded depth: strongly extensible models

/// A model viewed cluster by cluster.
#[derive(Clone, Debug)]
struct CModel {
    refl: Vec<bool>,
    /// Parameter masks of the points of each cluster.
    pmask: Vec<Vec<u64>>,
    /// Full valuation masks (over some atom list) of the points of each cluster.
    full: Vec<Vec<u64>>,
    above: Vec<BTreeSet<usize>>,
    depth: Vec<usize>,
}

/// A root cluster with distinct parameter values that may be added below
/// the upset generated by `antichain`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Req {
    antichain: Vec<usize>,
    upset: BTreeSet<usize>,
    refl: bool,
    e: Vec<u64>,
}

impl CModel {
    fn empty() -> CModel {
        CModel {
            refl: Vec::new(),
            pmask: Vec::new(),
            full: Vec::new(),
            above: Vec::new(),
            depth: Vec::new(),
        }
    }

    fn from_model(m: &Model, atoms: &[Atom], params: &[Atom]) -> CModel {
        let cl = m.frame.clusters();
        let mut order: Vec<usize> = (0..cl.members.len()).collect();
        order.sort_by_key(|&c| cl.above[c].count_ones(..));
        let mut depth = vec![0; cl.members.len()];
        for &c in &order {
            depth[c] = 1 + cl.above[c].ones().map(|d| depth[d]).max().unwrap_or(0);
        }
        CModel {
            refl: cl.reflexive.clone(),
            pmask: cl
                .members
                .iter()
                .map(|ms| ms.iter().map(|&w| m.mask(w, params)).collect())
                .collect(),
            full: cl
                .members
                .iter()
                .map(|ms| ms.iter().map(|&w| m.mask(w, atoms)).collect())
                .collect(),
            above: cl.above.iter().map(|a| a.ones().collect()).collect(),
            depth,
        }
    }

    fn len(&self) -> usize {
        self.full.iter().map(|c| c.len()).sum()
    }

    fn push(&mut self, req: &Req, full: Vec<u64>) {
        let depth = 1 + req.antichain.iter().map(|&c| self.depth[c]).max().unwrap_or(0);
        self.refl.push(req.refl);
        self.pmask.push(req.e.clone());
        self.full.push(full);
        self.above.push(req.upset.clone());
        self.depth.push(depth);
    }

    fn to_model(&self, atoms: &[Atom]) -> Result<Model> {
        let mut start = Vec::new();
        let mut n = 0;
        for c in &self.full {
            start.push(n);
            n += c.len();
        }
        let mut refl = Vec::with_capacity(n);
        let mut pairs = Vec::new();
        for (c, pts) in self.full.iter().enumerate() {
            for i in 0..pts.len() {
                refl.push(self.refl[c]);
                let w = start[c] + i;
                for j in 0..pts.len() {
                    if i != j {
                        pairs.push((w, start[c] + j));
                    }
                }
                for &d in &self.above[c] {
                    for j in 0..self.full[d].len() {
                        pairs.push((w, start[d] + j));
                    }
                }
            }
        }
        let mut m = Model::new(FiniteFrame::new(refl, &pairs)?);
        let masks: Vec<u64> = self.full.iter().flatten().copied().collect();
        for (i, a) in atoms.iter().enumerate() {
            let pts: Vec<usize> = (0..n).filter(|&w| masks[w] >> i & 1 == 1).collect();
            m.set(*a, &pts);
        }
        Ok(m)
    }

    /// All requirements (or only the unmet ones) of strong extensibility, in canonical order.
    fn requirements(&self, l: &LogicSpec, np: usize, only_missing: bool) -> Result<Vec<Req>> {
        if l.needs_global_check() {
            return Err(Error::Unsupported(format!(
                "strong extensibility for {}, which has global frame conditions",
                l.name
            )));
        }
        let mut present: HashSet<(BTreeSet<usize>, bool, Vec<u64>)> = HashSet::new();
        for c in 0..self.refl.len() {
            let mut e = self.pmask[c].clone();
            e.sort_unstable();
            let n = e.len();
            e.dedup();
            if e.len() == n {
                present.insert((self.above[c].clone(), self.refl[c], e));
            }
        }
        let nc = self.refl.len();
        let max_ac = l.max_branching().unwrap_or(nc);
        let mut antichains: Vec<Vec<usize>> = vec![vec![]];
        fn extend(
            start: usize,
            nc: usize,
            cur: &mut Vec<usize>,
            above: &[BTreeSet<usize>],
            max: usize,
            out: &mut Vec<Vec<usize>>,
        ) -> Result<()> {
            if cur.len() >= max {
                return Ok(());
            }
            for c in start..nc {
                if cur.iter().any(|&d| above[d].contains(&c) || above[c].contains(&d)) {
                    continue;
                }
                cur.push(c);
                out.push(cur.clone());
                if out.len() > 1_000_000 {
                    return Err(Error::Budget("too many antichains".into()));
                }
                extend(c + 1, nc, cur, above, max, out)?;
                cur.pop();
            }
            Ok(())
        }
        extend(0, nc, &mut Vec::new(), &self.above, max_ac, &mut antichains)?;
        let irr_pats = patterns(np, false, None)?;
        let refl_pats = if l.allows_reflexive() {
            patterns(np, true, l.cluster_cap())?
        } else {
            Vec::new()
        };
        let mut out = Vec::new();
        for ac in antichains {
            let depth = 1 + ac.iter().map(|&c| self.depth[c]).max().unwrap_or(0);
            let mut upset: BTreeSet<usize> = BTreeSet::new();
            for &c in &ac {
                upset.insert(c);
                upset.extend(self.above[c].iter().copied());
            }
            for (refl, pats) in [(false, &irr_pats), (true, &refl_pats)] {
                for e in pats.iter() {
                    let kind = if refl {
                        ClusterKind::Refl(Some(e.len() as u32))
                    } else {
                        ClusterKind::Irr
                    };
                    if !l.admits_cluster(kind, e.len(), ac.len(), depth) {
                        continue;
                    }
                    if only_missing && present.contains(&(upset.clone(), refl, e.clone())) {
                        continue;
                    }
                    out.push(Req {
                        antichain: ac.clone(),
                        upset: upset.clone(),
                        refl,
                        e: e.clone(),
                    });
                }
            }
        }
        Ok(out)
    }
}

fn check_bounded(l: &LogicSpec) -> Result<usize> {
    let d = l
        .depth_bound()
        .ok_or_else(|| Error::Unsupported(format!("{} has unbounded depth", l.name)))?;
    if l.needs_global_check() {
        return Err(Error::Unsupported(format!("{} has global frame conditions", l.name)));
    }
    Ok(d)
}

/// Is the model strongly L-extensible: does every root cluster with
/// pairwise distinct parameter values that can be put below one of its
/// generated submodels (or below nothing) already have a copy there?
///
/// The parameters are those on which the model has a valuation.
pub fn strongly_extensible(l: &LogicSpec, m: &Model) -> Result<bool> {
    check_bounded(l)?;
    let params = m.parameters();
    let cm = CModel::from_model(m, &params, &params);
    Ok(cm.requirements(l, params.len(), true)?.is_empty())
}

/// Close a model under the missing root clusters of strong extensibility,
/// stage by stage; new points make every variable false.
pub fn strong_closure(l: &LogicSpec, m: &Model) -> Result<Model> {
    let d = check_bounded(l)?;
    let params = m.parameters();
    let atoms: Vec<Atom> = m.val.keys().copied().collect();
    let ppos: Vec<usize> = params
        .iter()
        .map(|p| atoms.iter().position(|a| a == p).unwrap())
        .collect();
    let mut cm = CModel::from_model(m, &atoms, &params);
    for _ in 0..=d {
        let missing = cm.requirements(l, params.len(), true)?;
        if missing.is_empty() {
            return cm.to_model(&atoms);
        }
        for r in &missing {
            let full =
                r.e.iter()
                    .map(|&e| {
                        ppos.iter()
                            .enumerate()
                            .filter(|(i, _)| e >> i & 1 == 1)
                            .fold(0u64, |acc, (_, &p)| acc | 1 << p)
                    })
                    .collect();
            cm.push(r, full);
            if cm.len() > MAX_CERTIFICATE_POINTS {
                return Err(Error::Budget(format!(
                    "closure exceeds {MAX_CERTIFICATE_POINTS} points"
                )));
            }
        }
    }
    Err(Error::Invalid(
        "internal: closure did not stabilize within the depth bound".into(),
    ))
}

/// Admissibility in a logic of bounded depth.
///
/// Linear logics are decided exactly. For other tabular logics, seeds of
/// at most `cap` points refuting the conclusions are closed under the
/// required root clusters by a backtracking search over their valuations;
/// the verdict is complete when there are no conclusions or the cap covers
/// every possible seed.
pub fn admissible_bddp(l: &LogicSpec, rule: &Rule, cap: usize) -> Result<AdmVerdict> {
    let d = check_bounded(l)?;
    if l.flags.linear {
        return linear_engine(l, rule, LinMode::Bounded(d), DEFAULT_ADM_BUDGET);
    }
    if !l.is_tabular() {
        return Err(Error::Unsupported(format!("{} is neither linear nor tabular", l.name)));
    }
    tabular_search(l, rule, cap, d, DEFAULT_ADM_BUDGET)
}

/// Largest rooted frame of a tabular logic.
fn max_rooted_size(l: &LogicSpec, d: usize) -> Option<usize> {
    let b = l.max_branching().or(l.bounds.width.map(|w| w as usize))?;
    let c = if l.allows_reflexive() { l.cluster_cap()? } else { 1 }.max(1);
    let mut total = 0usize;
    let mut layer = 1usize;
    for _ in 0..d {
        total = total.checked_add(layer.checked_mul(c)?)?;
        layer = layer.checked_mul(b.max(1))?;
    }
    Some(total)
}

fn tabular_search(l: &LogicSpec, rule: &Rule, cap: usize, d: usize, budget: u64) -> Result<AdmVerdict> {
    let method = "strongly extensible closure search";
    let ctx = Ctx::new(rule, false)?;
    let params = ctx.sigma.parameters();
    let mut steps = 0u64;
    let complete = rule.conclusions.is_empty()
        || max_rooted_size(l, d).is_some_and(|s| s.saturating_mul(rule.conclusions.len()) <= cap);
    let try_seed = |seed: CModel, steps: &mut u64| -> Result<Option<Model>> {
        let rows = cluster_rows(&ctx, &seed);
        match close_with_valuations(l, &ctx, seed, rows, steps, budget)? {
            Some(cm) => Ok(Some(cm.to_model(&ctx.sigma.atoms)?)),
            None => Ok(None),
        }
    };
    let found = if rule.conclusions.is_empty() {
        try_seed(CModel::empty(), &mut steps)?
    } else {
        let na = ctx.sigma.atoms.len();
        if cap > MAX_ENUMERATION_POINTS || cap * na > 24 {
            return Err(Error::Budget(format!("{na} atoms on {cap} points")));
        }
        let mut found = None;
        'outer: for size in 1..=cap {
            for (_, f) in frames_of_size(size)?.iter() {
                if !is_l_frame(l, f) || f.clusters().members.len() > f.len() {
                    continue;
                }
                let minimal = (0..size)
                    .filter(|&w| (0..size).all(|v| v == w || !f.sees(v, w) || f.sees(w, v)))
                    .count();
                let _ = minimal;
                let lb = LaneBatches::new(size, na);
                for batch in 0..lb.batches {
                    let t = eval_lanes(&ctx.sigma, f, &lb.words(batch));
                    let mut ok = lb.lanes;
                    for &g in &ctx.gamma {
                        for w in 0..size {
                            ok &= t[g][w];
                        }
                    }
                    for &dn in &ctx.delta {
                        let mut refuted = 0;
                        for w in 0..size {
                            refuted |= !t[dn][w];
                        }
                        ok &= refuted;
                    }
                    while ok != 0 {
                        let lane = ok.trailing_zeros();
                        ok &= ok - 1;
                        let m = lb.model(f, &ctx.sigma.atoms, batch, lane);
                        let seed = CModel::from_model(&m, &ctx.sigma.atoms, &params);
                        if let Some(m) = try_seed(seed, &mut steps)? {
                            found = Some(m);
                            break 'outer;
                        }
                    }
                }
            }
        }
        found
    };
    match found {
        Some(m) => {
            let certificate = verify(l, rule, &ctx, &m, Extensibility::Strong)?;
            Ok(AdmVerdict::inadmissible(
                method,
                Counterexample { model: m, certificate },
            ))
        }
        None if complete => Ok(AdmVerdict::admissible(method)),
        None => Ok(AdmVerdict::bounded(method, cap)),
    }
}

/// Σ-truth tables of the points of each cluster.
fn cluster_rows(ctx: &Ctx, cm: &CModel) -> Vec<Vec<Vec<bool>>> {
    let mut rows: Vec<Vec<Vec<bool>>> = vec![Vec::new(); cm.refl.len()];
    let mut order: Vec<usize> = (0..cm.refl.len()).collect();
    order.sort_by_key(|&c| cm.above[c].len());
    for c in order {
        let above = kernels_throughout(ctx, &cm.above[c], &rows);
        rows[c] = cluster_tables(ctx, cm.refl[c], &cm.full[c], &above);
    }
    rows
}

/// Kernels true at every point of the given clusters.
fn kernels_throughout(ctx: &Ctx, clusters: &BTreeSet<usize>, rows: &[Vec<Vec<bool>>]) -> FixedBitSet {
    bitset(
        ctx.k,
        (0..ctx.k).filter(|&c| {
            clusters
                .iter()
                .all(|&d| rows[d].iter().all(|r| r[ctx.sigma.kernels[c]]))
        }),
    )
}

fn cluster_tables(ctx: &Ctx, refl: bool, masks: &[u64], above: &FixedBitSet) -> Vec<Vec<bool>> {
    if refl {
        ctx.sigma.eval_cluster(masks, &boxes_of(above, ctx.k)).0
    } else {
        masks.iter().map(|&m| ctx.eval(m, above)).collect()
    }
}

/// Add the missing root clusters one at a time, trying every valuation of
/// their variables that keeps Γ true.
fn close_with_valuations(
    l: &LogicSpec,
    ctx: &Ctx,
    cm: CModel,
    rows: Vec<Vec<Vec<bool>>>,
    steps: &mut u64,
    budget: u64,
) -> Result<Option<CModel>> {
    let missing = cm.requirements(l, ctx.np, true)?;
    let Some(req) = missing.first() else {
        return Ok(Some(cm));
    };
    if cm.len() + req.e.len() > MAX_CERTIFICATE_POINTS {
        return Err(Error::Budget(format!(
            "closure exceeds {MAX_CERTIFICATE_POINTS} points"
        )));
    }
    let above = kernels_throughout(ctx, &req.upset, &rows);
    let n = req.e.len();
    let combos = (ctx.var_vals.len() as u64)
        .checked_pow(n as u32)
        .ok_or_else(|| Error::Budget("too many cluster valuations".into()))?;
    for combo in 0..combos {
        *steps += 1;
        if *steps > budget {
            return Err(Error::Budget(format!("closure search exceeded {budget} steps")));
        }
        let mut c = combo;
        let masks: Vec<u64> = req
            .e
            .iter()
            .map(|&e| {
                let v = c % ctx.var_vals.len() as u64;
                c /= ctx.var_vals.len() as u64;
                ctx.mask(v, e)
            })
            .collect();
        let tables = cluster_tables(ctx, req.refl, &masks, &above);
        if !tables.iter().all(|t| ctx.gamma_ok(t)) {
            continue;
        }
        let mut next = cm.clone();
        next.push(req, masks);
        let mut next_rows = rows.clone();
        next_rows.push(tables);
        if let Some(done) = close_with_valuations(l, ctx, next, next_rows, steps, budget)? {
            return Ok(Some(done));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Unifiability

/// Evidence that a formula is unifiable.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnifierWitness {
    /// A variable-free substitution σ with `⊢_L σ(φ)`.
    Substitution { substitution: Substitution },
    /// A valuation of the variables on a finite stage of the universal
    /// frame making φ true everywhere.
    Valuation {
        #[serde(serialize_with = "model_as_json")]
        model: Model,
    },
    /// A verified counterexample to the admissibility of `φ / ∅`.
    Counterexample { counterexample: Counterexample },
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Unification {
    Unifiable {
        method: String,
        witness: UnifierWitness,
    },
    NotUnifiable {
        method: String,
    },
    /// The bounded search found no unifier; the question is left open.
    Unknown {
        method: String,
        reason: String,
    },
}

impl Unification {
    /// `Some(true)` unifiable, `Some(false)` not unifiable, `None` unknown.
    pub fn value(&self) -> Option<bool> {
        match self {
            Unification::Unifiable { .. } => Some(true),
            Unification::NotUnifiable { .. } => Some(false),
            Unification::Unknown { .. } => None,
        }
    }
}

/// Largest number of variables for which constant substitutions are tried.
const MAX_CONSTANT_VARS: usize = 4;

/// Points allowed in a universal frame used for valuation search.
const UNIVERSAL_BUDGET: usize = 512;

/// Is there a substitution σ of the variables with `⊢_L σ(φ)`?
///
/// Tried in order: derivability for variable-free φ; constant substitutions;
/// for bounded depth, a valuation search over the universal frame; finally
/// the admissibility engines on `φ / ∅`.
pub fn unifiable(l: &LogicSpec, phi: &Formula) -> Result<Unification> {
    let vars = phi.vars();
    let derivation_ok = !l.needs_global_check();
    if vars.is_empty() && derivation_ok {
        let method = "derivability of a variable-free formula".to_string();
        return Ok(if is_theorem(l, phi)? {
            Unification::Unifiable {
                method,
                witness: UnifierWitness::Substitution {
                    substitution: Substitution::new(),
                },
            }
        } else {
            Unification::NotUnifiable { method }
        });
    }
    if derivation_ok && vars.len() <= MAX_CONSTANT_VARS {
        let vs: Vec<u32> = vars.iter().copied().collect();
        for bits in 0u32..1 << vs.len() {
            let s = vs.iter().enumerate().fold(Substitution::new(), |s, (i, &v)| {
                s.with(
                    v,
                    if bits >> i & 1 == 1 {
                        Formula::top()
                    } else {
                        Formula::bot()
                    },
                )
            });
            if is_theorem(l, &apply(&s, phi))? {
                return Ok(Unification::Unifiable {
                    method: "constant substitution".into(),
                    witness: UnifierWitness::Substitution { substitution: s },
                });
            }
        }
    }
    if let Some(d) = l.depth_bound() {
        let params: Vec<u32> = phi.params().into_iter().collect();
        match universal_frame(l, &params, d, UNIVERSAL_BUDGET) {
            Ok(uf) => {
                let method = "valuation search on the universal frame".to_string();
                return Ok(match brute_valuation_unify(phi, &uf.model, DEFAULT_ADM_BUDGET)? {
                    Some(model) => Unification::Unifiable {
                        method,
                        witness: UnifierWitness::Valuation { model },
                    },
                    None => Unification::NotUnifiable { method },
                });
            }
            Err(Error::Budget(_)) | Err(Error::Unsupported(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let rule = Rule::new(vec![phi.clone()], vec![]);
    let verdict = if l.depth_bound().is_some() && !(l.flags.linear && check_clx(l).is_ok()) {
        admissible_bddp(l, &rule, DEFAULT_CAP)?
    } else if l.flags.linear {
        admissible_linear_clx(l, &rule)?
    } else {
        admissible_clx(l, &rule, DEFAULT_CAP)?
    };
    let method = format!("admissibility of φ / ∅ ({})", verdict.method);
    Ok(match verdict.status {
        AdmStatus::Inadmissible => Unification::Unifiable {
            method,
            witness: UnifierWitness::Counterexample {
                counterexample: verdict
                    .counterexample
                    .expect("inadmissible verdicts carry a counterexample"),
            },
        },
        AdmStatus::Admissible => Unification::NotUnifiable { method },
        AdmStatus::BoundedAdmissible => Unification::Unknown {
            reason: format!(
                "no pseudoextensible model of at most {} points satisfies φ",
                verdict.cap.unwrap_or(0)
            ),
            method,
        },
    })
}

/// Admissibility with the engine suited to the logic: exact engines for
/// linear and bounded-depth logics, the bounded search otherwise.
pub fn admissible(l: &LogicSpec, rule: &Rule, cap: usize) -> Result<AdmVerdict> {
    if l.depth_bound().is_some() && !(l.flags.linear && check_clx(l).is_ok()) {
        admissible_bddp(l, rule, cap)
    } else if l.flags.linear {
        admissible_linear_clx(l, rule)
    } else {
        admissible_clx(l, rule, cap)
    }
}
