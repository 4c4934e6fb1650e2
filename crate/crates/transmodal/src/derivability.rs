//! Derivability `Γ ⊢_L Δ` for logics given by extension conditions.
//!
//! Three engines share the same semantics (rooted finite L-models):
//!
//! * [`Engine::Recursive`] is a goal-directed version of the recursive
//!   description of realizable box sets. A query `Q(M, F, d)` asks for a
//!   rooted L-model of depth ≤ d in which every formula of `M` holds
//!   everywhere and every formula of `F` fails somewhere. The root cluster
//!   is found by a small Davis–Putnam search over its valuation and box
//!   values; the successors are found by recursive queries.
//! * [`Engine::Chain`] serves linear logics: it saturates the set of box
//!   sets realized by chains of clusters, bottom cluster last.
//! * [`Engine::Literal`] evaluates the recursion `S(X)` over all box sets
//!   exactly as stated, extension condition by extension condition. It is
//!   exponential in |B| and meant for cross-checking on small inputs.
//!
//! Every negative verdict carries a countermodel that has been re-checked by
//! plain model checking and frame recognition.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::rc::Rc;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{model_check, FiniteFrame, FrameJson, Model};
use crate::logics::{is_l_frame, ClusterKind, LogicSpec};
use crate::syntax::{Formula, SNode, Sigma};

/// Default bound on the number of recursive queries.
pub const DEFAULT_BUDGET: u64 = 5_000_000;

/// Largest number of atoms for which valuations are enumerated explicitly.
pub const MAX_ENUMERATED_ATOMS: usize = 20;

/// Which decision procedure to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Chain saturation for linear logics, the recursive search otherwise.
    #[default]
    Auto,
    Recursive,
    Chain,
    Literal,
}

#[derive(Clone, Copy, Debug)]
pub struct DeriveOptions {
    pub engine: Engine,
    /// Bound on recursive queries (or saturation steps).
    pub budget: u64,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            engine: Engine::Auto,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// A rooted model refuting `formula` at `root`.
#[derive(Clone, Debug, Serialize)]
pub struct Countermodel {
    #[serde(serialize_with = "model_as_json")]
    pub model: Model,
    pub root: usize,
    pub formula: Formula,
}

fn model_as_json<S: serde::Serializer>(m: &Model, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut j = FrameJson::from_model(m);
    j.root = None;
    j.serialize(s)
}

/// Outcome of a derivability query.
#[derive(Clone, Debug, Serialize)]
pub struct DerivVerdict {
    pub derivable: bool,
    /// For a non-derivable rule: a countermodel for the first conclusion.
    pub countermodel: Option<Countermodel>,
}

/// `Γ ⊢_L δ` for some `δ ∈ Δ`, with the default engine.
pub fn derives(l: &LogicSpec, gamma: &[Formula], delta: &[Formula]) -> Result<DerivVerdict> {
    derives_with(l, gamma, delta, &DeriveOptions::default())
}

/// `⊢_L φ`.
pub fn is_theorem(l: &LogicSpec, phi: &Formula) -> Result<bool> {
    Ok(derives(l, &[], std::slice::from_ref(phi))?.derivable)
}

/// The single formula whose validity expresses `Γ ⊢_L δ`: `⊡⋀Γ → δ`.
pub fn rule_formula(gamma: &[Formula], delta: &Formula) -> Formula {
    if gamma.is_empty() {
        delta.clone()
    } else {
        Formula::conj(gamma.iter().cloned()).boxdot().imp(delta)
    }
}

/// Derivability with explicit options.
pub fn derives_with(l: &LogicSpec, gamma: &[Formula], delta: &[Formula], opts: &DeriveOptions) -> Result<DerivVerdict> {
    if delta.is_empty() {
        return Err(Error::Invalid("a rule needs at least one conclusion".into()));
    }
    if l.needs_global_check() {
        return Err(Error::Unsupported(format!(
            "{} is not given by extension conditions alone; use the oracle",
            l.name
        )));
    }
    if l.base.is_empty() {
        // No frames at all: everything is derivable.
        return Ok(DerivVerdict {
            derivable: true,
            countermodel: None,
        });
    }
    let goals: Vec<Formula> = delta.iter().map(|d| rule_formula(gamma, d)).collect();
    let seeds: Vec<Formula> = goals.iter().map(|g| g.boxed()).collect();
    let sigma = Sigma::new(&seeds);
    let engine = match opts.engine {
        Engine::Auto if l.flags.linear => Engine::Chain,
        Engine::Auto => Engine::Recursive,
        e => e,
    };
    let mut first: Option<Countermodel> = None;
    let mut chain: Option<ChainEngine> = None;
    for g in &goals {
        let k = sigma
            .kernel_pos(sigma.index_of(g).expect("goal in Σ"))
            .expect("goal is a kernel");
        let model = match engine {
            Engine::Recursive => {
                let mut e = Recursive::new(&sigma, l, opts.budget)?;
                e.refute(k)?
            }
            Engine::Chain => {
                let e = match chain.as_mut() {
                    Some(e) => e,
                    None => chain.insert(ChainEngine::saturate(&sigma, l, opts.budget)?),
                };
                e.refute(&sigma, k)
            }
            Engine::Literal => {
                let mut e = Literal::new(&sigma, l)?;
                e.refute(k)?
            }
            Engine::Auto => unreachable!(),
        };
        match model {
            None => {
                return Ok(DerivVerdict {
                    derivable: true,
                    countermodel: None,
                })
            }
            Some(m) => {
                if first.is_none() {
                    first = Some(root_refutation(l, m, g)?);
                }
            }
        }
    }
    Ok(DerivVerdict {
        derivable: false,
        countermodel: first,
    })
}

/// Cut a model in which `phi` fails somewhere down to a rooted countermodel
/// and check it independently.
fn root_refutation(l: &LogicSpec, m: Model, phi: &Formula) -> Result<Countermodel> {
    let ext = m.extension(phi)?;
    let w = (0..m.len())
        .find(|&w| !ext.contains(w))
        .ok_or_else(|| Error::Invalid(format!("internal: built model does not refute {phi}")))?;
    let (cone, old) = m.cone(w);
    let root = old.iter().position(|&v| v == w).expect("cone contains its root");
    if model_check(&cone, root, phi)? || !is_l_frame(l, &cone.frame) {
        return Err(Error::Invalid(format!(
            "internal: countermodel for {phi} failed verification"
        )));
    }
    Ok(Countermodel {
        model: cone,
        root,
        formula: phi.clone(),
    })
}

// ---------------------------------------------------------------------------
// Shared helpers

pub(crate) fn bitset(k: usize, items: impl IntoIterator<Item = usize>) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(k);
    for i in items {
        s.insert(i);
    }
    s
}

pub(crate) fn boxes_of(x: &FixedBitSet, k: usize) -> Vec<bool> {
    (0..k).map(|i| x.contains(i)).collect()
}

pub(crate) fn all_valuations(sigma: &Sigma) -> Result<Vec<u64>> {
    let n = sigma.atoms.len();
    if n > MAX_ENUMERATED_ATOMS {
        return Err(Error::Budget(format!("{n} atoms exceed the enumeration limit")));
    }
    Ok((0..1u64 << n).collect())
}

/// Branching allowed below a root cluster: `None` for unboundedly many.
type Branching = Option<usize>;

fn max_branching(a: Branching, b: Branching) -> Branching {
    match (a, b) {
        (None, _) | (_, None) => None,
        (Some(x), Some(y)) => Some(x.max(y)),
    }
}

/// The root options of a logic: branching below an irreflexive root (if
/// irreflexive roots are allowed), and for each reflexive cluster bound the
/// branching below it. Dominated options are dropped.
fn root_options(l: &LogicSpec) -> (Option<Branching>, Vec<(Option<usize>, Branching)>) {
    let mut irr: Option<Branching> = None;
    let mut refl: BTreeMap<Option<usize>, Branching> = BTreeMap::new();
    let cap = l.bounds.cluster_size.map(|c| c as usize);
    for c in l.effective_base() {
        let b = c.branching.map(|m| m as usize);
        match c.cluster {
            ClusterKind::Irr => irr = Some(irr.map_or(b, |a| max_branching(a, b))),
            ClusterKind::Refl(k) => {
                let k = match (k.map(|k| k as usize), cap) {
                    (Some(a), Some(c)) => Some(a.min(c)),
                    (a, c) => a.or(c),
                };
                let e = refl.entry(k).or_insert(Some(0));
                *e = max_branching(*e, b);
            }
        }
    }
    let size_le = |a: Option<usize>, b: Option<usize>| b.is_none() || a.is_some_and(|a| a <= b.unwrap());
    let br_le = |a: Branching, b: Branching| b.is_none() || a.is_some_and(|a| a <= b.unwrap());
    let all: Vec<(Option<usize>, Branching)> = refl.into_iter().collect();
    let kept = all
        .iter()
        .filter(|&&(k, b)| {
            !all.iter()
                .any(|&(k2, b2)| (k2, b2) != (k, b) && size_le(k, k2) && br_le(b, b2))
        })
        .copied()
        .collect();
    (irr, kept)
}

/// A root cluster together with the queries realizing what lies above it.
#[derive(Clone, Debug)]
enum Wit {
    Irr { val: u64, succ: Vec<Key> },
    Refl { vals: Vec<u64>, succ: Vec<Key> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Key {
    m: FixedBitSet,
    f: FixedBitSet,
    /// Remaining depth including the root; `u32::MAX` for unbounded.
    d: u32,
}

/// Incremental construction of a model from clusters.
pub(crate) struct Builder {
    refl: Vec<bool>,
    vals: Vec<u64>,
    pairs: Vec<(usize, usize)>,
}

impl Builder {
    pub(crate) fn new() -> Self {
        Builder {
            refl: Vec::new(),
            vals: Vec::new(),
            pairs: Vec::new(),
        }
    }

    /// Add a cluster; returns its points.
    pub(crate) fn cluster(&mut self, reflexive: bool, vals: &[u64]) -> Vec<usize> {
        let start = self.refl.len();
        for &v in vals {
            self.refl.push(reflexive);
            self.vals.push(v);
        }
        let pts: Vec<usize> = (start..self.refl.len()).collect();
        for &a in &pts {
            for &b in &pts {
                if a != b {
                    self.pairs.push((a, b));
                }
            }
        }
        pts
    }

    pub(crate) fn len(&self) -> usize {
        self.refl.len()
    }

    pub(crate) fn see(&mut self, from: &[usize], to: &[usize]) {
        for &a in from {
            for &b in to {
                self.pairs.push((a, b));
            }
        }
    }

    pub(crate) fn finish(self, sigma: &Sigma) -> Result<Model> {
        let frame = FiniteFrame::new(self.refl, &self.pairs)?;
        let mut m = Model::new(frame);
        for (i, a) in sigma.atoms.iter().enumerate() {
            let pts: Vec<usize> = (0..self.vals.len()).filter(|&w| self.vals[w] >> i & 1 == 1).collect();
            m.set(*a, &pts);
        }
        Ok(m)
    }
}

/// Pick points of a reflexive cluster: valuations from `allowed` refuting
/// every kernel in `need` (given per kernel by `refuters`), at most `cap` of
/// them, and at least one point.
fn cover(need: &[usize], refuters: &HashMap<usize, Vec<u64>>, allowed: &[u64], cap: Option<usize>) -> Option<Vec<u64>> {
    if need.is_empty() {
        return allowed.first().map(|&v| vec![v]);
    }
    match cap {
        None => {
            let mut pts: Vec<u64> = need.iter().map(|c| refuters[c][0]).collect();
            pts.sort_unstable();
            pts.dedup();
            Some(pts)
        }
        Some(cap) => {
            // Exact search by increasing size.
            fn go(need: &[usize], refuters: &HashMap<usize, Vec<u64>>, chosen: &mut Vec<u64>, cap: usize) -> bool {
                let Some(&c) = need.iter().find(|c| !refuters[c].iter().any(|v| chosen.contains(v))) else {
                    return true;
                };
                if chosen.len() == cap {
                    return false;
                }
                for &v in &refuters[&c] {
                    chosen.push(v);
                    if go(need, refuters, chosen, cap) {
                        return true;
                    }
                    chosen.pop();
                }
                false
            }
            for size in 1..=cap {
                let mut chosen = Vec::new();
                if go(need, refuters, &mut chosen, size) {
                    chosen.sort_unstable();
                    chosen.dedup();
                    return Some(chosen);
                }
            }
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Recursive engine

const UNTAINTED: usize = usize::MAX;
const UNBOUNDED: u32 = u32::MAX;

struct Recursive<'a> {
    sigma: &'a Sigma,
    l: &'a LogicSpec,
    k: usize,
    irr: Option<Branching>,
    refl: Vec<(Option<usize>, Branching)>,
    vals: Vec<u64>,
    memo: HashMap<Key, Option<Rc<Wit>>>,
    stack: HashMap<Key, usize>,
    steps: u64,
    budget: u64,
}

/// Variables of the root search for an irreflexive point.
#[derive(Clone, Copy)]
enum Var {
    Atom(usize),
    Boxed(usize),
}

impl<'a> Recursive<'a> {
    fn new(sigma: &'a Sigma, l: &'a LogicSpec, budget: u64) -> Result<Self> {
        let (irr, refl) = root_options(l);
        let vals = if refl.is_empty() {
            Vec::new()
        } else {
            all_valuations(sigma)?
        };
        Ok(Recursive {
            sigma,
            l,
            k: sigma.num_kernels(),
            irr,
            refl,
            vals,
            memo: HashMap::new(),
            stack: HashMap::new(),
            steps: 0,
            budget,
        })
    }

    fn depth(&self) -> u32 {
        self.l.bounds.depth.unwrap_or(UNBOUNDED)
    }

    /// A model in which kernel `target` fails somewhere, if there is one.
    fn refute(&mut self, target: usize) -> Result<Option<Model>> {
        let key = Key {
            m: FixedBitSet::with_capacity(self.k),
            f: bitset(self.k, [target]),
            d: self.depth(),
        };
        let (ok, _) = self.query(key.clone())?;
        if !ok {
            return Ok(None);
        }
        let mut b = Builder::new();
        let mut built = HashMap::new();
        self.materialize(&key, &mut b, &mut built);
        Ok(Some(b.finish(self.sigma)?))
    }

    fn materialize(&self, key: &Key, b: &mut Builder, built: &mut HashMap<Key, Vec<usize>>) -> Vec<usize> {
        if let Some(p) = built.get(key) {
            return p.clone();
        }
        let wit = self.memo[key].clone().expect("materialized queries hold");
        let (root, succ) = match &*wit {
            Wit::Irr { val, succ } => (b.cluster(false, &[*val]), succ),
            Wit::Refl { vals, succ } => (b.cluster(true, vals), succ),
        };
        for s in succ {
            let pts = self.materialize(s, b, built);
            b.see(&root, &pts);
        }
        built.insert(key.clone(), root.clone());
        root
    }

    fn child_depth(d: u32) -> u32 {
        if d == UNBOUNDED {
            d
        } else {
            d - 1
        }
    }

    /// Sub-query; records in `taint` the lowest stack position assumed false.
    fn sub(&mut self, m: &FixedBitSet, f: &FixedBitSet, d: u32, taint: &mut usize) -> Result<bool> {
        let (ok, t) = self.query(Key {
            m: m.clone(),
            f: f.clone(),
            d,
        })?;
        *taint = (*taint).min(t);
        Ok(ok)
    }

    fn query(&mut self, key: Key) -> Result<(bool, usize)> {
        if let Some(w) = self.memo.get(&key) {
            return Ok((w.is_some(), UNTAINTED));
        }
        if let Some(&pos) = self.stack.get(&key) {
            return Ok((false, pos));
        }
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Error::Budget(format!(
                "derivability search exceeded {} queries",
                self.budget
            )));
        }
        let pos = self.stack.len();
        self.stack.insert(key.clone(), pos);
        let mut taint = UNTAINTED;
        let mut wit = None;
        if let Some(br) = self.irr {
            wit = self.irreflexive_root(&key, br, &mut taint)?;
        }
        if wit.is_none() {
            for (cap, br) in self.refl.clone() {
                wit = self.reflexive_root(&key, cap, br, &mut taint)?;
                if wit.is_some() {
                    break;
                }
            }
        }
        self.stack.remove(&key);
        if let Some(w) = wit {
            self.memo.insert(key, Some(Rc::new(w)));
            return Ok((true, UNTAINTED));
        }
        if taint >= pos {
            self.memo.insert(key, None);
            return Ok((false, UNTAINTED));
        }
        Ok((false, taint))
    }

    /// Extend `y` by every kernel that cannot fail above while `y` holds there.
    /// Returns `None` if a kernel in `forbidden` would have to be added.
    fn least_successor_set(
        &mut self,
        mut y: FixedBitSet,
        d: u32,
        forbidden: &dyn Fn(usize) -> bool,
        taint: &mut usize,
    ) -> Result<Option<FixedBitSet>> {
        loop {
            let mut changed = false;
            for chi in 0..self.k {
                if y.contains(chi) {
                    continue;
                }
                if !self.sub(&y, &bitset(self.k, [chi]), Self::child_depth(d), taint)? {
                    if forbidden(chi) {
                        return Ok(None);
                    }
                    y.insert(chi);
                    changed = true;
                }
            }
            if !changed {
                return Ok(Some(y));
            }
        }
    }

    /// Successor queries realizing exactly `y` above the root, or `None`.
    /// With finite branching the kernels outside `y` are split into at most
    /// `m` groups, each refuted by one successor.
    fn successors(&mut self, y: &FixedBitSet, d: u32, br: Branching, taint: &mut usize) -> Result<Option<Vec<Key>>> {
        let rest: Vec<usize> = (0..self.k).filter(|c| !y.contains(*c)).collect();
        let cd = Self::child_depth(d);
        match br {
            None => Ok(Some(
                rest.iter()
                    .map(|&c| Key {
                        m: y.clone(),
                        f: bitset(self.k, [c]),
                        d: cd,
                    })
                    .collect(),
            )),
            Some(_) if rest.is_empty() => Ok(Some(Vec::new())),
            Some(0) => Ok(None),
            Some(m) => {
                let mut groups: Vec<FixedBitSet> = Vec::new();
                if self.partition(y, &rest, 0, m, cd, &mut groups, taint)? {
                    Ok(Some(
                        groups.into_iter().map(|f| Key { m: y.clone(), f, d: cd }).collect(),
                    ))
                } else {
                    Ok(None)
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn partition(
        &mut self,
        y: &FixedBitSet,
        rest: &[usize],
        i: usize,
        m: usize,
        cd: u32,
        groups: &mut Vec<FixedBitSet>,
        taint: &mut usize,
    ) -> Result<bool> {
        if i == rest.len() {
            return Ok(true);
        }
        for g in 0..=groups.len().min(m - 1) {
            if g == groups.len() {
                groups.push(FixedBitSet::with_capacity(self.k));
            }
            groups[g].insert(rest[i]);
            if self.sub(y, &groups[g], cd, taint)? && self.partition(y, rest, i + 1, m, cd, groups, taint)? {
                return Ok(true);
            }
            groups[g].set(rest[i], false);
            if groups[g].count_ones(..) == 0 {
                groups.pop();
            }
        }
        Ok(false)
    }

    /// Successors for the least admissible `y`, trying supersets (drawn from
    /// `extra`) when branching is finite.
    fn successors_from(
        &mut self,
        y: FixedBitSet,
        extra: &[usize],
        d: u32,
        br: Branching,
        taint: &mut usize,
    ) -> Result<Option<(FixedBitSet, Vec<Key>)>> {
        if let Some(s) = self.successors(&y, d, br, taint)? {
            return Ok(Some((y, s)));
        }
        if br.is_none() {
            return Ok(None);
        }
        let extra: Vec<usize> = extra.iter().copied().filter(|c| !y.contains(*c)).collect();
        if extra.len() > 16 {
            return Err(Error::Budget("too many optional box values".into()));
        }
        let mut subsets: Vec<u32> = (1..1u32 << extra.len()).collect();
        subsets.sort_by_key(|s| (s.count_ones(), *s));
        for s in subsets {
            let mut y2 = y.clone();
            for (i, &c) in extra.iter().enumerate() {
                if s >> i & 1 == 1 {
                    y2.insert(c);
                }
            }
            if let Some(succ) = self.successors(&y2, d, br, taint)? {
                return Ok(Some((y2, succ)));
            }
        }
        Ok(None)
    }

    // --- irreflexive roots

    fn irreflexive_root(&mut self, key: &Key, br: Branching, taint: &mut usize) -> Result<Option<Wit>> {
        let mut atoms = vec![None; self.sigma.atoms.len()];
        let mut ybits = vec![None; self.k];
        for c in key.m.ones() {
            ybits[c] = Some(true);
        }
        let can_succ = key.d > 1 && br != Some(0);
        self.irr_search(key, br, can_succ, &mut atoms, &mut ybits, taint)
    }

    fn irr_search(
        &mut self,
        key: &Key,
        br: Branching,
        can_succ: bool,
        atoms: &mut Vec<Option<bool>>,
        ybits: &mut Vec<Option<bool>>,
        taint: &mut usize,
    ) -> Result<Option<Wit>> {
        let t = self.sigma.eval3(atoms, ybits);
        let mut pick: Option<Var> = None;
        for c in key.m.ones() {
            match t[self.sigma.kernels[c]] {
                Some(false) => return Ok(None),
                None if pick.is_none() => pick = Some(self.unknown_in(&t, self.sigma.kernels[c])),
                _ => {}
            }
        }
        for c in key.f.ones() {
            let node = self.sigma.kernels[c];
            let (yb, ev) = (ybits[c], t[node]);
            if yb == Some(true) && ev == Some(true) {
                return Ok(None);
            }
            let satisfied = yb == Some(false) || ev == Some(false);
            if !satisfied && pick.is_none() {
                pick = Some(match yb {
                    None => Var::Boxed(c),
                    Some(_) => self.unknown_in(&t, node),
                });
            }
        }
        match pick {
            None => self.irr_leaf(key, br, can_succ, atoms, ybits, taint),
            Some(Var::Atom(a)) => {
                for v in [false, true] {
                    atoms[a] = Some(v);
                    let r = self.irr_search(key, br, can_succ, atoms, ybits, taint)?;
                    atoms[a] = None;
                    if r.is_some() {
                        return Ok(r);
                    }
                }
                Ok(None)
            }
            Some(Var::Boxed(c)) => {
                // □ψ false first: ψ must then fail above the root.
                if can_succ {
                    let yt = bitset(self.k, (0..self.k).filter(|&i| ybits[i] == Some(true)));
                    if self.sub(&yt, &bitset(self.k, [c]), Self::child_depth(key.d), taint)? {
                        ybits[c] = Some(false);
                        let r = self.irr_search(key, br, can_succ, atoms, ybits, taint)?;
                        ybits[c] = None;
                        if r.is_some() {
                            return Ok(r);
                        }
                    }
                }
                ybits[c] = Some(true);
                let r = self.irr_search(key, br, can_succ, atoms, ybits, taint)?;
                ybits[c] = None;
                Ok(r)
            }
        }
    }

    /// An undetermined atom or box on which the value of `node` depends.
    fn unknown_in(&self, t: &[Option<bool>], mut node: usize) -> Var {
        loop {
            match self.sigma.nodes[node] {
                SNode::Atom(a) => return Var::Atom(a),
                SNode::Box(_, k) => return Var::Boxed(k),
                SNode::Not(a) => node = a,
                SNode::And(a, b) | SNode::Or(a, b) | SNode::Imp(a, b) | SNode::Iff(a, b) => {
                    node = if t[a].is_none() { a } else { b };
                }
                SNode::Bot | SNode::Top => unreachable!("constants are determined"),
            }
        }
    }

    fn irr_leaf(
        &mut self,
        key: &Key,
        br: Branching,
        can_succ: bool,
        atoms: &[Option<bool>],
        ybits: &[Option<bool>],
        taint: &mut usize,
    ) -> Result<Option<Wit>> {
        let val = atoms
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Some(true))
            .fold(0u64, |m, (i, _)| m | 1 << i);
        if !can_succ {
            if ybits.contains(&Some(false)) {
                return Ok(None);
            }
            return Ok(Some(Wit::Irr { val, succ: vec![] }));
        }
        let yt = bitset(self.k, (0..self.k).filter(|&i| ybits[i] == Some(true)));
        let Some(y) = self.least_successor_set(yt, key.d, &|c| ybits[c] == Some(false), taint)? else {
            return Ok(None);
        };
        let free: Vec<usize> = (0..self.k).filter(|&c| ybits[c].is_none()).collect();
        Ok(self
            .successors_from(y, &free, key.d, br, taint)?
            .map(|(_, succ)| Wit::Irr { val, succ }))
    }

    // --- reflexive roots

    fn reflexive_root(
        &mut self,
        key: &Key,
        cap: Option<usize>,
        br: Branching,
        taint: &mut usize,
    ) -> Result<Option<Wit>> {
        let can_succ = key.d > 1 && br != Some(0);
        let vals = self.vals.clone();
        let mut x = FixedBitSet::with_capacity(self.k);
        self.x_search(key, cap, br, can_succ, 0, &mut x, vals, taint)
    }

    /// Decide the cluster's box set X kernel by kernel (subformulas first),
    /// keeping the valuations compatible with X so far.
    #[allow(clippy::too_many_arguments)]
    fn x_search(
        &mut self,
        key: &Key,
        cap: Option<usize>,
        br: Branching,
        can_succ: bool,
        i: usize,
        x: &mut FixedBitSet,
        vals: Vec<u64>,
        taint: &mut usize,
    ) -> Result<Option<Wit>> {
        if i == self.k {
            return self.x_leaf(key, cap, br, can_succ, x, &vals, taint);
        }
        let node = self.sigma.kernels[i];
        let boxes = boxes_of(x, self.k);
        let (sat, unsat): (Vec<u64>, Vec<u64>) = vals.iter().partition(|&&v| self.sigma.eval(v, &boxes)[node]);
        let can_in = !key.f.contains(i) && !sat.is_empty();
        let out_allowed = !key.m.contains(i);
        let mut order = [true, false];
        if !unsat.is_empty() {
            order = [false, true];
        }
        for inside in order {
            if inside {
                if !can_in {
                    continue;
                }
                x.insert(i);
                let r = self.x_search(key, cap, br, can_succ, i + 1, x, sat.clone(), taint)?;
                x.set(i, false);
                if r.is_some() {
                    return Ok(r);
                }
            } else {
                if !out_allowed {
                    continue;
                }
                if unsat.is_empty() {
                    // ψ holds throughout the cluster, so it must fail above.
                    if !can_succ {
                        continue;
                    }
                    let mut below = x.clone();
                    below.union_with(&key.m);
                    if !self.sub(&below, &bitset(self.k, [i]), Self::child_depth(key.d), taint)? {
                        continue;
                    }
                }
                let r = self.x_search(key, cap, br, can_succ, i + 1, x, vals.clone(), taint)?;
                if r.is_some() {
                    return Ok(r);
                }
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn x_leaf(
        &mut self,
        key: &Key,
        cap: Option<usize>,
        br: Branching,
        can_succ: bool,
        x: &FixedBitSet,
        vals: &[u64],
        taint: &mut usize,
    ) -> Result<Option<Wit>> {
        let boxes = boxes_of(x, self.k);
        let tables: Vec<Vec<bool>> = vals.iter().map(|&v| self.sigma.eval(v, &boxes)).collect();
        let mut refuters: HashMap<usize, Vec<u64>> = HashMap::new();
        for c in (0..self.k).filter(|c| !x.contains(*c)) {
            let r: Vec<u64> = vals
                .iter()
                .zip(&tables)
                .filter(|(_, t)| !t[self.sigma.kernels[c]])
                .map(|(v, _)| *v)
                .collect();
            if !r.is_empty() {
                refuters.insert(c, r);
            }
        }
        let (y, succ) = if can_succ {
            let Some(y) = self.least_successor_set(x.clone(), key.d, &|c| !refuters.contains_key(&c), taint)? else {
                return Ok(None);
            };
            let extra: Vec<usize> = refuters
                .keys()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            match self.successors_from(y, &extra, key.d, br, taint)? {
                Some(r) => r,
                None => return Ok(None),
            }
        } else {
            (bitset(self.k, 0..self.k), vec![])
        };
        let need: Vec<usize> = y.ones().filter(|c| !x.contains(*c)).collect();
        if need.iter().any(|c| !refuters.contains_key(c)) {
            return Ok(None);
        }
        Ok(cover(&need, &refuters, vals, cap).map(|pts| Wit::Refl { vals: pts, succ }))
    }
}

// ---------------------------------------------------------------------------
// Chain saturation for linear logics

#[derive(Clone, Debug)]
enum ChainStep {
    Irr(u64),
    Refl(Vec<u64>),
}

/// All box sets realized by finite chains of clusters that are L-models.
struct ChainEngine {
    /// Realized box set → (cluster, box set of the rest of the chain or `None` at the top).
    realized: HashMap<FixedBitSet, (ChainStep, Option<FixedBitSet>)>,
    order: Vec<FixedBitSet>,
}

impl ChainEngine {
    fn saturate(sigma: &Sigma, l: &LogicSpec, budget: u64) -> Result<ChainEngine> {
        let k = sigma.num_kernels();
        let vals = all_valuations(sigma)?;
        let (irr, refl) = root_options(l);
        let irr_top = irr.is_some();
        let irr_mid = irr.is_some_and(|b| b != Some(0));
        let refl_top: Vec<Option<usize>> = refl.iter().map(|r| r.0).collect();
        let refl_mid: Vec<Option<usize>> = refl.iter().filter(|r| r.1 != Some(0)).map(|r| r.0).collect();
        let depth = l.bounds.depth.map_or(usize::MAX, |d| d as usize);
        let mut realized: HashMap<FixedBitSet, (ChainStep, Option<FixedBitSet>)> = HashMap::new();
        let mut order = Vec::new();
        let mut queue: VecDeque<(FixedBitSet, usize)> = VecDeque::new();
        let mut steps = 0u64;
        let full = bitset(k, 0..k);
        let mut add = |x: FixedBitSet,
                       step: ChainStep,
                       above: Option<FixedBitSet>,
                       len: usize,
                       queue: &mut VecDeque<(FixedBitSet, usize)>| {
            if !realized.contains_key(&x) {
                realized.insert(x.clone(), (step, above));
                order.push(x.clone());
                queue.push_back((x, len));
            }
        };
        // Top clusters.
        let extend = |z: &FixedBitSet, with_irr: bool, caps: &[Option<usize>]| {
            let mut out: Vec<(FixedBitSet, ChainStep)> = Vec::new();
            if with_irr {
                let boxes = boxes_of(z, k);
                for &v in &vals {
                    let t = sigma.eval(v, &boxes);
                    let x = bitset(k, z.ones().filter(|&c| t[sigma.kernels[c]]));
                    out.push((x, ChainStep::Irr(v)));
                }
            }
            for &cap in caps {
                for (x, pts) in reflexive_extensions(sigma, z, &vals, cap, &[]) {
                    out.push((x, ChainStep::Refl(pts)));
                }
            }
            out
        };
        for (x, s) in extend(&full, irr_top, &refl_top) {
            add(x, s, None, 1, &mut queue);
        }
        while let Some((z, len)) = queue.pop_front() {
            steps += 1;
            if steps > budget {
                return Err(Error::Budget(format!("chain saturation exceeded {budget} steps")));
            }
            if len >= depth {
                continue;
            }
            for (x, s) in extend(&z, irr_mid, &refl_mid) {
                add(x, s, Some(z.clone()), len + 1, &mut queue);
            }
        }
        Ok(ChainEngine { realized, order })
    }

    fn refute(&self, sigma: &Sigma, target: usize) -> Option<Model> {
        let x = self.order.iter().find(|x| !x.contains(target))?;
        let mut b = Builder::new();
        let mut cur = Some(x.clone());
        let mut prev: Option<Vec<usize>> = None;
        while let Some(z) = cur {
            let (step, above) = &self.realized[&z];
            let pts = match step {
                ChainStep::Irr(v) => b.cluster(false, &[*v]),
                ChainStep::Refl(vs) => b.cluster(true, vs),
            };
            if let Some(p) = &prev {
                b.see(p, &pts);
            }
            prev = Some(pts);
            cur = above.clone();
        }
        Some(b.finish(sigma).expect("chains are transitive"))
    }
}

/// All box sets X of a reflexive cluster (of at most `cap` points) placed
/// below a part realizing `z` (the whole Σ-kernel set for a top cluster),
/// each with a set of points realizing it. Every point of the cluster must
/// satisfy the Σ-members with node indices in `must`.
pub(crate) fn reflexive_extensions(
    sigma: &Sigma,
    z: &FixedBitSet,
    vals: &[u64],
    cap: Option<usize>,
    must: &[usize],
) -> Vec<(FixedBitSet, Vec<u64>)> {
    let k = sigma.num_kernels();
    let mut out = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn go(
        sigma: &Sigma,
        z: &FixedBitSet,
        cap: Option<usize>,
        must: &[usize],
        i: usize,
        x: &mut FixedBitSet,
        vals: Vec<u64>,
        out: &mut Vec<(FixedBitSet, Vec<u64>)>,
    ) {
        let k = sigma.num_kernels();
        if vals.is_empty() {
            return;
        }
        if i == k {
            let boxes = boxes_of(x, k);
            let (vals, tables): (Vec<u64>, Vec<Vec<bool>>) = vals
                .iter()
                .map(|&v| (v, sigma.eval(v, &boxes)))
                .filter(|(_, t)| must.iter().all(|&m| t[m]))
                .unzip();
            if vals.is_empty() {
                return;
            }
            let need: Vec<usize> = z.ones().filter(|c| !x.contains(*c)).collect();
            let mut refuters = HashMap::new();
            for &c in &need {
                let r: Vec<u64> = vals
                    .iter()
                    .zip(&tables)
                    .filter(|(_, t)| !t[sigma.kernels[c]])
                    .map(|(v, _)| *v)
                    .collect();
                if r.is_empty() {
                    return;
                }
                refuters.insert(c, r);
            }
            if let Some(pts) = cover(&need, &refuters, &vals, cap) {
                out.push((x.clone(), pts));
            }
            return;
        }
        if !z.contains(i) {
            return go(sigma, z, cap, must, i + 1, x, vals, out);
        }
        let boxes = boxes_of(x, k);
        let node = sigma.kernels[i];
        let (sat, unsat): (Vec<u64>, Vec<u64>) = vals.iter().partition(|&&v| sigma.eval(v, &boxes)[node]);
        if !unsat.is_empty() {
            go(sigma, z, cap, must, i + 1, x, vals, out);
        }
        x.insert(i);
        go(sigma, z, cap, must, i + 1, x, sat, out);
        x.set(i, false);
    }
    let mut x = FixedBitSet::with_capacity(k);
    go(sigma, z, cap, must, 0, &mut x, vals.to_vec(), &mut out);
    out
}

// ---------------------------------------------------------------------------
// The literal recursion S(X)

/// Witness data for `S(X)`.
#[derive(Clone, Debug)]
struct SWit {
    root: ChainStep,
    /// Box sets realized by the immediate successors.
    succ: Vec<FixedBitSet>,
}

/// Memoized evaluation of `S(X)`: is there a rooted L-model whose box set
/// (kernels true throughout) is exactly X?
pub struct SatState<'a> {
    sigma: &'a Sigma,
    l: &'a LogicSpec,
    k: usize,
    vals: Vec<u64>,
    memo: HashMap<FixedBitSet, Option<SWit>>,
}

type Literal<'a> = SatState<'a>;

impl<'a> SatState<'a> {
    /// The literal recursion has no notion of depth or global frame
    /// conditions; such logics are rejected.
    pub fn new(sigma: &'a Sigma, l: &'a LogicSpec) -> Result<Self> {
        let implied_depth = l.base.iter().all(|c| c.branching == Some(0));
        if (l.bounds.depth.is_some() && !implied_depth) || l.needs_global_check() {
            return Err(Error::Unsupported(format!(
                "the literal recursion does not handle the bounds of {}",
                l.name
            )));
        }
        if sigma.num_kernels() > 16 {
            return Err(Error::Budget("the literal recursion is limited to 16 kernels".into()));
        }
        Ok(SatState {
            sigma,
            l,
            k: sigma.num_kernels(),
            vals: all_valuations(sigma)?,
            memo: HashMap::new(),
        })
    }

    /// `A(v, X) ⊨ ψ` for all kernels ψ of Σ.
    fn assignment(&self, v: u64, x: &FixedBitSet) -> Vec<bool> {
        self.sigma.eval(v, &boxes_of(x, self.k))
    }

    fn holds(&self, t: &[bool], c: usize) -> bool {
        t[self.sigma.kernels[c]]
    }

    /// `S(X)`.
    pub fn solve(&mut self, x: &FixedBitSet) -> bool {
        self.solve_wit(x).is_some()
    }

    fn solve_wit(&mut self, x: &FixedBitSet) -> Option<SWit> {
        if let Some(w) = self.memo.get(x) {
            return w.clone();
        }
        let mut result = None;
        let base = self.l.effective_base();
        let outside: Vec<usize> = (0..self.k).filter(|c| !x.contains(*c)).collect();
        'search: for cond in base {
            for s in 0u64..1 << outside.len() {
                let mut y = x.clone();
                for (i, &c) in outside.iter().enumerate() {
                    if s >> i & 1 == 1 {
                        y.insert(c);
                    }
                }
                let Some(root) = self.h(cond.cluster, x, &y) else {
                    continue;
                };
                if let Some(succ) = self.u(cond.branching.map(|m| m as usize), x, &y) {
                    result = Some(SWit { root, succ });
                    break 'search;
                }
            }
        }
        self.memo.insert(x.clone(), result.clone());
        result
    }

    /// `H_C(X, Y)` with the root cluster as witness.
    fn h(&self, c: ClusterKind, x: &FixedBitSet, y: &FixedBitSet) -> Option<ChainStep> {
        let y_minus_x: Vec<usize> = y.ones().filter(|c| !x.contains(*c)).collect();
        match c {
            ClusterKind::Irr => self.vals.iter().copied().find_map(|v| {
                let t = self.assignment(v, y);
                (x.ones().all(|c| self.holds(&t, c)) && y_minus_x.iter().all(|&c| !self.holds(&t, c)))
                    .then_some(ChainStep::Irr(v))
            }),
            ClusterKind::Refl(cap) => {
                let good: Vec<(u64, Vec<bool>)> = self
                    .vals
                    .iter()
                    .map(|&v| (v, self.assignment(v, x)))
                    .filter(|(_, t)| x.ones().all(|c| self.holds(t, c)))
                    .collect();
                if good.is_empty() {
                    return None;
                }
                let mut refuters = HashMap::new();
                for &c in &y_minus_x {
                    let r: Vec<u64> = good
                        .iter()
                        .filter(|(_, t)| !self.holds(t, c))
                        .map(|(v, _)| *v)
                        .collect();
                    if r.is_empty() {
                        return None;
                    }
                    refuters.insert(c, r);
                }
                let allowed: Vec<u64> = good.iter().map(|(v, _)| *v).collect();
                cover(&y_minus_x, &refuters, &allowed, cap.map(|k| k as usize)).map(ChainStep::Refl)
            }
        }
    }

    /// `U_m(X, Y)` with the successors' box sets as witness.
    fn u(&mut self, m: Option<usize>, x: &FixedBitSet, y: &FixedBitSet) -> Option<Vec<FixedBitSet>> {
        let full = bitset(self.k, 0..self.k);
        let rest: Vec<usize> = (0..self.k).filter(|c| !y.contains(*c)).collect();
        // Candidate Z: X ⊊ Z, Y ⊆ Z ⊆ B, S(Z).
        let mut cands: Vec<FixedBitSet> = Vec::new();
        for s in 0u64..1 << rest.len() {
            let mut z = y.clone();
            for (i, &c) in rest.iter().enumerate() {
                if s >> i & 1 == 1 {
                    z.insert(c);
                }
            }
            if z != *x && self.solve(&z) {
                cands.push(z);
            }
        }
        match m {
            Some(m) => {
                // Z_0..Z_{m-1}, not necessarily distinct, jointly refuting B∖Y.
                if m == 0 {
                    return rest.is_empty().then(Vec::new);
                }
                fn pick(rest: &[usize], cands: &[FixedBitSet], chosen: &mut Vec<FixedBitSet>, m: usize) -> bool {
                    let Some(&c) = rest.iter().find(|&&c| chosen.iter().all(|z| z.contains(c))) else {
                        return !chosen.is_empty();
                    };
                    if chosen.len() == m {
                        return false;
                    }
                    for z in cands.iter().filter(|z| !z.contains(c)) {
                        chosen.push(z.clone());
                        if pick(rest, cands, chosen, m) {
                            return true;
                        }
                        chosen.pop();
                    }
                    false
                }
                let mut chosen = Vec::new();
                if rest.is_empty() {
                    // All Z_j equal B when Y = B.
                    return cands.contains(&full).then(|| vec![full; 1]);
                }
                pick(&rest, &cands, &mut chosen, m).then_some(chosen)
            }
            None => {
                if rest.is_empty() {
                    return (x != &full && self.solve(&full)).then(|| vec![full]);
                }
                let mut succ = Vec::new();
                for &c in &rest {
                    let z = cands.iter().find(|z| !z.contains(c))?;
                    succ.push(z.clone());
                }
                Some(succ)
            }
        }
    }

    /// `⊬ ψ` for kernel `target`: some `X ⊆ B∖{ψ}` with `S(X)`; returns a model.
    fn refute(&mut self, target: usize) -> Result<Option<Model>> {
        let others: Vec<usize> = (0..self.k).filter(|&c| c != target).collect();
        for s in 0u64..1 << others.len() {
            let x = bitset(
                self.k,
                others
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| s >> i & 1 == 1)
                    .map(|(_, &c)| c),
            );
            if self.solve(&x) {
                let mut b = Builder::new();
                let mut built = HashMap::new();
                self.build(&x, &mut b, &mut built);
                return Ok(Some(b.finish(self.sigma)?));
            }
        }
        Ok(None)
    }

    fn build(&self, x: &FixedBitSet, b: &mut Builder, built: &mut HashMap<FixedBitSet, Vec<usize>>) -> Vec<usize> {
        if let Some(p) = built.get(x) {
            return p.clone();
        }
        let w = self.memo[x].clone().expect("built sets are realized");
        let root = match &w.root {
            ChainStep::Irr(v) => b.cluster(false, &[*v]),
            ChainStep::Refl(vs) => b.cluster(true, vs),
        };
        for z in &w.succ {
            let pts = self.build(z, b, built);
            b.see(&root, &pts);
        }
        built.insert(x.clone(), root.clone());
        root
    }
}

/// `S(X)` for the subformula context of `Σ`, given by kernel positions.
pub fn solve_s(sigma: &Sigma, l: &LogicSpec, x: &[usize]) -> Result<bool> {
    let mut st = SatState::new(sigma, l)?;
    Ok(st.solve(&bitset(sigma.num_kernels(), x.iter().copied())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logics::preset;
    use crate::syntax::parse;

    fn thm(l: &str, f: &str) -> bool {
        is_theorem(&preset(l).unwrap(), &parse(f).unwrap()).unwrap()
    }

    #[test]
    fn axioms() {
        assert!(thm("K4", "[](x0 -> x1) -> ([]x0 -> []x1)"));
        assert!(thm("K4", "[]x0 -> [][]x0"));
        assert!(!thm("K4", "[]x0 -> x0"));
        assert!(thm("S4", "[]x0 -> x0"));
        assert!(thm("GL", "[]([]x0 -> x0) -> []x0"));
        assert!(!thm("S4", "[]([]x0 -> x0) -> []x0"));
        assert!(thm("S5", "<>x0 -> []<>x0"));
        assert!(!thm("S4", "<>x0 -> []<>x0"));
        assert!(thm("S4.3", "[]([.]x0 -> x1) | []([.]x1 -> x0)"));
        assert!(!thm("S4", "[]([.]x0 -> x1) | []([.]x1 -> x0)"));
    }

    #[test]
    fn countermodels_verify() {
        let k4 = preset("K4").unwrap();
        let v = derives(&k4, &[], &[parse("[]x0 -> x0").unwrap()]).unwrap();
        let cm = v.countermodel.unwrap();
        assert_eq!(cm.model.len(), 1);
        assert!(!cm.model.frame.is_reflexive(cm.root));
        let v = derives(&k4, &[parse("x0").unwrap()], &[parse("[]x0").unwrap()]).unwrap();
        assert!(v.derivable);
    }

    #[test]
    fn literal_recursion_examples() {
        let k4 = preset("K4").unwrap();
        let s4 = preset("S4").unwrap();
        let sig = Sigma::new(&[parse("[]bot").unwrap()]);
        let bot = sig.kernel_pos(sig.index_of(&Formula::bot()).unwrap()).unwrap();
        assert!(!solve_s(&sig, &k4, &[bot]).unwrap());
        assert!(solve_s(&sig, &k4, &[]).unwrap());
        let sig = Sigma::new(&[parse("[]x0").unwrap()]);
        assert!(solve_s(&sig, &s4, &[0]).unwrap());
    }

    #[test]
    fn engines_agree_on_small_formulas() {
        for l in ["K4", "S4", "GL", "S4.3", "K4.3", "S5", "K4Grz", "S4+BB2", "K4+BD2"] {
            let l = preset(l).unwrap();
            for f in [
                "[]x0 -> x0",
                "<>[]x0 -> []<>x0",
                "[]<>x0 -> <>[]x0",
                "[]([]x0 -> x0) -> []x0",
                "<>x0 & <>~x0 -> <>(x0 & <>~x0) | <>(~x0 & <>x0)",
                "[](x0 -> [](x0 | x1)) | []x1",
            ] {
                let f = parse(f).unwrap();
                let mut seen = Vec::new();
                for engine in [Engine::Recursive, Engine::Chain, Engine::Literal] {
                    if engine == Engine::Chain && !l.flags.linear {
                        continue;
                    }
                    if engine == Engine::Literal && l.bounds.depth.is_some() {
                        continue;
                    }
                    let opts = DeriveOptions {
                        engine,
                        ..Default::default()
                    };
                    seen.push(
                        derives_with(&l, &[], std::slice::from_ref(&f), &opts)
                            .unwrap()
                            .derivable,
                    );
                }
                assert!(seen.windows(2).all(|w| w[0] == w[1]), "{} {f}: {seen:?}", l.name);
            }
        }
    }
}
