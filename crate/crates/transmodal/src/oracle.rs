//! Brute-force baselines: frame enumeration up to isomorphism, exhaustive
//! countermodel search and valuation search for unifiability.
//!
//! Nothing here shares code with the decision procedures beyond formula
//! evaluation on explicit models, so the two can be checked against each other.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Mutex, OnceLock};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::frames::{FiniteFrame, Model};
use crate::logics::{is_l_frame, LogicSpec};
use crate::syntax::{Atom, Formula, SNode, Sigma};

/// Hard ceiling on the number of points for exhaustive enumeration.
pub const MAX_ENUMERATION_POINTS: usize = 7;

/// Which reflexivity patterns to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReflexivityPattern {
    #[default]
    Any,
    AllReflexive,
    AllIrreflexive,
}

/// What to enumerate.
#[derive(Clone, Debug)]
pub struct EnumerationSpec {
    pub max_points: usize,
    pub logic: Option<LogicSpec>,
    pub rooted: bool,
    pub reflexivity: ReflexivityPattern,
    pub single_cluster: bool,
}

impl EnumerationSpec {
    pub fn up_to(max_points: usize) -> Self {
        EnumerationSpec {
            max_points,
            logic: None,
            rooted: false,
            reflexivity: ReflexivityPattern::Any,
            single_cluster: false,
        }
    }

    pub fn logic(mut self, l: &LogicSpec) -> Self {
        self.logic = Some(l.clone());
        self
    }

    pub fn rooted(mut self) -> Self {
        self.rooted = true;
        self
    }

    fn accepts(&self, f: &FiniteFrame) -> bool {
        (!self.rooted || f.is_rooted())
            && match self.reflexivity {
                ReflexivityPattern::Any => true,
                ReflexivityPattern::AllReflexive => f.reflexivity().iter().all(|&r| r),
                ReflexivityPattern::AllIrreflexive => f.reflexivity().iter().all(|&r| !r),
            }
            && (!self.single_cluster || f.clusters().members.len() == 1)
            && self.logic.as_ref().is_none_or(|l| is_l_frame(l, f))
    }
}

/// Adjacency code of a frame on ≤ 8 points: bit `w*n + v` is set iff `w` sees `v`.
fn code_of(f: &FiniteFrame, perm: &[usize]) -> u64 {
    // perm[new] = old
    let n = f.len();
    let mut code = 0u64;
    for a in 0..n {
        for b in 0..n {
            if f.sees(perm[a], perm[b]) {
                code |= 1 << (a * n + b);
            }
        }
    }
    code
}

fn frame_from_code(n: usize, code: u64) -> FiniteFrame {
    let refl: Vec<bool> = (0..n).map(|w| code >> (w * n + w) & 1 == 1).collect();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && code >> (a * n + b) & 1 == 1)
        .collect();
    FiniteFrame::new(refl, &pairs).expect("codes are transitive")
}

/// The canonical code: minimal adjacency code over all point orders that
/// sort points by an isomorphism invariant.
fn canonical_code(f: &FiniteFrame) -> u64 {
    let n = f.len();
    let inv: Vec<(bool, usize, usize)> = (0..n)
        .map(|w| {
            let down = (0..n).filter(|&v| v != w && f.sees(v, w)).count();
            (f.is_reflexive(w), f.strictly_above(w).count_ones(..), down)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&w| inv[w]);
    // Blocks of equal invariants may be permuted freely.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &w in &order {
        match blocks.last_mut() {
            Some(b) if inv[b[0]] == inv[w] => b.push(w),
            _ => blocks.push(vec![w]),
        }
    }
    let mut best = u64::MAX;
    let mut perm = Vec::with_capacity(n);
    fn rec(f: &FiniteFrame, blocks: &mut [Vec<usize>], bi: usize, perm: &mut Vec<usize>, best: &mut u64) {
        if bi == blocks.len() {
            *best = (*best).min(code_of(f, perm));
            return;
        }
        let k = blocks[bi].len();
        // Heap's algorithm over the block.
        let mut block = blocks[bi].clone();
        let mut c = vec![0usize; k];
        let base = perm.len();
        perm.extend_from_slice(&block);
        rec(f, blocks, bi + 1, perm, best);
        perm.truncate(base);
        let mut i = 0;
        while i < k {
            if c[i] < i {
                if i % 2 == 0 {
                    block.swap(0, i);
                } else {
                    block.swap(c[i], i);
                }
                perm.extend_from_slice(&block);
                rec(f, blocks, bi + 1, perm, best);
                perm.truncate(base);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    }
    rec(f, &mut blocks, 0, &mut perm, &mut best);
    best
}

/// Extend a frame by one new point in every transitive way.
fn one_point_extensions(f: &FiniteFrame) -> Vec<FiniteFrame> {
    let n = f.len();
    let mut out = Vec::new();
    // Candidate upsets U (what the new point sees among old points) and downsets D.
    let subsets = |pred: &dyn Fn(&FixedBitSet) -> bool| -> Vec<FixedBitSet> {
        (0u32..1 << n)
            .map(|m| {
                let mut s = FixedBitSet::with_capacity(n);
                for w in 0..n {
                    s.set(w, m >> w & 1 == 1);
                }
                s
            })
            .filter(|s| pred(s))
            .collect()
    };
    let ups = subsets(&|s: &FixedBitSet| {
        s.ones()
            .all(|w| f.strictly_above(w).is_subset(s) && (!in_cycle(f, w) || true))
    });
    let downs = subsets(&|s: &FixedBitSet| {
        s.ones()
            .all(|w| (0..n).all(|v| !f.sees(v, w) || v == w || s.contains(v)))
    });
    for u in &ups {
        // Upsets must also contain reflexive-loop consequences: fine since strictly_above covers cluster mates.
        for d in &downs {
            for refl in [false, true] {
                // Every d ∈ D must see every u ∈ U.
                if !d.ones().all(|a| u.ones().all(|b| f.sees(a, b))) {
                    continue;
                }
                let cyclic = d.ones().any(|a| u.contains(a));
                if cyclic && !refl {
                    continue;
                }
                let mut pairs = f.strict_pairs();
                for b in u.ones() {
                    pairs.push((n, b));
                }
                for a in d.ones() {
                    pairs.push((a, n));
                }
                let mut r = f.reflexivity().to_vec();
                r.push(refl);
                if let Ok(g) = FiniteFrame::new(r, &pairs) {
                    // Closure must not add relations among old points.
                    if (0..n).all(|a| (0..n).all(|b| g.sees(a, b) == f.sees(a, b)))
                        && g.strictly_above(n).ones().collect::<Vec<_>>() == u.ones().collect::<Vec<_>>()
                    {
                        out.push(g);
                    }
                }
            }
        }
    }
    out
}

fn in_cycle(f: &FiniteFrame, w: usize) -> bool {
    f.strictly_above(w).ones().any(|v| f.sees(v, w))
}

type Cache = Mutex<HashMap<usize, std::sync::Arc<Vec<(u64, FiniteFrame)>>>>;

fn cache() -> &'static Cache {
    static C: OnceLock<Cache> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All transitive frames on exactly `n` points up to isomorphism, in canonical order.
pub fn frames_of_size(n: usize) -> Result<std::sync::Arc<Vec<(u64, FiniteFrame)>>> {
    if n > MAX_ENUMERATION_POINTS {
        return Err(Error::Budget(format!(
            "frame enumeration limited to {MAX_ENUMERATION_POINTS} points, asked for {n}"
        )));
    }
    if let Some(v) = cache().lock().unwrap().get(&n) {
        return Ok(v.clone());
    }
    let result: Vec<(u64, FiniteFrame)> = if n == 0 {
        vec![(0, FiniteFrame::new(vec![], &[]).unwrap())]
    } else {
        let prev = frames_of_size(n - 1)?;
        let mut seen: HashSet<u64> = HashSet::new();
        for (_, f) in prev.iter() {
            for g in one_point_extensions(f) {
                seen.insert(canonical_code(&g));
            }
        }
        let mut codes: Vec<u64> = seen.into_iter().collect();
        codes.sort_unstable();
        codes.into_iter().map(|c| (c, frame_from_code(n, c))).collect()
    };
    let arc = std::sync::Arc::new(result);
    cache().lock().unwrap().insert(n, arc.clone());
    Ok(arc)
}

/// All frames with 1 to `max_points` points satisfying the constraints,
/// by size and then canonical code.
pub fn enumerate_frames(spec: &EnumerationSpec) -> Result<Vec<FiniteFrame>> {
    let mut out = Vec::new();
    for n in 1..=spec.max_points {
        for (_, f) in frames_of_size(n)?.iter() {
            if spec.accepts(f) {
                out.push(f.clone());
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bit-parallel evaluation over all valuations of a frame

/// Evaluate the seed at `root` for 64 valuations at once; lanes are valuations.
/// `atom_words[w][a]` gives atom `a` at point `w` across lanes.
pub(crate) fn eval_lanes(sigma: &Sigma, f: &FiniteFrame, atom_words: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let n = f.len();
    let mut t: Vec<Vec<u64>> = Vec::with_capacity(sigma.n());
    for node in &sigma.nodes {
        let row: Vec<u64> = match *node {
            SNode::Bot => vec![0; n],
            SNode::Top => vec![!0; n],
            SNode::Atom(a) => (0..n).map(|w| atom_words[w][a]).collect(),
            SNode::Not(a) => t[a].iter().map(|x| !x).collect(),
            SNode::And(a, b) => (0..n).map(|w| t[a][w] & t[b][w]).collect(),
            SNode::Or(a, b) => (0..n).map(|w| t[a][w] | t[b][w]).collect(),
            SNode::Imp(a, b) => (0..n).map(|w| !t[a][w] | t[b][w]).collect(),
            SNode::Iff(a, b) => (0..n).map(|w| !(t[a][w] ^ t[b][w])).collect(),
            SNode::Box(c, _) => (0..n)
                .map(|w| {
                    let mut x = !0u64;
                    for v in 0..n {
                        if f.sees(w, v) {
                            x &= t[c][v];
                        }
                    }
                    x
                })
                .collect(),
        };
        t.push(row);
    }
    t
}

const LANE_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Valuations of `k` atoms on `n` points, grouped in batches of up to 64
/// lanes. Valuation `idx` sets atom `a` at point `w` iff bit `w*k + a` of
/// `idx` is set; lane `j` of batch `b` is valuation `b << lane_bits | j`.
pub(crate) struct LaneBatches {
    n: usize,
    k: usize,
    pub lane_bits: usize,
    /// Mask of the lanes in use.
    pub lanes: u64,
    pub batches: u64,
}

impl LaneBatches {
    pub fn new(n: usize, k: usize) -> LaneBatches {
        let bits = n * k;
        let lane_bits = bits.min(6);
        let lanes = if lane_bits == 6 {
            !0
        } else {
            (1u64 << (1u64 << lane_bits)) - 1
        };
        LaneBatches {
            n,
            k,
            lane_bits,
            lanes,
            batches: 1u64 << (bits - lane_bits),
        }
    }

    /// `words[w][a]`: atom `a` at point `w` across the lanes of a batch.
    pub fn words(&self, batch: u64) -> Vec<Vec<u64>> {
        let mut words = vec![vec![0u64; self.k]; self.n];
        for j in 0..self.n * self.k {
            let (w, a) = (j / self.k, j % self.k);
            words[w][a] = if j < self.lane_bits {
                LANE_PATTERNS[j]
            } else if batch >> (j - self.lane_bits) & 1 == 1 {
                !0
            } else {
                0
            };
        }
        words
    }

    /// The model for a lane of a batch.
    pub fn model(&self, f: &FiniteFrame, atoms: &[Atom], batch: u64, lane: u32) -> Model {
        let idx = (batch << self.lane_bits) | lane as u64;
        let mut m = Model::new(f.clone());
        for (a, atom) in atoms.iter().enumerate() {
            let pts: Vec<usize> = (0..self.n).filter(|&w| idx >> (w * self.k + a) & 1 == 1).collect();
            m.set(*atom, &pts);
        }
        m
    }
}

/// Search all valuations of `atoms` on `f` for one where `target` fails at point `at`.
/// Returns the failing valuation as a model.
fn refute_on_frame(f: &FiniteFrame, sigma: &Sigma, target: usize, at: usize) -> Option<Model> {
    let lb = LaneBatches::new(f.len(), sigma.atoms.len());
    for batch in 0..lb.batches {
        let t = eval_lanes(sigma, f, &lb.words(batch));
        let fail = !t[target][at] & lb.lanes;
        if fail != 0 {
            return Some(lb.model(f, &sigma.atoms, batch, fail.trailing_zeros()));
        }
    }
    None
}

/// The least (by size, canonical frame order, valuation order) rooted L-model
/// of at most `cap` points whose root refutes φ.
pub fn brute_countermodel(l: &LogicSpec, phi: &Formula, cap: usize) -> Result<Option<(Model, usize)>> {
    let sigma = Sigma::new(std::slice::from_ref(phi));
    let target = sigma.index_of(phi).unwrap();
    if sigma.atoms.len() * cap > 30 {
        return Err(Error::Budget(format!("{} atoms on {cap} points", sigma.atoms.len())));
    }
    for n in 1..=cap {
        for (_, f) in frames_of_size(n)?.iter() {
            let roots = f.roots();
            let Some(&root) = roots.first() else { continue };
            if !is_l_frame(l, f) {
                continue;
            }
            if let Some(m) = refute_on_frame(f, &sigma, target, root) {
                return Ok(Some((m, root)));
            }
        }
    }
    Ok(None)
}

/// Is φ valid on the frame (true at every point under every valuation)?
pub fn valid_on_frame(f: &FiniteFrame, phi: &Formula) -> bool {
    let sigma = Sigma::new(std::slice::from_ref(phi));
    let target = sigma.index_of(phi).unwrap();
    (0..f.len()).all(|w| refute_on_frame(f, &sigma, target, w).is_none())
}

// ---------------------------------------------------------------------------
// Valuation search

/// Connected components of the undirected comparability graph.
pub fn components(f: &FiniteFrame) -> Vec<Vec<usize>> {
    let n = f.len();
    let mut comp = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let c = out.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = c;
        while let Some(w) = stack.pop() {
            members.push(w);
            for v in 0..n {
                if comp[v] == usize::MAX && (f.le(w, v) || f.le(v, w)) {
                    comp[v] = c;
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Find a valuation of the variables of φ on the given parametric model that
/// makes φ true everywhere. Components are searched independently; within a
/// component clusters are assigned from the top down and φ is checked as soon
/// as a cluster and everything above it are assigned.
///
/// `budget` bounds the number of cluster assignments tried.
pub fn brute_valuation_unify(phi: &Formula, model: &Model, budget: u64) -> Result<Option<Model>> {
    let vars: Vec<Atom> = phi.atoms().into_iter().filter(|a| a.is_var()).collect();
    for p in phi.atoms().into_iter().filter(|a| a.is_param()) {
        if !model.val.contains_key(&p) {
            return Err(Error::MissingAtom(p.to_string()));
        }
    }
    let sigma = Sigma::new(std::slice::from_ref(phi));
    let target = sigma.index_of(phi).unwrap();
    let f = &model.frame;
    let cl = f.clusters();
    let mut result = model.clone();
    for v in &vars {
        result.set(*v, &[]);
    }
    let mut spent = 0u64;
    for comp in components(f) {
        // Clusters of the component, ordered top-down.
        let mut cls: Vec<usize> = comp.iter().map(|&w| cl.of[w]).collect();
        cls.sort_unstable();
        cls.dedup();
        cls.sort_by_key(|&c| cl.above[c].count_ones(..));
        let mut assign: BTreeMap<usize, u64> = BTreeMap::new();
        let ok = search_clusters(
            &cls,
            0,
            &cl,
            &vars,
            model,
            &sigma,
            target,
            &mut assign,
            &mut spent,
            budget,
        )?;
        if !ok {
            return Ok(None);
        }
        for (w, bits) in assign {
            for (i, v) in vars.iter().enumerate() {
                if bits >> i & 1 == 1 {
                    result.val.get_mut(v).unwrap().insert(w);
                }
            }
        }
    }
    Ok(Some(result))
}

#[allow(clippy::too_many_arguments)]
fn search_clusters(
    cls: &[usize],
    i: usize,
    cl: &crate::frames::Clusters,
    vars: &[Atom],
    model: &Model,
    sigma: &Sigma,
    target: usize,
    assign: &mut BTreeMap<usize, u64>,
    spent: &mut u64,
    budget: u64,
) -> Result<bool> {
    if i == cls.len() {
        return Ok(true);
    }
    let c = cls[i];
    let members = &cl.members[c];
    let bits = members.len() * vars.len();
    if bits > 24 {
        return Err(Error::Budget(format!("cluster with {bits} variable bits")));
    }
    // The cone of the cluster: cluster plus everything above.
    let mut cone = FixedBitSet::with_capacity(model.len());
    cone.insert(members[0]);
    cone.union_with(model.frame.strictly_above(members[0]));
    let (sub, old) = model.restrict(&cone);
    for choice in 0u64..1 << bits {
        *spent += 1;
        if *spent > budget {
            return Err(Error::Budget(format!("valuation search exceeded {budget} steps")));
        }
        for (j, &w) in members.iter().enumerate() {
            assign.insert(w, choice >> (j * vars.len()) & ((1 << vars.len()) - 1));
        }
        let mut m = sub.clone();
        for (vi, v) in vars.iter().enumerate() {
            let pts: Vec<usize> = (0..old.len())
                .filter(|&j| assign.get(&old[j]).is_some_and(|b| b >> vi & 1 == 1))
                .collect();
            m.set(*v, &pts);
        }
        let t = m.truth(sigma)?;
        let good = old
            .iter()
            .enumerate()
            .filter(|(_, w)| members.contains(w))
            .all(|(j, _)| t[target].contains(j));
        if good && search_clusters(cls, i + 1, cl, vars, model, sigma, target, assign, spent, budget)? {
            return Ok(true);
        }
    }
    for &w in members {
        assign.remove(&w);
    }
    Ok(false)
}
