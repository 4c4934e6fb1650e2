//! Finite transitive Kripke frames and models.
//!
//! A frame stores, for every point, the set of *other* points it sees
//! (the strict part of the accessibility relation) and a reflexivity flag.
//! Clusters are the classes of mutual reachability; a proper cluster has
//! at least two points, all of them reflexive.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logics::{ClusterKind, LogicSpec};
use crate::syntax::{Atom, Formula, SNode, Sigma};

/// A finite transitive frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteFrame {
    reflexive: Vec<bool>,
    up: Vec<FixedBitSet>,
}

/// The cluster decomposition of a frame.
#[derive(Clone, Debug)]
pub struct Clusters {
    /// Cluster index of each point.
    pub of: Vec<usize>,
    /// Points of each cluster, in increasing order.
    pub members: Vec<Vec<usize>>,
    pub reflexive: Vec<bool>,
    /// Clusters strictly above each cluster.
    pub above: Vec<FixedBitSet>,
    /// Immediate successor clusters of each cluster.
    pub immediate: Vec<Vec<usize>>,
}

impl FiniteFrame {
    /// Build a frame from reflexivity flags and pairs `(a, b)` meaning `a` sees `b`.
    ///
    /// The relation is closed transitively. A point that ends up seeing itself
    /// through a cycle must be flagged reflexive, otherwise the input is rejected.
    pub fn new(reflexive: Vec<bool>, pairs: &[(usize, usize)]) -> Result<FiniteFrame> {
        let n = reflexive.len();
        let mut up = vec![FixedBitSet::with_capacity(n); n];
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::InvalidFrame(format!("pair ({a},{b}) out of range")));
            }
            up[a].insert(b);
        }
        // Warshall closure on rows.
        for k in 0..n {
            let row_k = up[k].clone();
            for row in up.iter_mut() {
                if row.contains(k) {
                    row.union_with(&row_k);
                }
            }
        }
        for (w, row) in up.iter_mut().enumerate() {
            if row.contains(w) {
                if !reflexive[w] {
                    return Err(Error::InvalidFrame(format!(
                        "point {w} lies on a cycle but is not declared reflexive"
                    )));
                }
                row.set(w, false);
            }
        }
        Ok(FiniteFrame { reflexive, up })
    }

    /// Build from already transitive strict successor sets (no point in its own set).
    pub fn from_parts(reflexive: Vec<bool>, up: Vec<FixedBitSet>) -> Result<FiniteFrame> {
        let n = reflexive.len();
        if up.len() != n {
            return Err(Error::InvalidFrame("size mismatch".into()));
        }
        let pairs: Vec<(usize, usize)> = up
            .iter()
            .enumerate()
            .flat_map(|(w, s)| s.ones().map(move |v| (w, v)))
            .collect();
        let f = FiniteFrame::new(reflexive, &pairs)?;
        if f.up
            != up
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.grow(n);
                    s
                })
                .collect::<Vec<_>>()
        {
            return Err(Error::InvalidFrame("relation is not transitive".into()));
        }
        Ok(f)
    }

    pub(crate) fn from_parts_unchecked(reflexive: Vec<bool>, up: Vec<FixedBitSet>) -> FiniteFrame {
        FiniteFrame { reflexive, up }
    }

    /// A single point.
    pub fn point(reflexive: bool) -> FiniteFrame {
        FiniteFrame::new(vec![reflexive], &[]).unwrap()
    }

    /// A chain `0 < 1 < … < k-1` with the given reflexivity flags.
    pub fn chain(reflexive: &[bool]) -> FiniteFrame {
        let n = reflexive.len();
        let pairs: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        FiniteFrame::new(reflexive.to_vec(), &pairs).unwrap()
    }

    /// A single cluster of `k` points (`k = 1` gives a point of the given reflexivity).
    pub fn cluster(k: usize, reflexive: bool) -> FiniteFrame {
        if k == 1 {
            return FiniteFrame::point(reflexive);
        }
        let pairs: Vec<_> = (0..k)
            .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        FiniteFrame::new(vec![true; k], &pairs).unwrap()
    }

    /// A root seeing `k` incomparable top points.
    pub fn fork(k: usize, reflexive: bool) -> FiniteFrame {
        let pairs: Vec<_> = (1..=k).map(|b| (0, b)).collect();
        FiniteFrame::new(vec![reflexive; k + 1], &pairs).unwrap()
    }

    pub fn len(&self) -> usize {
        self.reflexive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflexive.is_empty()
    }

    pub fn is_reflexive(&self, w: usize) -> bool {
        self.reflexive[w]
    }

    pub fn reflexivity(&self) -> &[bool] {
        &self.reflexive
    }

    /// Points other than `w` seen by `w`.
    pub fn strictly_above(&self, w: usize) -> &FixedBitSet {
        &self.up[w]
    }

    /// The accessibility relation, including reflexive loops.
    pub fn sees(&self, w: usize, v: usize) -> bool {
        if w == v {
            self.reflexive[w]
        } else {
            self.up[w].contains(v)
        }
    }

    /// `w ≤ v`: equal or accessible.
    pub fn le(&self, w: usize, v: usize) -> bool {
        w == v || self.up[w].contains(v)
    }

    /// All pairs `(a, b)` with `a ≠ b` and `a` seeing `b`.
    pub fn strict_pairs(&self) -> Vec<(usize, usize)> {
        self.up
            .iter()
            .enumerate()
            .flat_map(|(w, s)| s.ones().map(move |v| (w, v)))
            .collect()
    }

    /// The upward closure `{v : ∃w∈S, w ≤ v}`.
    pub fn upset_of(&self, s: &FixedBitSet) -> FixedBitSet {
        let mut out = s.clone();
        out.grow(self.len());
        for w in s.ones() {
            out.union_with(&self.up[w]);
        }
        out
    }

    pub fn is_upset(&self, s: &FixedBitSet) -> bool {
        s.ones().all(|w| self.up[w].is_subset(s))
    }

    pub fn clusters(&self) -> Clusters {
        let n = self.len();
        let mut of = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for w in 0..n {
            if of[w] != usize::MAX {
                continue;
            }
            let c = members.len();
            let mut m = vec![w];
            for v in self.up[w].ones() {
                if self.up[v].contains(w) {
                    m.push(v);
                }
            }
            m.sort_unstable();
            for &v in &m {
                of[v] = c;
            }
            members.push(m);
        }
        let k = members.len();
        let reflexive: Vec<bool> = members.iter().map(|m| self.reflexive[m[0]]).collect();
        let mut above = vec![FixedBitSet::with_capacity(k); k];
        for (c, m) in members.iter().enumerate() {
            for v in self.up[m[0]].ones() {
                if of[v] != c {
                    above[c].insert(of[v]);
                }
            }
        }
        let immediate = (0..k)
            .map(|c| {
                above[c]
                    .ones()
                    .filter(|&d| !above[c].ones().any(|e| above[e].contains(d)))
                    .collect()
            })
            .collect();
        Clusters {
            of,
            members,
            reflexive,
            above,
            immediate,
        }
    }

    /// Length of the longest chain of clusters (0 for the empty frame).
    pub fn depth(&self) -> usize {
        let cl = self.clusters();
        cluster_depths(&cl).into_iter().max().unwrap_or(0)
    }

    /// Depth of each point: length of the longest cluster chain starting at it.
    pub fn point_depths(&self) -> Vec<usize> {
        let cl = self.clusters();
        let d = cluster_depths(&cl);
        cl.of.iter().map(|&c| d[c]).collect()
    }

    /// The largest antichain of clusters inside a rooted generated subframe.
    pub fn width(&self) -> usize {
        let cl = self.clusters();
        (0..cl.members.len())
            .map(|c| {
                let mut set: Vec<usize> = cl.above[c].ones().collect();
                set.push(c);
                max_antichain(&cl, &set)
            })
            .max()
            .unwrap_or(0)
    }

    /// Points seeing every other point.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&w| self.up[w].count_ones(..) + 1 == self.len())
            .collect()
    }

    pub fn is_rooted(&self) -> bool {
        !self.roots().is_empty()
    }

    /// The generated subframe on an upward closed set, with the map new → old.
    pub fn generated(&self, u: &FixedBitSet) -> Result<(FiniteFrame, Vec<usize>)> {
        if !self.is_upset(u) {
            return Err(Error::InvalidFrame(
                "generated subframe requires an upward closed set".into(),
            ));
        }
        Ok(self.restrict(u))
    }

    /// The restriction of the frame to an arbitrary subset, with the map new → old.
    pub fn restrict(&self, u: &FixedBitSet) -> (FiniteFrame, Vec<usize>) {
        let old: Vec<usize> = u.ones().filter(|&w| w < self.len()).collect();
        let pos: HashMap<usize, usize> = old.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let k = old.len();
        let up = old
            .iter()
            .map(|&w| {
                let mut s = FixedBitSet::with_capacity(k);
                for v in self.up[w].ones() {
                    if let Some(&j) = pos.get(&v) {
                        s.insert(j);
                    }
                }
                s
            })
            .collect();
        let refl = old.iter().map(|&w| self.reflexive[w]).collect();
        (FiniteFrame { reflexive: refl, up }, old)
    }

    /// The generated subframe `w↑`.
    pub fn cone(&self, w: usize) -> (FiniteFrame, Vec<usize>) {
        let mut s = self.up[w].clone();
        s.insert(w);
        self.restrict(&s)
    }
}

fn cluster_depths(cl: &Clusters) -> Vec<usize> {
    let k = cl.members.len();
    let mut memo = vec![0usize; k];
    // Clusters with fewer clusters above are resolved first.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| cl.above[c].count_ones(..));
    for c in order {
        memo[c] = 1 + cl.above[c].ones().map(|d| memo[d]).max().unwrap_or(0);
    }
    memo
}

/// Size of the largest antichain among the given clusters (Dilworth via matching).
fn max_antichain(cl: &Clusters, set: &[usize]) -> usize {
    let k = set.len();
    let mut match_right: Vec<Option<usize>> = vec![None; k];
    fn augment(a: usize, cl: &Clusters, set: &[usize], seen: &mut [bool], match_right: &mut [Option<usize>]) -> bool {
        for b in 0..set.len() {
            if cl.above[set[a]].contains(set[b]) && !seen[b] {
                seen[b] = true;
                if match_right[b].is_none() || augment(match_right[b].unwrap(), cl, set, seen, match_right) {
                    match_right[b] = Some(a);
                    return true;
                }
            }
        }
        false
    }
    let mut matching = 0;
    for a in 0..k {
        let mut seen = vec![false; k];
        if augment(a, cl, set, &mut seen, &mut match_right) {
            matching += 1;
        }
    }
    k - matching
}

/// Structural statistics of a frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameStats {
    pub points: usize,
    pub clusters: Vec<Vec<usize>>,
    pub cluster_reflexive: Vec<bool>,
    /// Pairs of cluster indices `(c, d)` with `d` an immediate successor of `c`.
    pub skeleton: Vec<(usize, usize)>,
    pub depth: usize,
    pub width: usize,
    pub max_cluster: usize,
    pub rooted: bool,
    pub final_clusters: Vec<usize>,
}

/// Clusters, skeleton, depth, width, largest cluster, rootedness and final clusters.
pub fn analyze(f: &FiniteFrame) -> FrameStats {
    let cl = f.clusters();
    let skeleton = cl
        .immediate
        .iter()
        .enumerate()
        .flat_map(|(c, ds)| ds.iter().map(move |&d| (c, d)))
        .collect();
    FrameStats {
        points: f.len(),
        max_cluster: cl.members.iter().map(|m| m.len()).max().unwrap_or(0),
        final_clusters: (0..cl.members.len())
            .filter(|&c| cl.above[c].count_ones(..) == 0)
            .collect(),
        cluster_reflexive: cl.reflexive.clone(),
        clusters: cl.members,
        skeleton,
        depth: f.depth(),
        width: f.width(),
        rooted: f.is_rooted(),
    }
}

// ---------------------------------------------------------------------------
// Models

/// A finite frame with a valuation of parameters and variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    pub frame: FiniteFrame,
    pub val: BTreeMap<Atom, FixedBitSet>,
}

impl Model {
    pub fn new(frame: FiniteFrame) -> Model {
        Model {
            frame,
            val: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    /// Declare an atom true exactly at the given points.
    pub fn set(&mut self, a: Atom, points: &[usize]) {
        let mut s = FixedBitSet::with_capacity(self.len());
        for &w in points {
            s.insert(w);
        }
        self.val.insert(a, s);
    }

    pub fn with(mut self, a: Atom, points: &[usize]) -> Model {
        self.set(a, points);
        self
    }

    pub fn holds_atom(&self, a: Atom, w: usize) -> Option<bool> {
        self.val.get(&a).map(|s| s.contains(w))
    }

    /// Bit mask of the given atoms at `w` (absent atoms read as false).
    pub fn mask(&self, w: usize, atoms: &[Atom]) -> u64 {
        atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| self.val.get(a).is_some_and(|s| s.contains(w)))
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn parameters(&self) -> Vec<Atom> {
        self.val.keys().copied().filter(|a| a.is_param()).collect()
    }

    pub fn variables(&self) -> Vec<Atom> {
        self.val.keys().copied().filter(|a| a.is_var()).collect()
    }

    /// Truth sets of every member of Σ.
    pub fn truth(&self, sigma: &Sigma) -> Result<Vec<FixedBitSet>> {
        let n = self.len();
        for a in &sigma.atoms {
            if !self.val.contains_key(a) {
                return Err(Error::MissingAtom(a.to_string()));
            }
        }
        let mut out: Vec<FixedBitSet> = Vec::with_capacity(sigma.n());
        let full = {
            let mut s = FixedBitSet::with_capacity(n);
            s.insert_range(..);
            s
        };
        for node in &sigma.nodes {
            let t = match *node {
                SNode::Bot => FixedBitSet::with_capacity(n),
                SNode::Top => full.clone(),
                SNode::Atom(a) => {
                    let mut s = self.val[&sigma.atoms[a]].clone();
                    s.grow(n);
                    s
                }
                SNode::Not(a) => {
                    let mut s = full.clone();
                    s.difference_with(&out[a]);
                    s
                }
                SNode::And(a, b) => {
                    let mut s = out[a].clone();
                    s.intersect_with(&out[b]);
                    s
                }
                SNode::Or(a, b) => {
                    let mut s = out[a].clone();
                    s.union_with(&out[b]);
                    s
                }
                SNode::Imp(a, b) => {
                    let mut s = full.clone();
                    s.difference_with(&out[a]);
                    s.union_with(&out[b]);
                    s
                }
                SNode::Iff(a, b) => {
                    let mut s = FixedBitSet::with_capacity(n);
                    for w in 0..n {
                        s.set(w, out[a].contains(w) == out[b].contains(w));
                    }
                    s
                }
                SNode::Box(c, _) => {
                    let mut s = FixedBitSet::with_capacity(n);
                    for w in 0..n {
                        let ok =
                            self.frame.up[w].is_subset(&out[c]) && (!self.frame.reflexive[w] || out[c].contains(w));
                        s.set(w, ok);
                    }
                    s
                }
            };
            out.push(t);
        }
        Ok(out)
    }

    /// Points where φ holds.
    pub fn extension(&self, phi: &Formula) -> Result<FixedBitSet> {
        let sigma = Sigma::new(std::slice::from_ref(phi));
        let t = self.truth(&sigma)?;
        Ok(t[sigma.index_of(phi).expect("seed is in its closure")].clone())
    }

    pub fn holds(&self, w: usize, phi: &Formula) -> Result<bool> {
        Ok(self.extension(phi)?.contains(w))
    }

    pub fn holds_everywhere(&self, phi: &Formula) -> Result<bool> {
        Ok(self.extension(phi)?.count_ones(..) == self.len())
    }

    /// Restriction to an arbitrary set of points, with the map new → old.
    pub fn restrict(&self, u: &FixedBitSet) -> (Model, Vec<usize>) {
        let (frame, old) = self.frame.restrict(u);
        let val = self
            .val
            .iter()
            .map(|(a, s)| {
                let mut t = FixedBitSet::with_capacity(old.len());
                for (i, &w) in old.iter().enumerate() {
                    t.set(i, s.contains(w));
                }
                (*a, t)
            })
            .collect();
        (Model { frame, val }, old)
    }

    /// The generated submodel `w↑`, with the map new → old.
    pub fn cone(&self, w: usize) -> (Model, Vec<usize>) {
        let mut s = self.frame.up[w].clone();
        s.insert(w);
        self.restrict(&s)
    }

    pub fn to_json(&self) -> FrameJson {
        FrameJson::from_model(self)
    }
}

/// `model_check(M, w, φ)`.
pub fn model_check(m: &Model, w: usize, phi: &Formula) -> Result<bool> {
    if w >= m.len() {
        return Err(Error::Invalid(format!("point {w} out of range")));
    }
    m.holds(w, phi)
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointJson {
    pub id: usize,
    #[serde(default)]
    pub reflexive: bool,
}

/// The JSON form of a frame or model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameJson {
    pub points: Vec<PointJson>,
    #[serde(default)]
    pub order: Vec<(usize, usize)>,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub vars: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<usize>,
}

impl FrameJson {
    pub fn from_model(m: &Model) -> FrameJson {
        let mut params = BTreeMap::new();
        let mut vars = BTreeMap::new();
        for (a, s) in &m.val {
            let pts: Vec<usize> = s.ones().filter(|&w| w < m.len()).collect();
            if a.is_param() {
                params.insert(a.to_string(), pts);
            } else {
                vars.insert(a.to_string(), pts);
            }
        }
        FrameJson {
            points: (0..m.len())
                .map(|id| PointJson {
                    id,
                    reflexive: m.frame.is_reflexive(id),
                })
                .collect(),
            order: m.frame.strict_pairs(),
            params,
            vars,
            root: None,
        }
    }

    /// Validate and convert; point ids are mapped to positions in `points`.
    pub fn to_model(&self) -> Result<Model> {
        let pos: HashMap<usize, usize> = self.points.iter().enumerate().map(|(i, p)| (p.id, i)).collect();
        if pos.len() != self.points.len() {
            return Err(Error::InvalidFrame("duplicate point id".into()));
        }
        let lookup = |id: usize| {
            pos.get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidFrame(format!("unknown point id {id}")))
        };
        let mut refl: Vec<bool> = self.points.iter().map(|p| p.reflexive).collect();
        let mut pairs = Vec::new();
        for &(a, b) in &self.order {
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                if !refl[a] {
                    return Err(Error::InvalidFrame(format!(
                        "loop on irreflexive point {}",
                        self.points[a].id
                    )));
                }
                refl[a] = true;
            } else {
                pairs.push((a, b));
            }
        }
        let frame = FiniteFrame::new(refl, &pairs)?;
        let mut m = Model::new(frame);
        for (names, want_param) in [(&self.params, true), (&self.vars, false)] {
            for (name, pts) in names {
                let a = Atom::parse_name(name)
                    .filter(|a| a.is_param() == want_param)
                    .ok_or_else(|| Error::InvalidFrame(format!("bad atom name `{name}`")))?;
                let pts = pts.iter().map(|&p| lookup(p)).collect::<Result<Vec<_>>>()?;
                m.set(a, &pts);
            }
        }
        Ok(m)
    }
}

// ---------------------------------------------------------------------------
// Transformations

/// Frame constructions.
#[derive(Clone, Debug)]
pub enum Transform {
    GeneratedSubframe(Vec<usize>),
    DisjointSum(Vec<Model>),
    Reflexivization,
    Skeleton,
}

/// Apply a frame construction to a model; valuations are carried along
/// (for the skeleton a cluster gets an atom iff all its points have it).
pub fn transform(m: &Model, op: &Transform) -> Result<Model> {
    match op {
        Transform::GeneratedSubframe(pts) => {
            let mut s = FixedBitSet::with_capacity(m.len());
            for &w in pts {
                if w >= m.len() {
                    return Err(Error::Invalid(format!("point {w} out of range")));
                }
                s.insert(w);
            }
            if !m.frame.is_upset(&s) {
                return Err(Error::InvalidFrame(
                    "generated subframe requires an upward closed set".into(),
                ));
            }
            Ok(m.restrict(&s).0)
        }
        Transform::DisjointSum(others) => {
            let mut all = vec![m.clone()];
            all.extend(others.iter().cloned());
            Ok(disjoint_sum(&all))
        }
        Transform::Reflexivization => Ok(reflexivization(m)),
        Transform::Skeleton => skeleton(m),
    }
}

/// The disjoint sum of models; points are numbered consecutively.
pub fn disjoint_sum(models: &[Model]) -> Model {
    let n: usize = models.iter().map(|m| m.len()).sum();
    let mut refl = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    let mut val: BTreeMap<Atom, FixedBitSet> = BTreeMap::new();
    let mut off = 0;
    for m in models {
        for w in 0..m.len() {
            refl.push(m.frame.is_reflexive(w));
            let mut s = FixedBitSet::with_capacity(n);
            for v in m.frame.up[w].ones() {
                s.insert(v + off);
            }
            up.push(s);
        }
        for (a, s) in &m.val {
            let t = val.entry(*a).or_insert_with(|| FixedBitSet::with_capacity(n));
            for w in s.ones() {
                t.insert(w + off);
            }
        }
        off += m.len();
    }
    Model {
        frame: FiniteFrame::from_parts_unchecked(refl, up),
        val,
    }
}

/// Make every point reflexive.
pub fn reflexivization(m: &Model) -> Model {
    let mut r = m.clone();
    r.frame.reflexive = vec![true; m.len()];
    r
}

/// The poset of clusters of a reflexive model.
pub fn skeleton(m: &Model) -> Result<Model> {
    if m.frame.reflexive.iter().any(|r| !r) {
        return Err(Error::InvalidFrame("skeleton requires a reflexive frame".into()));
    }
    let cl = m.frame.clusters();
    let k = cl.members.len();
    let frame = FiniteFrame::from_parts_unchecked(vec![true; k], cl.above.clone());
    let val = m
        .val
        .iter()
        .map(|(a, s)| {
            let mut t = FixedBitSet::with_capacity(k);
            for (c, mem) in cl.members.iter().enumerate() {
                t.set(c, mem.iter().all(|&w| s.contains(w)));
            }
            (*a, t)
        })
        .collect();
    Ok(Model { frame, val })
}

// ---------------------------------------------------------------------------
// Frame maps

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Pmorphism,
    Subreduction,
    WeakSubreduction,
}

/// A partial map between frames together with the properties it should have.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMap {
    pub map: Vec<Option<usize>>,
    pub kind: MapKind,
    #[serde(default)]
    pub cofinal: bool,
    #[serde(default)]
    pub onto: bool,
}

/// Check a map against the conditions of its declared kind.
///
/// Forward: `w R w'` implies `f(w) R f(w')`. Back: `f(w) R v` implies some
/// `w'` with `w R w'` (or `w' = w` for weak subreductions) and `f(w') = v`.
/// P-morphisms are total subreductions.
pub fn check_map(m: &FrameMap, source: &FiniteFrame, target: &FiniteFrame) -> Result<bool> {
    if m.map.len() != source.len() {
        return Err(Error::Invalid("map length differs from source size".into()));
    }
    if let Some(v) = m.map.iter().flatten().find(|&&v| v >= target.len()) {
        return Err(Error::Invalid(format!("map target {v} outside target frame")));
    }
    let dom: Vec<usize> = (0..source.len()).filter(|&w| m.map[w].is_some()).collect();
    if m.kind == MapKind::Pmorphism && dom.len() != source.len() {
        return Ok(false);
    }
    for &w in &dom {
        let fw = m.map[w].unwrap();
        for &w2 in &dom {
            if source.sees(w, w2) && !target.sees(fw, m.map[w2].unwrap()) {
                return Ok(false);
            }
        }
        for v in 0..target.len() {
            if !target.sees(fw, v) {
                continue;
            }
            let ok = dom.iter().any(|&w2| {
                m.map[w2] == Some(v) && (source.sees(w, w2) || (m.kind == MapKind::WeakSubreduction && w2 == w))
            });
            if !ok {
                return Ok(false);
            }
        }
    }
    if m.onto {
        let image: HashSet<usize> = m.map.iter().flatten().copied().collect();
        if image.len() != target.len() {
            return Ok(false);
        }
    }
    if m.cofinal {
        // dom↑ ⊆ dom↓
        for v in 0..source.len() {
            let in_up = dom.iter().any(|&w| source.le(w, v));
            let in_down = dom.iter().any(|&w| source.le(v, w));
            if in_up && !in_down {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Universal frames

/// Reflexivity of a point, cluster or extension condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Refl {
    I,
    R,
}

/// How a cluster of a universal frame arose: as the tight ⟨RI,E⟩-predecessor of X.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pedigree {
    /// The points strictly above the cluster.
    pub upset: Vec<usize>,
    pub ri: Refl,
    /// Parameter assignments of the cluster points, as bit masks over the parameter list.
    pub e: Vec<u64>,
    pub stage: usize,
}

/// A finite stage of the universal frame U_L(P).
#[derive(Clone, Debug)]
pub struct UniversalFrame {
    pub model: Model,
    pub params: Vec<Atom>,
    pub stage: usize,
    /// Pedigree of each cluster, in creation order.
    pub clusters: Vec<Pedigree>,
    /// Cluster of each point; cluster points are consecutive.
    pub cluster_of: Vec<usize>,
}

impl UniversalFrame {
    /// Points created at stages `≤ k`, which form a generated subframe.
    pub fn points_up_to_stage(&self, k: usize) -> Vec<usize> {
        (0..self.model.len())
            .filter(|&w| self.clusters[self.cluster_of[w]].stage <= k)
            .collect()
    }
}

/// Candidate upsets examined per point of budget when building a universal frame.
const ANTICHAINS_PER_POINT: usize = 16;

/// Candidate upsets always allowed per stage.
const MIN_ANTICHAINS: usize = 1 << 12;

/// Build the stage-`stages` approximation of U_L(P), where `params` lists
/// the parameter indices. At most `budget` points are created.
pub fn universal_frame(l: &LogicSpec, params: &[u32], stages: usize, budget: usize) -> Result<UniversalFrame> {
    let patoms: Vec<Atom> = params.iter().map(|&i| Atom::Param(i)).collect();
    let np = patoms.len();
    if np > 6 {
        return Err(Error::Budget(format!("{np} parameters")));
    }
    let assignments: Vec<u64> = (0..1u64 << np).collect();
    // Candidate E sets, nonempty, in a fixed order.
    let mut e_sets: Vec<Vec<u64>> = Vec::new();
    for mask in 1u64..(1u64 << assignments.len()) {
        e_sets.push(assignments.iter().copied().filter(|a| mask >> a & 1 == 1).collect());
    }
    e_sets.sort_by_key(|e| (e.len(), e.clone()));
    let max_branch = l.max_branching();
    let mut refl: Vec<bool> = Vec::new();
    let mut pvals: Vec<u64> = Vec::new();
    let mut up: Vec<Vec<usize>> = Vec::new();
    let mut cluster_of: Vec<usize> = Vec::new();
    let mut clusters: Vec<Pedigree> = Vec::new();
    let mut cl_members: Vec<Vec<usize>> = Vec::new();
    let mut cl_above: Vec<BTreeSet<usize>> = Vec::new();
    let mut cl_depth: Vec<usize> = Vec::new();
    let mut keys: HashSet<(Vec<usize>, Refl, Vec<u64>)> = HashSet::new();
    let mut completed = 0;
    for stage in 1..=stages {
        let c0 = clusters.len();
        // Antichains of existing clusters generate the candidate upsets X.
        // Clusters too deep to get a predecessor are skipped, and the
        // enumeration gives up once it outgrows the point budget.
        struct Antichains<'a> {
            c0: usize,
            cl_above: &'a [BTreeSet<usize>],
            usable: Vec<bool>,
            max: Option<usize>,
            limit: usize,
            out: Vec<Vec<usize>>,
        }
        impl Antichains<'_> {
            fn extend(&mut self, start: usize, cur: &mut Vec<usize>) -> bool {
                if self.max.is_some_and(|m| cur.len() >= m) {
                    return true;
                }
                for c in start..self.c0 {
                    if !self.usable[c]
                        || cur
                            .iter()
                            .any(|&d| self.cl_above[d].contains(&c) || self.cl_above[c].contains(&d))
                    {
                        continue;
                    }
                    cur.push(c);
                    self.out.push(cur.clone());
                    if self.out.len() > self.limit || !self.extend(c + 1, cur) {
                        return false;
                    }
                    cur.pop();
                }
                true
            }
        }
        let mut gen = Antichains {
            c0,
            cl_above: &cl_above,
            usable: (0..c0)
                .map(|c| l.depth_bound().is_none_or(|d| cl_depth[c] < d))
                .collect(),
            max: max_branch,
            limit: budget.saturating_mul(ANTICHAINS_PER_POINT).max(MIN_ANTICHAINS),
            out: vec![vec![]],
        };
        if !gen.extend(0, &mut Vec::new()) {
            return Err(Error::Budget(format!(
                "universal frame: more than {} candidate upsets at stage {stage}, budget {budget}",
                gen.limit
            )));
        }
        let antichains = gen.out;
        for ac in antichains {
            let mut xcl: BTreeSet<usize> = BTreeSet::new();
            for &c in &ac {
                xcl.insert(c);
                xcl.extend(cl_above[c].iter().copied());
            }
            let mut xpts: Vec<usize> = xcl.iter().flat_map(|&c| cl_members[c].iter().copied()).collect();
            xpts.sort_unstable();
            let depth = 1 + ac.iter().map(|&c| cl_depth[c]).max().unwrap_or(0);
            for ri in [Refl::I, Refl::R] {
                for e in &e_sets {
                    if ri == Refl::I && e.len() != 1 {
                        continue;
                    }
                    let key = (xpts.clone(), ri, e.clone());
                    if keys.contains(&key) {
                        continue;
                    }
                    if ac.len() == 1 {
                        let c = ac[0];
                        let cvals: BTreeSet<u64> = cl_members[c].iter().map(|&w| pvals[w]).collect();
                        if clusters[c].ri == Refl::R && e.iter().all(|x| cvals.contains(x)) {
                            continue;
                        }
                    }
                    let kind = match ri {
                        Refl::I => ClusterKind::Irr,
                        Refl::R => ClusterKind::Refl(Some(e.len() as u32)),
                    };
                    if !l.admits_cluster(kind, e.len(), ac.len(), depth) {
                        continue;
                    }
                    if refl.len() + e.len() > budget {
                        return Err(Error::Budget(format!(
                            "universal frame: {} points after {} complete stages, budget {budget}",
                            refl.len(),
                            completed
                        )));
                    }
                    let c = clusters.len();
                    let first = refl.len();
                    let members: Vec<usize> = (first..first + e.len()).collect();
                    for (i, &a) in e.iter().enumerate() {
                        refl.push(ri == Refl::R);
                        pvals.push(a);
                        let mut ups = xpts.clone();
                        ups.extend(members.iter().copied().filter(|&m| m != first + i));
                        up.push(ups);
                        cluster_of.push(c);
                    }
                    keys.insert(key);
                    clusters.push(Pedigree {
                        upset: xpts.clone(),
                        ri,
                        e: e.clone(),
                        stage,
                    });
                    cl_members.push(members);
                    cl_above.push(xcl.clone());
                    cl_depth.push(depth);
                }
            }
        }
        completed = stage;
    }
    let n = refl.len();
    let upsets = up
        .iter()
        .map(|u| {
            let mut s = FixedBitSet::with_capacity(n);
            for &v in u {
                s.insert(v);
            }
            s
        })
        .collect();
    let frame = FiniteFrame::from_parts_unchecked(refl, upsets);
    let mut model = Model::new(frame);
    for (i, a) in patoms.iter().enumerate() {
        let pts: Vec<usize> = (0..n).filter(|&w| pvals[w] >> i & 1 == 1).collect();
        model.set(*a, &pts);
    }
    // Filter points whose upset violates global constraints not visible locally.
    if l.needs_global_check() {
        let keep: Vec<usize> = (0..n)
            .filter(|&w| crate::logics::is_l_frame(l, &model.frame.cone(w).0))
            .collect();
        if keep.len() != n {
            return Err(Error::Unsupported(
                "universal frame for logics with width bounds or forbidden reducts".into(),
            ));
        }
    }
    Ok(UniversalFrame {
        model,
        params: patoms,
        stage: stages,
        clusters,
        cluster_of,
    })
}

/// The formula β_u characterizing a point of a parameter-free universal frame.
pub fn beta_formulas(uf: &UniversalFrame) -> Result<Vec<Formula>> {
    if !uf.params.is_empty() {
        return Err(Error::Invalid(
            "β formulas are defined for parameter-free universal frames".into(),
        ));
    }
    let f = &uf.model.frame;
    let mut beta: Vec<Option<Formula>> = vec![None; f.len()];
    // Points are created after everything they see.
    for u in 0..f.len() {
        let above: Vec<usize> = f.strictly_above(u).ones().collect();
        let dias = || above.iter().map(|&v| beta[v].clone().unwrap().dia());
        let alts = Formula::disj(above.iter().map(|&v| beta[v].clone().unwrap()));
        let b = if f.is_reflexive(u) {
            let all = Formula::conj(dias());
            all.dia().and(&alts.or(&all.dia()).boxed())
        } else {
            Formula::conj(dias().chain(std::iter::once(alts.boxed())))
        };
        beta[u] = Some(b);
    }
    Ok(beta.into_iter().map(|b| b.unwrap()).collect())
}

/// β_u for a single point.
pub fn beta_formula(uf: &UniversalFrame, u: usize) -> Result<Formula> {
    beta_formulas(uf)?
        .into_iter()
        .nth(u)
        .ok_or_else(|| Error::Invalid(format!("point {u} out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logics::preset;
    use crate::syntax::parse;

    #[test]
    fn analyze_examples() {
        let s = analyze(&FiniteFrame::chain(&[false; 3]));
        assert_eq!((s.depth, s.width, s.clusters.len()), (3, 1, 3));
        let s = analyze(&FiniteFrame::cluster(2, true));
        assert_eq!((s.depth, s.max_cluster), (1, 2));
        let s = analyze(&FiniteFrame::fork(2, false));
        assert_eq!(s.width, 2);
        assert!(s.rooted);
    }

    #[test]
    fn model_check_examples() {
        let m = Model::new(FiniteFrame::point(false));
        assert!(model_check(&m, 0, &parse("[]bot").unwrap()).unwrap());
        let m = Model::new(FiniteFrame::point(true));
        assert!(!model_check(&m, 0, &parse("[]bot").unwrap()).unwrap());
        let m = Model::new(FiniteFrame::chain(&[false, false])).with(Atom::Param(0), &[1]);
        assert!(model_check(&m, 0, &parse("<>p0 & ~p0").unwrap()).unwrap());
        assert!(matches!(
            model_check(&m, 0, &parse("x0").unwrap()),
            Err(Error::MissingAtom(_))
        ));
    }

    #[test]
    fn cycles_need_reflexive_points() {
        assert!(FiniteFrame::new(vec![false, false], &[(0, 1), (1, 0)]).is_err());
        let c = FiniteFrame::new(vec![true, true], &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(c.clusters().members, vec![vec![0, 1]]);
    }

    #[test]
    fn transform_examples() {
        let chain = Model::new(FiniteFrame::chain(&[false, false]));
        let r = transform(&chain, &Transform::Reflexivization).unwrap();
        assert_eq!(r.frame, FiniteFrame::chain(&[true, true]));
        let p = Model::new(FiniteFrame::point(false));
        let s = transform(&p, &Transform::DisjointSum(vec![p.clone()])).unwrap();
        let st = analyze(&s.frame);
        assert_eq!((st.points, st.rooted, st.final_clusters.len()), (2, false, 2));
        let c = Model::new(FiniteFrame::cluster(2, true));
        let k = transform(&c, &Transform::Skeleton).unwrap();
        assert_eq!(k.frame, FiniteFrame::point(true));
        assert!(transform(&chain, &Transform::Skeleton).is_err());
        assert!(transform(&chain, &Transform::GeneratedSubframe(vec![0])).is_err());
    }

    #[test]
    fn check_map_examples() {
        let f = FiniteFrame::fork(2, false);
        let id = |kind| FrameMap {
            map: (0..3).map(Some).collect(),
            kind,
            cofinal: false,
            onto: true,
        };
        assert!(check_map(&id(MapKind::Pmorphism), &f, &f).unwrap());
        let c = FiniteFrame::cluster(2, true);
        let collapse = FrameMap {
            map: vec![Some(0), Some(0)],
            kind: MapKind::Pmorphism,
            cofinal: false,
            onto: true,
        };
        assert!(check_map(&collapse, &c, &FiniteFrame::point(true)).unwrap());
        let w = FiniteFrame::chain(&[false, false]);
        let wr = FiniteFrame::chain(&[true, true]);
        let m = |kind| FrameMap {
            map: vec![Some(0), Some(1)],
            kind,
            cofinal: false,
            onto: false,
        };
        assert!(check_map(&m(MapKind::WeakSubreduction), &w, &wr).unwrap());
        assert!(!check_map(&m(MapKind::Subreduction), &w, &wr).unwrap());
    }

    #[test]
    fn universal_frame_census() {
        let k4 = preset("K4").unwrap();
        let u = universal_frame(&k4, &[], 1, 100).unwrap();
        assert_eq!(u.model.len(), 2);
        let u = universal_frame(&k4, &[0], 1, 100).unwrap();
        assert_eq!(u.model.len(), 6);
        assert_eq!(u.clusters.len(), 5);
        let gl = preset("GL").unwrap();
        let u = universal_frame(&gl, &[], 3, 1000).unwrap();
        assert!(u.model.frame.reflexivity().iter().all(|r| !r));
    }

    #[test]
    fn beta_of_leaves() {
        let k4 = preset("K4").unwrap();
        let u = universal_frame(&k4, &[], 1, 100).unwrap();
        let b = beta_formulas(&u).unwrap();
        let (irr, refl) = if u.model.frame.is_reflexive(0) { (1, 0) } else { (0, 1) };
        assert_eq!(b[irr].to_string(), "[]bot");
        assert_eq!(b[refl].to_string(), "<>top & [](bot | <>top)");
    }
}
