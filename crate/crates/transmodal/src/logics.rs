//! Logic descriptors: finite bases of extension conditions plus structural bounds.
//!
//! An extension condition ⟨C,m⟩ allows a root cluster of type C (an
//! irreflexive point, or a reflexive cluster of bounded or unbounded size)
//! with at most m immediate successor clusters. A cluster of a frame is
//! acceptable when its type and its number of immediate successors are
//! dominated by some condition of the base.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{check_map, FiniteFrame, FrameJson, FrameMap, MapKind};

/// Cluster part of an extension condition. `Refl(None)` is an unbounded reflexive cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClusterKind {
    Irr,
    Refl(Option<u32>),
}

impl ClusterKind {
    pub fn is_reflexive(self) -> bool {
        matches!(self, ClusterKind::Refl(_))
    }

    /// Maximal number of points (`None` when unbounded).
    pub fn max_size(self) -> Option<u32> {
        match self {
            ClusterKind::Irr => Some(1),
            ClusterKind::Refl(k) => k,
        }
    }
}

/// An extension condition ⟨C,m⟩; `branching: None` stands for ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtensionCondition {
    pub cluster: ClusterKind,
    pub branching: Option<u32>,
}

impl ExtensionCondition {
    pub const fn new(cluster: ClusterKind, branching: Option<u32>) -> Self {
        ExtensionCondition { cluster, branching }
    }

    /// Does this condition dominate a cluster of the given kind, size and successor count?
    pub fn dominates(&self, reflexive: bool, size: usize, successors: usize) -> bool {
        self.cluster.is_reflexive() == reflexive
            && self.cluster.max_size().is_none_or(|k| size <= k as usize)
            && self.branching.is_none_or(|m| successors <= m as usize)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub linear: bool,
    pub reflexive_only: bool,
    pub irreflexive_only: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub depth: Option<u32>,
    pub width: Option<u32>,
    pub cluster_size: Option<u32>,
}

/// A logic given by its base of extension conditions and structural bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicSpec {
    pub name: String,
    pub base: Vec<ExtensionCondition>,
    pub flags: Flags,
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabular_forbidden_reducts: Option<Vec<FrameJson>>,
}

const INF: Option<u32> = None;
const IRR: ClusterKind = ClusterKind::Irr;
const REFL: ClusterKind = ClusterKind::Refl(None);
const REFL1: ClusterKind = ClusterKind::Refl(Some(1));

fn cond(c: ClusterKind, m: Option<u32>) -> ExtensionCondition {
    ExtensionCondition::new(c, m)
}

/// Names of the preset logics.
pub const PRESETS: &[&str] = &[
    "K4", "S4", "GL", "K4Grz", "S4Grz", "S4.3", "K4.3", "GL.3", "S4Grz.3", "S5", "Verum",
];

impl LogicSpec {
    /// Build a spec from a base, deriving the flags.
    pub fn from_base(name: &str, base: Vec<ExtensionCondition>, bounds: Bounds) -> LogicSpec {
        let mut l = LogicSpec {
            name: name.to_string(),
            base,
            flags: Flags::default(),
            bounds,
            tabular_forbidden_reducts: None,
        };
        l.normalize();
        l
    }

    fn normalize(&mut self) {
        self.base.sort();
        self.base.dedup();
        self.flags = Flags {
            linear: self.base.iter().all(|c| c.branching.is_some_and(|m| m <= 1)),
            reflexive_only: self.base.iter().all(|c| c.cluster.is_reflexive()),
            irreflexive_only: self.base.iter().all(|c| !c.cluster.is_reflexive()),
        };
        if self.base.iter().all(|c| c.branching == Some(0)) && self.bounds.depth.is_none() {
            self.bounds.depth = Some(1);
        }
    }

    /// The base extended by ⟨C,0⟩ for every ⟨C,m⟩: a cluster admitted with
    /// successors is also admitted as a final cluster.
    pub fn effective_base(&self) -> Vec<ExtensionCondition> {
        let mut b = self.base.clone();
        for c in &self.base {
            b.push(cond(c.cluster, Some(0)));
        }
        b.sort();
        b.dedup();
        b
    }

    /// Conditions of the effective base with branching exactly `m`.
    pub fn base_with_branching(&self, m: u32) -> Vec<ExtensionCondition> {
        self.effective_base()
            .into_iter()
            .filter(|c| c.branching == Some(m))
            .collect()
    }

    /// Largest finite branching, or `None` when some condition is unbounded.
    pub fn max_branching(&self) -> Option<usize> {
        self.base
            .iter()
            .map(|c| c.branching.map(|m| m as usize))
            .try_fold(0, |acc, m| m.map(|m| acc.max(m)))
    }

    /// Largest reflexive cluster size allowed (`None` when unbounded, `Some(0)` when none).
    pub fn cluster_cap(&self) -> Option<usize> {
        let mut cap = Some(0usize);
        for c in &self.base {
            if let ClusterKind::Refl(k) = c.cluster {
                cap = match (cap, k) {
                    (None, _) | (_, None) => None,
                    (Some(a), Some(b)) => Some(a.max(b as usize)),
                };
            }
        }
        match (cap, self.bounds.cluster_size) {
            (None, Some(c)) => Some(c as usize),
            (Some(a), Some(c)) => Some(a.min(c as usize)),
            (cap, None) => cap,
        }
    }

    pub fn allows_irreflexive(&self) -> bool {
        self.base.iter().any(|c| !c.cluster.is_reflexive())
    }

    pub fn allows_reflexive(&self) -> bool {
        self.base.iter().any(|c| c.cluster.is_reflexive())
    }

    pub fn depth_bound(&self) -> Option<usize> {
        self.bounds.depth.map(|d| d as usize)
    }

    /// Linear and of bounded depth.
    pub fn is_linear_bounded_depth(&self) -> bool {
        self.flags.linear && self.bounds.depth.is_some()
    }

    /// Bounded depth, width and cluster size.
    pub fn is_tabular(&self) -> bool {
        self.bounds.depth.is_some()
            && self.cluster_cap().is_some()
            && (self.max_branching().is_some() || self.bounds.width.is_some())
    }

    /// Whether frame recognition needs more than the per-cluster check.
    pub fn needs_global_check(&self) -> bool {
        self.bounds.width.is_some() || self.tabular_forbidden_reducts.is_some()
    }

    /// Can a root cluster of this kind and size, with `successors` immediate
    /// successor clusters and overall depth `depth`, occur in an L-frame
    /// (given that everything above it is fine)?
    pub fn admits_cluster(&self, kind: ClusterKind, size: usize, successors: usize, depth: usize) -> bool {
        let refl = kind.is_reflexive();
        if self.bounds.depth.is_some_and(|d| depth > d as usize) {
            return false;
        }
        if refl && self.bounds.cluster_size.is_some_and(|c| size > c as usize) {
            return false;
        }
        self.base.iter().any(|c| c.dominates(refl, size, successors))
    }

    /// Apply a modifier: `BD<d>`, `BB<k>` or `CL<c>`.
    pub fn with_modifier(mut self, modifier: &str) -> Result<LogicSpec> {
        let num = |s: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::UnknownLogic(format!("bad modifier `{modifier}`")))
        };
        if let Some(d) = modifier.strip_prefix("BD") {
            let d = num(d)?;
            if d == 0 {
                return Err(Error::UnknownLogic("BD0 admits no frames".into()));
            }
            self.bounds.depth = Some(self.bounds.depth.map_or(d, |e| e.min(d)));
        } else if let Some(k) = modifier.strip_prefix("BB") {
            let k = num(k)?;
            let mut base = Vec::new();
            for c in &self.base {
                match c.branching {
                    Some(m) if m <= k => base.push(*c),
                    _ => {
                        base.push(cond(c.cluster, Some(k)));
                        base.push(cond(c.cluster, Some(0)));
                    }
                }
            }
            self.base = base;
        } else if let Some(c) = modifier.strip_prefix("CL") {
            let c = num(c)?;
            if c == 0 {
                return Err(Error::UnknownLogic("CL0 admits no reflexive clusters".into()));
            }
            for e in self.base.iter_mut() {
                if let ClusterKind::Refl(k) = e.cluster {
                    e.cluster = ClusterKind::Refl(Some(k.map_or(c, |k| k.min(c))));
                }
            }
            self.bounds.cluster_size = Some(c);
        } else {
            return Err(Error::UnknownLogic(format!("unknown modifier `{modifier}`")));
        }
        self.name = format!("{}+{}", self.name, modifier);
        self.normalize();
        Ok(self)
    }
}

/// Look up a preset, optionally followed by `+BD<d>`, `+BB<k>`, `+CL<c>` modifiers.
pub fn preset(name: &str) -> Result<LogicSpec> {
    let mut parts = name.split('+');
    let head = parts.next().unwrap_or_default();
    let none = Bounds::default();
    let base = match head {
        "K4" => vec![cond(IRR, INF), cond(REFL, INF)],
        "S4" => vec![cond(REFL, INF)],
        "GL" => vec![cond(IRR, INF)],
        "S4Grz" => vec![cond(REFL1, INF)],
        "K4Grz" => vec![cond(IRR, INF), cond(REFL1, INF)],
        "S4.3" => vec![cond(REFL, Some(1)), cond(REFL, Some(0))],
        "GL.3" => vec![cond(IRR, Some(1)), cond(IRR, Some(0))],
        "S4Grz.3" => vec![cond(REFL1, Some(1)), cond(REFL1, Some(0))],
        "K4.3" => vec![
            cond(IRR, Some(1)),
            cond(IRR, Some(0)),
            cond(REFL, Some(1)),
            cond(REFL, Some(0)),
        ],
        "S5" => vec![cond(REFL, Some(0))],
        "Verum" => vec![cond(IRR, Some(0))],
        _ => return Err(Error::UnknownLogic(name.to_string())),
    };
    let mut l = LogicSpec::from_base(head, base, none);
    for m in parts {
        l = l.with_modifier(m)?;
    }
    Ok(l)
}

/// Is `f` a frame of the logic?
pub fn is_l_frame(l: &LogicSpec, f: &FiniteFrame) -> bool {
    let cl = f.clusters();
    for (c, members) in cl.members.iter().enumerate() {
        let refl = cl.reflexive[c];
        if !l
            .base
            .iter()
            .any(|e| e.dominates(refl, members.len(), cl.immediate[c].len()))
        {
            return false;
        }
        if refl && l.bounds.cluster_size.is_some_and(|k| members.len() > k as usize) {
            return false;
        }
    }
    if l.bounds.depth.is_some_and(|d| f.depth() > d as usize) {
        return false;
    }
    if l.bounds.width.is_some_and(|w| f.width() > w as usize) {
        return false;
    }
    if let Some(reducts) = &l.tabular_forbidden_reducts {
        for r in reducts {
            let Ok(rm) = r.to_model() else { return false };
            for w in 0..f.len() {
                if pmorphs_onto(&f.cone(w).0, &rm.frame) {
                    return false;
                }
            }
        }
    }
    true
}

/// Is there a p-morphism from `src` onto `dst`? Exhaustive backtracking.
pub fn pmorphs_onto(src: &FiniteFrame, dst: &FiniteFrame) -> bool {
    if dst.len() > src.len() {
        return false;
    }
    let mut map = vec![None; src.len()];
    fn go(i: usize, map: &mut Vec<Option<usize>>, src: &FiniteFrame, dst: &FiniteFrame) -> bool {
        if i == src.len() {
            let m = FrameMap {
                map: map.clone(),
                kind: MapKind::Pmorphism,
                cofinal: false,
                onto: true,
            };
            return check_map(&m, src, dst).unwrap_or(false);
        }
        for v in 0..dst.len() {
            // Forward condition against already mapped points prunes early.
            let consistent = (0..i).all(|j| {
                let fj = map[j].unwrap();
                (!src.sees(i, j) || dst.sees(v, fj))
                    && (!src.sees(j, i) || dst.sees(fj, v))
                    && (!src.sees(i, i) || dst.sees(v, v))
            });
            if !consistent {
                continue;
            }
            map[i] = Some(v);
            if go(i + 1, map, src, dst) {
                return true;
            }
            map[i] = None;
        }
        false
    }
    go(0, &mut map, src, dst)
}
