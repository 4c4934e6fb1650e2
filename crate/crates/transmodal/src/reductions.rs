//! Generators of hard unification and admissibility instances.
//!
//! Each generator turns a source sentence into a formula `ξ` (for the
//! admissibility family, a rule `ξ / ζ`) such that the sentence is true
//! exactly when `ξ` is unifiable (the rule inadmissible) in the logics the
//! construction targets:
//!
//! | family     | source                      | target logics                               |
//! |------------|-----------------------------|---------------------------------------------|
//! | `nexp`     | `∃X ∀t⃗ φ`                  | nonlinear logics                            |
//! | `conexp`   | `∀Y ∃t⃗ φ`                  | logics of unbounded cluster size            |
//! | `sig2exp`  | `∃X ∀Y ∃t⃗ φ`               | logics with frames `(R + n-cluster)` below a root |
//! | `qbf`      | `∀a⃗₀∃b⃗₀…∀a⃗_{d-1}∃b⃗_{d-1} φ` | logics of depth at least `d`               |
//! | `psp1par`  | QBF with one-bit blocks     | logics with long irreflexive chains         |
//! | `nexp1par` | `∃X ∀t⃗ φ`, one parameter   | logics cofinally subframe-universal for trees |
//! | `nexp2par` | `∃X ∀t⃗ φ`, two parameters  | logics subframe-universal for trees         |
//! | `nexp0adm` | `∃X ∀t⃗ φ`, no parameters   | logics with enough depth-3 trees (admissibility) |
//!
//! Here `X, Y ⊆ 𝒫(n)` and `t_α ⊆ n`. Matrices are Boolean formulas written
//! with the usual connectives over the atoms `t<α>.<i>` (`i ∈ t_α`),
//! `X.t<α>` (`t_α ∈ X`) and `Y.t<α>` (`t_α ∈ Y`); QBF matrices use `a<i>`
//! and `b<i>` for one-bit blocks, or `a<i>.<j>` and `b<i>.<j>` in general.
//!
//! All generators are pure and deterministic.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::admissibility::Rule;
use crate::error::{Error, Result};
use crate::syntax::{apply, assignment_formula_mask, parse_with, Atom, Formula, Node, Substitution};
use crate::translations::relativize_inner;

/// Largest number of matrix evaluations spent deciding a source sentence.
pub const TRUTH_BUDGET: u64 = 1 << 26;

/// Largest number of formulas built by [`gen_beta_family`].
pub const BETA_BUDGET: u64 = 100_000;

// ---------------------------------------------------------------------------
// Source sentences

/// Quantifier pattern of a third-order sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// `∃X ∀t⃗ φ`.
    Sigma2,
    /// `∀Y ∃t⃗ φ`.
    Pi2,
    /// `∃X ∀Y ∃t⃗ φ`.
    Sigma3,
}

/// An atom of a third-order matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetAtom {
    /// `i ∈ t_α`.
    Elem { alpha: usize, i: usize },
    /// `t_α ∈ X`.
    InX(usize),
    /// `t_α ∈ Y`.
    InY(usize),
}

/// A sentence `Q X ⊆ 𝒫(n) … Q t_0, …, t_{m-1} ⊆ n φ` with `n` in unary.
///
/// The matrix is stored as a modality-free formula whose variables encode
/// [`SetAtom`]s: `i ∈ t_α` is `x_{αn+i}`, `t_α ∈ X` is `x_{nm+α}` and
/// `t_α ∈ Y` is `x_{nm+m+α}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SentenceText", into = "SentenceText")]
pub struct ThirdOrderSentence {
    pub n: usize,
    pub m: usize,
    pub pattern: Pattern,
    matrix: Formula,
}

#[derive(Clone, Serialize, Deserialize)]
struct SentenceText {
    n: usize,
    m: usize,
    pattern: Pattern,
    matrix: String,
}

impl TryFrom<SentenceText> for ThirdOrderSentence {
    type Error = Error;

    fn try_from(t: SentenceText) -> Result<Self> {
        ThirdOrderSentence::parse(t.n, t.m, t.pattern, &t.matrix)
    }
}

impl From<ThirdOrderSentence> for SentenceText {
    fn from(s: ThirdOrderSentence) -> Self {
        SentenceText {
            n: s.n,
            m: s.m,
            pattern: s.pattern,
            matrix: s.matrix_text(),
        }
    }
}

fn check_modality_free(f: &Formula) -> Result<()> {
    if f.is_modality_free() && f.params().is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("matrix must be a Boolean formula: {f}")))
    }
}

impl ThirdOrderSentence {
    /// Parse a matrix over the atoms `t<α>.<i>`, `X.t<α>` and `Y.t<α>`.
    pub fn parse(n: usize, m: usize, pattern: Pattern, matrix: &str) -> Result<ThirdOrderSentence> {
        let resolve = |w: &str| -> Option<Atom> {
            let atom = if let Some(rest) = w.strip_prefix("X.t") {
                SetAtom::InX(rest.parse().ok()?)
            } else if let Some(rest) = w.strip_prefix("Y.t") {
                SetAtom::InY(rest.parse().ok()?)
            } else {
                let (a, i) = w.strip_prefix('t')?.split_once('.')?;
                SetAtom::Elem {
                    alpha: a.parse().ok()?,
                    i: i.parse().ok()?,
                }
            };
            Self::encode(n, m, pattern, atom)
        };
        let matrix = parse_with(matrix, &resolve)?;
        Ok(ThirdOrderSentence { n, m, pattern, matrix })
    }

    /// Build from a matrix over encoded variables (see the type documentation).
    pub fn new(n: usize, m: usize, pattern: Pattern, matrix: Formula) -> Result<ThirdOrderSentence> {
        check_modality_free(&matrix)?;
        let s = ThirdOrderSentence { n, m, pattern, matrix };
        for v in s.matrix.vars() {
            s.decode(v)
                .ok_or_else(|| Error::Invalid(format!("matrix variable x{v} out of range")))?;
        }
        Ok(s)
    }

    fn encode(n: usize, m: usize, pattern: Pattern, a: SetAtom) -> Option<Atom> {
        let v = match a {
            SetAtom::Elem { alpha, i } if alpha < m && i < n => alpha * n + i,
            SetAtom::InX(alpha) if alpha < m && pattern != Pattern::Pi2 => n * m + alpha,
            SetAtom::InY(alpha) if alpha < m && pattern != Pattern::Sigma2 => n * m + m + alpha,
            _ => return None,
        };
        Some(Atom::Var(v as u32))
    }

    fn decode(&self, v: u32) -> Option<SetAtom> {
        let (n, m, v) = (self.n, self.m, v as usize);
        let a = if v < n * m {
            SetAtom::Elem { alpha: v / n, i: v % n }
        } else if v < n * m + m {
            SetAtom::InX(v - n * m)
        } else if v < n * m + 2 * m {
            SetAtom::InY(v - n * m - m)
        } else {
            return None;
        };
        Self::encode(n, m, self.pattern, a).map(|_| a)
    }

    pub fn matrix(&self) -> &Formula {
        &self.matrix
    }

    pub fn matrix_text(&self) -> String {
        self.matrix.display_with(&|a| match self.decode(a.index()) {
            Some(SetAtom::Elem { alpha, i }) => format!("t{alpha}.{i}"),
            Some(SetAtom::InX(alpha)) => format!("X.t{alpha}"),
            Some(SetAtom::InY(alpha)) => format!("Y.t{alpha}"),
            None => a.to_string(),
        })
    }

    /// Replace each matrix atom by a formula.
    pub fn instantiate(&self, atom: &dyn Fn(SetAtom) -> Formula) -> Formula {
        let s = self
            .matrix
            .vars()
            .into_iter()
            .fold(Substitution::new(), |s, v| s.with(v, atom(self.decode(v).unwrap())));
        apply(&s, &self.matrix)
    }

    /// Size of the source: the matrix plus `n` and `m` in unary.
    pub fn size(&self) -> u64 {
        self.matrix.size() + (self.n + self.m) as u64
    }

    fn check_pattern(&self, p: Pattern) -> Result<()> {
        if self.pattern != p {
            return Err(Error::Invalid(format!(
                "expected a {p:?} sentence, got {:?}",
                self.pattern
            )));
        }
        Ok(())
    }

    /// The matrix under sets `X`, `Y` (bit masks over the `2^n` subsets of
    /// `n`) and `t⃗` (bit masks over `n`).
    pub fn matrix_holds(&self, x: u64, y: u64, ts: &[u64]) -> bool {
        eval_bool(&self.matrix, &|v| match self.decode(v) {
            Some(SetAtom::Elem { alpha, i }) => ts[alpha] >> i & 1 == 1,
            Some(SetAtom::InX(alpha)) => x >> ts[alpha] & 1 == 1,
            Some(SetAtom::InY(alpha)) => y >> ts[alpha] & 1 == 1,
            None => false,
        })
    }

    fn check_budget(&self) -> Result<()> {
        let sets = 1u64.checked_shl(1u32 << self.n.min(31)).filter(|_| self.n <= 5);
        let tuples = 1u64.checked_shl((self.n * self.m) as u32);
        let cost = match (sets, tuples) {
            (Some(s), Some(t)) => match self.pattern {
                Pattern::Sigma3 => s.checked_mul(s).and_then(|c| c.checked_mul(t)),
                _ => s.checked_mul(t),
            },
            _ => None,
        };
        match cost {
            Some(c) if c <= TRUTH_BUDGET => Ok(()),
            _ => Err(Error::Budget(format!(
                "deciding a sentence with n = {}, m = {}",
                self.n, self.m
            ))),
        }
    }

    fn all_tuples(&self, f: &mut dyn FnMut(&[u64]) -> bool) -> bool {
        let mut ts = vec![0u64; self.m];
        loop {
            if f(&ts) {
                return true;
            }
            let mut k = 0;
            loop {
                if k == self.m {
                    return false;
                }
                ts[k] += 1;
                if ts[k] < 1 << self.n {
                    break;
                }
                ts[k] = 0;
                k += 1;
            }
        }
    }

    fn sets(&self) -> impl Iterator<Item = u64> {
        let n = self.n;
        (0..1u64 << (1u64 << n)).chain(if n == 6 { vec![u64::MAX] } else { vec![] })
    }

    /// Whether `X` witnesses the outer existential quantifier (Σ2 and Σ3 sentences).
    pub fn is_witness(&self, x: u64) -> bool {
        match self.pattern {
            Pattern::Sigma2 => !self.all_tuples(&mut |ts| !self.matrix_holds(x, 0, ts)),
            Pattern::Sigma3 => self
                .sets()
                .all(|y| self.all_tuples(&mut |ts| self.matrix_holds(x, y, ts))),
            Pattern::Pi2 => false,
        }
    }

    /// The least witness `X`, or `None` if the sentence is false.
    pub fn least_witness(&self) -> Result<Option<u64>> {
        self.check_budget()?;
        Ok(self.sets().find(|&x| self.is_witness(x)))
    }

    /// Decide the sentence by brute force.
    pub fn is_true(&self) -> Result<bool> {
        self.check_budget()?;
        Ok(match self.pattern {
            Pattern::Sigma2 | Pattern::Sigma3 => self.sets().any(|x| self.is_witness(x)),
            Pattern::Pi2 => self
                .sets()
                .all(|y| self.all_tuples(&mut |ts| self.matrix_holds(0, y, ts))),
        })
    }
}

impl fmt::Display for ThirdOrderSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.pattern {
            Pattern::Sigma2 => "∃X ∀t",
            Pattern::Pi2 => "∀Y ∃t",
            Pattern::Sigma3 => "∃X ∀Y ∃t",
        };
        write!(f, "{prefix} (n = {}, m = {}): {}", self.n, self.m, self.matrix_text())
    }
}

/// Evaluate a modality-free formula.
fn eval_bool(f: &Formula, var: &dyn Fn(u32) -> bool) -> bool {
    match f.node() {
        Node::Bot => false,
        Node::Top => true,
        Node::Atom(Atom::Var(v)) => var(*v),
        Node::Atom(Atom::Param(_)) => false,
        Node::Not(a) => !eval_bool(a, var),
        Node::And(a, b) => eval_bool(a, var) && eval_bool(b, var),
        Node::Or(a, b) => eval_bool(a, var) || eval_bool(b, var),
        Node::Imp(a, b) => !eval_bool(a, var) || eval_bool(b, var),
        Node::Iff(a, b) => eval_bool(a, var) == eval_bool(b, var),
        Node::Box(_) | Node::Dia(_) => unreachable!("matrices are modality-free"),
    }
}

/// A quantified Boolean sentence `∀a⃗₀ ∃b⃗₀ … ∀a⃗_{d-1} ∃b⃗_{d-1} φ` with
/// blocks of `m` bits.
///
/// The matrix variable `x_{2mi+j}` is `a_{i,j}` and `x_{2mi+m+j}` is `b_{i,j}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "QbfText", into = "QbfText")]
pub struct Qbf {
    pub d: usize,
    pub m: usize,
    matrix: Formula,
}

#[derive(Clone, Serialize, Deserialize)]
struct QbfText {
    d: usize,
    m: usize,
    matrix: String,
}

impl TryFrom<QbfText> for Qbf {
    type Error = Error;

    fn try_from(t: QbfText) -> Result<Self> {
        Qbf::parse(t.d, t.m, &t.matrix)
    }
}

impl From<Qbf> for QbfText {
    fn from(q: Qbf) -> Self {
        QbfText {
            d: q.d,
            m: q.m,
            matrix: q.matrix_text(),
        }
    }
}

impl Qbf {
    /// Parse a matrix over `a<i>`, `b<i>` (bit 0 of block `i`) and `a<i>.<j>`, `b<i>.<j>`.
    pub fn parse(d: usize, m: usize, matrix: &str) -> Result<Qbf> {
        if d == 0 || m == 0 {
            return Err(Error::Invalid("a QBF needs d ≥ 1 and m ≥ 1".into()));
        }
        let resolve = |w: &str| -> Option<Atom> {
            let (exists, rest) = match w.as_bytes().first()? {
                b'a' => (false, &w[1..]),
                b'b' => (true, &w[1..]),
                _ => return None,
            };
            let (i, j) = match rest.split_once('.') {
                Some((i, j)) => (i.parse::<usize>().ok()?, j.parse::<usize>().ok()?),
                None => (rest.parse().ok()?, 0),
            };
            (i < d && j < m).then(|| Atom::Var((2 * m * i + if exists { m } else { 0 } + j) as u32))
        };
        let matrix = parse_with(matrix, &resolve)?;
        Ok(Qbf { d, m, matrix })
    }

    /// Build from a matrix over encoded variables (see the type documentation).
    pub fn new(d: usize, m: usize, matrix: Formula) -> Result<Qbf> {
        if d == 0 || m == 0 {
            return Err(Error::Invalid("a QBF needs d ≥ 1 and m ≥ 1".into()));
        }
        check_modality_free(&matrix)?;
        if matrix.vars().into_iter().any(|v| v as usize >= 2 * d * m) {
            return Err(Error::Invalid("matrix variable out of range".into()));
        }
        Ok(Qbf { d, m, matrix })
    }

    pub fn matrix(&self) -> &Formula {
        &self.matrix
    }

    /// `(exists, block, bit)` of a matrix variable.
    fn decode(&self, v: u32) -> (bool, usize, usize) {
        let v = v as usize;
        let (i, r) = (v / (2 * self.m), v % (2 * self.m));
        (r >= self.m, i, r % self.m)
    }

    pub fn matrix_text(&self) -> String {
        self.matrix.display_with(&|a| {
            let (e, i, j) = self.decode(a.index());
            let c = if e { 'b' } else { 'a' };
            if self.m == 1 {
                format!("{c}{i}")
            } else {
                format!("{c}{i}.{j}")
            }
        })
    }

    /// Replace `a_{i,j}` and `b_{i,j}` by formulas.
    pub fn instantiate(&self, a: &dyn Fn(usize, usize) -> Formula, b: &dyn Fn(usize, usize) -> Formula) -> Formula {
        let s = self.matrix.vars().into_iter().fold(Substitution::new(), |s, v| {
            let (e, i, j) = self.decode(v);
            s.with(v, if e { b(i, j) } else { a(i, j) })
        });
        apply(&s, &self.matrix)
    }

    /// Size of the source: the matrix plus the `2dm` quantified bits.
    pub fn size(&self) -> u64 {
        self.matrix.size() + (2 * self.d * self.m) as u64
    }

    /// Decide the sentence by brute force.
    pub fn is_true(&self) -> Result<bool> {
        if 2 * self.d * self.m > 26 {
            return Err(Error::Budget(format!(
                "deciding a QBF with {} bits",
                2 * self.d * self.m
            )));
        }
        fn go(q: &Qbf, i: usize, bits: u64) -> bool {
            if i == q.d {
                return eval_bool(&q.matrix, &|v| bits >> v & 1 == 1);
            }
            let block = |a: u64, b: u64| bits | a << (2 * q.m * i) | b << (2 * q.m * i + q.m);
            (0..1u64 << q.m).all(|a| (0..1u64 << q.m).any(|b| go(q, i + 1, block(a, b))))
        }
        Ok(go(self, 0, 0))
    }
}

/// A random Boolean formula of about `size` symbols over `vars`.
fn random_boolean<R: rand::Rng>(rng: &mut R, size: u64, vars: u32) -> Formula {
    if size <= 1 {
        return Formula::var(rng.gen_range(0..vars));
    }
    if size == 2 || rng.gen_bool(0.2) {
        return random_boolean(rng, size - 1, vars).not();
    }
    let left = rng.gen_range(1..size - 1);
    let (a, b) = (
        random_boolean(rng, left, vars),
        random_boolean(rng, size - 1 - left, vars),
    );
    random_connective(rng, a, b)
}

fn random_connective<R: rand::Rng>(rng: &mut R, a: Formula, b: Formula) -> Formula {
    match rng.gen_range(0..4) {
        0 => a.and(&b),
        1 => a.or(&b),
        2 => a.imp(&b),
        _ => a.iff(&b),
    }
}

/// `count` random QBFs with `d` blocks of `m` bits, random matrices of at
/// most `max_size` symbols extended to mention every bit, and equally many true and false sentences (the
/// first of each parity in seed order).
pub fn random_qbfs(seed: u64, count: usize, d: usize, m: usize, max_size: u64) -> Result<Vec<Qbf>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vars = (2 * d * m) as u32;
    let (mut yes, mut no) = (Vec::new(), Vec::new());
    for _ in 0..1000 * count.max(1) {
        if yes.len() >= count.div_ceil(2) && no.len() >= count / 2 {
            break;
        }
        let size = rand::Rng::gen_range(&mut rng, 3..=max_size.max(3));
        let mut matrix = random_boolean(&mut rng, size, vars);
        let present = matrix.vars();
        for v in (0..vars).filter(|v| !present.contains(v)) {
            matrix = random_connective(&mut rng, matrix, Formula::var(v));
        }
        let q = Qbf::new(d, m, matrix)?;
        if q.is_true()? {
            yes.push(q);
        } else {
            no.push(q);
        }
    }
    yes.truncate(count.div_ceil(2));
    no.truncate(count / 2);
    if yes.len() + no.len() < count {
        return Err(Error::Budget("could not balance the random sentences".into()));
    }
    let mut out = Vec::with_capacity(count);
    for (a, b) in yes
        .into_iter()
        .zip(no.into_iter().map(Some).chain(std::iter::repeat(None)))
    {
        out.push(a);
        out.extend(b);
    }
    Ok(out)
}

/// `count` random sentences of the given shape with matrices of at most
/// `max_size` symbols, alternating true and false as far as possible.
pub fn random_sentences(
    seed: u64,
    count: usize,
    n: usize,
    m: usize,
    pattern: Pattern,
    max_size: u64,
) -> Result<Vec<ThirdOrderSentence>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vars = (n * m + if pattern == Pattern::Sigma3 { 2 * m } else { m }) as u32;
    let shift = |v: u32| {
        if pattern == Pattern::Pi2 && v >= (n * m) as u32 {
            v + m as u32
        } else {
            v
        }
    };
    let mut pools: [Vec<ThirdOrderSentence>; 2] = [Vec::new(), Vec::new()];
    for _ in 0..1000 * count.max(1) {
        if pools[1].len() >= count.div_ceil(2) && pools[0].len() >= count / 2 {
            break;
        }
        let size = rand::Rng::gen_range(&mut rng, 1..=max_size.max(1));
        let raw = random_boolean(&mut rng, size, vars);
        let sub = raw
            .vars()
            .into_iter()
            .fold(Substitution::new(), |sub, v| sub.with(v, Formula::var(shift(v))));
        let s = ThirdOrderSentence::new(n, m, pattern, apply(&sub, &raw))?;
        let truth = s.is_true()?;
        pools[truth as usize].push(s);
    }
    let [mut no, mut yes] = pools;
    yes.truncate(count.div_ceil(2));
    no.truncate(count / 2);
    let mut out = Vec::with_capacity(count);
    let mut no = no.into_iter();
    for a in yes {
        out.push(a);
        out.extend(no.next());
    }
    out.extend(no);
    Ok(out)
}

impl fmt::Display for Qbf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QBF (d = {}, m = {}): {}", self.d, self.m, self.matrix_text())
    }
}

// ---------------------------------------------------------------------------
// Instances

/// The generator families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nexp,
    Conexp,
    Sig2exp,
    Qbf,
    Psp1par,
    Nexp1par,
    Nexp2par,
    Nexp0adm,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Nexp,
        Family::Conexp,
        Family::Sig2exp,
        Family::Qbf,
        Family::Psp1par,
        Family::Nexp1par,
        Family::Nexp2par,
        Family::Nexp0adm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Nexp => "nexp",
            Family::Conexp => "conexp",
            Family::Sig2exp => "sig2exp",
            Family::Qbf => "qbf",
            Family::Psp1par => "psp1par",
            Family::Nexp1par => "nexp1par",
            Family::Nexp2par => "nexp2par",
            Family::Nexp0adm => "nexp0adm",
        }
    }

    /// Whether the source is a QBF (otherwise a third-order sentence).
    pub fn takes_qbf(self) -> bool {
        matches!(self, Family::Qbf | Family::Psp1par)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown family `{s}`")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A source sentence of either kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Sentence(ThirdOrderSentence),
    Qbf(Qbf),
}

/// Evidence for the unifiability of `ξ` when the source is true.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A unifier, checkable by derivability.
    Substitution { substitution: Substitution },
    /// How to define a unifying valuation on the universal frame.
    Recipe { description: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SizeStats {
    pub source_size: u64,
    /// Symbols of ξ written as a tree.
    pub xi_size: u64,
    /// Distinct subformulas of ξ (its size with shared subterms).
    pub xi_dag_size: usize,
    pub xi_modal_depth: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_size: Option<u64>,
    pub variables: usize,
    pub parameters: usize,
}

/// A generated instance.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionInstance {
    pub family: Family,
    pub source: Source,
    pub xi: Formula,
    /// Conclusion of the admissibility family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Formula>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// The role of each atom of `ξ` in the construction.
    pub legend: BTreeMap<String, String>,
    pub stats: SizeStats,
}

impl ReductionInstance {
    fn new(
        family: Family,
        source: Source,
        xi: Formula,
        zeta: Option<Formula>,
        witness: Option<Witness>,
        legend: Vec<(Atom, String)>,
    ) -> ReductionInstance {
        let source_size = match &source {
            Source::Sentence(s) => s.size(),
            Source::Qbf(q) => q.size(),
        };
        let mut atoms = xi.atoms();
        if let Some(z) = &zeta {
            atoms.extend(z.atoms());
        }
        let stats = SizeStats {
            source_size,
            xi_size: xi.size(),
            xi_dag_size: xi.distinct_subformulas(),
            xi_modal_depth: xi.modal_depth(),
            zeta_size: zeta.as_ref().map(|z| z.size()),
            variables: atoms.iter().filter(|a| a.is_var()).count(),
            parameters: atoms.iter().filter(|a| a.is_param()).count(),
        };
        ReductionInstance {
            family,
            source,
            xi,
            zeta,
            witness,
            legend: legend
                .into_iter()
                .filter(|(a, _)| atoms.contains(a))
                .map(|(a, s)| (a.to_string(), s))
                .collect(),
            stats,
        }
    }

    /// The rule `ξ / ζ` (or `ξ / ∅`: unifiability of ξ is its inadmissibility).
    pub fn rule(&self) -> Rule {
        Rule::new(vec![self.xi.clone()], self.zeta.iter().cloned().collect())
    }
}

/// Generate an instance of the given family.
pub fn generate(family: Family, source: &Source) -> Result<ReductionInstance> {
    let sentence = |s: &Source| match s {
        Source::Sentence(s) => Ok(s.clone()),
        Source::Qbf(_) => Err(Error::Invalid(format!("{family} takes a third-order sentence"))),
    };
    let qbf = |s: &Source| match s {
        Source::Qbf(q) => Ok(q.clone()),
        Source::Sentence(_) => Err(Error::Invalid(format!("{family} takes a QBF"))),
    };
    match family {
        Family::Nexp => gen_nexp(&sentence(source)?),
        Family::Conexp => gen_conexp(&sentence(source)?),
        Family::Sig2exp => gen_sig2exp(&sentence(source)?),
        Family::Qbf => gen_qbf(&qbf(source)?),
        Family::Psp1par => gen_psp_irr(&qbf(source)?),
        Family::Nexp1par => gen_nexp_1par(&sentence(source)?, false),
        Family::Nexp2par => gen_nexp_1par(&sentence(source)?, true),
        Family::Nexp0adm => gen_nexp_0par_adm(&sentence(source)?),
    }
}

fn p(i: usize) -> Formula {
    Formula::param(i as u32)
}

fn x(i: usize) -> Formula {
    Formula::var(i as u32)
}

/// `⊡a ∨ ⊡b`.
fn either(a: Formula, b: Formula) -> Formula {
    a.boxdot().or(&b.boxdot())
}

/// The least witness of a small sentence, if it is true; `None` when false
/// or too large to decide.
fn small_witness(s: &ThirdOrderSentence) -> Option<u64> {
    s.least_witness().ok().flatten()
}

fn subsets(n: usize, x: u64) -> impl Iterator<Item = u64> {
    (0..1u64 << n).filter(move |&t| x >> t & 1 == 1)
}

// ---------------------------------------------------------------------------
// Exponential hierarchy

/// Atom layout of [`gen_nexp`].
struct NexpAtoms {
    n: usize,
    m: usize,
}

impl NexpAtoms {
    fn p(&self, i: usize) -> Formula {
        p(i)
    }
    fn p_alpha(&self, alpha: usize, i: usize) -> Formula {
        p(self.n + alpha * self.n + i)
    }
    fn q(&self) -> Formula {
        p(self.n + self.n * self.m)
    }
    fn r(&self) -> Formula {
        p(self.n + self.n * self.m + 1)
    }
    fn x(&self) -> Formula {
        x(0)
    }
    fn x_alpha(&self, alpha: usize) -> Formula {
        x(1 + alpha)
    }
    fn params(&self) -> Vec<Atom> {
        (0..self.n).map(|i| Atom::Param(i as u32)).collect()
    }
    fn params_alpha(&self, alpha: usize) -> Vec<Atom> {
        (0..self.n)
            .map(|i| Atom::Param((self.n + alpha * self.n + i) as u32))
            .collect()
    }
    fn legend(&self) -> Vec<(Atom, String)> {
        let (n, m) = (self.n, self.m);
        let mut l = vec![(Atom::Var(0), "x".to_string())];
        for a in 0..m {
            l.push((Atom::Var(1 + a as u32), format!("x_{a}")));
        }
        for i in 0..n {
            l.push((Atom::Param(i as u32), format!("p_{i}")));
            for a in 0..m {
                l.push((Atom::Param((n + a * n + i) as u32), format!("p_{{{a},{i}}}")));
            }
        }
        l.push((Atom::Param((n + n * m) as u32), "q".into()));
        l.push((Atom::Param((n + n * m + 1) as u32), "r".into()));
        l
    }
}

/// The unifier of an `nexp` instance defined by a witness `X`:
/// `x ↦ ⋁_{t∈X} P^t` and `x_α ↦ ⋁_{t∈X} P_α^t`.
pub fn nexp_witness(s: &ThirdOrderSentence, witness: u64) -> Substitution {
    let at = NexpAtoms { n: s.n, m: s.m };
    let disj = |atoms: &[Atom]| Formula::disj(subsets(s.n, witness).map(|t| assignment_formula_mask(atoms, t)));
    let mut sub = Substitution::new().with(0, disj(&at.params()));
    for a in 0..s.m {
        sub = sub.with(1 + a as u32, disj(&at.params_alpha(a)));
    }
    sub
}

/// `∃X ∀t⃗ φ` to a formula in variables `x, x_α` and parameters
/// `p_i, p_{α,i}, q, r` that is unifiable in K4 if the sentence is true and
/// not unifiable in any nonlinear logic otherwise.
pub fn gen_nexp(s: &ThirdOrderSentence) -> Result<ReductionInstance> {
    s.check_pattern(Pattern::Sigma2)?;
    let at = NexpAtoms { n: s.n, m: s.m };
    let (q, r) = (at.q(), at.r());
    let mut parts = Vec::new();
    for a in 0..s.m {
        let premise = Formula::conj((0..s.n).map(|i| {
            either(
                q.imp(&at.p_alpha(a, i)).and(&r.imp(&at.p(i))),
                q.imp(&at.p_alpha(a, i).not()).and(&r.imp(&at.p(i).not())),
            )
        }));
        let concl = either(
            q.imp(&at.x_alpha(a)).and(&r.imp(&at.x())),
            q.imp(&at.x_alpha(a).not()).and(&r.imp(&at.x().not())),
        );
        parts.push(premise.imp(&concl));
    }
    parts.push(s.instantiate(&|a| match a {
        SetAtom::Elem { alpha, i } => at.p_alpha(alpha, i),
        SetAtom::InX(alpha) => at.x_alpha(alpha),
        SetAtom::InY(_) => unreachable!(),
    }));
    let witness = small_witness(s).map(|w| Witness::Substitution {
        substitution: nexp_witness(s, w),
    });
    Ok(ReductionInstance::new(
        Family::Nexp,
        Source::Sentence(s.clone()),
        Formula::conj(parts),
        None,
        witness,
        at.legend(),
    ))
}

/// `η(y⃗) = ◇(¬q ∧ ◇q ∧ ⋀_i (p_i ↔ y_i))`.
pub fn eta(q: &Formula, ps: &[Formula], ys: &[Formula]) -> Formula {
    let same = Formula::conj(ps.iter().zip(ys).map(|(p, y)| p.iff(y)));
    q.not().and(&q.dia()).and(&same).dia()
}

/// `γ = ⋀_{α,i} (⊡(⟐q → z_{α,i}) ∨ ⊡(⟐q → ¬z_{α,i}))`.
fn cluster_gamma(q: &Formula, zs: &[Formula]) -> Formula {
    let dq = q.diadot();
    Formula::conj(zs.iter().map(|z| either(dq.imp(z), dq.imp(&z.not()))))
}

/// `∀Y ∃t⃗ φ` to a formula in parameters `p_i, q` and variables `z_{α,i}`
/// that is unifiable in K4 if the sentence is true and not unifiable in
/// logics with clusters of more than `2^n` points otherwise.
pub fn gen_conexp(s: &ThirdOrderSentence) -> Result<ReductionInstance> {
    s.check_pattern(Pattern::Pi2)?;
    let (n, m) = (s.n, s.m);
    let ps: Vec<Formula> = (0..n).map(p).collect();
    let q = p(n);
    let z = |a: usize, i: usize| x(a * n + i);
    let zs: Vec<Formula> = (0..m).flat_map(|a| (0..n).map(move |i| z(a, i))).collect();
    let gamma = cluster_gamma(&q, &zs);
    let eq29 = q.dia().imp(&q.and(&gamma).dia());
    let eq30 = q.and(&gamma).imp(&s.instantiate(&|a| match a {
        SetAtom::Elem { alpha, i } => z(alpha, i),
        SetAtom::InY(alpha) => eta(&q, &ps, &(0..n).map(|i| z(alpha, i)).collect::<Vec<_>>()),
        SetAtom::InX(_) => unreachable!(),
    }));
    let mut legend: Vec<(Atom, String)> = (0..n).map(|i| (Atom::Param(i as u32), format!("p_{i}"))).collect();
    legend.push((Atom::Param(n as u32), "q".into()));
    for a in 0..m {
        for i in 0..n {
            legend.push((Atom::Var((a * n + i) as u32), format!("z_{{{a},{i}}}")));
        }
    }
    let witness = Witness::Recipe {
        description: "fix t⃗^Y making φ true for each Y; at u let Y(u) = {t : u ⊨ ◇(¬q ∧ ◇q ∧ P^t)} \
                      and make z_{α,i} true iff i ∈ t_α^{Y(u)}"
            .into(),
    };
    Ok(ReductionInstance::new(
        Family::Conexp,
        Source::Sentence(s.clone()),
        eq29.and(&eq30),
        None,
        Some(witness),
        legend,
    ))
}

/// `∃X ∀Y ∃t⃗ φ` to a formula in parameters `p_i, q, r` and variables
/// `x, x_α, z_{α,i}`, combining the `nexp` and `conexp` constructions.
pub fn gen_sig2exp(s: &ThirdOrderSentence) -> Result<ReductionInstance> {
    s.check_pattern(Pattern::Sigma3)?;
    let (n, m) = (s.n, s.m);
    let ps: Vec<Formula> = (0..n).map(p).collect();
    let (q, r) = (p(n), p(n + 1));
    let xv = x(0);
    let x_alpha = |a: usize| x(1 + a);
    let z = |a: usize, i: usize| x(1 + m + a * n + i);
    let zs: Vec<Formula> = (0..m).flat_map(|a| (0..n).map(move |i| z(a, i))).collect();
    let gamma = cluster_gamma(&q, &zs);
    let mut parts = vec![
        q.dia().imp(&q.and(&gamma).dia()),
        q.and(&gamma).imp(&s.instantiate(&|a| match a {
            SetAtom::Elem { alpha, i } => z(alpha, i),
            SetAtom::InX(alpha) => x_alpha(alpha),
            SetAtom::InY(alpha) => eta(&q, &ps, &(0..n).map(|i| z(alpha, i)).collect::<Vec<_>>()),
        })),
    ];
    for a in 0..m {
        let premise = Formula::conj((0..n).map(|i| {
            either(
                q.imp(&z(a, i)).and(&r.imp(&ps[i])),
                q.imp(&z(a, i).not()).and(&r.imp(&ps[i].not())),
            )
        }));
        let concl = either(
            q.imp(&x_alpha(a)).and(&r.imp(&xv)),
            q.imp(&x_alpha(a).not()).and(&r.imp(&xv.not())),
        );
        parts.push(premise.imp(&concl));
    }
    let mut legend: Vec<(Atom, String)> = (0..n).map(|i| (Atom::Param(i as u32), format!("p_{i}"))).collect();
    legend.push((Atom::Param(n as u32), "q".into()));
    legend.push((Atom::Param(n as u32 + 1), "r".into()));
    legend.push((Atom::Var(0), "x".into()));
    for a in 0..m {
        legend.push((Atom::Var(1 + a as u32), format!("x_{a}")));
        for i in 0..n {
            legend.push((Atom::Var((1 + m + a * n + i) as u32), format!("z_{{{a},{i}}}")));
        }
    }
    let witness = Witness::Recipe {
        description: "fix a witness X and t⃗^Y for each Y; at u let Y(u) = {t : u ⊨ ◇(¬q ∧ ◇q ∧ P^t)}; \
                      make x true iff the p-assignment of u is in X, x_α iff t_α^{Y(u)} ∈ X, \
                      and z_{α,i} iff i ∈ t_α^{Y(u)}"
            .into(),
    };
    Ok(ReductionInstance::new(
        Family::Sig2exp,
        Source::Sentence(s.clone()),
        Formula::conj(parts),
        None,
        Some(witness),
        legend,
    ))
}

// ---------------------------------------------------------------------------
// Polynomial space

/// The depth-detecting formulas over one parameter `q`.
#[derive(Clone, Debug)]
pub struct DepthFormulas {
    q: Formula,
}

impl DepthFormulas {
    pub fn new(q: Formula) -> DepthFormulas {
        DepthFormulas { q }
    }

    /// `δ_{0,e} = q^e`, `δ_{i+1,e} = q^e ∧ ◇δ_{i,1-e}`: a chain of `i+1`
    /// points alternating in `q` starts here, with `q^e` at the start.
    pub fn delta(&self, i: usize, e: bool) -> Formula {
        let mut f = self.q.signed(e ^ (i % 2 == 1));
        for k in 1..=i {
            let ek = e ^ ((i - k) % 2 == 1);
            f = self.q.signed(ek).and(&f.dia());
        }
        f
    }

    /// `θ_{i,e} = δ_{i,e} ∧ ¬δ_{i+1,e}`: the longest such chain has `i+1` points.
    pub fn theta_e(&self, i: usize, e: bool) -> Formula {
        self.delta(i, e).and(&self.delta(i + 1, e).not())
    }

    /// `θ_i = θ_{i, i mod 2}`: the top of the chain refutes `q`.
    pub fn theta(&self, i: usize) -> Formula {
        self.theta_e(i, i % 2 == 1)
    }
}

/// A QBF `∀a⃗₀ ∃b⃗₀ … ∀a⃗_{d-1} ∃b⃗_{d-1} φ` to a formula in parameters
/// `p_0, …, p_{m-1}, q` and variables `x_0, …, x_{m-1}` that is unifiable in
/// K4 if the QBF is true and not unifiable in logics of depth at least `d`
/// otherwise. Its size is `O(d²m + d|φ|)`.
pub fn gen_qbf(phi: &Qbf) -> Result<ReductionInstance> {
    let (d, m) = (phi.d, phi.m);
    let q = p(m);
    let th = DepthFormulas::new(q);
    let thetas: Vec<Formula> = (0..d).map(|i| th.theta(i)).collect();
    let fixed = |v: &dyn Fn(usize) -> Formula| {
        Formula::conj(
            (0..d)
                .flat_map(|i| (0..m).map(move |j| (i, j)))
                .map(|(i, j)| either(thetas[i].imp(&v(j)), thetas[i].imp(&v(j).not()))),
        )
    };
    let gamma = fixed(&p);
    let eq4 = gamma.imp(&fixed(&x));
    let eq5 = gamma
        .and(&thetas[d - 1])
        .imp(&phi.instantiate(&|i, j| thetas[i].and(&p(j)).diadot(), &|i, j| {
            thetas[i].and(&x(j)).diadot()
        }));
    let mut legend: Vec<(Atom, String)> = Vec::new();
    for j in 0..m {
        legend.push((Atom::Param(j as u32), format!("p_{j}")));
        legend.push((Atom::Var(j as u32), format!("x_{j}")));
    }
    legend.push((Atom::Param(m as u32), "q".into()));
    let witness = Witness::Recipe {
        description: "fix Skolem functions G_i for the ∃ blocks; at a point satisfying θ_i ∧ γ read a⃗_0…a⃗_i \
                      from the p-values of the θ-points above and make x⃗ equal to G_i(a⃗_0, …, a⃗_i)"
            .into(),
    };
    Ok(ReductionInstance::new(
        Family::Qbf,
        Source::Qbf(phi.clone()),
        eq4.and(&eq5),
        None,
        Some(witness),
        legend,
    ))
}

/// A QBF with one-bit blocks to a formula in the single parameter `q` and
/// the single variable `x`, unifiable in K4 if the QBF is true and not
/// unifiable in logics with irreflexive chains of `3d+1` points otherwise.
pub fn gen_psp_irr(phi: &Qbf) -> Result<ReductionInstance> {
    if phi.m != 1 {
        return Err(Error::Invalid(format!(
            "psp1par needs one-bit blocks, got m = {}",
            phi.m
        )));
    }
    let d = phi.d;
    let q = p(0);
    let xv = x(0);
    let th = DepthFormulas::new(q);
    let t: Vec<Formula> = (0..=2 * d).map(|i| th.theta(i)).collect();
    let pair = |i: usize| t[2 * i + 1].and(&t[2 * i + 1].dia()).dia();
    let gamma = Formula::conj((0..d).map(|i| {
        t[2 * i + 1]
            .imp(&t[2 * i + 1].not().boxed())
            .boxdot()
            .or(&t[2 * i + 2].imp(&pair(i)).boxdot())
    }));
    let eq19 = gamma.imp(&Formula::conj(
        (0..d).map(|i| either(t[2 * i + 2].imp(&xv), t[2 * i + 2].imp(&xv.not()))),
    ));
    let eq20 = gamma
        .and(&t[2 * d])
        .imp(&phi.instantiate(&|i, _| pair(i), &|i, _| t[2 * i + 2].and(&xv).diadot()));
    let witness = Witness::Recipe {
        description: "fix Skolem functions G_i; at a point satisfying θ_{2i+2} let a_k = 1 iff it satisfies \
                      ◇(θ_{2k+1} ∧ ◇θ_{2k+1}) and make x equal to G_i(a_0, …, a_i)"
            .into(),
    };
    Ok(ReductionInstance::new(
        Family::Psp1par,
        Source::Qbf(phi.clone()),
        eq19.and(&eq20),
        None,
        Some(witness),
        vec![(Atom::Param(0), "q".into()), (Atom::Var(0), "x".into())],
    ))
}

// ---------------------------------------------------------------------------
// Constant numbers of parameters

/// One level of the formula families `β^d_i`, `η^d_i`.
#[derive(Clone, Debug)]
pub struct BetaLevel {
    pub beta: Vec<Formula>,
    pub eta: Vec<Formula>,
    /// At even levels `d > 0`: the pair `{j, k}` (`j ≤ k`, indices of level
    /// `d - 2`) behind each index, in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
}

/// The number `n_d` of formulas at level `d`: `n_0 = 2`,
/// `n_{2d+1} = n_{2d}`, `n_{2d+2} = (n_{2d}+1 choose 2)`.
pub fn beta_count(d: usize) -> Option<u64> {
    let mut n: u64 = 2;
    for level in 1..=d {
        if level % 2 == 0 {
            n = n.checked_mul(n + 1)? / 2;
        }
    }
    Some(n)
}

/// The families `β^k_i`, `η^k_i` for `k ≤ d` over the parameter `p`.
///
/// `β^0_i = η^0_i = ⊡p^i`; odd levels add a `¬p` point below each formula
/// of the previous level, even levels a `p` point below each pair. As in
/// the underlying frame, `β^1_0` and `η^1_0` are identified with `β^0_0`
/// (they are equivalent in K4). For `j = k` the disjunctions and
/// conjunctions over `{j, k}` collapse to a single member.
pub fn gen_beta_family(d: usize, p: &Formula) -> Result<Vec<BetaLevel>> {
    let total: Option<u64> = (0..=d).try_fold(0u64, |acc, k| acc.checked_add(beta_count(k)?));
    if total.is_none_or(|t| t > BETA_BUDGET) {
        return Err(Error::Budget(format!("the β family up to level {d}")));
    }
    let not_p = p.not();
    let base = vec![not_p.boxdot(), p.boxdot()];
    let mut levels = vec![BetaLevel {
        beta: base.clone(),
        eta: base,
        pairs: Vec::new(),
    }];
    let up_guard = p.or(&not_p.boxed());
    for k in 1..=d {
        let level = if k % 2 == 1 {
            let prev = &levels[k - 1];
            let mut beta = Vec::new();
            let mut eta = Vec::new();
            for i in 0..prev.beta.len() {
                if k == 1 && i == 0 {
                    beta.push(prev.beta[0].clone());
                    eta.push(prev.eta[0].clone());
                    continue;
                }
                let e = up_guard.imp(&prev.eta[i]).boxdot();
                beta.push(e.and(&not_p).and(&prev.beta[i].diadot()));
                eta.push(e);
            }
            BetaLevel {
                beta,
                eta,
                pairs: Vec::new(),
            }
        } else {
            let (even, odd) = (&levels[k - 2], &levels[k - 1]);
            let n = even.beta.len();
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (j..n).map(move |k| (j, k))).collect();
            let mut beta = Vec::new();
            let mut eta = Vec::new();
            for &(j, kk) in &pairs {
                let (eta_jk, sees_jk) = if j == kk {
                    (even.eta[j].clone(), odd.beta[j].dia())
                } else {
                    (
                        even.eta[j].or(&even.eta[kk]),
                        odd.beta[j].dia().and(&odd.beta[kk].dia()),
                    )
                };
                let e = p
                    .imp(&eta_jk.or(&sees_jk))
                    .boxdot()
                    .and(&not_p.imp(&up_guard.imp(&eta_jk).boxdot()).boxdot());
                beta.push(e.and(p).and(&sees_jk));
                eta.push(e);
            }
            BetaLevel { beta, eta, pairs }
        };
        levels.push(level);
    }
    Ok(levels)
}

/// The formulas shared by the constant-parameter constructions: labels
/// `β_i`, and the encodings `θ` of a set and `θ_α` of the set `t_α`.
struct Labels {
    beta: Vec<Formula>,
    theta: Formula,
    theta_alpha: Vec<Formula>,
}

/// `ξ = (set encodings determine x) ∧ (the matrix holds of encoded sets)`.
fn labelled_xi(s: &ThirdOrderSentence, xv: &Formula, l: &Labels) -> Formula {
    let fixed = |th: &Formula| {
        Formula::conj((0..s.n).map(|i| {
            let db = l.beta[i].dia();
            th.imp(&db).boxed().or(&th.imp(&db.not()).boxed())
        }))
    };
    let eq40 = fixed(&l.theta).imp(&l.theta.imp(xv).boxed().or(&l.theta.imp(&xv.not()).boxed()));
    let premise = Formula::conj((0..s.m).map(|a| l.theta_alpha[a].dia().and(&fixed(&l.theta_alpha[a]))));
    let eq41 = premise.imp(&s.instantiate(&|atom| match atom {
        SetAtom::Elem { alpha, i } => l.theta_alpha[alpha].and(&l.beta[i].dia()).dia(),
        SetAtom::InX(alpha) => l.theta_alpha[alpha].and(xv).dia(),
        SetAtom::InY(_) => unreachable!(),
    }));
    eq40.and(&eq41)
}

/// `x ↦ ⋁_{t∈X} ⋀_{i<n} (◇β_i)^{[i∈t]}`.
fn labelled_witness(s: &ThirdOrderSentence, var: u32, beta: &[Formula], witness: u64) -> Substitution {
    let sees: Vec<Formula> = beta.iter().take(s.n).map(|b| b.dia()).collect();
    let f = Formula::disj(
        subsets(s.n, witness).map(|t| Formula::conj(sees.iter().enumerate().map(|(i, f)| f.signed(t >> i & 1 == 1)))),
    );
    Substitution::new().with(var, f)
}

/// The least even level `D` with `n_D ≥ k`.
pub fn beta_level_for(k: usize) -> usize {
    (0..)
        .step_by(2)
        .find(|&d| beta_count(d).is_none_or(|c| c >= k as u64))
        .unwrap()
}

/// `∃X ∀t⃗ φ` to a formula in the parameter `p` and the variable `x`, built
/// from the antichain `β^D_i` for the least even `D` with `n_D ≥ n+m+2`.
/// With `relativized`, a second parameter `q` relativizes the labels.
pub fn gen_nexp_1par(s: &ThirdOrderSentence, relativized: bool) -> Result<ReductionInstance> {
    s.check_pattern(Pattern::Sigma2)?;
    let (n, m) = (s.n, s.m);
    let pv = p(0);
    let d = beta_level_for(n + m + 2);
    let levels = gen_beta_family(d, &pv)?;
    let b = &levels[d].beta;
    let (gamma, delta) = (&b[n..n + m], &b[n + m]);
    let theta = pv.and(&delta.dia()).and(&delta.not());
    let theta_alpha: Vec<Formula> = (0..m)
        .map(|a| {
            pv.and(&delta.dia()).and(&gamma[a].dia()).and(&Formula::conj(
                (0..m).filter(|&a2| a2 != a).map(|a2| gamma[a2].dia().not()),
            ))
        })
        .collect();
    let mut labels = Labels {
        beta: b[..n].to_vec(),
        theta,
        theta_alpha,
    };
    let mut legend = vec![(Atom::Param(0), "p".to_string()), (Atom::Var(0), "x".to_string())];
    let family = if relativized {
        let q = Atom::Param(1);
        let qf = Formula::atom(q);
        let rel = |f: &Formula| qf.and(&relativize_inner(f, q));
        labels = Labels {
            beta: labels.beta.iter().map(rel).collect(),
            theta: rel(&labels.theta),
            theta_alpha: labels.theta_alpha.iter().map(rel).collect(),
        };
        legend.push((q, "q".into()));
        Family::Nexp2par
    } else {
        Family::Nexp1par
    };
    let xi = labelled_xi(s, &x(0), &labels);
    let witness = small_witness(s).map(|w| Witness::Substitution {
        substitution: labelled_witness(s, 0, &labels.beta, w),
    });
    Ok(ReductionInstance::new(
        family,
        Source::Sentence(s.clone()),
        xi,
        None,
        witness,
        legend,
    ))
}

/// `∃X ∀t⃗ φ` to a parameter-free rule `ξ / ζ` in variables `z_i`
/// (`i < n+m+4`) and `x`, admissible exactly when the sentence is false in
/// logics with enough depth-3 trees. The labels are `β_i = ⊡(z_i ∧ ⋀_{i'≠i} ¬z_{i'})`
/// and `ζ = ⋁_i □¬β_i`.
pub fn gen_nexp_0par_adm(s: &ThirdOrderSentence) -> Result<ReductionInstance> {
    s.check_pattern(Pattern::Sigma2)?;
    let (n, m) = (s.n, s.m);
    let k = n + m + 4;
    let z: Vec<Formula> = (0..k).map(x).collect();
    let xv = x(k);
    let beta: Vec<Formula> = (0..k)
        .map(|i| {
            z[i].and(&Formula::conj((0..k).filter(|&j| j != i).map(|j| z[j].not())))
                .boxdot()
        })
        .collect();
    let gamma = &beta[n..n + m];
    let delta = &beta[n + m..];
    let theta = delta[1]
        .dia()
        .and(&delta[2].dia())
        .and(&delta[3].dia())
        .and(&delta[0].dia().not());
    let theta_alpha: Vec<Formula> = (0..m)
        .map(|a| {
            theta.and(&gamma[a].dia()).and(&Formula::conj(
                (0..m).filter(|&a2| a2 != a).map(|a2| gamma[a2].dia().not()),
            ))
        })
        .collect();
    let labels = Labels {
        beta: beta[..n].to_vec(),
        theta,
        theta_alpha,
    };
    let xi = labelled_xi(s, &xv, &labels);
    let zeta = Formula::disj(beta.iter().map(|b| b.not().boxed()));
    let mut legend: Vec<(Atom, String)> = (0..k).map(|i| (Atom::Var(i as u32), format!("z_{i}"))).collect();
    legend.push((Atom::Var(k as u32), "x".into()));
    let witness = small_witness(s).map(|w| Witness::Substitution {
        substitution: labelled_witness(s, k as u32, &labels.beta, w),
    });
    Ok(ReductionInstance::new(
        Family::Nexp0adm,
        Source::Sentence(s.clone()),
        xi,
        Some(zeta),
        witness,
        legend,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivability::is_theorem;
    use crate::logics::preset;
    use crate::syntax::parse;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn sentences_parse_and_print() {
        let s = ThirdOrderSentence::parse(2, 1, Pattern::Sigma2, "t0.1 -> X.t0").unwrap();
        assert_eq!(s.matrix_text(), "t0.1 -> X.t0");
        assert!(ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, "Y.t0").is_err());
        assert!(ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, "t0.1").is_err());
        let json = serde_json::to_string(&s).unwrap();
        let back: ThirdOrderSentence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let q = Qbf::parse(2, 1, "a0 <-> b1").unwrap();
        assert_eq!(q.matrix_text(), "a0 <-> b1");
        let back: Qbf = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn sentence_truth() {
        let t = |p, m: &str| ThirdOrderSentence::parse(1, 1, p, m).unwrap().is_true().unwrap();
        assert!(t(Pattern::Sigma2, "X.t0"));
        assert!(!t(Pattern::Sigma2, "t0.0"));
        assert!(t(Pattern::Sigma2, "t0.0 <-> X.t0"));
        assert!(!t(Pattern::Pi2, "Y.t0"));
        assert!(t(Pattern::Pi2, "Y.t0 | ~Y.t0"));
        let q = |d, m: &str| Qbf::parse(d, 1, m).unwrap().is_true().unwrap();
        assert!(q(1, "a0 <-> b0"));
        assert!(!q(1, "b0 & ~b0"));
        assert!(!q(1, "a0"));
        assert!(q(2, "(a0 <-> b0) & (a1 <-> ~b1)"));
        assert!(!q(2, "b0 <-> a1"));
    }

    #[test]
    fn nexp_example() {
        let s = ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, "X.t0").unwrap();
        let inst = gen_nexp(&s).unwrap();
        assert_eq!(inst.xi.params().len(), 4);
        let k4 = preset("K4").unwrap();
        let Some(Witness::Substitution { substitution }) = &inst.witness else {
            panic!("true sentence without witness")
        };
        assert!(is_theorem(&k4, &apply(substitution, &inst.xi)).unwrap());
    }

    #[test]
    fn conexp_eta() {
        let e = eta(&f("p1"), &[f("p0")], &[f("x0")]);
        assert_eq!(e, f("<>(~p1 & <>p1 & (p0 <-> x0))"));
    }

    #[test]
    fn sig2exp_atoms() {
        let s = ThirdOrderSentence::parse(1, 1, Pattern::Sigma3, "t0.0 & X.t0 & Y.t0").unwrap();
        let inst = gen_sig2exp(&s).unwrap();
        assert_eq!(inst.stats.parameters, 3);
        assert_eq!(inst.stats.variables, 3);
    }

    #[test]
    fn depth_formulas() {
        let th = DepthFormulas::new(f("p0"));
        assert_eq!(th.theta(0), f("~p0 & ~(~p0 & <>p0)"));
        assert_eq!(th.delta(1, true), f("p0 & <>~p0"));
        let k4 = preset("K4").unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(is_theorem(&k4, &th.theta(i).imp(&th.theta(j).not())).unwrap());
                }
                if i > j {
                    assert!(is_theorem(&k4, &th.theta(i).imp(&th.theta(j).dia())).unwrap());
                }
            }
        }
    }

    #[test]
    fn psp_irr_example() {
        let q = Qbf::parse(1, 1, "a0 <-> b0").unwrap();
        let inst = gen_psp_irr(&q).unwrap();
        let th = DepthFormulas::new(f("p0"));
        let (t1, t2) = (th.theta(1), th.theta(2));
        let gamma = t1
            .imp(&t1.not().boxed())
            .boxdot()
            .or(&t2.imp(&t1.and(&t1.dia()).dia()).boxdot());
        let Node::And(eq19, _) = inst.xi.node() else { panic!() };
        let Node::Imp(g, _) = eq19.node() else { panic!() };
        assert_eq!(*g, gamma);
        assert_eq!(inst.xi.params().len(), 1);
        assert_eq!(inst.xi.vars().len(), 1);
        assert!(gen_psp_irr(&Qbf::parse(1, 2, "a0").unwrap()).is_err());
    }

    #[test]
    fn beta_family() {
        assert_eq!(
            (0..4).map(|d| beta_count(d).unwrap()).collect::<Vec<_>>(),
            vec![2, 2, 3, 3]
        );
        let p = f("p0");
        let levels = gen_beta_family(2, &p).unwrap();
        assert_eq!(levels[0].beta[1], f("[.]p0"));
        assert_eq!(levels[1].eta[1], f("[.](p0 | []~p0 -> [.]p0)"));
        assert_eq!(levels[2].pairs, vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(beta_level_for(3), 2);
        assert_eq!(beta_level_for(4), 4);
    }

    #[test]
    fn nexp_0par_labels() {
        let s = ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, "X.t0").unwrap();
        let inst = gen_nexp_0par_adm(&s).unwrap();
        assert_eq!(inst.stats.variables, 7);
        assert_eq!(inst.stats.parameters, 0);
        let s0 = ThirdOrderSentence::parse(1, 1, Pattern::Sigma2, "top").unwrap();
        let inst0 = gen_nexp_0par_adm(&s0).unwrap();
        fn disjuncts(f: &Formula, out: &mut Vec<Formula>) {
            match f.node() {
                Node::Or(a, b) => {
                    disjuncts(a, out);
                    disjuncts(b, out);
                }
                _ => out.push(f.clone()),
            }
        }
        let mut ds = Vec::new();
        disjuncts(inst0.zeta.as_ref().unwrap(), &mut ds);
        assert_eq!(ds.len(), 6);
        let k4 = preset("K4").unwrap();
        for (i, d) in ds.iter().enumerate() {
            let lit = |j: usize| {
                if i == j {
                    f(&format!("x{j}"))
                } else {
                    f(&format!("~x{j}"))
                }
            };
            let expected = Formula::conj((0..6).map(lit)).boxdot().not().boxed();
            assert!(is_theorem(&k4, &d.iff(&expected)).unwrap());
        }
    }
}
