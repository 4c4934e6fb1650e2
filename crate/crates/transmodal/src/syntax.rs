//! Formulas, parsing and printing, subformula contexts and substitutions.
//!
//! Atoms come in two disjoint namespaces: variables `x<n>` (subject to
//! substitution) and parameters `p<n>` (fixed by every substitution).
//! The derived connectives `[.]φ = φ & []φ` and `<.>φ = φ | <>φ` are expanded
//! when a formula is built; the printer folds the expansion back.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An atom: either a substitutable variable or a fixed parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Var(u32),
    Param(u32),
}

impl Atom {
    pub fn is_var(self) -> bool {
        matches!(self, Atom::Var(_))
    }

    pub fn is_param(self) -> bool {
        matches!(self, Atom::Param(_))
    }

    pub fn index(self) -> u32 {
        match self {
            Atom::Var(i) | Atom::Param(i) => i,
        }
    }

    /// Parse the textual name of an atom, `x<n>` or `p<n>`.
    pub fn parse_name(name: &str) -> Option<Atom> {
        let (kind, digits) = name.split_at(name.find(|c: char| c.is_ascii_digit())?);
        let index = digits.parse().ok()?;
        match kind {
            "x" => Some(Atom::Var(index)),
            "p" => Some(Atom::Param(index)),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(i) => write!(f, "x{i}"),
            Atom::Param(i) => write!(f, "p{i}"),
        }
    }
}

/// The top-level shape of a formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Bot,
    Top,
    Atom(Atom),
    Not(Formula),
    And(Formula, Formula),
    Or(Formula, Formula),
    Imp(Formula, Formula),
    Iff(Formula, Formula),
    Box(Formula),
    Dia(Formula),
}

#[derive(Debug)]
struct Inner {
    node: Node,
    hash: u64,
    size: u64,
    depth: u32,
}

/// An immutable, cheaply clonable modal formula.
///
/// Subterms are shared; equality and hashing are structural, with cached
/// hashes so that comparing large shared formulas stays cheap.
#[derive(Clone)]
pub struct Formula(Arc<Inner>);

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.0.size == other.0.size && self.0.node == other.0.node)
    }
}

impl Eq for Formula {}

impl Hash for Formula {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Formula {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Formula {
    /// A total structural order: by size, then by cached hash, then by shape.
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .size
            .cmp(&other.0.size)
            .then(self.0.hash.cmp(&other.0.hash))
            .then_with(|| self.to_string().cmp(&other.to_string()))
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

fn tag(node: &Node) -> u8 {
    match node {
        Node::Bot => 0,
        Node::Top => 1,
        Node::Atom(_) => 2,
        Node::Not(_) => 3,
        Node::And(..) => 4,
        Node::Or(..) => 5,
        Node::Imp(..) => 6,
        Node::Iff(..) => 7,
        Node::Box(_) => 8,
        Node::Dia(_) => 9,
    }
}

impl Formula {
    fn make(node: Node) -> Formula {
        let mut h = DefaultHasher::new();
        tag(&node).hash(&mut h);
        let (size, depth) = match &node {
            Node::Bot | Node::Top => (1, 0),
            Node::Atom(a) => {
                a.hash(&mut h);
                (1, 0)
            }
            Node::Not(a) => {
                h.write_u64(a.0.hash);
                (a.0.size.saturating_add(1), a.0.depth)
            }
            Node::Box(a) | Node::Dia(a) => {
                h.write_u64(a.0.hash);
                (a.0.size.saturating_add(1), a.0.depth + 1)
            }
            Node::And(a, b) | Node::Or(a, b) | Node::Imp(a, b) | Node::Iff(a, b) => {
                h.write_u64(a.0.hash);
                h.write_u64(b.0.hash);
                (
                    a.0.size.saturating_add(b.0.size).saturating_add(1),
                    a.0.depth.max(b.0.depth),
                )
            }
        };
        Formula(Arc::new(Inner {
            node,
            hash: h.finish(),
            size,
            depth,
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn bot() -> Formula {
        Formula::make(Node::Bot)
    }

    pub fn top() -> Formula {
        Formula::make(Node::Top)
    }

    pub fn atom(a: Atom) -> Formula {
        Formula::make(Node::Atom(a))
    }

    pub fn var(i: u32) -> Formula {
        Formula::atom(Atom::Var(i))
    }

    pub fn param(i: u32) -> Formula {
        Formula::atom(Atom::Param(i))
    }

    pub fn not(&self) -> Formula {
        Formula::make(Node::Not(self.clone()))
    }

    pub fn and(&self, other: &Formula) -> Formula {
        Formula::make(Node::And(self.clone(), other.clone()))
    }

    pub fn or(&self, other: &Formula) -> Formula {
        Formula::make(Node::Or(self.clone(), other.clone()))
    }

    pub fn imp(&self, other: &Formula) -> Formula {
        Formula::make(Node::Imp(self.clone(), other.clone()))
    }

    pub fn iff(&self, other: &Formula) -> Formula {
        Formula::make(Node::Iff(self.clone(), other.clone()))
    }

    pub fn boxed(&self) -> Formula {
        Formula::make(Node::Box(self.clone()))
    }

    pub fn dia(&self) -> Formula {
        Formula::make(Node::Dia(self.clone()))
    }

    /// `[.]φ`, expanded to `φ & []φ`.
    pub fn boxdot(&self) -> Formula {
        self.and(&self.boxed())
    }

    /// `<.>φ`, expanded to `φ | <>φ`.
    pub fn diadot(&self) -> Formula {
        self.or(&self.dia())
    }

    /// `φ` if `positive`, otherwise `¬φ`.
    pub fn signed(&self, positive: bool) -> Formula {
        if positive {
            self.clone()
        } else {
            self.not()
        }
    }

    /// Left-nested conjunction; `top` when empty.
    pub fn conj<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items.into_iter().reduce(|a, b| a.and(&b)).unwrap_or_else(Formula::top)
    }

    /// Left-nested disjunction; `bot` when empty.
    pub fn disj<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
        items.into_iter().reduce(|a, b| a.or(&b)).unwrap_or_else(Formula::bot)
    }

    /// Number of nodes of the formula tree (shared subterms counted at every occurrence).
    pub fn size(&self) -> u64 {
        self.0.size
    }

    /// Number of distinct subformulas: the size of the formula written as a
    /// circuit with shared subterms.
    pub fn distinct_subformulas(&self) -> usize {
        let mut seen_ptr = std::collections::HashSet::new();
        let mut distinct = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(f) = stack.pop() {
            if !seen_ptr.insert(Arc::as_ptr(&f.0) as usize) || !distinct.insert(f.clone()) {
                continue;
            }
            match f.node() {
                Node::Bot | Node::Top | Node::Atom(_) => {}
                Node::Not(a) | Node::Box(a) | Node::Dia(a) => stack.push(a.clone()),
                Node::And(a, b) | Node::Or(a, b) | Node::Imp(a, b) | Node::Iff(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        distinct.len()
    }

    /// Maximal nesting of modal operators.
    pub fn modal_depth(&self) -> u32 {
        self.0.depth
    }

    /// All atoms occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(f) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&f.0) as usize) {
                continue;
            }
            match f.node() {
                Node::Atom(a) => {
                    out.insert(*a);
                }
                Node::Bot | Node::Top => {}
                Node::Not(a) | Node::Box(a) | Node::Dia(a) => stack.push(a.clone()),
                Node::And(a, b) | Node::Or(a, b) | Node::Imp(a, b) | Node::Iff(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        self.atoms()
            .into_iter()
            .filter_map(|a| match a {
                Atom::Var(i) => Some(i),
                Atom::Param(_) => None,
            })
            .collect()
    }

    pub fn params(&self) -> BTreeSet<u32> {
        self.atoms()
            .into_iter()
            .filter_map(|a| match a {
                Atom::Param(i) => Some(i),
                Atom::Var(_) => None,
            })
            .collect()
    }

    /// True when no variable occurs (parameters are allowed).
    pub fn is_variable_free(&self) -> bool {
        self.atoms().iter().all(|a| a.is_param())
    }

    /// True when no modal operator occurs.
    pub fn is_modality_free(&self) -> bool {
        self.0.depth == 0
    }

    fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }
}

// ---------------------------------------------------------------------------
// Printing

const PREC_BICOND: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_UNARY: u8 = 4;

enum View<'a> {
    Atomic,
    Unary(&'static str, &'a Formula),
    Binary(&'static str, u8, &'a Formula, &'a Formula),
}

fn view(f: &Formula) -> View<'_> {
    match f.node() {
        Node::Bot | Node::Top | Node::Atom(_) => View::Atomic,
        Node::Not(a) => View::Unary("~", a),
        Node::Box(a) => View::Unary("[]", a),
        Node::Dia(a) => View::Unary("<>", a),
        Node::And(a, b) => match b.node() {
            Node::Box(c) if c == a => View::Unary("[.]", a),
            _ => View::Binary(" & ", PREC_AND, a, b),
        },
        Node::Or(a, b) => match b.node() {
            Node::Dia(c) if c == a => View::Unary("<.>", a),
            _ => View::Binary(" | ", PREC_OR, a, b),
        },
        Node::Imp(a, b) => View::Binary(" -> ", PREC_BICOND, a, b),
        Node::Iff(a, b) => View::Binary(" <-> ", PREC_BICOND, a, b),
    }
}

fn prec(f: &Formula) -> u8 {
    match view(f) {
        View::Atomic | View::Unary(..) => PREC_UNARY,
        View::Binary(_, p, _, _) => p,
    }
}

fn write_at(f: &Formula, min: u8, name: &dyn Fn(Atom) -> String, out: &mut String) {
    let parens = prec(f) < min;
    if parens {
        out.push('(');
    }
    match view(f) {
        View::Atomic => match f.node() {
            Node::Bot => out.push_str("bot"),
            Node::Top => out.push_str("top"),
            Node::Atom(a) => out.push_str(&name(*a)),
            _ => unreachable!(),
        },
        View::Unary(op, a) => {
            out.push_str(op);
            write_at(a, PREC_UNARY, name, out);
        }
        View::Binary(op, p, a, b) => {
            // ∧ and ∨ associate to the left, → and ↔ to the right.
            let (lmin, rmin) = if p == PREC_BICOND { (p + 1, p) } else { (p, p + 1) };
            write_at(a, lmin, name, out);
            out.push_str(op);
            write_at(b, rmin, name, out);
        }
    }
    if parens {
        out.push(')');
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&|a| a.to_string()))
    }
}

impl Formula {
    /// Print with custom atom names; the inverse of [`parse_with`].
    pub fn display_with(&self, name: &dyn Fn(Atom) -> String) -> String {
        let mut out = String::new();
        write_at(self, 0, name, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Atom(Atom),
    Bot,
    Top,
    Not,
    Box,
    Dia,
    BoxDot,
    DiaDot,
    And,
    Or,
    Imp,
    Iff,
    LParen,
    RParen,
}

fn lex(text: &str, resolve: &dyn Fn(&str) -> Option<Atom>) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| Error::Syntax {
        pos,
        msg: msg.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let rest = &text[i..];
        let fixed: &[(&str, Tok)] = &[
            ("[.]", Tok::BoxDot),
            ("<.>", Tok::DiaDot),
            ("[]", Tok::Box),
            ("<->", Tok::Iff),
            ("<>", Tok::Dia),
            ("->", Tok::Imp),
            ("~", Tok::Not),
            ("&", Tok::And),
            ("|", Tok::Or),
            ("(", Tok::LParen),
            (")", Tok::RParen),
        ];
        if let Some((s, t)) = fixed.iter().find(|(s, _)| rest.starts_with(s)) {
            out.push((i, t.clone()));
            i += s.len();
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.') {
                i += 1;
            }
            let word = &text[start..i];
            let tok = match word {
                "bot" => Tok::Bot,
                "top" => Tok::Top,
                _ => Tok::Atom(resolve(word).ok_or_else(|| err(start, &format!("unknown word `{word}`")))?),
            };
            out.push((start, tok));
            continue;
        }
        return Err(err(
            i,
            &format!("unexpected character `{}`", rest.chars().next().unwrap()),
        ));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn error(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.offset(),
            msg: msg.to_string(),
        }
    }

    /// bicond := or (("->" | "<->") bicond)?
    fn bicond(&mut self) -> Result<Formula> {
        let left = self.disjunction()?;
        match self.peek() {
            Some(Tok::Imp) => {
                self.pos += 1;
                Ok(left.imp(&self.bicond()?))
            }
            Some(Tok::Iff) => {
                self.pos += 1;
                Ok(left.iff(&self.bicond()?))
            }
            _ => Ok(left),
        }
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut acc = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            acc = acc.or(&self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            acc = acc.and(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        match tok {
            Tok::Atom(a) => Ok(Formula::atom(a)),
            Tok::Bot => Ok(Formula::bot()),
            Tok::Top => Ok(Formula::top()),
            Tok::Not => Ok(self.unary()?.not()),
            Tok::Box => Ok(self.unary()?.boxed()),
            Tok::Dia => Ok(self.unary()?.dia()),
            Tok::BoxDot => Ok(self.unary()?.boxdot()),
            Tok::DiaDot => Ok(self.unary()?.diadot()),
            Tok::LParen => {
                let inner = self.bicond()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected a formula"))
            }
        }
    }
}

/// Parse a formula from text.
///
/// Precedence, tightest first: `~ [] <> [.] <.>`, then `&`, then `|`,
/// then `->` and `<->` (right associative).
pub fn parse(text: &str) -> Result<Formula> {
    parse_with(text, &Atom::parse_name)
}

/// Parse with custom atom names: every word other than `bot` and `top`
/// (letters, digits and dots, starting with a letter) is passed to `resolve`.
pub fn parse_with(text: &str, resolve: &dyn Fn(&str) -> Option<Atom>) -> Result<Formula> {
    let mut p = Parser {
        toks: lex(text, resolve)?,
        pos: 0,
        end: text.len(),
    };
    let f = p.bicond()?;
    if p.pos != p.toks.len() {
        return Err(p.error("trailing input"));
    }
    Ok(f)
}

/// Parse a `;`-separated list of formulas; blank entries are skipped.
pub fn parse_list(text: &str) -> Result<Vec<Formula>> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(parse).collect()
}

// ---------------------------------------------------------------------------
// Assignments and substitutions

/// `P^t`: the conjunction of `p` for members of `t` and `¬p` for the rest.
///
/// `t` holds indices into `atoms`; the empty conjunction is `top`.
pub fn assignment_formula(atoms: &[Atom], t: &BTreeSet<usize>) -> Formula {
    Formula::conj(
        atoms
            .iter()
            .enumerate()
            .map(|(i, a)| Formula::atom(*a).signed(t.contains(&i))),
    )
}

/// Same as [`assignment_formula`] with the assignment given as a bit mask.
pub fn assignment_formula_mask(atoms: &[Atom], mask: u64) -> Formula {
    Formula::conj(
        atoms
            .iter()
            .enumerate()
            .map(|(i, a)| Formula::atom(*a).signed(mask >> i & 1 == 1)),
    )
}

/// A substitution of formulas for variables; identity outside its domain.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub map: BTreeMap<u32, Formula>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: u32, f: Formula) -> Self {
        self.map.insert(var, f);
        self
    }

    pub fn get(&self, var: u32) -> Option<&Formula> {
        self.map.get(&var)
    }

    /// The composition `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut map: BTreeMap<u32, Formula> = other.map.iter().map(|(k, v)| (*k, apply(self, v))).collect();
        for (k, v) in &self.map {
            map.entry(*k).or_insert_with(|| v.clone());
        }
        Substitution { map }
    }
}

/// Apply a substitution; parameters are never replaced and sharing is preserved.
pub fn apply(sigma: &Substitution, phi: &Formula) -> Formula {
    fn go(s: &Substitution, f: &Formula, memo: &mut HashMap<usize, Formula>) -> Formula {
        if let Some(r) = memo.get(&f.ptr()) {
            return r.clone();
        }
        let r = match f.node() {
            Node::Atom(Atom::Var(i)) => s.map.get(i).cloned().unwrap_or_else(|| f.clone()),
            Node::Atom(Atom::Param(_)) | Node::Bot | Node::Top => f.clone(),
            Node::Not(a) => go(s, a, memo).not(),
            Node::Box(a) => go(s, a, memo).boxed(),
            Node::Dia(a) => go(s, a, memo).dia(),
            Node::And(a, b) => go(s, a, memo).and(&go(s, b, memo)),
            Node::Or(a, b) => go(s, a, memo).or(&go(s, b, memo)),
            Node::Imp(a, b) => go(s, a, memo).imp(&go(s, b, memo)),
            Node::Iff(a, b) => go(s, a, memo).iff(&go(s, b, memo)),
        };
        memo.insert(f.ptr(), r.clone());
        r
    }
    go(sigma, phi, &mut HashMap::new())
}

/// Rename atoms by an arbitrary map (used to treat parameters as variables and back).
pub fn rename_atoms(phi: &Formula, f: &dyn Fn(Atom) -> Atom) -> Formula {
    fn go(g: &dyn Fn(Atom) -> Atom, x: &Formula, memo: &mut HashMap<usize, Formula>) -> Formula {
        if let Some(r) = memo.get(&x.ptr()) {
            return r.clone();
        }
        let r = match x.node() {
            Node::Atom(a) => Formula::atom(g(*a)),
            Node::Bot | Node::Top => x.clone(),
            Node::Not(a) => go(g, a, memo).not(),
            Node::Box(a) => go(g, a, memo).boxed(),
            Node::Dia(a) => go(g, a, memo).dia(),
            Node::And(a, b) => go(g, a, memo).and(&go(g, b, memo)),
            Node::Or(a, b) => go(g, a, memo).or(&go(g, b, memo)),
            Node::Imp(a, b) => go(g, a, memo).imp(&go(g, b, memo)),
            Node::Iff(a, b) => go(g, a, memo).iff(&go(g, b, memo)),
        };
        memo.insert(x.ptr(), r.clone());
        r
    }
    go(f, phi, &mut HashMap::new())
}

// ---------------------------------------------------------------------------
// Subformula contexts

/// A node of a subformula context, with children given by node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SNode {
    Bot,
    Top,
    /// Index into [`Sigma::atoms`].
    Atom(usize),
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Imp(usize, usize),
    Iff(usize, usize),
    /// Child node index and the position of the child in the boxed kernel.
    Box(usize, usize),
}

/// A subformula-closed set Σ with its boxed kernel B = {ψ : □ψ ∈ Σ}.
///
/// Diamonds are normalized to `¬□¬`, so B also records the kernels of
/// diamond subformulas. Nodes are stored children-first, hence every
/// formula is evaluated after its subformulas and every kernel's index
/// order respects subformula order.
#[derive(Clone, Debug)]
pub struct Sigma {
    pub nodes: Vec<SNode>,
    pub formulas: Vec<Formula>,
    /// Atoms of Σ: variables first, then parameters, each in index order.
    pub atoms: Vec<Atom>,
    /// Node index of each kernel ψ ∈ B.
    pub kernels: Vec<usize>,
    /// Node index of each □ψ.
    pub box_nodes: Vec<usize>,
    index: HashMap<Formula, usize>,
}

/// Replace every `<>ψ` by `~[]~ψ`.
pub fn normalize_diamonds(phi: &Formula) -> Formula {
    fn go(x: &Formula, memo: &mut HashMap<usize, Formula>) -> Formula {
        if let Some(r) = memo.get(&x.ptr()) {
            return r.clone();
        }
        let r = match x.node() {
            Node::Atom(_) | Node::Bot | Node::Top => x.clone(),
            Node::Not(a) => go(a, memo).not(),
            Node::Box(a) => go(a, memo).boxed(),
            Node::Dia(a) => go(a, memo).not().boxed().not(),
            Node::And(a, b) => go(a, memo).and(&go(b, memo)),
            Node::Or(a, b) => go(a, memo).or(&go(b, memo)),
            Node::Imp(a, b) => go(a, memo).imp(&go(b, memo)),
            Node::Iff(a, b) => go(a, memo).iff(&go(b, memo)),
        };
        memo.insert(x.ptr(), r.clone());
        r
    }
    go(phi, &mut HashMap::new())
}

impl Sigma {
    /// The least subformula-closed set containing the (diamond-normalized) seeds.
    pub fn new(seeds: &[Formula]) -> Sigma {
        let mut atoms: BTreeSet<Atom> = BTreeSet::new();
        for s in seeds {
            atoms.extend(s.atoms());
        }
        let mut atoms: Vec<Atom> = atoms.into_iter().collect();
        atoms.sort_by_key(|a| (a.is_param(), a.index()));
        let atom_pos: HashMap<Atom, usize> = atoms.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let mut sigma = Sigma {
            nodes: Vec::new(),
            formulas: Vec::new(),
            atoms,
            kernels: Vec::new(),
            box_nodes: Vec::new(),
            index: HashMap::new(),
        };
        for s in seeds {
            let n = normalize_diamonds(s);
            sigma.insert(&n, &atom_pos);
        }
        sigma
    }

    fn insert(&mut self, f: &Formula, atom_pos: &HashMap<Atom, usize>) -> usize {
        if let Some(&i) = self.index.get(f) {
            return i;
        }
        let node = match f.node() {
            Node::Bot => SNode::Bot,
            Node::Top => SNode::Top,
            Node::Atom(a) => SNode::Atom(atom_pos[a]),
            Node::Not(a) => SNode::Not(self.insert(a, atom_pos)),
            Node::And(a, b) => {
                let (x, y) = (self.insert(a, atom_pos), self.insert(b, atom_pos));
                SNode::And(x, y)
            }
            Node::Or(a, b) => {
                let (x, y) = (self.insert(a, atom_pos), self.insert(b, atom_pos));
                SNode::Or(x, y)
            }
            Node::Imp(a, b) => {
                let (x, y) = (self.insert(a, atom_pos), self.insert(b, atom_pos));
                SNode::Imp(x, y)
            }
            Node::Iff(a, b) => {
                let (x, y) = (self.insert(a, atom_pos), self.insert(b, atom_pos));
                SNode::Iff(x, y)
            }
            Node::Box(a) => {
                let c = self.insert(a, atom_pos);
                let k = self.kernels.len();
                self.kernels.push(c);
                self.box_nodes.push(self.nodes.len());
                SNode::Box(c, k)
            }
            Node::Dia(_) => unreachable!("diamonds are normalized before insertion"),
        };
        let i = self.nodes.len();
        self.nodes.push(node);
        self.formulas.push(f.clone());
        self.index.insert(f.clone(), i);
        i
    }

    /// |Σ|.
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// |B|.
    pub fn num_kernels(&self) -> usize {
        self.kernels.len()
    }

    /// Node index of a formula of Σ (diamonds are normalized first).
    pub fn index_of(&self, f: &Formula) -> Option<usize> {
        self.index
            .get(f)
            .copied()
            .or_else(|| self.index.get(&normalize_diamonds(f)).copied())
    }

    /// Position in B of the kernel with node index `node`, if any.
    pub fn kernel_pos(&self, node: usize) -> Option<usize> {
        self.kernels.iter().position(|&k| k == node)
    }

    /// The kernel formulas B.
    pub fn kernel_formulas(&self) -> Vec<Formula> {
        self.kernels.iter().map(|&k| self.formulas[k].clone()).collect()
    }

    pub fn variables(&self) -> Vec<Atom> {
        self.atoms.iter().copied().filter(|a| a.is_var()).collect()
    }

    pub fn parameters(&self) -> Vec<Atom> {
        self.atoms.iter().copied().filter(|a| a.is_param()).collect()
    }

    /// Position of an atom in [`Sigma::atoms`].
    pub fn atom_pos(&self, a: Atom) -> Option<usize> {
        self.atoms.iter().position(|&b| b == a)
    }

    /// Evaluate every member of Σ at a point whose atoms are given by the
    /// bit mask `val` (bit i = atom i) and whose boxes are given by `boxes`
    /// (`boxes[k]` is the truth value of □ψ_k).
    pub fn eval(&self, val: u64, boxes: &[bool]) -> Vec<bool> {
        let mut out = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            out[i] = match *node {
                SNode::Bot => false,
                SNode::Top => true,
                SNode::Atom(a) => val >> a & 1 == 1,
                SNode::Not(a) => !out[a],
                SNode::And(a, b) => out[a] && out[b],
                SNode::Or(a, b) => out[a] || out[b],
                SNode::Imp(a, b) => !out[a] || out[b],
                SNode::Iff(a, b) => out[a] == out[b],
                SNode::Box(_, k) => boxes[k],
            };
        }
        out
    }

    /// Three-valued evaluation with possibly unknown atoms and boxes.
    pub fn eval3(&self, val: &[Option<bool>], boxes: &[Option<bool>]) -> Vec<Option<bool>> {
        let mut out: Vec<Option<bool>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            out[i] = match *node {
                SNode::Bot => Some(false),
                SNode::Top => Some(true),
                SNode::Atom(a) => val[a],
                SNode::Not(a) => out[a].map(|x| !x),
                SNode::And(a, b) => match (out[a], out[b]) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                },
                SNode::Or(a, b) => match (out[a], out[b]) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                },
                SNode::Imp(a, b) => match (out[a], out[b]) {
                    (Some(false), _) | (_, Some(true)) => Some(true),
                    (Some(true), Some(false)) => Some(false),
                    _ => None,
                },
                SNode::Iff(a, b) => match (out[a], out[b]) {
                    (Some(x), Some(y)) => Some(x == y),
                    _ => None,
                },
                SNode::Box(_, k) => boxes[k],
            };
        }
        out
    }

    /// Evaluate Σ on a reflexive cluster whose points carry the valuations
    /// `vals` and which sees, besides itself, a part where exactly the
    /// kernels in `above` hold throughout (`above[k]` true).
    ///
    /// Returns the per-point truth tables and the cluster's box set
    /// X = {ψ ∈ above : ψ true at every cluster point}.
    pub fn eval_cluster(&self, vals: &[u64], above: &[bool]) -> (Vec<Vec<bool>>, Vec<bool>) {
        let mut tables = vec![vec![false; self.nodes.len()]; vals.len()];
        let mut boxes = vec![false; self.kernels.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let SNode::Box(c, k) = *node {
                let v = above[k] && tables.iter().all(|t| t[c]);
                boxes[k] = v;
                for t in tables.iter_mut() {
                    t[i] = v;
                }
                continue;
            }
            for (p, t) in tables.iter_mut().enumerate() {
                t[i] = match *node {
                    SNode::Bot => false,
                    SNode::Top => true,
                    SNode::Atom(a) => vals[p] >> a & 1 == 1,
                    SNode::Not(a) => !t[a],
                    SNode::And(a, b) => t[a] && t[b],
                    SNode::Or(a, b) => t[a] || t[b],
                    SNode::Imp(a, b) => !t[a] || t[b],
                    SNode::Iff(a, b) => t[a] == t[b],
                    SNode::Box(..) => unreachable!(),
                };
            }
        }
        (tables, boxes)
    }
}

/// The subformula context of a finite seed set.
pub fn closure(seeds: &[Formula]) -> Sigma {
    Sigma::new(seeds)
}

// ---------------------------------------------------------------------------
// Random formulas

/// A random formula of exactly `size` symbols over the given atoms
/// (constants are drawn occasionally as well).
pub fn random_formula<R: rand::Rng>(rng: &mut R, size: u64, atoms: &[Atom]) -> Formula {
    if size <= 1 {
        return match rng.gen_range(0..atoms.len() + 1) {
            i if i < atoms.len() => Formula::atom(atoms[i]),
            _ if rng.gen_bool(0.5) => Formula::bot(),
            _ => Formula::top(),
        };
    }
    if size == 2 || rng.gen_bool(0.4) {
        let a = random_formula(rng, size - 1, atoms);
        return match rng.gen_range(0..3) {
            0 => a.not(),
            1 => a.boxed(),
            _ => a.dia(),
        };
    }
    let left = rng.gen_range(1..size - 1);
    let a = random_formula(rng, left, atoms);
    let b = random_formula(rng, size - 1 - left, atoms);
    match rng.gen_range(0..4) {
        0 => a.and(&b),
        1 => a.or(&b),
        2 => a.imp(&b),
        _ => a.iff(&b),
    }
}

/// A reproducible corpus of `count` formulas of size at most `max_size`,
/// each over at most two atoms drawn from `x0`, `x1`, `p0`.
pub fn random_corpus(seed: u64, count: usize, max_size: u64) -> Vec<Formula> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pool = [Atom::Var(0), Atom::Var(1), Atom::Param(0)];
    (0..count)
        .map(|_| {
            let k = rand::Rng::gen_range(&mut rng, 1..=2);
            let atoms: Vec<Atom> = pool.choose_multiple(&mut rng, k).copied().collect();
            let size = rand::Rng::gen_range(&mut rng, 1..=max_size);
            random_formula(&mut rng, size, &atoms)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_shapes() {
        let f = parse("p0 & ~x0").unwrap();
        assert_eq!(f, Formula::param(0).and(&Formula::var(0).not()));
        let g = parse("[](x0 -> x1)").unwrap();
        assert_eq!(g, Formula::var(0).imp(&Formula::var(1)).boxed());
        let h = parse("[.]p0").unwrap();
        assert_eq!(h, Formula::param(0).and(&Formula::param(0).boxed()));
        assert_eq!(h.to_string(), "[.]p0");
    }

    #[test]
    fn precedence_and_associativity() {
        let f = parse("x0 | x1 & x2 -> x3 -> x4").unwrap();
        let expect = Formula::var(0)
            .or(&Formula::var(1).and(&Formula::var(2)))
            .imp(&Formula::var(3).imp(&Formula::var(4)));
        assert_eq!(f, expect);
        assert_eq!(f.to_string(), "x0 | x1 & x2 -> x3 -> x4");
        let g = parse("(x0 -> x1) -> x2").unwrap();
        assert_eq!(g.to_string(), "(x0 -> x1) -> x2");
        let h = parse("x0 & (x1 & x2)").unwrap();
        assert_eq!(h.to_string(), "x0 & (x1 & x2)");
    }

    #[test]
    fn syntax_errors_report_position() {
        match parse("x0 & & x1") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("(x0").is_err());
        assert!(parse("y0").is_err());
        assert!(parse("x0 x1").is_err());
    }

    #[test]
    fn closure_examples() {
        let s = closure(&[parse("[]x0").unwrap()]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.kernel_formulas(), vec![Formula::var(0)]);
        let s = closure(&[parse("[]x0 | []x1").unwrap()]);
        assert_eq!(s.kernel_formulas(), vec![Formula::var(0), Formula::var(1)]);
        let s = closure(&[parse("<>p0 -> x0").unwrap()]);
        assert!(s.kernel_formulas().contains(&Formula::param(0).not()));
    }

    #[test]
    fn assignment_formulas() {
        let atoms = [Atom::Param(0), Atom::Param(1)];
        let t: BTreeSet<usize> = [0].into_iter().collect();
        assert_eq!(assignment_formula(&atoms, &t).to_string(), "p0 & ~p1");
        assert_eq!(assignment_formula(&[], &BTreeSet::new()), Formula::top());
        assert_eq!(assignment_formula(&atoms[..1], &t), Formula::param(0));
    }

    #[test]
    fn substitution_examples() {
        let s = Substitution::new().with(0, Formula::top());
        assert_eq!(apply(&s, &parse("[]x0").unwrap()).to_string(), "[]top");
        let s = Substitution::new().with(0, parse("<>p0").unwrap());
        assert_eq!(apply(&s, &parse("x0 & p0").unwrap()).to_string(), "<>p0 & p0");
        let f = parse("[](x0 -> x1) & p3").unwrap();
        assert_eq!(apply(&Substitution::new(), &f), f);
    }

    #[test]
    fn cluster_evaluation_matches_definition() {
        // □x0 on a reflexive point: true iff x0 holds there and above.
        let s = closure(&[parse("[]x0").unwrap()]);
        let (_, x) = s.eval_cluster(&[1], &[true]);
        assert_eq!(x, vec![true]);
        let (_, x) = s.eval_cluster(&[1, 0], &[true]);
        assert_eq!(x, vec![false]);
        let (_, x) = s.eval_cluster(&[1], &[false]);
        assert_eq!(x, vec![false]);
    }
}
