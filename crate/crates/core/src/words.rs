//! Free-group words as shared DAGs (straight-line programs).
//!
//! Words built here are never flattened on the evaluation path: a word is
//! compiled into a [`Program`] whose instructions are the distinct DAG nodes,
//! and evaluating it in any [`Group`] costs one group operation per node.
//! The skew-commutator tower words, their substituted forms over the
//! variables `x1..xm`, and the witness equation are built on top.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::action::{enumerate_characters, Character, SimplicityReport};

/// Flattening cap used by [`reduce`].
pub const DEFAULT_FLATTEN_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("word has flattened length {length}, above the cap {cap}")]
    TooLarge { length: BigUint, cap: u64 },
    #[error("generator `{0}` has no assigned value")]
    UnboundGenerator(String),
    #[error("a simple element has no witness equation")]
    NotAWitness,
    #[error("filler exponent {0} is not allowed (must differ from ±1)")]
    InvalidFiller(BigInt),
    #[error("parse error: {0}")]
    Parse(String),
}

/// The multiplication/inverse/identity contract words are evaluated against.
pub trait Group {
    type Elem: Clone + PartialEq + fmt::Debug;

    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;

    /// Integer power; square-and-multiply unless a group knows better.
    fn pow(&self, a: &Self::Elem, e: &BigInt) -> Self::Elem {
        let base = if e.is_negative() { self.inv(a) } else { a.clone() };
        let mut bits = e.magnitude().clone();
        let mut acc = self.identity();
        let mut sq = base;
        while !bits.is_zero() {
            if bits.bit(0) {
                acc = self.mul(&acc, &sq);
            }
            bits >>= 1u32;
            if !bits.is_zero() {
                sq = self.mul(&sq, &sq);
            }
        }
        acc
    }
}

/// Wraps a group and counts the operations performed through it.
pub struct Counting<G> {
    inner: G,
    ops: AtomicU64,
}

impl<G> Counting<G> {
    pub fn new(inner: G) -> Self {
        Counting { inner, ops: AtomicU64::new(0) }
    }

    pub fn ops(&self) -> u64 {
        self.ops.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.ops.fetch_add(1, Ordering::Relaxed);
    }
}

impl<G: Group> Group for Counting<G> {
    type Elem = G::Elem;

    fn identity(&self) -> G::Elem {
        self.inner.identity()
    }

    fn mul(&self, a: &G::Elem, b: &G::Elem) -> G::Elem {
        self.tick();
        self.inner.mul(a, b)
    }

    fn inv(&self, a: &G::Elem) -> G::Elem {
        self.tick();
        self.inner.inv(a)
    }

    fn pow(&self, a: &G::Elem, e: &BigInt) -> G::Elem {
        self.tick();
        self.inner.pow(a, e)
    }
}

/// A letter of a flattened word: a generator or its inverse.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub name: Arc<str>,
    pub inverse: bool,
}

impl Letter {
    pub fn new(name: &str, inverse: bool) -> Self {
        Letter { name: Arc::from(name), inverse }
    }

    fn inverted(&self) -> Letter {
        Letter { name: self.name.clone(), inverse: !self.inverse }
    }

    fn cancels(&self, other: &Letter) -> bool {
        self.name == other.name && self.inverse != other.inverse
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "{}^-1", self.name)
        } else {
            write!(f, "{}", self.name)
        }
    }
}

#[derive(Debug)]
pub enum NodeKind {
    Generator(Arc<str>),
    Inverse(SLWord),
    Concat(Vec<SLWord>),
    Power(SLWord, BigInt),
}

#[derive(Debug)]
struct Node {
    kind: NodeKind,
    length: BigUint,
}

/// A free-group word with shared subterms.
#[derive(Clone, Debug)]
pub struct SLWord(Arc<Node>);

impl SLWord {
    fn make(kind: NodeKind) -> Self {
        let length = match &kind {
            NodeKind::Generator(_) => BigUint::one(),
            NodeKind::Inverse(w) => w.flat_len().clone(),
            NodeKind::Concat(parts) => parts.iter().map(|p| p.flat_len()).sum(),
            NodeKind::Power(w, e) => w.flat_len() * e.magnitude(),
        };
        SLWord(Arc::new(Node { kind, length }))
    }

    pub fn generator(name: &str) -> Self {
        SLWord::make(NodeKind::Generator(Arc::from(name)))
    }

    /// The empty word.
    pub fn identity() -> Self {
        SLWord::make(NodeKind::Concat(Vec::new()))
    }

    pub fn inverse(&self) -> Self {
        SLWord::make(NodeKind::Inverse(self.clone()))
    }

    pub fn concat(parts: impl IntoIterator<Item = SLWord>) -> Self {
        SLWord::make(NodeKind::Concat(parts.into_iter().collect()))
    }

    pub fn pow(&self, e: impl Into<BigInt>) -> Self {
        SLWord::make(NodeKind::Power(self.clone(), e.into()))
    }

    pub fn kind(&self) -> &NodeKind {
        &self.0.kind
    }

    /// Length of the word once written out letter by letter (before free
    /// reduction), computed without flattening.
    pub fn flat_len(&self) -> &BigUint {
        &self.0.length
    }

    pub fn ptr_eq(&self, other: &SLWord) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Number of distinct DAG nodes.
    pub fn node_count(&self) -> usize {
        Program::compile(self).len()
    }

    pub fn generators(&self) -> BTreeSet<String> {
        Program::compile(self).generators.iter().map(|g| g.to_string()).collect()
    }

    /// Writes the word out letter by letter, refusing if it is longer than
    /// `cap`.
    pub fn flatten(&self, cap: u64) -> Result<Vec<Letter>, WordError> {
        if self.flat_len() > &BigUint::from(cap) {
            return Err(WordError::TooLarge { length: self.flat_len().clone(), cap });
        }
        let mut out = Vec::new();
        self.flatten_into(false, &mut out);
        Ok(out)
    }

    fn flatten_into(&self, inverted: bool, out: &mut Vec<Letter>) {
        match self.kind() {
            NodeKind::Generator(name) => out.push(Letter { name: name.clone(), inverse: inverted }),
            NodeKind::Inverse(w) => w.flatten_into(!inverted, out),
            NodeKind::Concat(parts) => {
                if inverted {
                    parts.iter().rev().for_each(|p| p.flatten_into(true, out));
                } else {
                    parts.iter().for_each(|p| p.flatten_into(false, out));
                }
            }
            NodeKind::Power(w, e) => {
                let n = e.magnitude().to_u64().expect("bounded by the flatten cap");
                let inv = inverted ^ e.is_negative();
                for _ in 0..n {
                    w.flatten_into(inv, out);
                }
            }
        }
    }
}

/// Freely reduces a letter sequence.
pub fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> Vec<Letter> {
    let mut stack: Vec<Letter> = Vec::new();
    for l in letters {
        if stack.last().is_some_and(|top| top.cancels(&l)) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    stack
}

/// Freely reduced form of a small word.
pub fn reduce(w: &SLWord) -> Result<Vec<Letter>, WordError> {
    Ok(free_reduce(w.flatten(DEFAULT_FLATTEN_CAP)?))
}

/// The free group on all names, elements kept freely reduced.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreeGroup;

impl Group for FreeGroup {
    type Elem = Vec<Letter>;

    fn identity(&self) -> Vec<Letter> {
        Vec::new()
    }

    fn mul(&self, a: &Vec<Letter>, b: &Vec<Letter>) -> Vec<Letter> {
        free_reduce(a.iter().chain(b.iter()).cloned())
    }

    fn inv(&self, a: &Vec<Letter>) -> Vec<Letter> {
        a.iter().rev().map(Letter::inverted).collect()
    }
}

/// One instruction of a compiled word; operands index earlier instructions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Gen(usize),
    Inv(usize),
    Cat(Vec<usize>),
    Pow(usize, BigInt),
}

/// A word compiled to a straight-line program: one instruction per distinct
/// DAG node, children before parents.
#[derive(Clone, Debug)]
pub struct Program {
    ops: Vec<Op>,
    generators: Vec<Arc<str>>,
}

impl Program {
    pub fn compile(w: &SLWord) -> Program {
        let mut prog = Program { ops: Vec::new(), generators: Vec::new() };
        let mut seen: HashMap<*const Node, usize> = HashMap::new();
        let mut gens: HashMap<Arc<str>, usize> = HashMap::new();
        prog.visit(w, &mut seen, &mut gens);
        prog
    }

    fn visit(
        &mut self,
        w: &SLWord,
        seen: &mut HashMap<*const Node, usize>,
        gens: &mut HashMap<Arc<str>, usize>,
    ) -> usize {
        let key = Arc::as_ptr(&w.0);
        if let Some(&i) = seen.get(&key) {
            return i;
        }
        let op = match w.kind() {
            NodeKind::Generator(name) => {
                let next = self.generators.len();
                let g = *gens.entry(name.clone()).or_insert(next);
                if g == next {
                    self.generators.push(name.clone());
                }
                Op::Gen(g)
            }
            NodeKind::Inverse(c) => Op::Inv(self.visit(c, seen, gens)),
            NodeKind::Concat(parts) => Op::Cat(parts.iter().map(|p| self.visit(p, seen, gens)).collect()),
            NodeKind::Power(c, e) => Op::Pow(self.visit(c, seen, gens), e.clone()),
        };
        self.ops.push(op);
        let i = self.ops.len() - 1;
        seen.insert(key, i);
        i
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Generator names in order of first appearance.
    pub fn generators(&self) -> &[Arc<str>] {
        &self.generators
    }

    /// Evaluates the program with one value per entry of [`Self::generators`].
    /// Each node is evaluated at most once; the operand of a zero power is
    /// never evaluated.
    pub fn run<G: Group>(&self, group: &G, values: &[G::Elem]) -> G::Elem {
        assert_eq!(values.len(), self.generators.len(), "one value per generator");
        if self.ops.is_empty() {
            return group.identity();
        }
        let mut memo: Vec<Option<G::Elem>> = vec![None; self.ops.len()];
        self.eval_node(self.ops.len() - 1, group, values, &mut memo)
    }

    fn eval_node<G: Group>(&self, i: usize, group: &G, values: &[G::Elem], memo: &mut Vec<Option<G::Elem>>) -> G::Elem {
        if let Some(v) = &memo[i] {
            return v.clone();
        }
        let v = match &self.ops[i] {
            Op::Gen(g) => values[*g].clone(),
            Op::Inv(c) => {
                let x = self.eval_node(*c, group, values, memo);
                group.inv(&x)
            }
            Op::Cat(parts) => {
                let mut acc: Option<G::Elem> = None;
                for &p in parts {
                    let x = self.eval_node(p, group, values, memo);
                    acc = Some(match acc {
                        None => x,
                        Some(a) => group.mul(&a, &x),
                    });
                }
                acc.unwrap_or_else(|| group.identity())
            }
            Op::Pow(c, e) => {
                if e.is_zero() {
                    group.identity()
                } else {
                    let x = self.eval_node(*c, group, values, memo);
                    group.pow(&x, e)
                }
            }
        };
        memo[i] = Some(v.clone());
        v
    }

    /// Evaluates with values looked up by generator name.
    pub fn evaluate<G: Group>(
        &self,
        group: &G,
        assignment: impl Fn(&str) -> Option<G::Elem>,
    ) -> Result<G::Elem, WordError> {
        let values = self
            .generators
            .iter()
            .map(|g| assignment(g).ok_or_else(|| WordError::UnboundGenerator(g.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.run(group, &values))
    }
}

/// Image of `w` under the homomorphism induced by `assignment`.
pub fn evaluate<G: Group>(
    w: &SLWord,
    group: &G,
    assignment: impl Fn(&str) -> Option<G::Elem>,
) -> Result<G::Elem, WordError> {
    Program::compile(w).evaluate(group, assignment)
}

/// Evaluates with a name → value map.
pub fn evaluate_map<G: Group>(w: &SLWord, group: &G, assignment: &BTreeMap<String, G::Elem>) -> Result<G::Elem, WordError> {
    evaluate(w, group, |name| assignment.get(name).cloned())
}

/// The word `body · c · body^sign · c⁻¹`, with `body` shared.
pub fn skew_commutator(c_expr: &SLWord, sign: i32, body: &SLWord) -> SLWord {
    skew_commutator_with(c_expr, &c_expr.inverse(), sign, body)
}

fn skew_commutator_with(c_expr: &SLWord, c_inv: &SLWord, sign: i32, body: &SLWord) -> SLWord {
    let twisted = if sign >= 0 { body.clone() } else { body.inverse() };
    SLWord::concat([body.clone(), c_expr.clone(), twisted, c_inv.clone()])
}

/// Words for the elements of an elementary abelian 2-group of rank `m`
/// written over the letters `x1..xm`: the element with bit tuple
/// `(ε_1, …, ε_m)` is `x1^ε_1 ⋯ xm^ε_m`. Elements are indexed by the
/// integer whose binary digits are the tuple, `ε_1` most significant, which
/// is the lexicographic order of tuples.
#[derive(Clone, Debug)]
pub struct CosetWords {
    rank: usize,
    words: Vec<SLWord>,
    inverses: Vec<SLWord>,
}

impl CosetWords {
    pub fn new(rank: usize) -> Self {
        let names: Vec<String> = (1..=rank).map(|j| format!("x{j}")).collect();
        CosetWords::with_names(&names)
    }

    pub fn with_names(names: &[String]) -> Self {
        let rank = names.len();
        assert!(rank < usize::BITS as usize - 1, "rank too large to enumerate");
        let letters: Vec<SLWord> = names.iter().map(|n| SLWord::generator(n)).collect();
        let words: Vec<SLWord> = (0..1usize << rank)
            .map(|e| {
                let parts = (0..rank).filter(|&j| element_bit(rank, e, j)).map(|j| letters[j].clone());
                SLWord::concat(parts)
            })
            .collect();
        let inverses = words.iter().map(SLWord::inverse).collect();
        CosetWords { rank, words, inverses }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn word(&self, element: usize) -> &SLWord {
        &self.words[element]
    }

    pub fn words(&self) -> &[SLWord] {
        &self.words
    }
}

/// Whether generator `j` (0-based) occurs in the element with index `e`.
pub fn element_bit(rank: usize, e: usize, j: usize) -> bool {
    (e >> (rank - 1 - j)) & 1 == 1
}

/// The nested skew-commutator word of `chi` applied to `arg`, with the
/// elements of C given by `c_exprs` in enumeration order (outermost first).
pub fn build_w_chi_at(chi: &Character, c_exprs: &[SLWord], arg: &SLWord) -> SLWord {
    assert_eq!(c_exprs.len(), 1usize << chi.rank(), "one expression per element of C");
    let mut body = arg.clone();
    for (e, c) in c_exprs.iter().enumerate().rev() {
        body = skew_commutator(c, chi.value(e), &body);
    }
    body
}

/// [`build_w_chi_at`] applied to the single variable `y`.
pub fn build_w_chi(chi: &Character, c_exprs: &[SLWord]) -> SLWord {
    build_w_chi_at(chi, c_exprs, &SLWord::generator("y"))
}

/// The tower word of `chi` over the letters of `coset_words`, applied to
/// `arg`.
pub fn build_v_chi(chi: &Character, coset_words: &CosetWords, arg: &SLWord) -> SLWord {
    assert_eq!(chi.rank(), coset_words.rank(), "character and coset words disagree on rank");
    let mut body = arg.clone();
    for e in (0..coset_words.words.len()).rev() {
        body = skew_commutator_with(&coset_words.words[e], &coset_words.inverses[e], chi.value(e), &body);
    }
    body
}

/// Name of the `i`-th (1-based) square variable attached to character
/// number `chi_index`.
pub fn y_variable(chi_index: usize, i: usize) -> String {
    format!("y{chi_index}_{i}")
}

pub fn x_variable(j: usize) -> String {
    format!("x{j}")
}

/// An equation `lhs = a^exponent` whose left side is the product, over all
/// characters in enumeration order, of the tower word for that character
/// evaluated at `(∏_i y_{χ,i}²)^{|T|}` and raised to the character's
/// exponent.
#[derive(Clone, Debug)]
pub struct Equation {
    lhs: SLWord,
    rhs_generator: String,
    rhs_exponent: BigInt,
    exponents: Vec<BigInt>,
    squares: usize,
    torsion_order: BigInt,
    c_rank: usize,
}

impl Equation {
    /// Builds the equation from explicit per-character exponents. No check
    /// is made that the exponents avoid ±1.
    pub fn from_exponents(exponents: Vec<BigInt>, squares: usize, torsion_order: BigInt, c_rank: usize) -> Equation {
        assert_eq!(exponents.len(), 1usize << c_rank, "one exponent per character");
        assert!(squares >= 1, "at least one square per character");
        assert!(torsion_order.is_positive(), "torsion order is positive");
        let coset = CosetWords::new(c_rank);
        let terms = enumerate_characters(c_rank).into_iter().enumerate().map(|(idx, chi)| {
            let squares_block =
                SLWord::concat((1..=squares).map(|i| SLWord::generator(&y_variable(idx, i)).pow(2)));
            let arg = squares_block.pow(torsion_order.clone());
            build_v_chi(&chi, &coset, &arg).pow(exponents[idx].clone())
        });
        let lhs = SLWord::concat(terms);
        let rhs_exponent = rhs_exponent(c_rank, &torsion_order);
        Equation { lhs, rhs_generator: "a".to_string(), rhs_exponent, exponents, squares, torsion_order, c_rank }
    }

    pub fn lhs(&self) -> &SLWord {
        &self.lhs
    }

    pub fn rhs_generator(&self) -> &str {
        &self.rhs_generator
    }

    pub fn rhs_exponent(&self) -> &BigInt {
        &self.rhs_exponent
    }

    /// Exponent of each character's factor, in enumeration order.
    pub fn exponents(&self) -> &[BigInt] {
        &self.exponents
    }

    pub fn squares(&self) -> usize {
        self.squares
    }

    pub fn torsion_order(&self) -> &BigInt {
        &self.torsion_order
    }

    pub fn c_rank(&self) -> usize {
        self.c_rank
    }

    pub fn variables(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.c_rank).map(x_variable).collect();
        for idx in 0..self.exponents.len() {
            v.extend((1..=self.squares).map(|i| y_variable(idx, i)));
        }
        v
    }

    /// Whether the left side is exactly the word [`Equation::from_exponents`]
    /// builds from this equation's metadata.
    pub fn is_canonical(&self) -> bool {
        let rebuilt = Equation::from_exponents(
            self.exponents.clone(),
            self.squares,
            self.torsion_order.clone(),
            self.c_rank,
        );
        rebuilt.rhs_exponent == self.rhs_exponent
            && rebuilt.rhs_generator == self.rhs_generator
            && Program::compile(&rebuilt.lhs).ops == Program::compile(&self.lhs).ops
            && Program::compile(&rebuilt.lhs).generators == Program::compile(&self.lhs).generators
    }

    /// Deterministic S-expression text; see [`Equation::from_sexpr`].
    pub fn to_sexpr(&self) -> String {
        let prog = Program::compile(&self.lhs);
        let mut s = String::new();
        s.push_str("(equation\n");
        s.push_str("  (version 1)\n");
        let _ = writeln!(s, "  (c-rank {})", self.c_rank);
        let _ = writeln!(s, "  (torsion-order {})", self.torsion_order);
        let _ = writeln!(s, "  (squares {})", self.squares);
        let exps: Vec<String> = self.exponents.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "  (exponents {})", exps.join(" "));
        let _ = writeln!(s, "  (rhs {} {})", self.rhs_generator, self.rhs_exponent);
        s.push_str("  (nodes");
        for (i, op) in prog.ops.iter().enumerate() {
            let _ = write!(s, "\n    ({i} ");
            match op {
                Op::Gen(g) => {
                    let _ = write!(s, "(gen {}))", prog.generators[*g]);
                }
                Op::Inv(c) => {
                    let _ = write!(s, "(inv {c}))");
                }
                Op::Cat(parts) => {
                    s.push_str("(cat");
                    for p in parts {
                        let _ = write!(s, " {p}");
                    }
                    s.push_str("))");
                }
                Op::Pow(c, e) => {
                    let _ = write!(s, "(pow {c} {e}))");
                }
            }
        }
        s.push_str(")\n");
        let _ = writeln!(s, "  (lhs {}))", prog.ops.len().saturating_sub(1));
        s
    }

    pub fn from_sexpr(text: &str) -> Result<Equation, WordError> {
        let expr = Sexp::parse(text)?;
        let items = expr.list()?;
        if items.first().and_then(Sexp::atom) != Some("equation") {
            return Err(perr("expected (equation ...)"));
        }
        let mut fields: BTreeMap<&str, &[Sexp]> = BTreeMap::new();
        for item in &items[1..] {
            let l = item.list()?;
            let key = l.first().and_then(Sexp::atom).ok_or_else(|| perr("field without a name"))?;
            fields.insert(key, &l[1..]);
        }
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| perr(&format!("missing field `{k}`")));
        let single_int = |k: &str| -> Result<BigInt, WordError> {
            match field(k)? {
                [v] => v.int(),
                _ => Err(perr(&format!("field `{k}` takes one integer"))),
            }
        };
        if single_int("version")? != BigInt::one() {
            return Err(perr("unsupported version"));
        }
        let c_rank = to_usize(&single_int("c-rank")?)?;
        let torsion_order = single_int("torsion-order")?;
        let squares = to_usize(&single_int("squares")?)?;
        let exponents = field("exponents")?.iter().map(Sexp::int).collect::<Result<Vec<_>, _>>()?;
        let (rhs_generator, rhs_exponent) = match field("rhs")? {
            [g, e] => (g.atom().ok_or_else(|| perr("rhs generator"))?.to_string(), e.int()?),
            _ => return Err(perr("rhs takes a generator and an exponent")),
        };
        let mut nodes: Vec<SLWord> = Vec::new();
        for (i, n) in field("nodes")?.iter().enumerate() {
            let l = n.list()?;
            let [id, body] = l else { return Err(perr("node entries are (id body)")) };
            if to_usize(&id.int()?)? != i {
                return Err(perr("node ids must be consecutive from 0"));
            }
            let b = body.list()?;
            let head = b.first().and_then(Sexp::atom).ok_or_else(|| perr("node kind"))?;
            let child = |s: &Sexp| -> Result<SLWord, WordError> {
                let c = to_usize(&s.int()?)?;
                nodes.get(c).cloned().ok_or_else(|| perr("node refers forward"))
            };
            let w = match (head, &b[1..]) {
                ("gen", [name]) => SLWord::generator(name.atom().ok_or_else(|| perr("generator name"))?),
                ("inv", [c]) => child(c)?.inverse(),
                ("cat", parts) => SLWord::concat(parts.iter().map(child).collect::<Result<Vec<_>, _>>()?),
                ("pow", [c, e]) => child(c)?.pow(e.int()?),
                _ => return Err(perr(&format!("malformed node {i}"))),
            };
            nodes.push(w);
        }
        let lhs_index = to_usize(&single_int("lhs")?)?;
        let lhs = nodes.get(lhs_index).cloned().ok_or_else(|| perr("lhs index out of range"))?;
        if exponents.len() != 1usize << c_rank {
            return Err(perr("exponent count does not match c-rank"));
        }
        Ok(Equation { lhs, rhs_generator, rhs_exponent, exponents, squares, torsion_order, c_rank })
    }
}

/// `2 · 2^{|C|} · |T|` for `|C| = 2^c_rank`.
pub fn rhs_exponent(c_rank: usize, torsion_order: &BigInt) -> BigInt {
    (BigInt::one() << (1 + (1usize << c_rank))) * torsion_order
}

/// The witness equation for a non-simple element. Characters whose
/// component vanishes get `filler` as their exponent.
pub fn build_witness_equation(
    report: &SimplicityReport,
    squares: usize,
    torsion_order: &BigInt,
    c_rank: usize,
    filler: &BigInt,
) -> Result<Equation, WordError> {
    let SimplicityReport::NotSimple { components } = report else {
        return Err(WordError::NotAWitness);
    };
    if filler.abs().is_one() {
        return Err(WordError::InvalidFiller(filler.clone()));
    }
    assert_eq!(components.len(), 1usize << c_rank, "one component per character");
    let exponents = components
        .iter()
        .map(|c| if c.k.is_zero() { filler.clone() } else { c.k.clone() })
        .collect();
    Ok(Equation::from_exponents(exponents, squares, torsion_order.clone(), c_rank))
}

fn perr(msg: &str) -> WordError {
    WordError::Parse(msg.to_string())
}

fn to_usize(v: &BigInt) -> Result<usize, WordError> {
    v.to_usize().ok_or_else(|| perr(&format!("{v} is not a valid count")))
}

/// Minimal S-expression reader: atoms, lists, `;` comments.
#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn parse(text: &str) -> Result<Sexp, WordError> {
        let mut tokens = Vec::new();
        let mut cur = String::new();
        let mut chars = text.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '(' | ')' => {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                    tokens.push(c.to_string());
                }
                ';' => {
                    for d in chars.by_ref() {
                        if d == '\n' {
                            break;
                        }
                    }
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
        let mut pos = 0;
        let e = Sexp::read(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(perr("trailing input"));
        }
        Ok(e)
    }

    fn read(tokens: &[String], pos: &mut usize) -> Result<Sexp, WordError> {
        let t = tokens.get(*pos).ok_or_else(|| perr("unexpected end of input"))?;
        *pos += 1;
        match t.as_str() {
            "(" => {
                let mut items = Vec::new();
                loop {
                    match tokens.get(*pos).map(String::as_str) {
                        Some(")") => {
                            *pos += 1;
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(Sexp::read(tokens, pos)?),
                        None => return Err(perr("unbalanced parentheses")),
                    }
                }
            }
            ")" => Err(perr("unexpected `)`")),
            a => Ok(Sexp::Atom(a.to_string())),
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    fn list(&self) -> Result<&[Sexp], WordError> {
        match self {
            Sexp::List(l) => Ok(l),
            Sexp::Atom(a) => Err(perr(&format!("expected a list, found `{a}`"))),
        }
    }

    fn int(&self) -> Result<BigInt, WordError> {
        let a = self.atom().ok_or_else(|| perr("expected an integer"))?;
        a.parse().map_err(|_| perr(&format!("`{a}` is not an integer")))
    }
}

/// Parses a word such as `a1^3*a2^-5`, `b1*b2`, `(a1*b1)^2` or `1`.
pub fn parse_word(text: &str) -> Result<SLWord, WordError> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    if chars.is_empty() {
        return Err(perr("empty word"));
    }
    let mut p = WordParser { chars: &chars, pos: 0 };
    let w = p.product()?;
    if p.pos != chars.len() {
        return Err(perr(&format!("unexpected `{}` at position {}", chars[p.pos], p.pos)));
    }
    Ok(w)
}

struct WordParser<'a> {
    chars: &'a [char],
    pos: usize,
}

impl WordParser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn product(&mut self) -> Result<SLWord, WordError> {
        let mut parts = vec![self.power()?];
        while self.peek() == Some('*') {
            self.pos += 1;
            parts.push(self.power()?);
        }
        Ok(if parts.len() == 1 { parts.pop().expect("one part") } else { SLWord::concat(parts) })
    }

    fn power(&mut self) -> Result<SLWord, WordError> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let e: BigInt = digits.parse().map_err(|_| perr(&format!("missing exponent at position {start}")))?;
        Ok(base.pow(e))
    }

    fn atom(&mut self) -> Result<SLWord, WordError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let w = self.product()?;
                if self.peek() != Some(')') {
                    return Err(perr("missing `)`"));
                }
                self.pos += 1;
                Ok(w)
            }
            Some('1') => {
                self.pos += 1;
                Ok(SLWord::identity())
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                Ok(SLWord::generator(&name))
            }
            Some(c) => Err(perr(&format!("unexpected `{c}` at position {}", self.pos))),
            None => Err(perr("word ends unexpectedly")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dihedral::{DihedralElement, InfiniteDihedral};

    fn letters(spec: &[(&str, bool)]) -> Vec<Letter> {
        spec.iter().map(|&(n, i)| Letter::new(n, i)).collect()
    }

    #[test]
    fn reduce_examples() {
        let x = SLWord::generator("x");
        let y = SLWord::generator("y");
        assert!(reduce(&SLWord::concat([x.clone(), x.inverse()])).unwrap().is_empty());
        assert_eq!(
            reduce(&SLWord::concat([x.clone(), y.clone(), y.inverse(), x.clone()])).unwrap(),
            letters(&[("x", false), ("x", false)])
        );
        assert_eq!(reduce(&x.pow(3)).unwrap(), letters(&[("x", false); 3]));
        assert_eq!(reduce(&x.pow(-2)).unwrap(), letters(&[("x", true); 2]));
    }

    #[test]
    fn reduce_refuses_huge_words() {
        let w = SLWord::generator("x").pow(1u64 << 40);
        assert!(matches!(reduce(&w), Err(WordError::TooLarge { .. })));
    }

    #[test]
    fn inverse_of_concat_reverses() {
        let w = SLWord::concat([SLWord::generator("x"), SLWord::generator("y")]).inverse();
        assert_eq!(reduce(&w).unwrap(), letters(&[("y", true), ("x", true)]));
    }

    #[test]
    fn evaluate_in_dihedral() {
        let h = InfiniteDihedral;
        let a = DihedralElement::translation(1);
        let b = DihedralElement::reflection(0);
        let w = SLWord::concat([SLWord::generator("x"), SLWord::generator("y")]);
        let map: BTreeMap<String, DihedralElement> =
            [("x".to_string(), a.clone()), ("y".to_string(), b.clone())].into_iter().collect();
        assert_eq!(evaluate_map(&w, &h, &map).unwrap(), h.mul(&a, &b));

        // [x, y] with x = a^k, y = b gives a^{2k}
        for k in -5i64..=5 {
            let x = SLWord::generator("x");
            let y = SLWord::generator("y");
            let comm = SLWord::concat([x.clone(), y.clone(), x.inverse(), y.inverse()]);
            let v = evaluate(&comm, &h, |n| match n {
                "x" => Some(DihedralElement::translation(k)),
                "y" => Some(b.clone()),
                _ => None,
            })
            .unwrap();
            assert_eq!(v, DihedralElement::translation(2 * k));
        }
    }

    #[test]
    fn evaluate_reports_unbound() {
        let w = SLWord::generator("z");
        let err = evaluate(&w, &FreeGroup, |_| None).unwrap_err();
        assert_eq!(err, WordError::UnboundGenerator("z".into()));
    }

    #[test]
    fn skew_commutator_shapes() {
        let g = SLWord::generator("g");
        let x = SLWord::generator("x");
        assert_eq!(
            reduce(&skew_commutator(&g, -1, &x)).unwrap(),
            letters(&[("x", false), ("g", false), ("x", true), ("g", true)])
        );
        let y = SLWord::generator("y");
        let f = skew_commutator(&g, 1, &y);
        assert_eq!(
            reduce(&f).unwrap(),
            letters(&[("y", false), ("g", false), ("y", false), ("g", true)])
        );
        // body shared between its two occurrences
        if let NodeKind::Concat(parts) = f.kind() {
            assert!(parts[0].ptr_eq(&parts[2]));
        } else {
            panic!("expected a concatenation");
        }
        let c1 = SLWord::generator("c1");
        let c2 = SLWord::generator("c2");
        let nested = skew_commutator(&c1, 1, &skew_commutator(&c2, 1, &y));
        assert_eq!(nested.flat_len(), &BigUint::from(10u32));
    }

    #[test]
    fn w_chi_for_trivial_group_is_y_squared() {
        let chi = Character::trivial(0);
        let w = build_w_chi(&chi, &[SLWord::identity()]);
        assert_eq!(reduce(&w).unwrap(), letters(&[("y", false), ("y", false)]));
    }

    #[test]
    fn v_chi_first_arguments_are_all_subset_products() {
        let coset = CosetWords::new(4);
        let got: BTreeSet<Vec<Letter>> = coset.words().iter().map(|w| reduce(w).unwrap()).collect();
        assert_eq!(got.len(), 16);
        for e in 0..16usize {
            let expect: Vec<Letter> =
                (0..4).filter(|&j| element_bit(4, e, j)).map(|j| Letter::new(&format!("x{}", j + 1), false)).collect();
            assert!(got.contains(&expect));
        }
        // m = 1, trivial character: f(1, f(x1, y))
        let coset = CosetWords::new(1);
        let v = build_v_chi(&Character::trivial(1), &coset, &SLWord::generator("y"));
        let inner = letters(&[("y", false), ("x1", false), ("y", false), ("x1", true)]);
        let mut expect = inner.clone();
        expect.extend(inner);
        assert_eq!(reduce(&v).unwrap(), expect);
    }

    #[test]
    fn v_chi_size_for_rank_four() {
        // length recurrence applied level by level, innermost element last
        let coset = CosetWords::new(4);
        let chi = enumerate_characters(4)[5].clone();
        let v = build_v_chi(&chi, &coset, &SLWord::generator("y"));
        let mut len = BigUint::one();
        for e in (0..16usize).rev() {
            len = BigUint::from(2u32) * len + BigUint::from(2u32 * (e.count_ones()));
        }
        assert_eq!(v.flat_len(), &len);
        assert_eq!(len, BigUint::from(511_692u32));
        assert!(v.node_count() < 200, "{}", v.node_count());
    }

    #[test]
    fn counting_tracks_operations() {
        let h = Counting::new(InfiniteDihedral);
        let coset = CosetWords::new(4);
        let chi = enumerate_characters(4)[4].clone();
        let v = build_v_chi(&chi, &coset, &SLWord::generator("y"));
        let prog = Program::compile(&v);
        let mut values = Vec::new();
        for g in prog.generators() {
            values.push(match &**g {
                "y" => DihedralElement::translation(2),
                "x2" => DihedralElement::reflection(3),
                _ => DihedralElement::translation(7),
            });
        }
        let out = prog.run(&h, &values);
        assert_eq!(out, DihedralElement::translation(BigInt::from(2) << 16));
        // one operation per node and per concatenated part at most
        let parts: usize = prog
            .ops()
            .iter()
            .map(|op| match op {
                Op::Cat(p) => p.len(),
                _ => 1,
            })
            .sum();
        assert!(h.ops() as usize <= parts);
    }

    #[test]
    fn parse_words() {
        let w = parse_word("a1^3*a2^5").unwrap();
        let r = reduce(&w).unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(reduce(&parse_word("b1 * b2").unwrap()).unwrap(), letters(&[("b1", false), ("b2", false)]));
        assert_eq!(reduce(&parse_word("a1^-2").unwrap()).unwrap(), letters(&[("a1", true); 2]));
        assert_eq!(reduce(&parse_word("(a1*b1)^2").unwrap()).unwrap().len(), 4);
        assert!(reduce(&parse_word("1").unwrap()).unwrap().is_empty());
        for bad in ["a1^", "", "a1**b1", "(a1", "a1)", "a1^x", "3"] {
            assert!(parse_word(bad).is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn equation_sexpr_round_trip() {
        let exps = vec![BigInt::from(0), BigInt::from(3), BigInt::from(-2), BigInt::from(2018)];
        let eq = Equation::from_exponents(exps, 2, BigInt::from(3), 2);
        assert!(eq.is_canonical());
        let text = eq.to_sexpr();
        let back = Equation::from_sexpr(&text).unwrap();
        assert_eq!(back.to_sexpr(), text);
        assert!(back.is_canonical());
        assert_eq!(back.rhs_exponent(), &BigInt::from(2 * 16 * 3));
        assert_eq!(back.exponents(), eq.exponents());
    }

    #[test]
    fn sexpr_rejects_garbage() {
        assert!(Equation::from_sexpr("(equation").is_err());
        assert!(Equation::from_sexpr("(foo)").is_err());
        assert!(Equation::from_sexpr("(equation (version 2))").is_err());
    }

    #[test]
    fn witness_requires_non_simple_report() {
        let report = SimplicityReport::Simple {
            witness_character: Character::trivial(0),
            primitive_direction: crate::lattice::RationalVector::zero(1),
        };
        assert_eq!(
            build_witness_equation(&report, 1, &BigInt::one(), 0, &BigInt::zero()).unwrap_err(),
            WordError::NotAWitness
        );
    }
}
