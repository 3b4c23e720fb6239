//! Concrete ambient groups: finite direct products of `D∞`, `ℤ` and `ℤ/k`,
//! the subgroup `Q` generated by squares, the quotient `C = G/Q` with its
//! action on `Q`, and the analysis of an embedded infinite dihedral
//! subgroup `H = ⟨h_b, h_a⟩`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::action::{ActionError, Character, Complement, InvolutionModule, SimplicityReport};
use crate::dihedral::{certify_no_solution, DihedralElement, DihedralError, InfiniteDihedral, NoSolutionCertificate};
use crate::lattice::{AbelianPresentation, IntMatrix, TorsionData};
use crate::words::{build_witness_equation, parse_word, x_variable, y_variable, CosetWords, Equation, Group, Program, SLWord, WordError};

/// Header value expected in the `format` key of a spec file.
pub const SPEC_FORMAT: &str = "dihedral-closure-spec/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    DInf,
    Zed,
    ZedMod(u64),
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::DInf => write!(f, "DInf"),
            Factor::Zed => write!(f, "Zed"),
            Factor::ZedMod(k) => write!(f, "ZedMod({k})"),
        }
    }
}

impl std::str::FromStr for Factor {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let t = s.trim();
        match t {
            "DInf" => Ok(Factor::DInf),
            "Zed" => Ok(Factor::Zed),
            _ => {
                let inner = t
                    .strip_prefix("ZedMod(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| SpecError::Parse(format!("unknown factor `{t}`")))?;
                let k: u64 = inner.trim().parse().map_err(|_| SpecError::Parse(format!("bad modulus in `{t}`")))?;
                if k == 0 {
                    return Err(SpecError::Parse("ZedMod modulus must be at least 1".into()));
                }
                Ok(Factor::ZedMod(k))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecViolation {
    NotAnInvolution,
    NotInfiniteOrder,
    NotInverted,
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecViolation::NotAnInvolution => write!(f, "b does not have order 2"),
            SpecViolation::NotInfiniteOrder => write!(f, "a does not have infinite order"),
            SpecViolation::NotInverted => write!(f, "b*a*b^-1 is not a^-1"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("spec parse error: {0}")]
    Parse(String),
    #[error("word `{word}`: {source}")]
    Word { word: String, source: WordError },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("invalid dihedral subgroup: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<SpecViolation>),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Dihedral(#[from] DihedralError),
    #[error("element is not in the subgroup generated by squares")]
    NotInQ,
    #[error("no square root with {0} squares per character")]
    NoSquareRoot(usize),
    #[error("a^2 is not simple")]
    NotSimple,
    #[error("the index-two subgroup is not abelian modulo the complement")]
    NonAbelianKernel,
    #[error("translation functional sends a to {0}, expected 1")]
    NormalizationFailure(BigInt),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    format: String,
    factors: Vec<String>,
    b: String,
    a: String,
}

/// Kind of a factor generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Translation generator of a `D∞` factor.
    A,
    /// Reflection generator of a `D∞` factor.
    B,
    /// Generator of a `ℤ` factor.
    T,
    /// Generator of a `ℤ/k` factor.
    C,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorInfo {
    pub name: String,
    pub factor: usize,
    pub kind: GeneratorKind,
}

/// The factor generators, in factor order with `a_i` before `b_i`. Numbers
/// count factors of the same kind: `DInf, Zed, DInf` has `a1 b1 t1 a2 b2`.
pub fn factor_generators(factors: &[Factor]) -> Vec<GeneratorInfo> {
    let (mut nd, mut nz, mut nm) = (0, 0, 0);
    let mut out = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        match f {
            Factor::DInf => {
                nd += 1;
                out.push(GeneratorInfo { name: format!("a{nd}"), factor: i, kind: GeneratorKind::A });
                out.push(GeneratorInfo { name: format!("b{nd}"), factor: i, kind: GeneratorKind::B });
            }
            Factor::Zed => {
                nz += 1;
                out.push(GeneratorInfo { name: format!("t{nz}"), factor: i, kind: GeneratorKind::T });
            }
            Factor::ZedMod(_) => {
                nm += 1;
                out.push(GeneratorInfo { name: format!("c{nm}"), factor: i, kind: GeneratorKind::C });
            }
        }
    }
    out
}

/// An ambient group `G` together with the generators `h_b`, `h_a` of `H`.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    factors: Vec<Factor>,
    b_text: String,
    a_text: String,
    b: SLWord,
    a: SLWord,
}

impl GroupSpec {
    pub fn new(factors: Vec<Factor>, b: &str, a: &str) -> Result<GroupSpec, SpecError> {
        let parse = |text: &str| parse_word(text).map_err(|source| SpecError::Word { word: text.to_string(), source });
        let spec = GroupSpec { b: parse(b)?, a: parse(a)?, b_text: b.to_string(), a_text: a.to_string(), factors };
        let names: Vec<String> = factor_generators(&spec.factors).into_iter().map(|g| g.name).collect();
        for w in [&spec.b, &spec.a] {
            if let Some(bad) = w.generators().into_iter().find(|g| !names.contains(g)) {
                return Err(SpecError::UnknownGenerator(bad));
            }
        }
        Ok(spec)
    }

    /// Parses the TOML spec format:
    ///
    /// ```text
    /// format = "dihedral-closure-spec/1"
    /// factors = ["DInf", "DInf"]
    /// b = "b1*b2"
    /// a = "a1^3*a2^5"
    /// ```
    pub fn parse(text: &str) -> Result<GroupSpec, SpecError> {
        let file: SpecFile = toml::from_str(text).map_err(|e| SpecError::Parse(e.message().to_string()))?;
        if file.format != SPEC_FORMAT {
            return Err(SpecError::Parse(format!("unsupported format `{}`, expected `{SPEC_FORMAT}`", file.format)));
        }
        let factors = file.factors.iter().map(|f| f.parse()).collect::<Result<Vec<Factor>, _>>()?;
        GroupSpec::new(factors, &file.b, &file.a)
    }

    /// Canonical text in the spec format.
    pub fn to_text(&self) -> String {
        let factors: Vec<String> = self.factors.iter().map(|f| format!("\"{f}\"")).collect();
        format!(
            "format = \"{SPEC_FORMAT}\"\nfactors = [{}]\nb = \"{}\"\na = \"{}\"\n",
            factors.join(", "),
            self.b_text,
            self.a_text
        )
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn b_text(&self) -> &str {
        &self.b_text
    }

    pub fn a_text(&self) -> &str {
        &self.a_text
    }

    pub fn group(&self) -> AmbientGroup {
        AmbientGroup::new(self.factors.clone())
    }

    pub fn h_b(&self) -> AmbientElement {
        self.group().evaluate(&self.b).expect("generators checked at construction")
    }

    pub fn h_a(&self) -> AmbientElement {
        self.group().evaluate(&self.a).expect("generators checked at construction")
    }
}

/// One coordinate of an element of `G`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Coord {
    D(DihedralElement),
    Z(BigInt),
    /// Residue in `[0, k)`.
    M(BigInt),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AmbientElement(pub Vec<Coord>);

impl fmt::Display for AmbientElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| match c {
                Coord::D(d) => d.to_string(),
                Coord::Z(k) | Coord::M(k) => k.to_string(),
            })
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `G` as a direct product of its factors.
#[derive(Clone, Debug)]
pub struct AmbientGroup {
    factors: Vec<Factor>,
    generators: Vec<GeneratorInfo>,
}

impl AmbientGroup {
    pub fn new(factors: Vec<Factor>) -> Self {
        let generators = factor_generators(&factors);
        AmbientGroup { factors, generators }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn generators(&self) -> &[GeneratorInfo] {
        &self.generators
    }

    pub fn generator(&self, name: &str) -> Option<AmbientElement> {
        let info = self.generators.iter().find(|g| g.name == name)?;
        Some(self.generator_element(info))
    }

    fn generator_element(&self, info: &GeneratorInfo) -> AmbientElement {
        let mut e = self.identity();
        e.0[info.factor] = match info.kind {
            GeneratorKind::A => Coord::D(DihedralElement::translation(1)),
            GeneratorKind::B => Coord::D(DihedralElement::reflection(0)),
            GeneratorKind::T => Coord::Z(BigInt::one()),
            GeneratorKind::C => match self.factors[info.factor] {
                Factor::ZedMod(k) => Coord::M(BigInt::one().mod_floor(&BigInt::from(k))),
                _ => unreachable!("c generators belong to ZedMod factors"),
            },
        };
        e
    }

    /// Value of a word in the factor generators.
    pub fn evaluate(&self, w: &SLWord) -> Result<AmbientElement, WordError> {
        crate::words::evaluate(w, self, |name| self.generator(name))
    }

    /// `g` as a word in the factor generators, `1` for the identity.
    pub fn to_word(&self, g: &AmbientElement) -> String {
        let mut parts = Vec::new();
        let power = |name: &str, k: &BigInt| if k.is_one() { name.to_string() } else { format!("{name}^{k}") };
        for info in &self.generators {
            match (info.kind, &g.0[info.factor]) {
                (GeneratorKind::A, Coord::D(d)) if !d.translation.is_zero() => parts.push(power(&info.name, &d.translation)),
                (GeneratorKind::B, Coord::D(d)) if d.flip => parts.push(info.name.clone()),
                (GeneratorKind::T, Coord::Z(k)) | (GeneratorKind::C, Coord::M(k)) if !k.is_zero() => parts.push(power(&info.name, k)),
                _ => {}
            }
        }
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    /// A random element with coordinates bounded by `bound`.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, bound: i64) -> AmbientElement {
        AmbientElement(
            self.factors
                .iter()
                .map(|f| match f {
                    Factor::DInf => Coord::D(DihedralElement::new(rng.gen_range(-bound..=bound), rng.gen_bool(0.5))),
                    Factor::Zed => Coord::Z(BigInt::from(rng.gen_range(-bound..=bound))),
                    Factor::ZedMod(k) => Coord::M(BigInt::from(rng.gen_range(0..*k))),
                })
                .collect(),
        )
    }
}

impl Group for AmbientGroup {
    type Elem = AmbientElement;

    fn identity(&self) -> AmbientElement {
        AmbientElement(
            self.factors
                .iter()
                .map(|f| match f {
                    Factor::DInf => Coord::D(DihedralElement::identity()),
                    Factor::Zed => Coord::Z(BigInt::zero()),
                    Factor::ZedMod(_) => Coord::M(BigInt::zero()),
                })
                .collect(),
        )
    }

    fn mul(&self, x: &AmbientElement, y: &AmbientElement) -> AmbientElement {
        AmbientElement(
            self.factors
                .iter()
                .zip(x.0.iter().zip(&y.0))
                .map(|(f, pair)| match (f, pair) {
                    (Factor::DInf, (Coord::D(p), Coord::D(q))) => Coord::D(InfiniteDihedral.mul(p, q)),
                    (Factor::Zed, (Coord::Z(p), Coord::Z(q))) => Coord::Z(p + q),
                    (Factor::ZedMod(k), (Coord::M(p), Coord::M(q))) => Coord::M((p + q).mod_floor(&BigInt::from(*k))),
                    _ => panic!("coordinate kinds do not match the factors"),
                })
                .collect(),
        )
    }

    fn inv(&self, x: &AmbientElement) -> AmbientElement {
        AmbientElement(
            self.factors
                .iter()
                .zip(&x.0)
                .map(|(f, c)| match (f, c) {
                    (Factor::DInf, Coord::D(p)) => Coord::D(InfiniteDihedral.inv(p)),
                    (Factor::Zed, Coord::Z(p)) => Coord::Z(-p),
                    (Factor::ZedMod(k), Coord::M(p)) => Coord::M((-p).mod_floor(&BigInt::from(*k))),
                    _ => panic!("coordinate kinds do not match the factors"),
                })
                .collect(),
        )
    }

    fn pow(&self, x: &AmbientElement, e: &BigInt) -> AmbientElement {
        AmbientElement(
            self.factors
                .iter()
                .zip(&x.0)
                .map(|(f, c)| match (f, c) {
                    (Factor::DInf, Coord::D(p)) => Coord::D(InfiniteDihedral.pow(p, e)),
                    (Factor::Zed, Coord::Z(p)) => Coord::Z(p * e),
                    (Factor::ZedMod(k), Coord::M(p)) => Coord::M((p * e).mod_floor(&BigInt::from(*k))),
                    _ => panic!("coordinate kinds do not match the factors"),
                })
                .collect(),
        )
    }
}

/// Checks that `h_b` has order 2, `h_a` has infinite order and
/// `h_b h_a h_b⁻¹ = h_a⁻¹`; returns every violation.
pub fn validate_spec(spec: &GroupSpec) -> Result<(), SpecError> {
    let g = spec.group();
    let hb = spec.h_b();
    let ha = spec.h_a();
    let mut violations = Vec::new();
    if hb == g.identity() || g.mul(&hb, &hb) != g.identity() {
        violations.push(SpecViolation::NotAnInvolution);
    }
    let infinite = ha.0.iter().any(|c| match c {
        Coord::D(d) => d.order().is_none(),
        Coord::Z(k) => !k.is_zero(),
        Coord::M(_) => false,
    });
    if !infinite {
        violations.push(SpecViolation::NotInfiniteOrder);
    }
    if g.mul(&g.mul(&hb, &ha), &g.inv(&hb)) != g.inv(&ha) {
        violations.push(SpecViolation::NotInverted);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(SpecError::Invalid(violations))
    }
}

/// Multiplicative order of 2 in `ℤ/k`, i.e. the order of `c²`.
fn square_order(k: u64) -> u64 {
    k / k.gcd(&2)
}

/// Coordinates on `Q` and `C = G/Q` for a product of factors.
///
/// `Q` has one coordinate per factor: `a_i²`, `t²` or `c²`. The raw
/// coordinates of `C` are the parities `(k mod 2, ε)` of a `D∞` factor,
/// `k mod 2` of a `ℤ` factor and `r mod 2` of a `ℤ/k` factor with `k` even.
#[derive(Clone, Debug)]
pub struct GroupLayout {
    group: AmbientGroup,
    raw_offsets: Vec<usize>,
    /// Indices into the generator list of the chosen coset representatives.
    d_indices: Vec<usize>,
    /// Echelon rows `(raw vector, combination of chosen generators)`.
    echelon: Vec<(u128, usize)>,
}

impl GroupLayout {
    pub fn new(factors: &[Factor]) -> Result<Self, ActionError> {
        let group = AmbientGroup::new(factors.to_vec());
        let mut raw_offsets = Vec::new();
        let mut raw_dim = 0;
        for f in factors {
            raw_offsets.push(raw_dim);
            raw_dim += match f {
                Factor::DInf => 2,
                Factor::Zed => 1,
                Factor::ZedMod(k) => usize::from(k % 2 == 0),
            };
        }
        if raw_dim > 128 {
            return Err(ActionError::RankTooLarge(raw_dim));
        }
        let mut layout = GroupLayout { group, raw_offsets, d_indices: Vec::new(), echelon: Vec::new() };
        for (i, info) in layout.group.generators.clone().iter().enumerate() {
            let v = layout.raw(&layout.group.generator_element(info));
            let (residual, comb) = layout.reduce(v);
            if residual != 0 {
                let j = layout.d_indices.len();
                layout.d_indices.push(i);
                layout.echelon.push((residual, comb ^ (1 << j)));
                layout.echelon.sort_by(|a, b| b.0.cmp(&a.0));
            }
        }
        if layout.d_indices.len() > crate::action::MAX_C_RANK {
            return Err(ActionError::RankTooLarge(layout.d_indices.len()));
        }
        Ok(layout)
    }

    pub fn group(&self) -> &AmbientGroup {
        &self.group
    }

    pub fn q_rank(&self) -> usize {
        self.group.factors.len()
    }

    pub fn c_rank(&self) -> usize {
        self.d_indices.len()
    }

    /// Names and values of the coset representatives `d_1..d_m`.
    pub fn c_generators(&self) -> Vec<(String, AmbientElement)> {
        self.d_indices
            .iter()
            .map(|&i| {
                let info = &self.group.generators[i];
                (info.name.clone(), self.group.generator_element(info))
            })
            .collect()
    }

    fn raw(&self, g: &AmbientElement) -> u128 {
        let mut v = 0u128;
        for (i, (f, c)) in self.group.factors.iter().zip(&g.0).enumerate() {
            let off = self.raw_offsets[i];
            match (f, c) {
                (Factor::DInf, Coord::D(d)) => {
                    if d.translation.is_odd() {
                        v |= 1 << off;
                    }
                    if d.flip {
                        v |= 1 << (off + 1);
                    }
                }
                (Factor::Zed, Coord::Z(k)) => {
                    if k.is_odd() {
                        v |= 1 << off;
                    }
                }
                (Factor::ZedMod(k), Coord::M(r)) => {
                    if k % 2 == 0 && r.is_odd() {
                        v |= 1 << off;
                    }
                }
                _ => panic!("coordinate kinds do not match the factors"),
            }
        }
        v
    }

    fn reduce(&self, mut v: u128) -> (u128, usize) {
        let mut comb = 0usize;
        for &(row, c) in &self.echelon {
            let top = 127 - row.leading_zeros();
            if (v >> top) & 1 == 1 {
                v ^= row;
                comb ^= c;
            }
        }
        (v, comb)
    }

    /// Mask of the image of `g` in `C` (bit `m-1-j` for `d_j`).
    pub fn c_mask(&self, g: &AmbientElement) -> usize {
        let (residual, comb) = self.reduce(self.raw(g));
        assert_eq!(residual, 0, "the chosen representatives generate C");
        let m = self.c_rank();
        (0..m).filter(|j| (comb >> j) & 1 == 1).fold(0, |acc, j| acc | 1 << (m - 1 - j))
    }

    /// Coordinates of `g` in `Q`, or `None` if `g ∉ Q`.
    pub fn q_coords(&self, g: &AmbientElement) -> Option<Vec<BigInt>> {
        self.group
            .factors
            .iter()
            .zip(&g.0)
            .map(|(f, c)| match (f, c) {
                (Factor::DInf, Coord::D(d)) => (!d.flip && d.translation.is_even()).then(|| &d.translation / 2),
                (Factor::Zed, Coord::Z(k)) => k.is_even().then(|| k / 2),
                (Factor::ZedMod(k), Coord::M(r)) => {
                    let k = BigInt::from(*k);
                    if k.is_odd() {
                        // 2 is invertible mod k
                        let half = (&k + 1u32) / 2u32;
                        Some((r * half).mod_floor(&k))
                    } else {
                        r.is_even().then(|| (r / 2u32).mod_floor(&(&k / 2u32)))
                    }
                }
                _ => panic!("coordinate kinds do not match the factors"),
            })
            .collect()
    }

    /// The element of `Q` with the given coordinates.
    pub fn q_element(&self, v: &[BigInt]) -> AmbientElement {
        AmbientElement(self.group.factors.iter().zip(v).map(|(f, x)| root_coord(f, x, 2)).collect())
    }

    /// An element whose square is the element of `Q` with coordinates `v`.
    pub fn square_root(&self, v: &[BigInt]) -> AmbientElement {
        AmbientElement(self.group.factors.iter().zip(v).map(|(f, x)| root_coord(f, x, 1)).collect())
    }

    pub fn relations(&self) -> IntMatrix {
        let n = self.q_rank();
        let rows: Vec<Vec<BigInt>> = self
            .group
            .factors
            .iter()
            .enumerate()
            .filter_map(|(i, f)| match f {
                Factor::ZedMod(k) => {
                    let mut r = vec![BigInt::zero(); n];
                    r[i] = BigInt::from(square_order(*k));
                    Some(r)
                }
                _ => None,
            })
            .collect();
        IntMatrix::from_rows(n, &rows)
    }
}

/// Coordinate `factor generator^(scale·x)`.
fn root_coord(f: &Factor, x: &BigInt, scale: u32) -> Coord {
    let e = x * scale;
    match f {
        Factor::DInf => Coord::D(DihedralElement::translation(e)),
        Factor::Zed => Coord::Z(e),
        Factor::ZedMod(k) => Coord::M(e.mod_floor(&BigInt::from(*k))),
    }
}

/// `Q`, `C` and the action, extracted from a spec.
#[derive(Clone, Debug)]
pub struct SquareData {
    pub layout: GroupLayout,
    pub module: InvolutionModule,
    pub coset_words: CosetWords,
}

impl SquareData {
    pub fn c_generators(&self) -> Vec<(String, AmbientElement)> {
        self.layout.c_generators()
    }
}

/// Builds `Q` and the action of `C` on it by conjugating the `Q`
/// generators with the coset representatives.
pub fn square_data(spec: &GroupSpec) -> Result<SquareData, AnalysisError> {
    let layout = GroupLayout::new(spec.factors())?;
    let g = layout.group();
    let n = layout.q_rank();
    let q_gens: Vec<AmbientElement> = (0..n)
        .map(|i| {
            let mut v = vec![BigInt::zero(); n];
            v[i] = BigInt::one();
            layout.q_element(&v)
        })
        .collect();
    let mut actions = Vec::new();
    for (_, d) in layout.c_generators() {
        let d_inv = g.inv(&d);
        let columns = q_gens
            .iter()
            .map(|q| layout.q_coords(&g.mul(&g.mul(&d, q), &d_inv)).ok_or(AnalysisError::NotInQ))
            .collect::<Result<Vec<_>, _>>()?;
        actions.push(IntMatrix::from_columns(n, &columns));
    }
    let group = AbelianPresentation::new(n, layout.relations()).map_err(|e| AnalysisError::Inconsistent(e.to_string()))?;
    let module = InvolutionModule::new(group, actions)?;
    let names: Vec<String> = (1..=layout.c_rank()).map(x_variable).collect();
    let coset_words = CosetWords::with_names(&names);
    Ok(SquareData { layout, module, coset_words })
}

/// `Q`-coordinates of `h_a²`.
pub fn image_of_a_squared(spec: &GroupSpec, data: &SquareData) -> Result<Vec<BigInt>, AnalysisError> {
    let g = data.layout.group();
    let ha = spec.h_a();
    data.layout.q_coords(&g.mul(&ha, &ha)).ok_or(AnalysisError::NotInQ)
}

/// Options for [`analyze`].
#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// Squares per character in the witness equation; default
    /// `free_rank(Q) + 1`.
    pub squares: Option<usize>,
    /// Exponent for characters whose component vanishes.
    pub filler: BigInt,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { squares: None, filler: BigInt::zero() }
    }
}

pub type Assignment = BTreeMap<String, AmbientElement>;

#[derive(Clone, Debug)]
pub enum Verdict {
    Retract(RetractionData),
    NotVerballyClosed { equation: Equation, g_solution: Assignment, certificate: NoSolutionCertificate },
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Retract(_) => "Retract",
            Verdict::NotVerballyClosed { .. } => "NotVerballyClosed",
        }
    }
}

/// Everything computed for a spec.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub data: SquareData,
    pub a_squared: Vec<BigInt>,
    pub report: SimplicityReport,
    pub verdict: Verdict,
}

/// Decides whether `H` is a retract (then verbally closed) or not verbally
/// closed, with the corresponding evidence.
pub fn analyze(spec: &GroupSpec, options: &AnalysisOptions) -> Result<Analysis, AnalysisError> {
    validate_spec(spec)?;
    let data = square_data(spec)?;
    let a_squared = image_of_a_squared(spec, &data)?;
    let report = data.module.is_simple(&a_squared)?;
    let verdict = match &report {
        SimplicityReport::Simple { witness_character, .. } => {
            Verdict::Retract(build_retraction(spec, &data, &a_squared, witness_character)?)
        }
        SimplicityReport::NotSimple { .. } => {
            let squares = options.squares.unwrap_or(data.module.free_rank() + 1);
            let equation = build_witness_equation(
                &report,
                squares,
                data.module.group().torsion_order(),
                data.layout.c_rank(),
                &options.filler,
            )?;
            let g_solution = g_solution(&equation, &data, &report)?;
            let certificate = certify_no_solution(&equation)?;
            Verdict::NotVerballyClosed { equation, g_solution, certificate }
        }
    };
    Ok(Analysis { data, a_squared, report, verdict })
}

/// A solution of the witness equation in `G`: `x_j = d_j` and, for each
/// character, `y_{χ,1}` a square root of `q(χ)`, the other `y`s trivial.
pub fn g_solution(eq: &Equation, data: &SquareData, report: &SimplicityReport) -> Result<Assignment, AnalysisError> {
    let SimplicityReport::NotSimple { components } = report else {
        return Err(WordError::NotAWitness.into());
    };
    if eq.squares() == 0 {
        return Err(AnalysisError::NoSquareRoot(0));
    }
    let g = data.layout.group();
    let mut out = Assignment::new();
    for (j, (_, d)) in data.c_generators().into_iter().enumerate() {
        out.insert(x_variable(j + 1), d);
    }
    for (idx, c) in components.iter().enumerate() {
        let root = if c.k.is_zero() { g.identity() } else { data.layout.square_root(&c.q_of_chi) };
        out.insert(y_variable(idx, 1), root);
        for i in 2..=eq.squares() {
            out.insert(y_variable(idx, i), g.identity());
        }
    }
    Ok(out)
}

/// Whether the assignment solves `eq` in `G`, the right side read as
/// `h_a^{rhs exponent}`.
pub fn verify_solution_in_g(eq: &Equation, assignment: &Assignment, spec: &GroupSpec) -> Result<bool, WordError> {
    let g = spec.group();
    let lhs = Program::compile(eq.lhs()).evaluate(&g, |name| assignment.get(name).cloned())?;
    let rhs = g.pow(&spec.h_a(), eq.rhs_exponent());
    Ok(lhs == rhs)
}

/// A retraction `ρ: G → H` built from an invariant complement of `⟨a²⟩`.
///
/// With `σ` the sign character and `τ` the functional on `Q` vanishing on
/// the complement `M` with `τ(a²) = 1`, the index-two subgroup
/// `K = ker σ` maps to `ℤ` by `t(g) = τ(g²)`, and
/// `ρ(g) = a^{t(g)}` on `K`, `ρ(g) = b·a^{t(b g)}` off `K`.
#[derive(Clone, Debug)]
pub struct RetractionData {
    pub complement: Complement,
    pub sign_character: Character,
    pub torsion: TorsionData,
    layout: GroupLayout,
    h_b: AmbientElement,
    h_a: AmbientElement,
}

impl RetractionData {
    /// `τ` on `Q`-coordinates.
    pub fn translation_functional(&self) -> &[BigInt] {
        &self.complement.functional
    }

    pub fn complement_basis(&self) -> &[Vec<BigInt>] {
        &self.complement.generators
    }

    pub fn sign(&self, g: &AmbientElement) -> i32 {
        self.sign_character.value(self.layout.c_mask(g))
    }

    /// `t(g) = τ(g²)` for `g` in the index-two subgroup.
    fn t(&self, g: &AmbientElement) -> BigInt {
        let grp = self.layout.group();
        let sq = self.layout.q_coords(&grp.mul(g, g)).expect("squares lie in Q");
        self.complement.evaluate(&sq)
    }

    /// `ρ(g)` as `h_a^k h_b^ε`.
    pub fn apply(&self, g: &AmbientElement) -> DihedralElement {
        if self.sign(g) == 1 {
            DihedralElement::translation(self.t(g))
        } else {
            let grp = self.layout.group();
            // b·a^t = a^{-t}·b
            DihedralElement::reflection(-self.t(&grp.mul(&self.h_b, g)))
        }
    }

    /// `ρ(g)` as an element of `G`.
    pub fn apply_in_g(&self, g: &AmbientElement) -> AmbientElement {
        self.embed(&self.apply(g))
    }

    /// `h_a^k h_b^ε` in `G`.
    pub fn embed(&self, h: &DihedralElement) -> AmbientElement {
        let grp = self.layout.group();
        let t = grp.pow(&self.h_a, &h.translation);
        if h.flip {
            grp.mul(&t, &self.h_b)
        } else {
            t
        }
    }

    pub fn verify<R: Rng + ?Sized>(&self, spec: &GroupSpec, samples: usize, bound: i64, rng: &mut R) -> RetractionCheck {
        verify_retraction(&|g| self.apply_in_g(g), spec, samples, bound, rng)
    }
}

/// Builds the retraction for a simple `a²` with witness character `chi`.
pub fn build_retraction(
    spec: &GroupSpec,
    data: &SquareData,
    q_vec: &[BigInt],
    chi: &Character,
) -> Result<RetractionData, AnalysisError> {
    let complement = data.module.complement(q_vec, chi).map_err(|e| match e {
        ActionError::NotSimple => AnalysisError::NotSimple,
        other => other.into(),
    })?;
    if !complement.verify(&data.module, q_vec) {
        return Err(AnalysisError::Inconsistent("complement is not an invariant direct summand".into()));
    }
    let rho = RetractionData {
        complement,
        sign_character: *chi,
        torsion: TorsionData { torsion_order: BigInt::one(), invariant_factors: vec![], free_rank: 1 },
        layout: data.layout.clone(),
        h_b: spec.h_b(),
        h_a: spec.h_a(),
    };
    let grp = data.layout.group();
    if rho.sign(&rho.h_b) != -1 || rho.sign(&rho.h_a) != 1 {
        return Err(AnalysisError::Inconsistent("sign character does not separate a and b".into()));
    }
    let t_a = rho.t(&rho.h_a);
    if !t_a.is_one() {
        return Err(AnalysisError::NormalizationFailure(t_a));
    }

    // K = ker σ is generated by the Schreier generators over {1, h_b}; it
    // must be abelian modulo M.
    let hb = &rho.h_b;
    let schreier: Vec<AmbientElement> = grp
        .generators()
        .iter()
        .flat_map(|info| {
            let s = grp.generator_element(info);
            if rho.sign(&s) == 1 {
                vec![s.clone(), grp.mul(&grp.mul(hb, &s), hb)]
            } else {
                vec![grp.mul(&s, hb), grp.mul(hb, &s)]
            }
        })
        .collect();
    for x in &schreier {
        for y in &schreier {
            let comm = grp.mul(&grp.mul(x, y), &grp.inv(&grp.mul(y, x)));
            let coords = data.layout.q_coords(&comm).ok_or(AnalysisError::NonAbelianKernel)?;
            if !rho.complement.evaluate(&coords).is_zero() {
                return Err(AnalysisError::NonAbelianKernel);
            }
        }
    }

    // The torsion N of K/M: one element per coset of ker χ ⊆ C on which t
    // is even. It must be elementary abelian of order |C|/4.
    let m = data.layout.c_rank();
    let lifts: Vec<AmbientElement> = (0..1usize << m)
        .map(|e| {
            let word = data.coset_words.word(e);
            let reps: BTreeMap<String, AmbientElement> =
                data.c_generators().into_iter().enumerate().map(|(j, (_, d))| (x_variable(j + 1), d)).collect();
            crate::words::evaluate_map(word, grp, &reps).expect("coset words use x variables only")
        })
        .collect();
    let n_order = (0..1usize << m).filter(|&e| chi.value(e) == 1 && rho.t(&lifts[e]).is_even()).count();
    if m < 2 || n_order != 1usize << (m - 2) {
        return Err(AnalysisError::Inconsistent(format!("finite normal subgroup has order {n_order}, expected 2^{}", m.saturating_sub(2))));
    }
    let rank2 = m - 2;
    let rho = RetractionData {
        torsion: TorsionData {
            torsion_order: BigInt::one() << rank2,
            invariant_factors: vec![BigInt::from(2); rank2],
            free_rank: 1,
        },
        ..rho
    };
    Ok(rho)
}

/// Outcome of [`verify_retraction`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetractionCheck {
    pub fixes_h: bool,
    pub homomorphism: bool,
    pub idempotent: bool,
    pub samples: usize,
}

impl RetractionCheck {
    pub fn passed(&self) -> bool {
        self.fixes_h && self.homomorphism && self.idempotent
    }
}

/// Checks `ρ(h_b) = h_b`, `ρ(h_a) = h_a` exactly and, over `samples` random
/// pairs with coordinates bounded by `bound`, `ρ(gh) = ρ(g)ρ(h)` and
/// `ρ(ρ(g)) = ρ(g)`.
pub fn verify_retraction<R: Rng + ?Sized>(
    rho: &dyn Fn(&AmbientElement) -> AmbientElement,
    spec: &GroupSpec,
    samples: usize,
    bound: i64,
    rng: &mut R,
) -> RetractionCheck {
    let grp = spec.group();
    let (hb, ha) = (spec.h_b(), spec.h_a());
    let fixes_h = rho(&hb) == hb && rho(&ha) == ha;
    let mut homomorphism = true;
    let mut idempotent = true;
    for _ in 0..samples {
        let g = grp.random_element(rng, bound);
        let h = grp.random_element(rng, bound);
        let (rg, rh) = (rho(&g), rho(&h));
        if rho(&grp.mul(&g, &h)) != grp.mul(&rg, &rh) {
            homomorphism = false;
        }
        if rho(&rg) != rg {
            idempotent = false;
        }
        if !homomorphism && !idempotent {
            break;
        }
    }
    RetractionCheck { fixes_h, homomorphism, idempotent, samples }
}

/// Coordinates of `h` written as `h_a^k h_b^ε`, for elements of `H`.
pub fn h_coordinates(spec: &GroupSpec, h: &AmbientElement) -> Option<DihedralElement> {
    // solve factor-wise on one coordinate where h_a has infinite order
    let grp = spec.group();
    let (hb, ha) = (spec.h_b(), spec.h_a());
    let (i, step) = ha.0.iter().enumerate().find_map(|(i, c)| match c {
        Coord::D(d) if d.order().is_none() => Some((i, d.translation.clone())),
        Coord::Z(k) if !k.is_zero() => Some((i, k.clone())),
        _ => None,
    })?;
    for flip in [false, true] {
        let rest = if flip { grp.mul(h, &hb) } else { h.clone() };
        let value = match &rest.0[i] {
            Coord::D(d) if !d.flip => d.translation.clone(),
            Coord::Z(k) => k.clone(),
            _ => continue,
        };
        if !value.is_multiple_of(&step) {
            continue;
        }
        let k = &value / &step;
        if grp.pow(&ha, &k) == rest {
            return Some(DihedralElement::new(k, flip));
        }
    }
    None
}

/// Small helper used by reports: the exponent as `i64` when it fits.
pub fn small(v: &BigInt) -> Option<i64> {
    v.to_i64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::enumerate_characters;
    use crate::dihedral::spot_check_no_solution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(factors: &[Factor], b: &str, a: &str) -> GroupSpec {
        GroupSpec::new(factors.to_vec(), b, a).unwrap()
    }

    fn two_dihedral(a: &str) -> GroupSpec {
        spec(&[Factor::DInf, Factor::DInf], "b1*b2", a)
    }

    #[test]
    fn parse_spec_file() {
        let text = "format = \"dihedral-closure-spec/1\"\nfactors = [\"DInf\", \"DInf\", \"ZedMod(3)\"]\nb = \"b1*b2\"\na = \"a1^3*a2^5\"\n";
        let s = GroupSpec::parse(text).unwrap();
        assert_eq!(s.factors(), &[Factor::DInf, Factor::DInf, Factor::ZedMod(3)]);
        assert_eq!(s.to_text(), text);
        assert!(matches!(GroupSpec::parse("factors = []"), Err(SpecError::Parse(_))));
        let bad = text.replace("a1^3*a2^5", "a1^");
        assert!(matches!(GroupSpec::parse(&bad), Err(SpecError::Word { .. })));
        let bad = text.replace("a1^3*a2^5", "a3");
        assert_eq!(GroupSpec::parse(&bad).unwrap_err(), SpecError::UnknownGenerator("a3".into()));
        let bad = text.replace("ZedMod(3)", "ZedMod(0)");
        assert!(GroupSpec::parse(&bad).is_err());
    }

    #[test]
    fn generator_numbering() {
        let names: Vec<String> =
            factor_generators(&[Factor::DInf, Factor::Zed, Factor::DInf, Factor::ZedMod(4)]).into_iter().map(|g| g.name).collect();
        assert_eq!(names, ["a1", "b1", "t1", "a2", "b2", "c1"]);
    }

    #[test]
    fn validation() {
        assert!(validate_spec(&two_dihedral("a1^3*a2^5")).is_ok());
        let err = validate_spec(&spec(&[Factor::DInf], "b1", "b1")).unwrap_err();
        assert_eq!(err, SpecError::Invalid(vec![SpecViolation::NotInfiniteOrder]));
        let err = validate_spec(&spec(&[Factor::DInf], "a1", "a1")).unwrap_err();
        let SpecError::Invalid(v) = err else { panic!() };
        assert!(v.contains(&SpecViolation::NotAnInvolution));
        let err = validate_spec(&spec(&[Factor::DInf, Factor::Zed], "b1", "a1*t1")).unwrap_err();
        assert_eq!(err, SpecError::Invalid(vec![SpecViolation::NotInverted]));
    }

    #[test]
    fn square_data_examples() {
        let s = two_dihedral("a1^3*a2^5");
        let data = square_data(&s).unwrap();
        assert_eq!(data.module.c_rank(), 4);
        assert_eq!(data.module.free_rank(), 2);
        let names: Vec<String> = data.c_generators().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["a1", "b1", "a2", "b2"]);
        let nontrivial = enumerate_characters(4).into_iter().filter(|c| data.module.fixed_sublattice(c).rank() > 0).count();
        assert_eq!(nontrivial, 2);
        assert_eq!(image_of_a_squared(&s, &data).unwrap(), vec![BigInt::from(3), BigInt::from(5)]);

        let z = spec(&[Factor::Zed, Factor::DInf], "b1", "a1");
        let data = square_data(&z).unwrap();
        assert_eq!(data.module.c_rank(), 3);
        assert!(data.module.actions()[0].is_unimodular());
        assert_eq!(data.module.actions()[0], IntMatrix::identity(2));

        let m3 = spec(&[Factor::ZedMod(3), Factor::DInf], "b1", "a1");
        let data = square_data(&m3).unwrap();
        assert_eq!(data.module.c_rank(), 2);
        assert_eq!(data.module.group().torsion_order(), &BigInt::from(3));
    }

    #[test]
    fn squares_lie_in_q_and_actions_match_conjugation() {
        let s = spec(&[Factor::DInf, Factor::Zed, Factor::ZedMod(4), Factor::ZedMod(3), Factor::DInf], "b1*b2", "a1*a2");
        let data = square_data(&s).unwrap();
        let g = data.layout.group();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = g.random_element(&mut rng, 20);
            let sq = g.mul(&x, &x);
            let v = data.layout.q_coords(&sq).expect("square in Q");
            assert_eq!(data.layout.q_element(&v), sq);
            assert_eq!(data.layout.c_mask(&sq), 0);
            let root = data.layout.square_root(&v);
            assert_eq!(g.mul(&root, &root), sq);
        }
        for (j, (_, d)) in data.c_generators().iter().enumerate() {
            for i in 0..data.layout.q_rank() {
                let mut v = vec![BigInt::zero(); data.layout.q_rank()];
                v[i] = BigInt::one();
                let q = data.layout.q_element(&v);
                let conj = g.mul(&g.mul(d, &q), &g.inv(d));
                let moved = data.module.actions()[j].mul_vec(&v);
                assert_eq!(data.layout.q_element(&moved), conj);
            }
            assert_eq!(data.layout.c_mask(d), 1 << (data.layout.c_rank() - 1 - j));
        }
    }

    #[test]
    fn two_factor_example_is_not_verbally_closed() {
        let s = two_dihedral("a1^3*a2^5");
        let analysis = analyze(&s, &AnalysisOptions::default()).unwrap();
        let Verdict::NotVerballyClosed { equation, g_solution, certificate } = &analysis.verdict else {
            panic!("expected a witness")
        };
        assert_eq!(equation.rhs_exponent(), &(BigInt::one() << 17));
        assert_eq!(equation.exponents()[0b0100], BigInt::from(3));
        assert_eq!(equation.exponents()[0b0001], BigInt::from(5));
        assert!(verify_solution_in_g(equation, g_solution, &s).unwrap());
        assert!(certificate.verify(equation));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(spot_check_no_solution(equation, 50, 2000, &mut rng));
    }

    #[test]
    fn named_assignment_and_perturbations() {
        let s = two_dihedral("a1^3*a2^5");
        let analysis = analyze(&s, &AnalysisOptions { squares: Some(1), filler: BigInt::zero() }).unwrap();
        let Verdict::NotVerballyClosed { equation, .. } = &analysis.verdict else { panic!() };
        let g = s.group();
        let mut asg = Assignment::new();
        for (x, name) in ["a1", "b1", "a2", "b2"].iter().enumerate() {
            asg.insert(x_variable(x + 1), g.generator(name).unwrap());
        }
        for idx in 0..16 {
            asg.insert(y_variable(idx, 1), g.identity());
        }
        asg.insert(y_variable(0b0100, 1), g.generator("a1").unwrap());
        asg.insert(y_variable(0b0001, 1), g.generator("a2").unwrap());
        assert!(verify_solution_in_g(equation, &asg, &s).unwrap());

        let mut wrong = asg.clone();
        wrong.insert(y_variable(0b0100, 1), g.generator("a2").unwrap());
        assert!(!verify_solution_in_g(equation, &wrong, &s).unwrap());
        let trivial: Assignment = asg.keys().map(|k| (k.clone(), g.identity())).collect();
        assert!(!verify_solution_in_g(equation, &trivial, &s).unwrap());
        let mut missing = asg.clone();
        missing.remove("x1");
        assert!(verify_solution_in_g(equation, &missing, &s).is_err());
    }

    #[test]
    fn projection_retraction() {
        let s = spec(&[Factor::DInf, Factor::DInf], "b1", "a1");
        let analysis = analyze(&s, &AnalysisOptions::default()).unwrap();
        let Verdict::Retract(rho) = &analysis.verdict else { panic!("expected a retraction") };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(rho.verify(&s, 500, 100, &mut rng).passed());
        let g = s.group();
        assert!(rho.apply(&g.generator("a2").unwrap()).is_identity());
        assert!(rho.apply(&g.generator("b2").unwrap()).is_identity());
        assert_eq!(rho.torsion.torsion_order, BigInt::from(4));

        // the trivial map is not a retraction
        let trivial = verify_retraction(&|_| g.identity(), &s, 10, 10, &mut rng);
        assert!(!trivial.fixes_h);
    }

    #[test]
    fn simple_specs_retract() {
        let cases = [
            spec(&[Factor::DInf, Factor::DInf], "b1*b2", "a1*a2^5"),
            spec(&[Factor::DInf, Factor::Zed], "b1", "a1"),
            spec(&[Factor::DInf, Factor::ZedMod(3)], "b1*c1^3", "a1"),
            spec(&[Factor::DInf, Factor::ZedMod(4)], "b1*c1^2", "a1"),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in &cases {
            let analysis = analyze(s, &AnalysisOptions::default()).unwrap();
            let Verdict::Retract(rho) = &analysis.verdict else { panic!("{} should retract", s.to_text()) };
            let check = rho.verify(s, 300, 50, &mut rng);
            assert!(check.passed(), "{}: {check:?}", s.to_text());
        }
        let s = &cases[1];
        let Verdict::Retract(rho) = analyze(s, &AnalysisOptions::default()).unwrap().verdict else { panic!() };
        assert!(rho.apply(&s.group().generator("t1").unwrap()).is_identity());
    }

    #[test]
    fn torsion_witness() {
        let s = spec(&[Factor::DInf, Factor::DInf, Factor::ZedMod(3)], "b1*b2", "a1^3*a2^5");
        let analysis = analyze(&s, &AnalysisOptions::default()).unwrap();
        let Verdict::NotVerballyClosed { equation, g_solution, certificate } = &analysis.verdict else { panic!() };
        assert_eq!(equation.torsion_order(), &BigInt::from(3));
        assert_eq!(equation.rhs_exponent(), &(BigInt::from(3) << 17));
        assert!(verify_solution_in_g(equation, g_solution, &s).unwrap());
        assert!(certificate.verify(equation));
    }

    #[test]
    fn words_of_elements_round_trip() {
        let g = AmbientGroup::new(vec![Factor::DInf, Factor::Zed, Factor::ZedMod(4)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = g.random_element(&mut rng, 9);
            let w = parse_word(&g.to_word(&x)).unwrap();
            assert_eq!(g.evaluate(&w).unwrap(), x);
        }
        assert_eq!(g.to_word(&g.identity()), "1");
    }

    #[test]
    fn h_coordinates_round_trip() {
        let s = two_dihedral("a1^3*a2^5");
        let g = s.group();
        let h = g.mul(&g.pow(&s.h_a(), &BigInt::from(-4)), &s.h_b());
        assert_eq!(h_coordinates(&s, &h), Some(DihedralElement::reflection(-4)));
        assert_eq!(h_coordinates(&s, &g.generator("a1").unwrap()), None);
    }
}
