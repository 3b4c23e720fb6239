//! Modules over finite elementary abelian 2-groups.
//!
//! `C ≅ (ℤ/2)^m` acts on a finitely generated abelian group `Q = ℤ^n / L`
//! through one integer matrix per generator. Rational computations happen in
//! the torsion-free quotient `F = Q / T(Q) ≅ ℤ^f` (see
//! [`AbelianPresentation::to_free_matrix`]); when `L = 0` its coordinates are
//! the ambient ones.
//!
//! Elements of `C` are indexed by masks: bit `m-1-j` is the exponent of
//! generator `j`, so the natural order of masks is the lexicographic order
//! of exponent tuples. Characters use the same encoding with a set bit
//! meaning sign `-1`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::lattice::{integer_kernel, solve_integer_system, AbelianPresentation, IntMatrix, Lattice, RationalVector};
use crate::words::{build_w_chi_at, Group, Program, SLWord};

/// Largest supported number of generators of C.
pub const MAX_C_RANK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("action matrix {index} is {rows}x{cols}, expected {n}x{n}")]
    BadShape { index: usize, rows: usize, cols: usize, n: usize },
    #[error("action matrix {0} does not preserve the relation lattice")]
    DoesNotPreserveRelations(usize),
    #[error("action matrix {0} does not square to the identity on Q")]
    NotInvolution(usize),
    #[error("action matrices {0} and {1} do not commute on Q")]
    NotCommuting(usize, usize),
    #[error("C has rank {0}, above the supported maximum {MAX_C_RANK}")]
    RankTooLarge(usize),
    #[error("vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("character has rank {found}, expected {expected}")]
    CharacterRank { expected: usize, found: usize },
    #[error("the given images do not generate the target group")]
    NotEpimorphism,
    #[error("the module is not decomposable")]
    NotDecomposable,
    #[error("the element is not simple for the given character")]
    NotSimple,
}

/// A homomorphism `C → {±1}`, stored as a sign mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Character {
    rank: usize,
    mask: usize,
}

impl Character {
    pub fn trivial(rank: usize) -> Self {
        Character { rank, mask: 0 }
    }

    /// Character from its enumeration index.
    pub fn from_index(rank: usize, index: usize) -> Self {
        assert!(rank <= MAX_C_RANK && index < (1usize << rank), "character index out of range");
        Character { rank, mask: index }
    }

    /// Character from one sign (`±1`) per generator.
    pub fn from_signs(signs: &[i32]) -> Self {
        let rank = signs.len();
        let mut mask = 0;
        for (j, &s) in signs.iter().enumerate() {
            assert!(s == 1 || s == -1, "signs are ±1");
            if s == -1 {
                mask |= 1 << (rank - 1 - j);
            }
        }
        Character { rank, mask }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Position in [`enumerate_characters`].
    pub fn index(&self) -> usize {
        self.mask
    }

    pub fn sign(&self, generator: usize) -> i32 {
        if (self.mask >> (self.rank - 1 - generator)) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self) -> Vec<i32> {
        (0..self.rank).map(|j| self.sign(j)).collect()
    }

    /// Value on the element with the given mask.
    pub fn value(&self, element: usize) -> i32 {
        if (self.mask & element).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.mask == 0
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.signs().iter().map(|&v| if v == 1 { "+" } else { "-" }).collect();
        write!(f, "({})", s.join(","))
    }
}

/// All `2^m` characters, lexicographic on sign vectors with `+1 < -1`.
pub fn enumerate_characters(m: usize) -> Vec<Character> {
    assert!(m <= MAX_C_RANK, "C rank too large");
    (0..1usize << m).map(|i| Character::from_index(m, i)).collect()
}

/// Rank over GF(2) of a set of masks.
pub fn gf2_rank(masks: &[usize]) -> usize {
    let mut basis: Vec<usize> = Vec::new();
    for &m in masks {
        let mut v = m;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// `Q = ℤ^n / L` with commuting involutive actions of the generators of C.
#[derive(Clone, Debug)]
pub struct InvolutionModule {
    group: AbelianPresentation,
    actions: Vec<IntMatrix>,
    free_actions: Vec<IntMatrix>,
    free_elements: Vec<IntMatrix>,
}

impl InvolutionModule {
    pub fn new(group: AbelianPresentation, actions: Vec<IntMatrix>) -> Result<Self, ActionError> {
        let n = group.rank_ambient();
        let m = actions.len();
        if m > MAX_C_RANK {
            return Err(ActionError::RankTooLarge(m));
        }
        for (index, a) in actions.iter().enumerate() {
            if a.rows() != n || a.cols() != n {
                return Err(ActionError::BadShape { index, rows: a.rows(), cols: a.cols(), n });
            }
        }
        for (index, a) in actions.iter().enumerate() {
            if group.relation_basis().iter().any(|r| !group.is_zero(&a.mul_vec(r))) {
                return Err(ActionError::DoesNotPreserveRelations(index));
            }
        }
        let unit = |i: usize| -> Vec<BigInt> { (0..n).map(|k| if k == i { BigInt::one() } else { BigInt::zero() }).collect() };
        for (index, a) in actions.iter().enumerate() {
            if (0..n).any(|i| !group.equal(&a.mul_vec(&a.mul_vec(&unit(i))), &unit(i))) {
                return Err(ActionError::NotInvolution(index));
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                let ab = actions[i].mul(&actions[j]);
                let ba = actions[j].mul(&actions[i]);
                if (0..n).any(|k| !group.equal(&ab.column(k), &ba.column(k))) {
                    return Err(ActionError::NotCommuting(i, j));
                }
            }
        }
        let p = group.to_free_matrix();
        let s = group.lift_matrix();
        let free_actions: Vec<IntMatrix> = actions.iter().map(|a| p.mul(a).mul(s)).collect();
        let f = group.free_rank();
        let mut free_elements = Vec::with_capacity(1 << m);
        free_elements.push(IntMatrix::identity(f));
        for e in 1..1usize << m {
            // strip the lowest set bit: e = rest + bit(m-1-j)
            let low = e.trailing_zeros() as usize;
            let j = m - 1 - low;
            let rest = e & (e - 1);
            let prev = free_elements[rest].clone();
            free_elements.push(free_actions[j].mul(&prev));
        }
        Ok(InvolutionModule { group, actions, free_actions, free_elements })
    }

    pub fn group(&self) -> &AbelianPresentation {
        &self.group
    }

    pub fn actions(&self) -> &[IntMatrix] {
        &self.actions
    }

    /// Action matrices on `F = Q / T(Q)`.
    pub fn free_actions(&self) -> &[IntMatrix] {
        &self.free_actions
    }

    /// Matrix of the element with the given mask on `F`.
    pub fn free_element_matrix(&self, element: usize) -> &IntMatrix {
        &self.free_elements[element]
    }

    pub fn c_rank(&self) -> usize {
        self.actions.len()
    }

    pub fn c_order(&self) -> usize {
        1 << self.c_rank()
    }

    pub fn rank_ambient(&self) -> usize {
        self.group.rank_ambient()
    }

    pub fn free_rank(&self) -> usize {
        self.group.free_rank()
    }

    /// Action of the element with mask `element` on `v`, reduced mod L.
    pub fn act(&self, element: usize, v: &[BigInt]) -> Vec<BigInt> {
        let m = self.c_rank();
        let mut out = v.to_vec();
        for j in 0..m {
            if (element >> (m - 1 - j)) & 1 == 1 {
                out = self.actions[j].mul_vec(&out);
            }
        }
        self.group.normalize(&out)
    }

    fn check_vector(&self, q: &[BigInt]) -> Result<(), ActionError> {
        if q.len() != self.rank_ambient() {
            return Err(ActionError::DimensionMismatch { expected: self.rank_ambient(), found: q.len() });
        }
        Ok(())
    }

    fn check_character(&self, chi: &Character) -> Result<(), ActionError> {
        if chi.rank() != self.c_rank() {
            return Err(ActionError::CharacterRank { expected: self.c_rank(), found: chi.rank() });
        }
        Ok(())
    }

    /// `2^{-|C|} ∏_{c∈C} (I + χ(c) A_c) x` for `x ∈ ℤ^f`.
    pub fn project_free(&self, x: &[BigInt], chi: &Character) -> RationalVector {
        let mut y = x.to_vec();
        for (e, a) in self.free_elements.iter().enumerate() {
            let ay = a.mul_vec(&y);
            if chi.value(e) == 1 {
                y.iter_mut().zip(ay).for_each(|(s, t)| *s += t);
            } else {
                y.iter_mut().zip(ay).for_each(|(s, t)| *s -= t);
            }
        }
        let denom = BigRational::new(BigInt::one(), BigInt::one() << self.c_order());
        RationalVector::from_integers(&y).scale(&denom)
    }

    /// The χ-component of `1 ⊗ q`, in coordinates of `F`.
    pub fn project(&self, q: &[BigInt], chi: &Character) -> Result<RationalVector, ActionError> {
        self.check_vector(q)?;
        self.check_character(chi)?;
        Ok(self.project_free(&self.group.to_free(q), chi))
    }

    /// `p_χ(1 ⊗ Q)` as a lattice in `ℚ^f`.
    pub fn eigenlattice(&self, chi: &Character) -> Lattice {
        let f = self.free_rank();
        let gens: Vec<RationalVector> = (0..f).map(|i| self.project_free(&unit(f, i), chi)).collect();
        Lattice::from_generators(f, &gens)
    }

    /// `Q_χ = {q : cq = χ(c)q for all c}` modulo torsion, in coordinates of `F`.
    pub fn fixed_sublattice(&self, chi: &Character) -> Lattice {
        let f = self.free_rank();
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for (j, a) in self.free_actions.iter().enumerate() {
            let s = BigInt::from(chi.sign(j));
            for i in 0..f {
                let mut r = a.row(i).to_vec();
                r[i] -= &s;
                rows.push(r);
            }
        }
        let stacked = IntMatrix::from_rows(f, &rows);
        let kernel: Vec<RationalVector> = integer_kernel(&stacked).iter().map(|v| RationalVector::from_integers(v)).collect();
        Lattice::from_generators(f, &kernel)
    }

    /// Lattice with basis the concatenated eigenlattice bases, characters
    /// in enumeration order.
    pub fn decomposable_closure(&self) -> Lattice {
        let basis: Vec<RationalVector> = enumerate_characters(self.c_rank())
            .iter()
            .flat_map(|chi| self.eigenlattice(chi).basis().to_vec())
            .collect();
        Lattice::with_basis(self.free_rank(), basis)
    }

    /// Whether `1 ⊗ Q` equals the sum of its χ-components, i.e. every
    /// component of every element is itself in `1 ⊗ Q`.
    pub fn is_decomposable(&self) -> bool {
        self.decomposable_closure().basis().iter().all(|b| b.to_integers().is_some())
    }

    /// `2^{-|C|} ∏_{c∈C} (1 + χ(c) φ(c)) q` where this module is over `Ĉ`
    /// and `phi[j]` is the mask in `Ĉ` of the image of generator `j` of C.
    pub fn project_via_epimorphism(&self, phi: &[usize], q: &[BigInt], chi: &Character) -> Result<RationalVector, ActionError> {
        self.check_vector(q)?;
        let m = phi.len();
        if chi.rank() != m {
            return Err(ActionError::CharacterRank { expected: m, found: chi.rank() });
        }
        if m > MAX_C_RANK {
            return Err(ActionError::RankTooLarge(m));
        }
        let target = self.c_order();
        if phi.iter().any(|&p| p >= target) || gf2_rank(phi) != self.c_rank() {
            return Err(ActionError::NotEpimorphism);
        }
        if !self.is_decomposable() {
            return Err(ActionError::NotDecomposable);
        }
        let mut y = self.group.to_free(q);
        for c in 0..1usize << m {
            let image = (0..m).filter(|&j| (c >> (m - 1 - j)) & 1 == 1).fold(0, |acc, j| acc ^ phi[j]);
            let ay = self.free_elements[image].mul_vec(&y);
            if chi.value(c) == 1 {
                y.iter_mut().zip(ay).for_each(|(s, t)| *s += t);
            } else {
                y.iter_mut().zip(ay).for_each(|(s, t)| *s -= t);
            }
        }
        let denom = BigRational::new(BigInt::one(), BigInt::one() << (1usize << m));
        Ok(RationalVector::from_integers(&y).scale(&denom))
    }

    /// Whether `Σ_χ ∏_{c∈C} (I + χ(c) A_c) q = 2^{|C|} q` modulo torsion.
    pub fn verify_component_identity(&self, q: &[BigInt]) -> bool {
        verify_component_identity_with(self, q, &|m, x, chi| m.project_free(x, chi))
    }

    /// Simplicity test for `q`: some χ-component is primitive in its
    /// eigenlattice.
    pub fn is_simple(&self, q: &[BigInt]) -> Result<SimplicityReport, ActionError> {
        self.check_vector(q)?;
        let x = self.group.to_free(q);
        let f = self.free_rank();
        let mut components = Vec::new();
        for chi in enumerate_characters(self.c_rank()) {
            let component = self.project_free(&x, &chi);
            let lattice = self.eigenlattice(&chi);
            let (k, direction) = lattice
                .content_and_primitive_part(&component)
                .expect("projections of Q lie in the eigenlattice");
            if k.is_one() {
                return Ok(SimplicityReport::Simple { witness_character: chi, primitive_direction: direction });
            }
            let q_of_chi = if k.is_zero() {
                vec![BigInt::zero(); self.rank_ambient()]
            } else {
                let coeffs = self.free_preimage(&direction, &chi);
                self.group.lift(&coeffs)
            };
            debug_assert_eq!(direction.len(), f);
            components.push(ComponentWitness { character: chi, component, k, direction, q_of_chi });
        }
        Ok(SimplicityReport::NotSimple { components })
    }

    /// Some `x ∈ ℤ^f` with `p_χ(x) = v`, for `v` in the eigenlattice.
    fn free_preimage(&self, v: &RationalVector, chi: &Character) -> Vec<BigInt> {
        let f = self.free_rank();
        let denom = BigInt::one() << self.c_order();
        let scale = BigRational::from_integer(denom.clone());
        let cols: Vec<Vec<BigInt>> = (0..f)
            .map(|i| {
                let p = self.project_free(&unit(f, i), chi);
                p.0.iter().map(|t| (t * &scale).to_integer()).collect()
            })
            .collect();
        let m = IntMatrix::from_columns(f, &cols);
        let rhs: Vec<BigInt> = v.0.iter().map(|t| (t * &scale).to_integer()).collect();
        solve_integer_system(&m, &rhs).expect("eigenlattice vectors are projections of integer vectors")
    }

    /// A C-invariant complement `M` with `Q = ⟨q⟩ ⊕ M`, built from an
    /// integer functional `τ` with `τ(q) = 1` that factors through the
    /// χ-projection.
    pub fn complement(&self, q: &[BigInt], chi: &Character) -> Result<Complement, ActionError> {
        self.check_vector(q)?;
        self.check_character(chi)?;
        let f = self.free_rank();
        let lattice = self.eigenlattice(chi);
        let u = self.project_free(&self.group.to_free(q), chi);
        let coords = lattice.membership_solve(&u).expect("projection lies in the eigenlattice");
        let (g, lambda) = bezout(&coords);
        if !g.is_one() {
            return Err(ActionError::NotSimple);
        }
        let free_functional: Vec<BigInt> = (0..f)
            .map(|i| {
                let p = self.project_free(&unit(f, i), chi);
                let c = lattice.membership_solve(&p).expect("projection lies in the eigenlattice");
                c.iter().zip(&lambda).map(|(a, b)| a * b).sum()
            })
            .collect();
        let functional = IntMatrix::from_rows(f, &[free_functional]).mul(self.group.to_free_matrix()).row(0).to_vec();
        let n = self.rank_ambient();
        let generators = integer_kernel(&IntMatrix::from_rows(n, &[functional.clone()]));
        Ok(Complement { generators, functional })
    }
}

fn unit(n: usize, i: usize) -> Vec<BigInt> {
    (0..n).map(|k| if k == i { BigInt::one() } else { BigInt::zero() }).collect()
}

/// `(g, λ)` with `g = gcd(v) ≥ 0` and `λ·v = g`.
pub fn bezout(v: &[BigInt]) -> (BigInt, Vec<BigInt>) {
    let mut g = BigInt::zero();
    let mut lambda: Vec<BigInt> = vec![BigInt::zero(); v.len()];
    for (i, x) in v.iter().enumerate() {
        let e = g.extended_gcd(x);
        // e.gcd = e.x * g + e.y * x
        for l in lambda.iter_mut().take(i) {
            *l *= &e.x;
        }
        lambda[i] = e.y;
        g = e.gcd;
    }
    if g.is_negative() {
        g = -g;
        lambda.iter_mut().for_each(|l| *l = -l.clone());
    }
    (g, lambda)
}

/// The identity `Σ_χ 2^{|C|} p_χ(q) = 2^{|C|} q` checked with a given
/// projector, so that a faulty projector can be exercised.
pub fn verify_component_identity_with(
    module: &InvolutionModule,
    q: &[BigInt],
    projector: &dyn Fn(&InvolutionModule, &[BigInt], &Character) -> RationalVector,
) -> bool {
    if q.len() != module.rank_ambient() {
        return false;
    }
    let x = module.group().to_free(q);
    let total = enumerate_characters(module.c_rank())
        .iter()
        .fold(RationalVector::zero(x.len()), |acc, chi| acc.add(&projector(module, &x, chi)));
    total == RationalVector::from_integers(&x)
}

/// One χ-component of a non-simple element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentWitness {
    pub character: Character,
    /// `p_χ(1 ⊗ q)` in coordinates of `F`.
    pub component: RationalVector,
    /// Content of the component in the eigenlattice, never 1.
    pub k: BigInt,
    /// Primitive part: `component = k · direction`.
    pub direction: RationalVector,
    /// An element of Q whose χ-component is `direction` (zero if `k = 0`).
    pub q_of_chi: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimplicityReport {
    Simple { witness_character: Character, primitive_direction: RationalVector },
    NotSimple { components: Vec<ComponentWitness> },
}

impl SimplicityReport {
    pub fn is_simple(&self) -> bool {
        matches!(self, SimplicityReport::Simple { .. })
    }
}

/// Output of [`InvolutionModule::complement`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Complement {
    /// Generators, in ambient coordinates, of the preimage of M in `ℤ^n`
    /// (it contains the relations and the torsion preimage).
    pub generators: Vec<Vec<BigInt>>,
    /// Integer functional on ambient coordinates with kernel M and value 1
    /// on q.
    pub functional: Vec<BigInt>,
}

impl Complement {
    pub fn evaluate(&self, v: &[BigInt]) -> BigInt {
        self.functional.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Checks `ℤ^n = ⟨q⟩ ⊕ M` and that every action matrix maps M into M.
    pub fn verify(&self, module: &InvolutionModule, q: &[BigInt]) -> bool {
        let n = module.rank_ambient();
        if self.generators.len() + 1 != n || !self.evaluate(q).is_one() {
            return false;
        }
        let mut rows = vec![q.to_vec()];
        rows.extend(self.generators.iter().cloned());
        if !IntMatrix::from_rows(n, &rows).is_unimodular() {
            return false;
        }
        let relations_inside = module.group().relation_basis().iter().all(|r| self.evaluate(r).is_zero());
        let invariant = module
            .actions()
            .iter()
            .all(|a| self.generators.iter().all(|g| self.evaluate(&a.mul_vec(g)).is_zero()));
        relations_inside && invariant
    }
}

/// Element `(q, c)` of the split extension `Q ⋊ C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleElement {
    pub q: Vec<BigInt>,
    pub c: usize,
}

/// The group `Q ⋊ C`: `(q₁, c₁)(q₂, c₂) = (q₁ + c₁·q₂, c₁ + c₂)`.
/// Conjugating `(q, 0)` by `(0, c)` gives `(c·q, 0)`, so words evaluated
/// here follow the module arithmetic.
#[derive(Clone, Copy, Debug)]
pub struct SplitExtension<'a> {
    module: &'a InvolutionModule,
}

impl<'a> SplitExtension<'a> {
    pub fn new(module: &'a InvolutionModule) -> Self {
        SplitExtension { module }
    }

    pub fn module_element(&self, q: &[BigInt]) -> ModuleElement {
        ModuleElement { q: self.module.group().normalize(q), c: 0 }
    }

    pub fn c_element(&self, c: usize) -> ModuleElement {
        ModuleElement { q: vec![BigInt::zero(); self.module.rank_ambient()], c }
    }
}

impl Group for SplitExtension<'_> {
    type Elem = ModuleElement;

    fn identity(&self) -> ModuleElement {
        self.c_element(0)
    }

    fn mul(&self, a: &ModuleElement, b: &ModuleElement) -> ModuleElement {
        let moved = self.module.act(a.c, &b.q);
        let q: Vec<BigInt> = a.q.iter().zip(moved).map(|(x, y)| x + y).collect();
        ModuleElement { q: self.module.group().normalize(&q), c: a.c ^ b.c }
    }

    fn inv(&self, a: &ModuleElement) -> ModuleElement {
        let neg: Vec<BigInt> = a.q.iter().map(|x| -x).collect();
        ModuleElement { q: self.module.act(a.c, &neg), c: a.c }
    }
}

/// A random valid module, for property tests and self-checks.
///
/// Built as a direct sum of rank-one blocks (each generator acts by `±1`)
/// and rank-two blocks (each generator acts by `±I` or `±swap`), some
/// blocks carrying a torsion relation from `torsion_orders`, then moved to
/// a random ℤ-basis.
pub fn random_module<R: Rng + ?Sized>(rng: &mut R, c_rank: usize, max_rank: usize, torsion_orders: &[u64]) -> InvolutionModule {
    assert!(max_rank >= 1);
    let n = rng.gen_range(1..=max_rank);
    let mut actions = vec![IntMatrix::zeros(n, n); c_rank];
    let mut relations: Vec<Vec<BigInt>> = Vec::new();
    let mut pos = 0;
    while pos < n {
        let size = if pos + 1 < n && rng.gen_bool(0.5) { 2 } else { 1 };
        let t = if torsion_orders.is_empty() || rng.gen_bool(0.6) {
            1
        } else {
            torsion_orders[rng.gen_range(0..torsion_orders.len())]
        };
        for a in actions.iter_mut() {
            let sign = if rng.gen_bool(0.5) { BigInt::one() } else { -BigInt::one() };
            if size == 2 && rng.gen_bool(0.5) {
                a[(pos, pos + 1)] = sign.clone();
                a[(pos + 1, pos)] = sign;
            } else {
                for k in pos..pos + size {
                    a[(k, k)] = sign.clone();
                }
            }
        }
        if t > 1 {
            for k in pos..pos + size {
                let mut r = vec![BigInt::zero(); n];
                r[k] = BigInt::from(t);
                relations.push(r);
            }
        }
        pos += size;
    }
    let (u, u_inv) = random_unimodular(rng, n, 2 * n);
    let actions: Vec<IntMatrix> = actions.iter().map(|a| u.mul(a).mul(&u_inv)).collect();
    let relations: Vec<Vec<BigInt>> = relations.iter().map(|r| u.mul_vec(r)).collect();
    let group = AbelianPresentation::new(n, IntMatrix::from_rows(n, &relations)).expect("conformal relations");
    InvolutionModule::new(group, actions).expect("valid by construction")
}

/// A random unimodular matrix and its inverse, as products of `steps`
/// elementary operations with small multipliers.
pub fn random_unimodular<R: Rng + ?Sized>(rng: &mut R, n: usize, steps: usize) -> (IntMatrix, IntMatrix) {
    let mut u = IntMatrix::identity(n);
    let mut u_inv = IntMatrix::identity(n);
    if n < 2 {
        if rng.gen_bool(0.5) && n == 1 {
            u[(0, 0)] = -BigInt::one();
            u_inv[(0, 0)] = -BigInt::one();
        }
        return (u, u_inv);
    }
    for _ in 0..steps {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let k = BigInt::from(rng.gen_range(-2i64..=2));
        // E = I + k·e_{ij}, E⁻¹ = I − k·e_{ij}
        let mut e = IntMatrix::identity(n);
        e[(i, j)] = k.clone();
        let mut e_inv = IntMatrix::identity(n);
        e_inv[(i, j)] = -k;
        u = e.mul(&u);
        u_inv = u_inv.mul(&e_inv);
    }
    (u, u_inv)
}

/// Whether, in `Q ⋊ C` at `q̃ = |T(Q)|·q`, each tower word `w_χ(q̃)` equals
/// `2^{|C|} p_χ(q̃)` and their product is `q̃^{2^{|C|}}`.
pub fn verify_tower_identity(module: &InvolutionModule, q: &[BigInt]) -> bool {
    let g = SplitExtension::new(module);
    let t = module.group().torsion_order().clone();
    let qt: Vec<BigInt> = q.iter().map(|x| x * &t).collect();
    let c_words: Vec<SLWord> = (0..module.c_order()).map(|e| SLWord::generator(&format!("c{e}"))).collect();
    let arg = SLWord::generator("y");
    let lookup = |name: &str| {
        if name == "y" {
            Some(g.module_element(&qt))
        } else {
            name[1..].parse().ok().map(|e| g.c_element(e))
        }
    };
    let mut total = g.identity();
    for chi in enumerate_characters(module.c_rank()) {
        let w = build_w_chi_at(&chi, &c_words, &arg);
        let Ok(v) = Program::compile(&w).evaluate(&g, lookup) else { return false };
        if v.c != 0 {
            return false;
        }
        let Ok(p) = module.project(&qt, &chi) else { return false };
        if RationalVector::from_integers(&module.group().to_free(&v.q)) != p.scale_int(&(BigInt::one() << module.c_order())) {
            return false;
        }
        total = g.mul(&total, &v);
    }
    let expect = g.pow(&g.module_element(&qt), &(BigInt::one() << module.c_order()));
    total.c == expect.c && module.group().equal(&total.q, &expect.q)
}

/// A module on `ℤ^n` (`n ≤ 3`) where each generator acts diagonally by signs.
pub fn random_decomposable_module<R: Rng + ?Sized>(rng: &mut R, c_rank: usize) -> InvolutionModule {
    let n = rng.gen_range(1..=3);
    let actions: Vec<IntMatrix> = (0..c_rank)
        .map(|_| {
            let diag: Vec<BigInt> = (0..n).map(|_| BigInt::from(if rng.gen_bool(0.5) { 1 } else { -1 })).collect();
            IntMatrix::diagonal(&diag)
        })
        .collect();
    InvolutionModule::new(AbelianPresentation::free(n), actions).expect("diagonal sign matrices")
}

/// Images (as masks) of `m` generators under a random surjection
/// `(ℤ/2)^m → (ℤ/2)^{m_hat}`.
pub fn random_epimorphism<R: Rng + ?Sized>(rng: &mut R, m: usize, m_hat: usize) -> Vec<usize> {
    assert!(m >= m_hat);
    loop {
        let phi: Vec<usize> = (0..m).map(|_| rng.gen_range(0..1usize << m_hat)).collect();
        if gf2_rank(&phi) == m_hat {
            return phi;
        }
    }
}

/// Whether `project_via_epimorphism` returns the matching component of the
/// target module when `χ` factors through `phi` and zero otherwise.
pub fn verify_epimorphism_factoring(module: &InvolutionModule, phi: &[usize], q: &[BigInt]) -> bool {
    let m = phi.len();
    enumerate_characters(m).iter().all(|chi| {
        let Ok(got) = module.project_via_epimorphism(phi, q, chi) else { return false };
        let factor = enumerate_characters(module.c_rank()).into_iter().find(|hat| (0..m).all(|j| hat.value(phi[j]) == chi.sign(j)));
        match factor {
            Some(hat) => module.project(q, &hat).map(|p| p == got).unwrap_or(false),
            None => got.is_zero(),
        }
    })
}
