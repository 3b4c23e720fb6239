//! Exact integer and rational linear algebra.
//!
//! Everything here works over arbitrary-precision integers and rationals:
//! Smith normal form with transforms, Hermite-style lattice bases, integer
//! kernels and linear systems, finitely generated abelian groups given by
//! relation matrices, and lattices of rational vectors with content and
//! primitive-part extraction.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("vector is not in the lattice")]
    NotInLattice,
    #[error("vector is not in the rational span of the lattice")]
    NotInSpan,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows * cols");
        IntMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix::new(rows, cols, vec![BigInt::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from rows; every row must have `cols` entries.
    pub fn from_rows<T: Into<BigInt> + Clone>(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend(r.iter().cloned().map(Into::into));
        }
        IntMatrix::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<BigInt>]) -> Self {
        let mut m = IntMatrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged columns");
            for (i, x) in col.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn diagonal(entries: &[BigInt]) -> Self {
        let mut m = IntMatrix::zeros(entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn mul_rational_vec(&self, v: &RationalVector) -> RationalVector {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        RationalVector(
            (0..self.rows)
                .map(|i| {
                    self.row(i).iter().zip(v.iter()).fold(BigRational::zero(), |acc, (a, b)| {
                        if a.is_zero() || b.is_zero() {
                            acc
                        } else {
                            acc + b * BigRational::from_integer(a.clone())
                        }
                    })
                })
                .collect(),
        )
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        IntMatrix::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn scale(&self, k: &BigInt) -> IntMatrix {
        IntMatrix::new(self.rows, self.cols, self.data.iter().map(|a| a * k).collect())
    }

    /// Fraction-free (Bareiss) determinant.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                match (k + 1..n).find(|&i| !a[(i, k)].is_zero()) {
                    Some(i) => {
                        a.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * &a[(n - 1, n - 1)]
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.determinant().abs().is_one()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for j in 0..self.cols {
            let v = &self[(src, j)] * k;
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += k * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, k: &BigInt) {
        for i in 0..self.rows {
            let v = &self[(i, src)] * k;
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Result of [`smith_normal_form`]: `left * m * right == diagonal`.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub left: IntMatrix,
    pub diagonal: IntMatrix,
    pub right: IntMatrix,
    pub rank: usize,
}

impl SmithForm {
    /// The diagonal entries d_1 | d_2 | ..., including trailing zeros up to
    /// `min(rows, cols)`.
    pub fn diagonal_entries(&self) -> Vec<BigInt> {
        let n = self.diagonal.rows().min(self.diagonal.cols());
        (0..n).map(|i| self.diagonal[(i, i)].clone()).collect()
    }
}

fn min_abs_entry(a: &IntMatrix, from_row: usize, from_col: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in from_row..a.rows {
        for j in from_col..a.cols {
            let x = &a[(i, j)];
            if x.is_zero() {
                continue;
            }
            match best {
                Some(b) if a[b].abs() <= x.abs() => {}
                _ => {
                    if x.abs().is_one() {
                        return Some((i, j));
                    }
                    best = Some((i, j));
                }
            }
        }
    }
    best
}

/// Smith normal form with unimodular transforms, smallest-absolute-value
/// pivoting.
pub fn smith_normal_form(m: &IntMatrix) -> SmithForm {
    let (r, c) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut u = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);
    let mut t = 0;
    while t < r.min(c) {
        let Some((pi, pj)) = min_abs_entry(&a, t, t) else {
            break;
        };
        a.swap_rows(t, pi);
        u.swap_rows(t, pi);
        a.swap_cols(t, pj);
        v.swap_cols(t, pj);
        loop {
            let mut clean = true;
            for i in t + 1..r {
                if a[(i, t)].is_zero() {
                    continue;
                }
                let q = -a[(i, t)].div_floor(&a[(t, t)]);
                a.add_row_multiple(i, t, &q);
                u.add_row_multiple(i, t, &q);
                clean &= a[(i, t)].is_zero();
            }
            for j in t + 1..c {
                if a[(t, j)].is_zero() {
                    continue;
                }
                let q = -a[(t, j)].div_floor(&a[(t, t)]);
                a.add_col_multiple(j, t, &q);
                v.add_col_multiple(j, t, &q);
                clean &= a[(t, j)].is_zero();
            }
            if !clean {
                // a remainder smaller than the pivot is now in row or column t
                let mut best = (t, t);
                for i in t + 1..r {
                    if !a[(i, t)].is_zero() && a[(i, t)].abs() < a[best].abs() {
                        best = (i, t);
                    }
                }
                for j in t + 1..c {
                    if !a[(t, j)].is_zero() && a[(t, j)].abs() < a[best].abs() {
                        best = (t, j);
                    }
                }
                a.swap_rows(t, best.0);
                u.swap_rows(t, best.0);
                a.swap_cols(t, best.1);
                v.swap_cols(t, best.1);
                continue;
            }
            let pivot = a[(t, t)].clone();
            let offender = (t + 1..r).find(|&i| (t + 1..c).any(|j| !(&a[(i, j)] % &pivot).is_zero()));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    a.add_row_multiple(t, i, &one);
                    u.add_row_multiple(t, i, &one);
                }
                None => break,
            }
        }
        if a[(t, t)].is_negative() {
            a.negate_row(t);
            u.negate_row(t);
        }
        t += 1;
    }
    SmithForm { left: u, diagonal: a, right: v, rank: t }
}

/// Row-style Hermite normal form of the lattice spanned by `rows`; returns
/// the non-zero rows (a basis). Pivots are positive and entries above a
/// pivot are reduced into `[0, pivot)`.
pub(crate) fn hermite_rows(mut rows: Vec<Vec<BigInt>>, ncols: usize) -> Vec<Vec<BigInt>> {
    let mut p = 0;
    for col in 0..ncols {
        if p == rows.len() {
            break;
        }
        loop {
            let best = (p..rows.len())
                .filter(|&i| !rows[i][col].is_zero())
                .min_by(|&x, &y| rows[x][col].abs().cmp(&rows[y][col].abs()));
            let Some(b) = best else { break };
            rows.swap(p, b);
            let mut done = true;
            for i in p + 1..rows.len() {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&rows[p][col]);
                let (head, tail) = rows.split_at_mut(i);
                sub_multiple(&mut tail[0], &head[p], &q);
                done &= rows[i][col].is_zero();
            }
            if done {
                break;
            }
        }
        if rows[p][col].is_zero() {
            continue;
        }
        if rows[p][col].is_negative() {
            for x in rows[p].iter_mut() {
                *x = -&*x;
            }
        }
        for i in 0..p {
            let q = rows[i][col].div_floor(&rows[p][col]);
            if q.is_zero() {
                continue;
            }
            let (head, tail) = rows.split_at_mut(p);
            sub_multiple(&mut head[i], &tail[0], &q);
        }
        p += 1;
    }
    rows.truncate(p);
    rows
}

fn sub_multiple(dst: &mut [BigInt], src: &[BigInt], q: &BigInt) {
    for (d, s) in dst.iter_mut().zip(src) {
        if !s.is_zero() {
            *d -= s * q;
        }
    }
}

/// A ℤ-basis of `{x : m x = 0}`.
pub fn integer_kernel(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    let snf = smith_normal_form(m);
    (snf.rank..m.cols()).map(|j| snf.right.column(j)).collect()
}

/// Solves `m x = rhs` over the integers, returning one solution if any exists.
pub fn solve_integer_system(m: &IntMatrix, rhs: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(m.rows(), rhs.len(), "right-hand side length differs from row count");
    let snf = smith_normal_form(m);
    // D y = U rhs, x = V y
    let target = snf.left.mul_vec(rhs);
    let mut y = vec![BigInt::zero(); m.cols()];
    for (i, t) in target.iter().enumerate() {
        if i < snf.rank {
            let d = &snf.diagonal[(i, i)];
            let (q, r) = t.div_rem(d);
            if !r.is_zero() {
                return None;
            }
            y[i] = q;
        } else if !t.is_zero() {
            return None;
        }
    }
    Some(snf.right.mul_vec(&y))
}

/// An integer right inverse `s` of a surjective `p` (so `p * s = I`).
fn right_inverse(p: &IntMatrix) -> IntMatrix {
    let f = p.rows();
    let snf = smith_normal_form(p);
    assert!(
        snf.rank == f && (0..f).all(|i| snf.diagonal[(i, i)].is_one()),
        "right inverse requested for a non-surjective map"
    );
    let mut embed = IntMatrix::zeros(p.cols(), f);
    for i in 0..f {
        embed[(i, i)] = BigInt::one();
    }
    snf.right.mul(&embed).mul(&snf.left)
}

/// Summary of a finitely generated abelian group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorsionData {
    pub torsion_order: BigInt,
    pub invariant_factors: Vec<BigInt>,
    pub free_rank: usize,
}

/// The finitely generated abelian group `ℤ^n / ⟨relations⟩`.
///
/// Besides the Smith data it caches the map onto the torsion-free quotient
/// `Q / T(Q) ≅ ℤ^f` (`to_free`, in Hermite form so that it is the identity
/// when there are no relations), an integer section of that map (`lift`),
/// and a basis of its kernel, which is the preimage of `T(Q)` in `ℤ^n`.
#[derive(Clone, Debug)]
pub struct AbelianPresentation {
    rank_ambient: usize,
    relations: IntMatrix,
    snf_diagonal: Vec<BigInt>,
    torsion_order: BigInt,
    free_rank: usize,
    relation_basis: Vec<Vec<BigInt>>,
    to_free: IntMatrix,
    lift: IntMatrix,
    torsion_preimage: Vec<Vec<BigInt>>,
}

impl AbelianPresentation {
    pub fn new(rank_ambient: usize, relations: IntMatrix) -> Result<Self, LatticeError> {
        if relations.cols() != rank_ambient {
            return Err(LatticeError::DimensionMismatch { expected: rank_ambient, found: relations.cols() });
        }
        let snf = smith_normal_form(&relations);
        let snf_diagonal = snf.diagonal_entries();
        let torsion_order = snf_diagonal[..snf.rank].iter().fold(BigInt::one(), |acc, d| acc * d);
        let free_rank = rank_ambient - snf.rank;

        // In coordinates x' = Vᵀx the relation lattice is ⊕ dᵢℤeᵢ, so the
        // trailing coordinates are the free part.
        let raw: Vec<Vec<BigInt>> = (snf.rank..rank_ambient).map(|k| snf.right.column(k)).collect();
        let free_rows = hermite_rows(raw, rank_ambient);
        debug_assert_eq!(free_rows.len(), free_rank);
        let to_free = IntMatrix::from_rows(rank_ambient, &free_rows);
        let (lift, torsion_preimage) = if free_rank == 0 {
            let id = IntMatrix::identity(rank_ambient);
            (IntMatrix::zeros(rank_ambient, 0), id.row_vecs())
        } else {
            (right_inverse(&to_free), integer_kernel(&to_free))
        };
        let relation_basis = hermite_rows(relations.row_vecs(), rank_ambient);
        Ok(AbelianPresentation {
            rank_ambient,
            relations,
            snf_diagonal,
            torsion_order,
            free_rank,
            relation_basis,
            to_free,
            lift,
            torsion_preimage,
        })
    }

    /// ℤ^n with no relations.
    pub fn free(n: usize) -> Self {
        AbelianPresentation::new(n, IntMatrix::zeros(0, n)).expect("conformal by construction")
    }

    pub fn rank_ambient(&self) -> usize {
        self.rank_ambient
    }

    pub fn relations(&self) -> &IntMatrix {
        &self.relations
    }

    pub fn snf_diagonal(&self) -> &[BigInt] {
        &self.snf_diagonal
    }

    pub fn torsion_order(&self) -> &BigInt {
        &self.torsion_order
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion_data(&self) -> TorsionData {
        TorsionData {
            torsion_order: self.torsion_order.clone(),
            invariant_factors: self.snf_diagonal.iter().filter(|d| *d > &BigInt::one()).cloned().collect(),
            free_rank: self.free_rank,
        }
    }

    /// Hermite basis of the relation lattice.
    pub fn relation_basis(&self) -> &[Vec<BigInt>] {
        &self.relation_basis
    }

    /// Canonical representative of `v` modulo the relation lattice.
    pub fn normalize(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.rank_ambient);
        let mut out = v.to_vec();
        for row in &self.relation_basis {
            let col = row.iter().position(|x| !x.is_zero()).expect("basis rows are non-zero");
            let q = out[col].div_floor(&row[col]);
            if !q.is_zero() {
                sub_multiple(&mut out, row, &q);
            }
        }
        out
    }

    pub fn is_zero(&self, v: &[BigInt]) -> bool {
        self.normalize(v).iter().all(Zero::is_zero)
    }

    pub fn equal(&self, a: &[BigInt], b: &[BigInt]) -> bool {
        let diff: Vec<BigInt> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.is_zero(&diff)
    }

    /// The map `Q → Q/T(Q) ≅ ℤ^f` as an `f × n` matrix.
    pub fn to_free_matrix(&self) -> &IntMatrix {
        &self.to_free
    }

    /// An `n × f` section of [`Self::to_free_matrix`].
    pub fn lift_matrix(&self) -> &IntMatrix {
        &self.lift
    }

    pub fn to_free(&self, v: &[BigInt]) -> Vec<BigInt> {
        self.to_free.mul_vec(v)
    }

    pub fn lift(&self, x: &[BigInt]) -> Vec<BigInt> {
        self.lift.mul_vec(x)
    }

    /// Generators (in ℤ^n) of the preimage of the torsion subgroup.
    pub fn torsion_preimage(&self) -> &[Vec<BigInt>] {
        &self.torsion_preimage
    }

    /// Whether `v` has finite order in Q.
    pub fn is_torsion(&self, v: &[BigInt]) -> bool {
        self.to_free(v).iter().all(Zero::is_zero)
    }
}

/// `torsion_data` as a free function.
pub fn torsion_data(p: &AbelianPresentation) -> TorsionData {
    p.torsion_data()
}

/// A vector with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalVector(pub Vec<BigRational>);

impl RationalVector {
    pub fn zero(n: usize) -> Self {
        RationalVector(vec![BigRational::zero(); n])
    }

    pub fn from_integers(v: &[BigInt]) -> Self {
        RationalVector(v.iter().cloned().map(BigRational::from_integer).collect())
    }

    /// Convenience constructor from `(numerator, denominator)` pairs.
    pub fn from_fractions(v: &[(i64, i64)]) -> Self {
        RationalVector(
            v.iter()
                .map(|&(n, d)| BigRational::new(BigInt::from(n), BigInt::from(d)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BigRational> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        RationalVector(self.0.iter().map(|x| x * k).collect())
    }

    pub fn scale_int(&self, k: &BigInt) -> Self {
        self.scale(&BigRational::from_integer(k.clone()))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        RationalVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len());
        RationalVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Least common multiple of the coordinate denominators.
    pub fn common_denominator(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
    }

    /// Integer coordinates, if every coordinate is integral.
    pub fn to_integers(&self) -> Option<Vec<BigInt>> {
        self.0.iter().map(|x| x.is_integer().then(|| x.to_integer())).collect()
    }
}

impl fmt::Display for RationalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for RationalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A free abelian subgroup of ℚ^dim, given by a basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    basis: Vec<RationalVector>,
}

impl Lattice {
    /// The standard lattice ℤ^dim.
    pub fn standard(dim: usize) -> Self {
        let basis = (0..dim)
            .map(|i| {
                let mut v = RationalVector::zero(dim);
                v.0[i] = BigRational::one();
                v
            })
            .collect();
        Lattice { dim, basis }
    }

    /// Lattice spanned by arbitrary (possibly dependent) generators; the
    /// stored basis is in Hermite form, so it is canonical.
    pub fn from_generators(dim: usize, generators: &[RationalVector]) -> Self {
        let denom = generators.iter().fold(BigInt::one(), |acc, g| {
            assert_eq!(g.len(), dim, "generator dimension mismatch");
            acc.lcm(&g.common_denominator())
        });
        let scale = BigRational::from_integer(denom.clone());
        let rows: Vec<Vec<BigInt>> = generators
            .iter()
            .map(|g| g.0.iter().map(|x| (x * &scale).to_integer()).collect())
            .collect();
        let inv = BigRational::new(BigInt::one(), denom);
        let basis = hermite_rows(rows, dim)
            .into_iter()
            .map(|r| RationalVector::from_integers(&r).scale(&inv))
            .collect();
        Lattice { dim, basis }
    }

    /// Lattice with the given basis, kept as is. The vectors must be
    /// linearly independent.
    pub fn with_basis(dim: usize, basis: Vec<RationalVector>) -> Self {
        assert!(basis.iter().all(|b| b.len() == dim), "basis dimension mismatch");
        let l = Lattice { dim, basis };
        assert_eq!(Lattice::from_generators(dim, &l.basis).rank(), l.rank(), "basis vectors are dependent");
        l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[RationalVector] {
        &self.basis
    }

    fn scaled_system(&self, v: &RationalVector) -> (IntMatrix, Vec<BigInt>) {
        let denom = self
            .basis
            .iter()
            .fold(v.common_denominator(), |acc, b| acc.lcm(&b.common_denominator()));
        let scale = BigRational::from_integer(denom);
        let cols: Vec<Vec<BigInt>> = self
            .basis
            .iter()
            .map(|b| b.0.iter().map(|x| (x * &scale).to_integer()).collect())
            .collect();
        let rhs = v.0.iter().map(|x| (x * &scale).to_integer()).collect();
        (IntMatrix::from_columns(self.dim, &cols), rhs)
    }

    /// Integer coordinates of `v` in the basis, or `None` if `v` is not in
    /// the lattice.
    pub fn membership_solve(&self, v: &RationalVector) -> Option<Vec<BigInt>> {
        if v.len() != self.dim {
            return None;
        }
        let (m, rhs) = self.scaled_system(v);
        solve_integer_system(&m, &rhs)
    }

    pub fn contains(&self, v: &RationalVector) -> bool {
        self.membership_solve(v).is_some()
    }

    /// Rational coordinates of `v` in the basis, if `v` is in the span.
    pub fn rational_coordinates(&self, v: &RationalVector) -> Option<Vec<BigRational>> {
        if v.len() != self.dim {
            return None;
        }
        let (m, rhs) = self.scaled_system(v);
        solve_rational_system(&m, &rhs)
    }

    /// Writes `v = k·u` with `u` primitive in the lattice and `k ≥ 0`.
    pub fn content_and_primitive_part(&self, v: &RationalVector) -> Result<(BigInt, RationalVector), LatticeError> {
        if v.len() != self.dim {
            return Err(LatticeError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        if v.is_zero() {
            return Ok((BigInt::zero(), RationalVector::zero(self.dim)));
        }
        let coords = match self.membership_solve(v) {
            Some(c) => c,
            None if self.rational_coordinates(v).is_some() => return Err(LatticeError::NotInLattice),
            None => return Err(LatticeError::NotInSpan),
        };
        let k = coords.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        let inv = BigRational::new(BigInt::one(), k.clone());
        Ok((k, v.scale(&inv)))
    }
}

/// `membership_solve` as a free function.
pub fn membership_solve(lattice: &Lattice, v: &RationalVector) -> Option<Vec<BigInt>> {
    lattice.membership_solve(v)
}

/// `content_and_primitive_part` as a free function.
pub fn content_and_primitive_part(v: &RationalVector, lattice: &Lattice) -> Result<(BigInt, RationalVector), LatticeError> {
    lattice.content_and_primitive_part(v)
}

/// Unique rational solution of `m x = rhs` for `m` with independent columns.
fn solve_rational_system(m: &IntMatrix, rhs: &[BigInt]) -> Option<Vec<BigRational>> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            let mut r: Vec<BigRational> = m.row(i).iter().cloned().map(BigRational::from_integer).collect();
            r.push(BigRational::from_integer(rhs[i].clone()));
            r
        })
        .collect();
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..cols {
        let Some(p) = (pivot_row..rows).find(|&i| !a[i][col].is_zero()) else {
            return None;
        };
        a.swap(pivot_row, p);
        let inv = a[pivot_row][col].recip();
        for x in a[pivot_row].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != pivot_row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                let (src, dst) = if i < pivot_row {
                    let (h, t) = a.split_at_mut(pivot_row);
                    (&t[0], &mut h[i])
                } else {
                    let (h, t) = a.split_at_mut(i);
                    (&h[pivot_row], &mut t[0])
                };
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d -= s * &f;
                }
            }
        }
        pivots.push(col);
        pivot_row += 1;
    }
    if a[pivot_row..].iter().any(|r| !r[cols].is_zero()) {
        return None;
    }
    Some((0..cols).map(|c| a[c][cols].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    fn mat(cols: usize, rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(cols, &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    fn check_snf(m: &IntMatrix) -> SmithForm {
        let s = smith_normal_form(m);
        assert_eq!(s.left.mul(m).mul(&s.right), s.diagonal);
        assert!(s.left.is_unimodular() && s.right.is_unimodular());
        let d = s.diagonal_entries();
        for i in 0..s.diagonal.rows() {
            for j in 0..s.diagonal.cols() {
                if i != j {
                    assert!(s.diagonal[(i, j)].is_zero());
                }
            }
        }
        for w in d.windows(2) {
            assert!(!w[0].is_negative());
            if w[0].is_zero() {
                assert!(w[1].is_zero());
            } else {
                assert!((&w[1] % &w[0]).is_zero());
            }
        }
        s
    }

    #[test]
    fn snf_identity_and_zero() {
        let s = check_snf(&IntMatrix::identity(2));
        assert_eq!(s.diagonal, IntMatrix::identity(2));
        let s = check_snf(&IntMatrix::zeros(2, 2));
        assert!(s.diagonal.is_zero());
        assert_eq!(s.rank, 0);
    }

    #[test]
    fn snf_diag_2_3() {
        let s = check_snf(&mat(2, &[&[2, 0], &[0, 3]]));
        assert_eq!(s.diagonal_entries(), ints(&[1, 6]));
    }

    #[test]
    fn snf_rectangular() {
        let s = check_snf(&mat(3, &[&[2, 4, 4], &[-6, 6, 12], &[10, -4, -16]]));
        assert_eq!(s.diagonal_entries(), ints(&[2, 6, 12]));
        let s = check_snf(&mat(2, &[&[0, 0], &[4, 6], &[2, 0]]));
        assert_eq!(s.diagonal_entries(), ints(&[2, 6]));
        check_snf(&IntMatrix::zeros(0, 3));
        check_snf(&IntMatrix::zeros(3, 0));
    }

    #[test]
    fn torsion_data_examples() {
        let z2 = AbelianPresentation::free(2);
        assert_eq!(
            z2.torsion_data(),
            TorsionData { torsion_order: BigInt::one(), invariant_factors: vec![], free_rank: 2 }
        );
        let p = AbelianPresentation::new(2, mat(2, &[&[2, 0]])).unwrap();
        assert_eq!(
            p.torsion_data(),
            TorsionData { torsion_order: BigInt::from(2), invariant_factors: ints(&[2]), free_rank: 1 }
        );
        let p = AbelianPresentation::new(1, mat(1, &[&[1]])).unwrap();
        assert_eq!(
            p.torsion_data(),
            TorsionData { torsion_order: BigInt::one(), invariant_factors: vec![], free_rank: 0 }
        );
    }

    #[test]
    fn presentation_rejects_nonconformal_relations() {
        assert_eq!(
            AbelianPresentation::new(3, mat(2, &[&[1, 0]])).unwrap_err(),
            LatticeError::DimensionMismatch { expected: 3, found: 2 }
        );
    }

    #[test]
    fn free_quotient_is_identity_without_relations() {
        let p = AbelianPresentation::free(3);
        assert_eq!(p.to_free_matrix(), &IntMatrix::identity(3));
        assert_eq!(p.lift_matrix(), &IntMatrix::identity(3));
        assert!(p.torsion_preimage().is_empty());
    }

    #[test]
    fn free_quotient_with_torsion_coordinate() {
        // ℤ² ⊕ ℤ/3 with the torsion coordinate last
        let p = AbelianPresentation::new(3, mat(3, &[&[0, 0, 3]])).unwrap();
        assert_eq!(p.to_free_matrix(), &mat(3, &[&[1, 0, 0], &[0, 1, 0]]));
        assert_eq!(p.to_free_matrix().mul(p.lift_matrix()), IntMatrix::identity(2));
        assert!(p.is_torsion(&ints(&[0, 0, 1])));
        assert!(!p.is_torsion(&ints(&[0, 1, 1])));
        assert_eq!(p.normalize(&ints(&[4, -1, 7])), ints(&[4, -1, 1]));
        assert!(p.is_zero(&ints(&[0, 0, -6])));
    }

    #[test]
    fn free_quotient_mixed_relations() {
        let p = AbelianPresentation::new(3, mat(3, &[&[2, 4, 0], &[0, 6, 3]])).unwrap();
        assert_eq!(p.free_rank(), 1);
        let f = p.to_free_matrix();
        for r in p.relations().row_vecs() {
            assert!(p.to_free(&r).iter().all(Zero::is_zero));
        }
        assert_eq!(f.mul(p.lift_matrix()), IntMatrix::identity(1));
        for k in p.torsion_preimage() {
            assert!(p.to_free(k).iter().all(Zero::is_zero));
        }
        // torsion order is |det| of the relation lattice inside its saturation
        assert_eq!(p.torsion_order(), &BigInt::from(6));
    }

    #[test]
    fn hermite_basis_is_canonical() {
        let a = hermite_rows(vec![ints(&[2, 4]), ints(&[3, 6]), ints(&[0, 0])], 2);
        assert_eq!(a, vec![ints(&[1, 2])]);
        let b = hermite_rows(vec![ints(&[-1, -2])], 2);
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_and_systems() {
        let m = mat(3, &[&[1, 2, 3]]);
        let k = integer_kernel(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.mul_vec(v).iter().all(Zero::is_zero));
        }
        let m = mat(2, &[&[2, 0], &[0, 4]]);
        assert_eq!(solve_integer_system(&m, &ints(&[4, 8])), Some(ints(&[2, 2])));
        assert_eq!(solve_integer_system(&m, &ints(&[4, 2])), None);
    }

    #[test]
    fn membership_examples() {
        let std2 = Lattice::standard(2);
        assert_eq!(std2.membership_solve(&RationalVector::from_integers(&ints(&[3, 5]))), Some(ints(&[3, 5])));
        let closure = Lattice::with_basis(2, vec![
            RationalVector::from_fractions(&[(1, 2), (1, 2)]),
            RationalVector::from_fractions(&[(1, 2), (-1, 2)]),
        ]);
        assert_eq!(
            membership_solve(&closure, &RationalVector::from_integers(&ints(&[2, 5]))),
            Some(ints(&[7, -3]))
        );
        let even = Lattice::with_basis(2, vec![RationalVector::from_integers(&ints(&[2, 0]))]);
        assert_eq!(even.membership_solve(&RationalVector::from_integers(&ints(&[1, 0]))), None);
    }

    #[test]
    fn content_examples() {
        let l = Lattice::from_generators(2, &[RationalVector::from_fractions(&[(1, 2), (1, 2)])]);
        let (k, u) = content_and_primitive_part(&RationalVector::from_fractions(&[(7, 2), (7, 2)]), &l).unwrap();
        assert_eq!(k, BigInt::from(7));
        assert_eq!(u, RationalVector::from_fractions(&[(1, 2), (1, 2)]));
        let (k, u) = l.content_and_primitive_part(&RationalVector::zero(2)).unwrap();
        assert!(k.is_zero() && u.is_zero());
        let (k, _) = l.content_and_primitive_part(&RationalVector::from_fractions(&[(1, 2), (1, 2)])).unwrap();
        assert!(k.is_one());
        let (k, u) = l.content_and_primitive_part(&RationalVector::from_fractions(&[(-3, 2), (-3, 2)])).unwrap();
        assert_eq!(k, BigInt::from(3));
        assert_eq!(u, RationalVector::from_fractions(&[(-1, 2), (-1, 2)]));
    }

    #[test]
    fn content_errors() {
        let l = Lattice::from_generators(2, &[RationalVector::from_integers(&ints(&[1, 1]))]);
        assert_eq!(
            l.content_and_primitive_part(&RationalVector::from_fractions(&[(1, 2), (1, 2)])),
            Err(LatticeError::NotInLattice)
        );
        assert_eq!(
            l.content_and_primitive_part(&RationalVector::from_integers(&ints(&[1, 0]))),
            Err(LatticeError::NotInSpan)
        );
    }

    #[test]
    fn determinant_values() {
        assert_eq!(mat(2, &[&[1, 1], &[0, -1]]).determinant(), BigInt::from(-1));
        assert_eq!(mat(3, &[&[0, 1, 2], &[1, 0, 3], &[4, -3, 8]]).determinant(), BigInt::from(-2));
        assert_eq!(mat(2, &[&[2, 4], &[1, 2]]).determinant(), BigInt::zero());
    }
}
