//! The infinite dihedral group `⟨b⟩₂ ⋉ ⟨a⟩∞`, closed-form values of the
//! tower words over it, and no-solution certificates for witness equations.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use thiserror::Error;

use crate::action::Character;
use crate::words::{Equation, Group, Program, SLWord, WordError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DihedralError {
    #[error("invalid equation: {0}")]
    InvalidEquation(String),
}

/// `a^translation · b^flip`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DihedralElement {
    pub translation: BigInt,
    pub flip: bool,
}

impl DihedralElement {
    pub fn new(translation: impl Into<BigInt>, flip: bool) -> Self {
        DihedralElement { translation: translation.into(), flip }
    }

    pub fn identity() -> Self {
        DihedralElement::new(0, false)
    }

    /// `a^k`.
    pub fn translation(k: impl Into<BigInt>) -> Self {
        DihedralElement::new(k, false)
    }

    /// `a^k b`.
    pub fn reflection(k: impl Into<BigInt>) -> Self {
        DihedralElement::new(k, true)
    }

    /// `b^flip a^k`, rewritten as `a^{±k} b^flip`.
    pub fn from_b_first(flip: bool, k: impl Into<BigInt>) -> Self {
        let k = k.into();
        DihedralElement::new(if flip { -k } else { k }, flip)
    }

    pub fn is_identity(&self) -> bool {
        !self.flip && self.translation.is_zero()
    }

    /// `Some(order)` for elements of finite order, `None` otherwise.
    pub fn order(&self) -> Option<u32> {
        if self.flip {
            Some(2)
        } else if self.translation.is_zero() {
            Some(1)
        } else {
            None
        }
    }
}

impl fmt::Display for DihedralElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.translation.is_zero(), self.flip) {
            (true, false) => write!(f, "1"),
            (true, true) => write!(f, "b"),
            (false, flip) => {
                if self.translation.is_one() {
                    write!(f, "a")?;
                } else {
                    write!(f, "a^{}", self.translation)?;
                }
                if flip {
                    write!(f, "*b")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct InfiniteDihedral;

impl Group for InfiniteDihedral {
    type Elem = DihedralElement;

    fn identity(&self) -> DihedralElement {
        DihedralElement::identity()
    }

    fn mul(&self, g: &DihedralElement, h: &DihedralElement) -> DihedralElement {
        let translation = if g.flip { &g.translation - &h.translation } else { &g.translation + &h.translation };
        DihedralElement { translation, flip: g.flip ^ h.flip }
    }

    fn inv(&self, g: &DihedralElement) -> DihedralElement {
        if g.flip {
            g.clone()
        } else {
            DihedralElement::translation(-&g.translation)
        }
    }

    fn pow(&self, g: &DihedralElement, e: &BigInt) -> DihedralElement {
        if g.flip {
            if e.is_even() {
                DihedralElement::identity()
            } else {
                g.clone()
            }
        } else {
            DihedralElement::translation(&g.translation * e)
        }
    }
}

/// The character `χ′` with `χ′(d_j) = (-1)^{δ_j}` induced by substituting
/// `x_j = a^{k_j} b^{δ_j}`.
pub fn character_of_substitution(delta: &[u8]) -> Character {
    let signs: Vec<i32> = delta.iter().map(|&d| if d % 2 == 1 { -1 } else { 1 }).collect();
    Character::from_signs(&signs)
}

/// Bit tuple of a substitution pattern from its mask (first entry most
/// significant).
pub fn delta_tuple(rank: usize, mask: usize) -> Vec<u8> {
    (0..rank).map(|j| ((mask >> (rank - 1 - j)) & 1) as u8).collect()
}

/// Value of the tower word of `chi` under `x_j = a^{k_j} b^{δ_j}` and
/// `y = a^{y_exponent}`: `a^{y_exponent · 2^{|C|}}` if `chi` is the
/// substitution's character, the identity otherwise.
pub fn evaluate_v_closed_form(chi: &Character, delta: &[u8], y_exponent: &BigInt) -> DihedralElement {
    if character_of_substitution(delta) == *chi {
        DihedralElement::translation(y_exponent << (1usize << chi.rank()))
    } else {
        DihedralElement::identity()
    }
}

/// A compiled tower word evaluated at `x_j = a^{k_j} b^{δ_j}` and
/// `y = a^{y_exponent}`.
pub fn evaluate_v_program(program: &Program, ks: &[BigInt], delta: &[u8], y_exponent: &BigInt) -> Result<DihedralElement, WordError> {
    program.evaluate(&InfiniteDihedral, |name| {
        if name == "y" {
            return Some(DihedralElement::translation(y_exponent.clone()));
        }
        let j: usize = name.strip_prefix('x')?.parse().ok()?;
        Some(DihedralElement::new(ks.get(j.checked_sub(1)?)?.clone(), *delta.get(j - 1)? == 1))
    })
}

/// One substitution pattern of a no-solution certificate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateRow {
    pub delta: Vec<u8>,
    pub matched_character: Character,
    /// Exponent of the matched character's factor in the equation.
    pub exponent: BigInt,
    /// Every substitution with this pattern sends the left side into
    /// `⟨a^subgroup_generator⟩`.
    pub subgroup_generator: BigInt,
    /// Exponent of `a` on the right side.
    pub target: BigInt,
}

impl CertificateRow {
    /// Whether `target ∉ subgroup_generator · ℤ`.
    pub fn obstruction_holds(&self) -> bool {
        if self.subgroup_generator.is_zero() {
            !self.target.is_zero()
        } else {
            !self.target.is_multiple_of(&self.subgroup_generator)
        }
    }

    /// Generator of the left side's subgroup written as `target·k`, e.g.
    /// `2^17*3`.
    pub fn subgroup_label(&self) -> String {
        if self.exponent.is_zero() {
            "0".to_string()
        } else if self.exponent.is_negative() {
            format!("{}*({})", factored(&self.target), self.exponent)
        } else {
            format!("{}*{}", factored(&self.target), self.exponent)
        }
    }
}

/// Proof that a witness equation has no solution in `D∞`, one row per
/// substitution pattern `δ ∈ {0,1}^m` in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoSolutionCertificate {
    pub c_rank: usize,
    pub torsion_order: BigInt,
    pub rows: Vec<CertificateRow>,
}

impl NoSolutionCertificate {
    /// Rechecks every row's arithmetic against `eq`.
    pub fn verify(&self, eq: &Equation) -> bool {
        let m = self.c_rank;
        if eq.c_rank() != m || self.rows.len() != 1usize << m || eq.rhs_generator() != "a" {
            return false;
        }
        let unit = eq.rhs_exponent();
        self.rows.iter().enumerate().all(|(mask, row)| {
            row.delta == delta_tuple(m, mask)
                && row.matched_character == character_of_substitution(&row.delta)
                && row.exponent == eq.exponents()[row.matched_character.index()]
                && row.target == *unit
                && row.subgroup_generator == unit * &row.exponent
                && row.obstruction_holds()
        })
    }
}

impl fmt::Display for NoSolutionCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header = ["delta", "character", "k", "LHS subgroup", "RHS", "obstruction"];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                let delta: Vec<String> = r.delta.iter().map(ToString::to_string).collect();
                let obstruction = if r.subgroup_generator.is_zero() {
                    "LHS is 1, RHS is not".to_string()
                } else {
                    format!("{} is not a multiple of {}", factored(&r.target), r.subgroup_label())
                };
                [
                    format!("({})", delta.join(",")),
                    r.matched_character.to_string(),
                    r.exponent.to_string(),
                    format!("<a^({})>", r.subgroup_label()),
                    format!("a^({})", factored(&r.target)),
                    obstruction,
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        writeln!(f, "{}", line(&header.map(String::from)))?;
        for row in &body {
            writeln!(f, "{}", line(row))?;
        }
        Ok(())
    }
}

/// `n` written as `±2^e*odd`.
pub fn factored(n: &BigInt) -> String {
    if n.is_zero() {
        return "0".to_string();
    }
    let sign = if n.is_negative() { "-" } else { "" };
    let mag = n.magnitude();
    let e = mag.trailing_zeros().unwrap_or(0);
    let odd = mag >> e;
    let two = match e {
        0 => None,
        1 => Some("2".to_string()),
        _ => Some(format!("2^{e}")),
    };
    match (two, odd.is_one()) {
        (None, _) => format!("{sign}{odd}"),
        (Some(t), true) => format!("{sign}{t}"),
        (Some(t), false) => format!("{sign}{t}*{odd}"),
    }
}

/// Certificate that `eq` has no solution in `D∞`.
pub fn certify_no_solution(eq: &Equation) -> Result<NoSolutionCertificate, DihedralError> {
    if eq.rhs_generator() != "a" {
        return Err(DihedralError::InvalidEquation(format!("right side is a power of `{}`, not `a`", eq.rhs_generator())));
    }
    if let Some((i, k)) = eq.exponents().iter().enumerate().find(|(_, k)| k.abs().is_one()) {
        return Err(DihedralError::InvalidEquation(format!("character {i} has exponent {k}")));
    }
    if !eq.is_canonical() {
        return Err(DihedralError::InvalidEquation("left side is not the witness word for its metadata".into()));
    }
    let m = eq.c_rank();
    let unit = eq.rhs_exponent().clone();
    let rows = (0..1usize << m)
        .map(|mask| {
            let delta = delta_tuple(m, mask);
            let matched_character = character_of_substitution(&delta);
            let exponent = eq.exponents()[matched_character.index()].clone();
            CertificateRow {
                subgroup_generator: &unit * &exponent,
                delta,
                matched_character,
                exponent,
                target: unit.clone(),
            }
        })
        .collect();
    let cert = NoSolutionCertificate { c_rank: m, torsion_order: eq.torsion_order().clone(), rows };
    debug_assert!(cert.verify(eq));
    Ok(cert)
}

/// A random integer in `[-bound, bound]`, half the time drawn from `[-2, 2]`
/// instead so that small values are well covered.
fn sample_int<R: Rng + ?Sized>(rng: &mut R, bound: i64) -> i64 {
    let b = if rng.gen_bool(0.5) { bound.abs() } else { bound.abs().min(2) };
    rng.gen_range(-b..=b)
}

/// Randomly substitutes elements of `D∞` into `lhs` looking for a value
/// equal to `rhs`. Variables `x1..xm` get the flip pattern of the current
/// trial number (cycling through all `2^m` patterns); other variables get a
/// random flip. Returns the first solving assignment found.
pub fn search_solution<R: Rng + ?Sized>(
    lhs: &SLWord,
    rhs: &DihedralElement,
    c_rank: usize,
    bound: i64,
    trials: usize,
    rng: &mut R,
) -> Option<Vec<(String, DihedralElement)>> {
    let prog = Program::compile(lhs);
    let x_index: Vec<Option<usize>> = prog
        .generators()
        .iter()
        .map(|g| g.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()).filter(|&j| j >= 1 && j <= c_rank))
        .collect();
    let group = InfiniteDihedral;
    for t in 0..trials {
        let pattern = if c_rank == 0 { 0 } else { t % (1usize << c_rank) };
        let values: Vec<DihedralElement> = x_index
            .iter()
            .map(|xj| {
                let flip = match xj {
                    Some(j) => (pattern >> (c_rank - j)) & 1 == 1,
                    None => rng.gen_bool(0.5),
                };
                DihedralElement::new(sample_int(rng, bound), flip)
            })
            .collect();
        if prog.run(&group, &values) == *rhs {
            return Some(prog.generators().iter().map(|g| g.to_string()).zip(values).collect());
        }
    }
    None
}

/// Randomized corroboration of a certificate: `true` iff no trial
/// substitution solves `eq` in `D∞`. Not a proof.
pub fn spot_check_no_solution<R: Rng + ?Sized>(eq: &Equation, bound: i64, trials: usize, rng: &mut R) -> bool {
    let rhs = DihedralElement::translation(eq.rhs_exponent().clone());
    search_solution(eq.lhs(), &rhs, eq.c_rank(), bound, trials, rng).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::enumerate_characters;
    use crate::words::{build_v_chi, evaluate, CosetWords};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_factor_equation(filler: i64) -> Equation {
        let mut exps = vec![BigInt::from(filler); 16];
        exps[0b0100] = BigInt::from(3);
        exps[0b0001] = BigInt::from(5);
        Equation::from_exponents(exps, 1, BigInt::one(), 4)
    }

    #[test]
    fn multiplication_table() {
        let h = InfiniteDihedral;
        let ab = DihedralElement::reflection(1);
        assert!(h.mul(&ab, &ab).is_identity());
        let a = DihedralElement::translation(1);
        let b = DihedralElement::reflection(0);
        assert_eq!(h.mul(&h.mul(&b, &a), &b), DihedralElement::translation(-1));
        assert_eq!(h.mul(&DihedralElement::translation(2), &DihedralElement::translation(3)), DihedralElement::translation(5));
        assert_eq!(DihedralElement::from_b_first(true, 4), DihedralElement::reflection(-4));
        assert_eq!(DihedralElement::reflection(3).order(), Some(2));
        assert_eq!(DihedralElement::translation(3).order(), None);
        assert_eq!(DihedralElement::identity().order(), Some(1));
        assert_eq!(DihedralElement::reflection(-2).to_string(), "a^-2*b");
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let h = InfiniteDihedral;
        for g in [DihedralElement::translation(3), DihedralElement::reflection(-7)] {
            let mut acc = DihedralElement::identity();
            for e in 0..7i64 {
                assert_eq!(h.pow(&g, &BigInt::from(e)), acc);
                assert_eq!(h.pow(&g, &BigInt::from(-e)), h.inv(&acc));
                acc = h.mul(&acc, &g);
            }
        }
    }

    #[test]
    fn substitution_characters() {
        assert_eq!(character_of_substitution(&[0, 1, 0, 0]), Character::from_signs(&[1, -1, 1, 1]));
        assert_eq!(character_of_substitution(&[0, 0, 0, 1]), Character::from_signs(&[1, 1, 1, -1]));
        assert!(character_of_substitution(&[0, 0, 0, 0]).is_trivial());
    }

    #[test]
    fn closed_form_examples() {
        let alpha = Character::from_signs(&[1, -1, 1, 1]);
        let alpha_beta = Character::from_signs(&[1, -1, 1, -1]);
        let k = BigInt::from(7);
        let expect = DihedralElement::translation(&k << 17);
        assert_eq!(evaluate_v_closed_form(&alpha, &[0, 1, 0, 0], &(&k * 2)), expect);
        assert_eq!(evaluate_v_closed_form(&alpha_beta, &[0, 1, 0, 1], &(&k * 2)), expect);
        assert!(evaluate_v_closed_form(&alpha, &[0, 1, 0, 1], &(&k * 2)).is_identity());
    }

    #[test]
    fn certificate_for_the_two_factor_example() {
        let eq = two_factor_equation(0);
        let cert = certify_no_solution(&eq).unwrap();
        assert!(cert.verify(&eq));
        assert_eq!(cert.rows.len(), 16);
        let unit = BigInt::one() << 17;
        assert_eq!(cert.rows[0b0100].subgroup_generator, &unit * 3);
        assert_eq!(cert.rows[0b0001].subgroup_generator, &unit * 5);
        assert!(cert.rows.iter().enumerate().all(|(i, r)| i == 4 || i == 1 || r.subgroup_generator.is_zero()));
        let text = cert.to_string();
        assert!(text.contains("<a^(2^17*3)>"), "{text}");
        assert!(text.contains("(0,0,0,1)"));

        let eq2018 = two_factor_equation(2018);
        assert!(certify_no_solution(&eq2018).unwrap().verify(&eq2018));
    }

    #[test]
    fn certificate_rejects_unit_exponents() {
        let mut exps = vec![BigInt::zero(); 4];
        exps[1] = BigInt::one();
        let eq = Equation::from_exponents(exps, 1, BigInt::one(), 2);
        assert!(matches!(certify_no_solution(&eq), Err(DihedralError::InvalidEquation(_))));
    }

    #[test]
    fn certificate_verify_catches_tampering() {
        let eq = two_factor_equation(0);
        let mut cert = certify_no_solution(&eq).unwrap();
        cert.rows[4].subgroup_generator = BigInt::one() << 17;
        assert!(!cert.verify(&eq));
    }

    #[test]
    fn factored_forms() {
        assert_eq!(factored(&(BigInt::from(3) << 17)), "2^17*3");
        assert_eq!(factored(&(BigInt::one() << 17)), "2^17");
        assert_eq!(factored(&BigInt::from(-10)), "-2*5");
        assert_eq!(factored(&BigInt::from(7)), "7");
        assert_eq!(factored(&BigInt::zero()), "0");
    }

    #[test]
    fn spot_check_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(spot_check_no_solution(&two_factor_equation(0), 50, 2000, &mut rng));
        // y = a has the solution y ↦ a
        let y = SLWord::generator("y");
        assert!(search_solution(&y, &DihedralElement::translation(1), 0, 5, 500, &mut rng).is_some());
        // a unit exponent makes the equation solvable in D∞
        let mut exps = vec![BigInt::zero(); 16];
        exps[0b0100] = BigInt::one();
        let eq = Equation::from_exponents(exps, 1, BigInt::one(), 4);
        assert!(!spot_check_no_solution(&eq, 50, 20_000, &mut rng));
    }

    #[test]
    fn squares_are_translations_by_even_amounts() {
        let h = InfiniteDihedral;
        for k in -6i64..=6 {
            for flip in [false, true] {
                let g = DihedralElement::new(k, flip);
                let sq = h.mul(&g, &g);
                assert!(!sq.flip && sq.translation.is_even());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_matches_word_evaluation(
            chi_index in 0usize..16,
            delta_mask in 0usize..16,
            ks in proptest::collection::vec(-50i64..=50, 4),
            l in -50i64..=50,
        ) {
            let chi = enumerate_characters(4)[chi_index];
            let delta = delta_tuple(4, delta_mask);
            let coset = CosetWords::new(4);
            let w = build_v_chi(&chi, &coset, &SLWord::generator("y"));
            let v = evaluate(&w, &InfiniteDihedral, |name| {
                if name == "y" { return Some(DihedralElement::translation(2 * l)); }
                let j: usize = name[1..].parse().ok()?;
                Some(DihedralElement::new(ks[j - 1], delta[j - 1] == 1))
            }).unwrap();
            prop_assert_eq!(v, evaluate_v_closed_form(&chi, &delta, &BigInt::from(2 * l)));
        }

        #[test]
        fn skew_commutator_parity_law(eps in 0usize..16, delta_mask in 0usize..16, ks in proptest::collection::vec(-20i64..=20, 4), k in -20i64..=20) {
            // f_α(x1^ε1 x2^ε2 x3^ε3 x4^ε4, a^{2k}) under x_j = a^{k_j} b^{δ_j}
            let alpha = Character::from_signs(&[1, -1, 1, 1]);
            let delta = delta_tuple(4, delta_mask);
            let eps_t = delta_tuple(4, eps);
            let coset = CosetWords::new(4);
            let f = crate::words::skew_commutator(coset.word(eps), alpha.value(eps), &SLWord::generator("y"));
            let v = evaluate(&f, &InfiniteDihedral, |name| {
                if name == "y" { return Some(DihedralElement::translation(2 * k)); }
                let j: usize = name[1..].parse().ok()?;
                Some(DihedralElement::new(ks[j - 1], delta[j - 1] == 1))
            }).unwrap();
            let parity = eps_t[1] as usize + (0..4).map(|i| (delta[i] * eps_t[i]) as usize).sum::<usize>();
            let expect = if parity % 2 == 0 { DihedralElement::translation(4 * k) } else { DihedralElement::identity() };
            prop_assert_eq!(v, expect);
        }
    }
}
