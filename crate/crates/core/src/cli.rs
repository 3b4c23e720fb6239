//! Command-line front end.
//!
//! `analyze` exits 0 for a retract, 10 when the subgroup is not verbally
//! closed, 2 for unreadable or invalid specs, 1 when a requested
//! verification fails. `selftest` exits 0 or 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{
    enumerate_characters, random_decomposable_module, random_epimorphism, random_module, verify_component_identity_with,
    verify_epimorphism_factoring, verify_tower_identity, Character, InvolutionModule, SimplicityReport,
};
use crate::ambient::{analyze, verify_retraction, verify_solution_in_g, Analysis, AnalysisOptions, Factor, GroupSpec, Verdict};
use crate::dihedral::{delta_tuple, evaluate_v_closed_form, evaluate_v_program, factored, spot_check_no_solution};
use crate::lattice::{AbelianPresentation, IntMatrix, RationalVector};
use crate::words::{build_v_chi, CosetWords, Program, SLWord};

pub const EXIT_RETRACT: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CLOSED: i32 = 10;

#[derive(Parser, Debug)]
#[command(name = "dihedral-closure", version, about = "Decide verbal closedness of infinite dihedral subgroups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyze a group spec file.
    Analyze(AnalyzeArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    pub path: PathBuf,
    /// Write the witness equation to FILE.
    #[arg(long, value_name = "FILE")]
    pub emit_equation: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exponent for characters with zero component (not ±1).
    #[arg(long, default_value = "0", allow_hyphen_values = true, value_parser = parse_filler)]
    pub filler: BigInt,
    /// Verify the retraction or the solution and certificate.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Squares per character in the witness equation.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub squares: Option<u64>,
    /// Include wall-clock timings (makes the report run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub bound: i64,
}

impl AnalyzeArgs {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        AnalyzeArgs {
            path: path.into(),
            emit_equation: None,
            seed: 0,
            filler: BigInt::zero(),
            verify: false,
            format: Format::Text,
            squares: None,
            timing: false,
            samples: 10_000,
            bound: 100,
        }
    }
}

fn parse_filler(s: &str) -> Result<BigInt, String> {
    let e: BigInt = s.trim().parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if e.is_one() || e == -BigInt::one() {
        return Err("filler exponent must not be 1 or -1".into());
    }
    Ok(e)
}

/// Exit code plus captured output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(msg: impl std::fmt::Display) -> Self {
        Outcome { code: EXIT_INVALID, stdout: String::new(), stderr: format!("error: {msg}\n") }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Selftest => cmd_selftest(),
    }
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct CharacterRow {
    pub character: String,
    pub component: String,
    pub k: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct EquationSummary {
    pub rhs: String,
    pub rhs_exponent: String,
    pub squares: usize,
    pub torsion_order: String,
    pub dag_nodes: usize,
    pub flattened_length: String,
    pub text: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct RetractionSummary {
    pub sign_character: String,
    pub translation_functional: Vec<String>,
    pub complement_basis: Vec<Vec<String>>,
    pub finite_normal_subgroup_order: String,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct CertificateLine {
    pub delta: String,
    pub character: String,
    pub k: String,
    pub lhs_subgroup: String,
    pub rhs: String,
    pub obstruction_holds: bool,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
}

#[derive(Serialize, Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub spec_echo: String,
    pub verdict_kind: String,
    pub a_squared: Vec<String>,
    pub simplicity_table: Vec<CharacterRow>,
    pub witness_character: Option<String>,
    pub retraction: Option<RetractionSummary>,
    pub equation: Option<EquationSummary>,
    pub g_solution: Option<BTreeMap<String, String>>,
    pub certificate_table: Vec<CertificateLine>,
    #[serde(skip)]
    pub certificate_text: String,
    pub verification_results: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_us: Option<BTreeMap<String, u128>>,
}

impl Report {
    /// Pretty-printed JSON, the `--format structured` output.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn character_rows(module: &InvolutionModule, q: &[BigInt]) -> Vec<CharacterRow> {
    enumerate_characters(module.c_rank())
        .into_iter()
        .map(|chi| {
            let p = module.project(q, &chi).expect("q has the module's rank");
            let k = if p.is_zero() {
                BigInt::zero()
            } else {
                module.eigenlattice(&chi).content_and_primitive_part(&p).map(|(k, _)| k).expect("components lie in their eigenlattice")
            };
            CharacterRow { character: chi.to_string(), component: p.to_string(), k: k.to_string() }
        })
        .collect()
}

/// Builds the report for an analyzed spec, running the verifications when
/// asked.
pub fn build_report(spec: &GroupSpec, analysis: &Analysis, args: &AnalyzeArgs, timing: &mut BTreeMap<String, u128>) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let g = spec.group();
    let mut report = Report {
        spec_echo: spec.to_text(),
        verdict_kind: analysis.verdict.kind().to_string(),
        a_squared: analysis.a_squared.iter().map(ToString::to_string).collect(),
        simplicity_table: character_rows(&analysis.data.module, &analysis.a_squared),
        witness_character: match &analysis.report {
            SimplicityReport::Simple { witness_character, .. } => Some(witness_character.to_string()),
            SimplicityReport::NotSimple { .. } => None,
        },
        retraction: None,
        equation: None,
        g_solution: None,
        certificate_table: Vec::new(),
        certificate_text: String::new(),
        verification_results: Vec::new(),
        timing_us: None,
    };
    match &analysis.verdict {
        Verdict::Retract(rho) => {
            report.retraction = Some(RetractionSummary {
                sign_character: rho.sign_character.to_string(),
                translation_functional: rho.translation_functional().iter().map(ToString::to_string).collect(),
                complement_basis: rho.complement_basis().iter().map(|v| v.iter().map(ToString::to_string).collect()).collect(),
                finite_normal_subgroup_order: rho.torsion.torsion_order.to_string(),
            });
            if args.verify {
                let t = Instant::now();
                let check = verify_retraction(&|x| rho.apply_in_g(x), spec, args.samples, args.bound, &mut rng);
                timing.insert("verify".into(), t.elapsed().as_micros());
                report.verification_results = vec![
                    Check { name: "retraction fixes a and b".into(), passed: check.fixes_h, samples: 2 },
                    Check { name: "retraction is a homomorphism".into(), passed: check.homomorphism, samples: check.samples },
                    Check { name: "retraction is idempotent".into(), passed: check.idempotent, samples: check.samples },
                ];
            }
        }
        Verdict::NotVerballyClosed { equation, g_solution, certificate } => {
            report.equation = Some(EquationSummary {
                rhs: format!("a^({})", factored(equation.rhs_exponent())),
                rhs_exponent: equation.rhs_exponent().to_string(),
                squares: equation.squares(),
                torsion_order: equation.torsion_order().to_string(),
                dag_nodes: Program::compile(equation.lhs()).len(),
                flattened_length: equation.lhs().flat_len().to_string(),
                text: equation.to_sexpr(),
            });
            report.g_solution = Some(g_solution.iter().map(|(k, v)| (k.clone(), g.to_word(v))).collect());
            report.certificate_table = certificate
                .rows
                .iter()
                .map(|r| CertificateLine {
                    delta: format!("({})", r.delta.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")),
                    character: r.matched_character.to_string(),
                    k: r.exponent.to_string(),
                    lhs_subgroup: format!("<a^({})>", r.subgroup_label()),
                    rhs: format!("a^({})", factored(&r.target)),
                    obstruction_holds: r.obstruction_holds(),
                })
                .collect();
            report.certificate_text = certificate.to_string();
            if args.verify {
                let t = Instant::now();
                let solved = verify_solution_in_g(equation, g_solution, spec).unwrap_or(false);
                let certified = certificate.verify(equation);
                let spot = spot_check_no_solution(equation, 50, args.samples, &mut rng);
                timing.insert("verify".into(), t.elapsed().as_micros());
                report.verification_results = vec![
                    Check { name: "solution in G".into(), passed: solved, samples: 1 },
                    Check { name: "certificate".into(), passed: certified, samples: certificate.rows.len() },
                    Check { name: "no solution found in D-infinity".into(), passed: spot, samples: args.samples },
                ];
            }
        }
    }
    if args.timing {
        report.timing_us = Some(timing.clone());
    }
    report
}

pub fn render_text(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "spec:");
    for line in report.spec_echo.lines() {
        let _ = writeln!(s, "  {line}");
    }
    let _ = writeln!(s, "verdict: {}", report.verdict_kind);
    let _ = writeln!(s, "a^2 in Q: ({})", report.a_squared.join(", "));
    let _ = writeln!(s, "components:");
    let w0 = report.simplicity_table.iter().map(|r| r.character.len()).max().unwrap_or(0).max("character".len());
    let w1 = report.simplicity_table.iter().map(|r| r.component.chars().count()).max().unwrap_or(0).max("component".len());
    let _ = writeln!(s, "  {:<w0$}  {:<w1$}  k", "character", "component");
    for r in &report.simplicity_table {
        let _ = writeln!(s, "  {:<w0$}  {:<w1$}  {}", r.character, r.component, r.k);
    }
    if let Some(w) = &report.witness_character {
        let _ = writeln!(s, "primitive component at {w}");
    }
    if let Some(r) = &report.retraction {
        let _ = writeln!(s, "retraction:");
        let _ = writeln!(s, "  sign character: {}", r.sign_character);
        let _ = writeln!(s, "  translation functional: ({})", r.translation_functional.join(", "));
        let basis: Vec<String> = r.complement_basis.iter().map(|v| format!("({})", v.join(", "))).collect();
        let _ = writeln!(s, "  complement basis: [{}]", basis.join(", "));
        let _ = writeln!(s, "  finite normal subgroup order: {}", r.finite_normal_subgroup_order);
    }
    if let Some(e) = &report.equation {
        let _ = writeln!(s, "equation:");
        let _ = writeln!(s, "  rhs: {}", e.rhs);
        let _ = writeln!(s, "  squares per character: {}", e.squares);
        let _ = writeln!(s, "  torsion order: {}", e.torsion_order);
        let _ = writeln!(s, "  dag nodes: {}", e.dag_nodes);
        let _ = writeln!(s, "  flattened length: {}", e.flattened_length);
    }
    if let Some(sol) = &report.g_solution {
        let _ = writeln!(s, "solution in G:");
        for (k, v) in sol.iter().filter(|(_, v)| v.as_str() != "1") {
            let _ = writeln!(s, "  {k} = {v}");
        }
        let _ = writeln!(s, "  (all other variables = 1)");
    }
    if !report.certificate_text.is_empty() {
        let _ = writeln!(s, "certificate:");
        for line in report.certificate_text.lines() {
            let _ = writeln!(s, "  {line}");
        }
    }
    if !report.verification_results.is_empty() {
        let _ = writeln!(s, "verification:");
        for c in &report.verification_results {
            let _ = writeln!(s, "  {}: {} ({} samples)", c.name, if c.passed { "pass" } else { "FAIL" }, c.samples);
        }
    }
    if let Some(t) = &report.timing_us {
        let _ = writeln!(s, "timing (us):");
        for (k, v) in t {
            let _ = writeln!(s, "  {k}: {v}");
        }
    }
    s
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Outcome {
    if args.filler.is_one() || args.filler == -BigInt::one() {
        return Outcome::error("filler exponent must not be 1 or -1");
    }
    let mut timing = BTreeMap::new();
    let t = Instant::now();
    let text = match std::fs::read_to_string(&args.path) {
        Ok(t) => t,
        Err(e) => return Outcome::error(format!("{}: {e}", args.path.display())),
    };
    let spec = match GroupSpec::parse(&text) {
        Ok(s) => s,
        Err(e) => return Outcome::error(format!("{}: {e}", args.path.display())),
    };
    timing.insert("parse".into(), t.elapsed().as_micros());
    let options = AnalysisOptions { squares: args.squares.map(|n| n as usize), filler: args.filler.clone() };
    let t = Instant::now();
    let analysis = match analyze(&spec, &options) {
        Ok(a) => a,
        Err(e) => return Outcome::error(format!("{}: {e}", args.path.display())),
    };
    timing.insert("analyze".into(), t.elapsed().as_micros());
    let report = build_report(&spec, &analysis, args, &mut timing);
    let mut stderr = String::new();
    if let Some(path) = &args.emit_equation {
        match &analysis.verdict {
            Verdict::NotVerballyClosed { equation, .. } => {
                if let Err(e) = std::fs::write(path, equation.to_sexpr()) {
                    return Outcome::error(format!("{}: {e}", path.display()));
                }
            }
            Verdict::Retract(_) => stderr.push_str("note: no witness equation for a retract, nothing written\n"),
        }
    }
    let stdout = match args.format {
        Format::Text => render_text(&report),
        Format::Structured => report.to_json(),
    };
    let code = if report.verification_results.iter().any(|c| !c.passed) {
        EXIT_FAILURE
    } else {
        match analysis.verdict {
            Verdict::Retract(_) => EXIT_RETRACT,
            Verdict::NotVerballyClosed { .. } => EXIT_NOT_CLOSED,
        }
    };
    Outcome { code, stdout, stderr }
}

type Projector = dyn Fn(&InvolutionModule, &[BigInt], &Character) -> RationalVector;

fn ints(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn swap_module() -> InvolutionModule {
    let swap = IntMatrix::from_rows(2, &[ints(&[0, 1]), ints(&[1, 0])]);
    InvolutionModule::new(AbelianPresentation::free(2), vec![swap]).expect("swap is an involution")
}

fn random_modules(seed: u64, count: usize) -> Vec<(InvolutionModule, Vec<BigInt>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let module = random_module(&mut rng, i % 3, 3, &[2, 3, 4]);
            let q = (0..module.rank_ambient()).map(|_| BigInt::from(rng.gen_range(-20i64..=20))).collect();
            (module, q)
        })
        .collect()
}

/// Runs every self-test check with the given projector; returns the names
/// of the passing checks, or the name of the first failing one.
pub fn selftest_with(projector: &Projector) -> Result<Vec<&'static str>, &'static str> {
    let mut passed = Vec::new();
    let mut check = |name: &'static str, ok: bool| {
        if ok {
            passed.push(name);
            Ok(())
        } else {
            Err(name)
        }
    };

    let swap = swap_module();
    let q = ints(&[2, 5]);
    let plus = Character::from_signs(&[1]);
    let p = projector(&swap, &q, &plus);
    let closure = swap.decomposable_closure().membership_solve(&RationalVector::from_integers(&q));
    let closure_ok = closure.is_some_and(|c| {
        let basis = swap.decomposable_closure().basis().to_vec();
        let back = basis.iter().zip(&c).fold(RationalVector::zero(2), |acc, (b, x)| acc.add(&b.scale_int(x)));
        back == RationalVector::from_integers(&q)
    });
    let not_simple = swap.is_simple(&q).map(|r| !r.is_simple()).unwrap_or(false);
    check(
        "swap-module fixture",
        p == RationalVector::from_fractions(&[(7, 2), (7, 2)]) && closure_ok && not_simple,
    )?;

    let law = (-10i64..=10).all(|x| {
        (-10i64..=10).all(|y| {
            let expected = (x + y).abs() == 1 || (x - y).abs() == 1;
            swap.is_simple(&ints(&[x, y])).map(|r| r.is_simple() == expected).unwrap_or(false)
        })
    });
    check("two-variable simplicity law", law)?;

    let modules = random_modules(0x5eed, 100);
    check(
        "component-sum identity",
        modules.iter().all(|(m, q)| verify_component_identity_with(m, q, projector)),
    )?;

    let eigen = modules.iter().all(|(m, q)| {
        let x = m.group().to_free(q);
        enumerate_characters(m.c_rank()).iter().all(|chi| {
            let p = projector(m, &x, chi);
            m.free_actions().iter().enumerate().all(|(j, a)| a.mul_rational_vec(&p) == p.scale_int(&BigInt::from(chi.sign(j))))
        })
    });
    check("projections are eigenvectors", eigen)?;

    check("tower-word identity", modules.iter().all(|(m, q)| verify_tower_identity(m, q)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xe91);
    let epi = (0..100).all(|i| {
        let (m_hat, m) = if i % 2 == 0 { (1, 2) } else { (2, 3) };
        let module = random_decomposable_module(&mut rng, m_hat);
        let phi = random_epimorphism(&mut rng, m, m_hat);
        let q: Vec<BigInt> = (0..module.rank_ambient()).map(|_| BigInt::from(rng.gen_range(-9i64..=9))).collect();
        verify_epimorphism_factoring(&module, &phi, &q)
    });
    check("epimorphism factoring", epi)?;

    let coset = CosetWords::new(4);
    let programs: Vec<(Character, Program)> = enumerate_characters(4)
        .into_iter()
        .map(|chi| (chi, Program::compile(&build_v_chi(&chi, &coset, &SLWord::generator("y")))))
        .collect();
    let closed = (0..16).all(|mask| {
        let delta = delta_tuple(4, mask);
        let ks: Vec<BigInt> = (0..4).map(|j| BigInt::from(mask as i64 * 3 - 7 * j)).collect();
        let y = BigInt::from(2 * (mask as i64) - 11);
        programs
            .iter()
            .all(|(chi, prog)| evaluate_v_program(prog, &ks, &delta, &y).ok() == Some(evaluate_v_closed_form(chi, &delta, &y)))
    });
    check("tower-word closed form in D-infinity", closed)?;

    let witness = GroupSpec::new(vec![Factor::DInf, Factor::DInf], "b1*b2", "a1^3*a2^5")
        .ok()
        .and_then(|s| analyze(&s, &AnalysisOptions::default()).ok().map(|a| (s, a)))
        .is_some_and(|(s, a)| match &a.verdict {
            Verdict::NotVerballyClosed { equation, g_solution, certificate } => {
                equation.exponents()[0b0100] == BigInt::from(3)
                    && equation.exponents()[0b0001] == BigInt::from(5)
                    && *equation.rhs_exponent() == BigInt::one() << 17
                    && certificate.verify(equation)
                    && verify_solution_in_g(equation, g_solution, &s).unwrap_or(false)
            }
            Verdict::Retract(_) => false,
        });
    check("two-factor witness fixture", witness)?;

    let retract = GroupSpec::new(vec![Factor::DInf, Factor::DInf], "b1", "a1")
        .ok()
        .and_then(|s| analyze(&s, &AnalysisOptions::default()).ok().map(|a| (s, a)))
        .is_some_and(|(s, a)| match &a.verdict {
            Verdict::Retract(rho) => rho.verify(&s, 1000, 100, &mut ChaCha8Rng::seed_from_u64(7)).passed(),
            Verdict::NotVerballyClosed { .. } => false,
        });
    check("projection retraction fixture", retract)?;

    Ok(passed)
}

pub fn cmd_selftest() -> Outcome {
    selftest_outcome(&|m, x, chi| m.project_free(x, chi))
}

pub fn selftest_outcome(projector: &Projector) -> Outcome {
    match selftest_with(projector) {
        Ok(names) => {
            let mut stdout = String::new();
            for n in names {
                let _ = writeln!(stdout, "ok   {n}");
            }
            Outcome { code: 0, stdout, stderr: String::new() }
        }
        Err(name) => Outcome { code: EXIT_FAILURE, stdout: String::new(), stderr: format!("selftest failed: {name}\n") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filler_parsing() {
        assert!(parse_filler("1").is_err());
        assert!(parse_filler("-1").is_err());
        assert!(parse_filler("x").is_err());
        assert_eq!(parse_filler("2018").unwrap(), BigInt::from(2018));
        assert_eq!(parse_filler("-3").unwrap(), BigInt::from(-3));
    }

    #[test]
    fn cli_parses_flags() {
        let cli = Cli::try_parse_from([
            "dihedral-closure",
            "analyze",
            "spec.toml",
            "--seed",
            "4",
            "--filler",
            "-2",
            "--format",
            "structured",
            "--squares",
            "2",
            "--verify",
        ])
        .unwrap();
        let Command::Analyze(a) = cli.command else { panic!() };
        assert_eq!(a.seed, 4);
        assert_eq!(a.filler, BigInt::from(-2));
        assert_eq!(a.format, Format::Structured);
        assert_eq!(a.squares, Some(2));
        assert!(a.verify);
        assert!(Cli::try_parse_from(["dihedral-closure", "analyze", "x", "--filler", "1"]).is_err());
        assert!(Cli::try_parse_from(["dihedral-closure", "analyze", "x", "--squares", "0"]).is_err());
    }

    #[test]
    fn selftest_passes() {
        let out = cmd_selftest();
        assert_eq!(out.code, 0, "{}", out.stderr);
    }

    #[test]
    fn selftest_catches_sign_flip() {
        let out = selftest_outcome(&|m, x, chi| {
            let p = m.project_free(x, chi);
            if chi.is_trivial() {
                p
            } else {
                p.scale_int(&BigInt::from(-1))
            }
        });
        assert_eq!(out.code, EXIT_FAILURE);
        assert_eq!(out.stderr, "selftest failed: component-sum identity\n");
    }
}
