use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dihedral_closure::words::Equation;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dihedral-closure")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn witness_spec_exits_ten() {
    let path = fixture("two_factor_witness.toml");
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    let text = stdout(&out);
    assert!(text.contains("verdict: NotVerballyClosed"));
    assert!(text.contains("(+,-,+,+)  (3, 0)     3"), "{text}");
    assert!(text.contains("(+,+,+,-)  (0, 5)     5"), "{text}");
    assert!(text.contains("rhs: a^(2^17)"));
    assert!(text.contains("<a^(2^17*3)>"));
    assert!(text.contains("<a^(2^17*5)>"));
}

#[test]
fn projection_spec_exits_zero() {
    let path = fixture("factor_projection.toml");
    let out = run(&["analyze", path.to_str().unwrap(), "--verify", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("verdict: Retract"));
    assert!(text.contains("retraction is a homomorphism: pass (2000 samples)"));
}

#[test]
fn malformed_word_exits_two() {
    let path = fixture("malformed_word.toml");
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a1^"));
}

#[test]
fn unreadable_and_invalid_inputs_exit_two() {
    assert_eq!(run(&["analyze", "/nonexistent/spec.toml"]).status.code(), Some(2));
    let path = fixture("two_factor_witness.toml");
    assert_eq!(run(&["analyze", path.to_str().unwrap(), "--filler", "1"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", path.to_str().unwrap(), "--filler", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", path.to_str().unwrap(), "--format", "xml"]).status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("dc_cli_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("not_inverted.toml");
    std::fs::write(&bad, "format = \"dihedral-closure-spec/1\"\nfactors = [\"DInf\", \"Zed\"]\nb = \"b1\"\na = \"a1*t1\"\n").unwrap();
    let out = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b*a*b^-1 is not a^-1"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn reports_are_deterministic_for_a_seed() {
    for name in ["two_factor_witness.toml", "mixed_retract.toml"] {
        let path = fixture(name);
        let args = ["analyze", path.to_str().unwrap(), "--verify", "--seed", "17", "--samples", "500", "--format", "structured"];
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first.stdout, second.stdout);
        let json: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
        assert!(json.get("timing_us").is_none());
    }
    let path = fixture("mixed_retract.toml");
    let timed = run(&["analyze", path.to_str().unwrap(), "--timing", "--format", "structured"]);
    let json: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(json["timing_us"]["analyze"].is_u64());
}

#[test]
fn emitted_equation_round_trips() {
    let dir = std::env::temp_dir().join(format!("dc_emit_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("eq.sexp");
    let path = fixture("two_factor_witness.toml");
    let out = run(&["analyze", path.to_str().unwrap(), "--emit-equation", target.to_str().unwrap(), "--filler", "2018", "--squares", "1"]);
    assert_eq!(out.status.code(), Some(10));
    assert!(stdout(&out).contains("<a^(2^17*2018)>"));
    let eq = Equation::from_sexpr(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(eq.is_canonical());
    assert_eq!(eq.squares(), 1);
    assert_eq!(eq.exponents().iter().filter(|e| **e == 2018.into()).count(), 14);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn structured_report_fields() {
    let path = fixture("torsion_witness.toml");
    let out = run(&["analyze", path.to_str().unwrap(), "--format", "structured"]);
    assert_eq!(out.status.code(), Some(10));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["verdict_kind"], "NotVerballyClosed");
    assert_eq!(json["equation"]["torsion_order"], "3");
    assert_eq!(json["equation"]["rhs"], "a^(2^17*3)");
    assert_eq!(json["simplicity_table"].as_array().unwrap().len(), 16);
    assert_eq!(json["certificate_table"].as_array().unwrap().len(), 16);
    assert_eq!(json["g_solution"]["x2"], "b1");
}

#[test]
fn selftest_exits_zero() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ok   component-sum identity"));
}
