//! C ABI over `dihedral-closure`.
//!
//! Handles are opaque pointers released with their `_free` function.
//! Functions return a [`DcStatus`]; on failure the message is available
//! from [`dc_last_error_message`] on the same thread. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`dc_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dihedral_closure::ambient::{analyze, Analysis, AnalysisError, AnalysisOptions, GroupSpec, SpecError, Verdict};
use dihedral_closure::cli::{build_report, AnalyzeArgs};
use dihedral_closure::words::parse_word;
use num_bigint::BigInt;

/// Status codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidSpec = 4,
    AnalysisError = 5,
    NotAvailable = 6,
    InvalidArgument = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcVerdictKind {
    Retract = 0,
    NotVerballyClosed = 1,
}

/// A parsed group spec.
pub struct DcSpec {
    spec: GroupSpec,
}

/// The result of analyzing a spec.
pub struct DcAnalysis {
    spec: GroupSpec,
    analysis: Analysis,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let text = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(status: DcStatus, msg: impl std::fmt::Display) -> DcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DcStatus) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DcStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(DcStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(DcStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> DcStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            DcStatus::Ok
        }
        Err(_) => fail(DcStatus::AnalysisError, "output contains a NUL byte"),
    }
}

fn spec_status(e: &SpecError) -> DcStatus {
    match e {
        SpecError::Invalid(_) => DcStatus::InvalidSpec,
        _ => DcStatus::ParseError,
    }
}

/// Parses spec text (the TOML spec format) into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_parse(text: *const c_char, out: *mut *mut DcSpec) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return fail(DcStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match GroupSpec::parse(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(DcSpec { spec }));
                DcStatus::Ok
            }
            Err(e) => fail(spec_status(&e), e),
        }
    })
}

/// # Safety
/// `spec` must come from [`dc_spec_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_spec_free(spec: *mut DcSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Analyzes a spec. `filler` is the exponent for vanishing components
/// (not ±1); `squares` is the number of squares per character, 0 for the
/// default.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_analyze(spec: *const DcSpec, filler: i64, squares: u32, out: *mut *mut DcAnalysis) -> DcStatus {
    guard(|| {
        if spec.is_null() || out.is_null() {
            return fail(DcStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        if filler == 1 || filler == -1 {
            return fail(DcStatus::InvalidArgument, "filler exponent must not be 1 or -1");
        }
        let spec = &(*spec).spec;
        let options = AnalysisOptions { squares: (squares > 0).then_some(squares as usize), filler: BigInt::from(filler) };
        match analyze(spec, &options) {
            Ok(analysis) => {
                *out = Box::into_raw(Box::new(DcAnalysis { spec: spec.clone(), analysis }));
                DcStatus::Ok
            }
            Err(AnalysisError::Spec(e)) => fail(spec_status(&e), e),
            Err(e) => fail(DcStatus::AnalysisError, e),
        }
    })
}

/// # Safety
/// `analysis` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_analysis_verdict(analysis: *const DcAnalysis, out: *mut DcVerdictKind) -> DcStatus {
    guard(|| {
        if analysis.is_null() || out.is_null() {
            return fail(DcStatus::NullPointer, "null argument");
        }
        *out = match (*analysis).analysis.verdict {
            Verdict::Retract(_) => DcVerdictKind::Retract,
            Verdict::NotVerballyClosed { .. } => DcVerdictKind::NotVerballyClosed,
        };
        DcStatus::Ok
    })
}

/// The structured (JSON) report. With `verify` set the retraction or
/// the solution and certificate are checked over `samples` random samples
/// drawn from `seed`.
///
/// # Safety
/// `analysis` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_analysis_report(
    analysis: *const DcAnalysis,
    verify: bool,
    seed: u64,
    samples: u32,
    out: *mut *mut c_char,
) -> DcStatus {
    guard(|| {
        if analysis.is_null() || out.is_null() {
            return fail(DcStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let a = &*analysis;
        let mut args = AnalyzeArgs::new("");
        args.verify = verify;
        args.seed = seed;
        args.samples = samples as usize;
        let report = build_report(&a.spec, &a.analysis, &args, &mut BTreeMap::new());
        write_string(out, report.to_json())
    })
}

/// The witness equation in its S-expression form; `NotAvailable` for a
/// retract.
///
/// # Safety
/// `analysis` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_analysis_equation(analysis: *const DcAnalysis, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        if analysis.is_null() || out.is_null() {
            return fail(DcStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        match &(*analysis).analysis.verdict {
            Verdict::NotVerballyClosed { equation, .. } => write_string(out, equation.to_sexpr()),
            Verdict::Retract(_) => fail(DcStatus::NotAvailable, "a retract has no witness equation"),
        }
    })
}

/// Applies the retraction to an element given as a word in the factor
/// generators; writes the image as a word. `NotAvailable` when the
/// subgroup is not a retract.
///
/// # Safety
/// `analysis` must be a live handle, `word` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_analysis_retract(analysis: *const DcAnalysis, word: *const c_char, out: *mut *mut c_char) -> DcStatus {
    guard(|| {
        if analysis.is_null() || out.is_null() {
            return fail(DcStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let a = &*analysis;
        let Verdict::Retract(rho) = &a.analysis.verdict else {
            return fail(DcStatus::NotAvailable, "the subgroup is not a retract");
        };
        let text = match read_str(word) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let group = a.spec.group();
        let element = match parse_word(text).map_err(|e| e.to_string()).and_then(|w| group.evaluate(&w).map_err(|e| e.to_string())) {
            Ok(g) => g,
            Err(e) => return fail(DcStatus::ParseError, e),
        };
        write_string(out, group.to_word(&rho.apply_in_g(&element)))
    })
}

/// # Safety
/// `analysis` must come from [`dc_analyze`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dc_analysis_free(analysis: *mut DcAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// # Safety
/// `s` must be a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failure on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
