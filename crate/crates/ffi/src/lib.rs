//! C interface to `tforms`.
//!
//! Forms live behind the opaque [`TfForm`] handle. Every fallible call
//! returns a [`TfStatus`]; on failure `tf_last_error` holds a message for
//! the calling thread. Reports come back as JSON strings owned by the
//! caller and released with `tf_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use tforms::classify::{classify_form, congruent};
use tforms::cli::check::{run_check, Suite};
use tforms::cli::{Problem, ProblemFile};
use tforms::field::OperatorField;
use tforms::forms::{discriminant, is_hyperbolic, TorsionForm};
use tforms::linalg::{CMat, C64};
use tforms::torsion::{density_curve, ns_exponent};
use tforms::Error;

/// Status codes. `TF_OK` is zero; everything else is a failure whose
/// message is available from `tf_last_error`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfStatus {
    TfOk = 0,
    TfNullArgument = 1,
    TfInvalidUtf8 = 2,
    TfParse = 3,
    TfValidation = 4,
    TfNumerical = 5,
    TfDimension = 6,
    TfGerm = 7,
    TfHypothesis = 8,
    TfCertificate = 9,
    TfIo = 10,
    TfPanic = 11,
}

/// Which part of the seeded property suite `tf_check` runs.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfSuite {
    TfSuiteAll = 0,
    TfSuiteLinalg = 1,
    TfSuiteForms = 2,
    TfSuiteClassify = 3,
}

/// A torsion Hermitian form.
pub struct TfForm(TorsionForm);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::Parse { .. } => TfStatus::TfParse,
        Error::Validation { .. } => TfStatus::TfValidation,
        Error::NotHermitian { .. }
        | Error::NonFinite
        | Error::NoConvergence { .. }
        | Error::EigenvalueAtThreshold { .. }
        | Error::SpectrumOnCut { .. }
        | Error::SpectrumOutsideContour
        | Error::ContourTooTight { .. }
        | Error::SingularShift { .. }
        | Error::Singular
        | Error::KernelPresent { .. }
        | Error::ContourFailure(_)
        | Error::NotConverging { .. } => TfStatus::TfNumerical,
        Error::DimMismatch(_) | Error::SpaceMismatch(_) => TfStatus::TfDimension,
        Error::GridHitsZero { .. } | Error::UndeclaredZeroSuspected { .. } | Error::GermMismatch { .. } => {
            TfStatus::TfGerm
        }
        Error::NotInjectiveDense { .. }
        | Error::Degenerate(_)
        | Error::NoSplitting { .. }
        | Error::JointlySingular { .. }
        | Error::SmallnessUnreachable(_)
        | Error::ZeroEigenvalueFiber { .. }
        | Error::NotBlockDefinite(_)
        | Error::SpectrumNotPositive { .. }
        | Error::NegativityDetected { .. }
        | Error::HypothesisViolated(_)
        | Error::EmptyWindow => TfStatus::TfHypothesis,
        Error::CertificateFailed(_) => TfStatus::TfCertificate,
        Error::Io(_) => TfStatus::TfIo,
    }
}

/// Internal failure: a status plus its message.
struct Fail(TfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(TfStatus::TfNullArgument, format!("`{name}` is null"))
}

/// Runs `body`, turning errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TfStatus::TfOk,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TfStatus::TfPanic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(TfStatus::TfInvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn form_arg<'a>(p: *const TfForm, name: &str) -> Result<&'a TorsionForm, Fail> {
    p.as_ref().map(|f| &f.0).ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn json(value: &impl serde::Serialize) -> Result<String, Fail> {
    serde_json::to_string(value).map_err(|e| Fail(TfStatus::TfIo, e.to_string()))
}

fn grid_arg(grid: usize) -> Option<usize> {
    (grid > 0).then_some(grid)
}

unsafe fn emit_form(out: *mut *mut TfForm, form: TorsionForm) -> Result<(), Fail> {
    write(out, Box::into_raw(Box::new(TfForm(form))), "out")
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Form described by a problem document (JSON text). Data files are
/// resolved against `base_dir`, which may be NULL for the current
/// directory. `grid` = 0 keeps the document's grid.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_form_from_json(
    json_text: *const c_char,
    base_dir: *const c_char,
    grid: usize,
    out: *mut *mut TfForm,
) -> TfStatus {
    guard(|| {
        let file = ProblemFile::parse(str_arg(json_text, "json")?)?;
        let base = if base_dir.is_null() { PathBuf::new() } else { PathBuf::from(str_arg(base_dir, "base_dir")?) };
        let problem = Problem { file, base, grid_override: grid_arg(grid) };
        emit_form(out, problem.form()?)
    })
}

/// Form described by a problem file on disk.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_form_from_file(path: *const c_char, grid: usize, out: *mut *mut TfForm) -> TfStatus {
    guard(|| {
        let problem = Problem::load(Path::new(str_arg(path, "path")?), grid_arg(grid))?;
        emit_form(out, problem.form()?)
    })
}

/// Discriminant form of a sampled Hermitian field: `grid` fibers of size
/// `dim × dim`, row-major, each entry as interleaved (re, im) doubles, so
/// `data` holds `2·dim²·grid` values.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_form_from_samples(
    data: *const f64,
    dim: usize,
    grid: usize,
    out: *mut *mut TfForm,
) -> TfStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if dim == 0 || grid == 0 {
            return Err(Error::DimMismatch("dim and grid must be positive".into()).into());
        }
        let per = 2 * dim * dim;
        let raw = std::slice::from_raw_parts(data, per * grid);
        let fibers = raw
            .chunks_exact(per)
            .map(|c| CMat::from_vec(dim, dim, c.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()))
            .collect::<tforms::Result<Vec<_>>>()?;
        emit_form(out, discriminant(OperatorField::sampled(fibers)?)?)
    })
}

/// Releases a form. NULL is ignored.
///
/// # Safety
/// `form` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_form_free(form: *mut TfForm) {
    if !form.is_null() {
        drop(Box::from_raw(form));
    }
}

/// Fiber dimension and whether the form is given symbolically.
///
/// # Safety
/// `form` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_form_info(form: *const TfForm, dim: *mut usize, symbolic: *mut bool) -> TfStatus {
    guard(|| {
        let f = form_arg(form, "form")?;
        write(dim, f.alpha().dim(), "dim")?;
        write(symbolic, f.alpha().as_symbolic().is_some(), "symbolic")
    })
}

/// Classification report as JSON.
///
/// # Safety
/// `form` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_classify(form: *const TfForm, out_json: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let report = classify_form(form_arg(form, "form")?)?;
        write(out_json, to_c_string(json(&report)?), "out_json")
    })
}

/// Congruence decision; the full report goes to `out_json` unless it is NULL.
///
/// # Safety
/// `a`, `b` must be live handles; `out_congruent` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_congruent(
    a: *const TfForm,
    b: *const TfForm,
    out_congruent: *mut bool,
    out_json: *mut *mut c_char,
) -> TfStatus {
    guard(|| {
        let report = congruent(form_arg(a, "a")?, form_arg(b, "b")?)?;
        if !out_json.is_null() {
            out_json.write(to_c_string(json(&report)?));
        }
        write(out_congruent, report.congruent, "out_congruent")
    })
}

/// Hyperbolicity; `out_exact` is false when the answer is heuristic.
///
/// # Safety
/// `form` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_is_hyperbolic(form: *const TfForm, out_hyperbolic: *mut bool, out_exact: *mut bool) -> TfStatus {
    guard(|| {
        let report = is_hyperbolic(form_arg(form, "form")?)?;
        write(out_hyperbolic, report.hyperbolic, "out_hyperbolic")?;
        write(out_exact, report.exact, "out_exact")
    })
}

/// Power-law exponent of the spectral density on `[lambda_min, lambda_max]`.
///
/// # Safety
/// `form` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_ns_exponent(
    form: *const TfForm,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let f = form_arg(form, "form")?;
        let curve = density_curve(&f.object, lambda_min, lambda_max, points)?;
        write(out, ns_exponent(&curve)?, "out")
    })
}

/// Seeded property suite. `out_passed` is true when every property held;
/// the report goes to `out_json` unless it is NULL.
///
/// # Safety
/// `out_passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_check(seed: u64, suite: TfSuite, out_passed: *mut bool, out_json: *mut *mut c_char) -> TfStatus {
    guard(|| {
        let suite = match suite {
            TfSuite::TfSuiteAll => Suite::All,
            TfSuite::TfSuiteLinalg => Suite::Linalg,
            TfSuite::TfSuiteForms => Suite::Forms,
            TfSuite::TfSuiteClassify => Suite::Classify,
        };
        let report = run_check(seed, suite);
        if !out_json.is_null() {
            out_json.write(to_c_string(json(&report)?));
        }
        write(out_passed, report.all_passed(), "out_passed")
    })
}
