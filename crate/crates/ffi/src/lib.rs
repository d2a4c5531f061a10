//! C ABI for `ltvkit`.
//!
//! Systems live behind an opaque `LtvSystem` handle. Every call returns an
//! `int32_t` error code; on failure `ltv_last_error` holds a message for the
//! calling thread. Matrices are copied out row-major into caller buffers.
//! Strings returned by the library are freed with `ltv_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ltvkit::catalog;
use ltvkit::classify::{classify, Property, VerdictStatus};
use ltvkit::gramian::{gramian, GramianKind};
use ltvkit::report::{Overrides, Resolved, SystemFile};
use ltvkit::transition::TransitionEvaluator;
use ltvkit::verify::{verify, ReportStatus, TheoremId};
use ltvkit::Error;

pub const LTV_OK: i32 = 0;
pub const LTV_ERR_NULL: i32 = 1;
pub const LTV_ERR_UTF8: i32 = 2;
pub const LTV_ERR_PARSE: i32 = 3;
pub const LTV_ERR_DIMENSION: i32 = 4;
pub const LTV_ERR_DOMAIN: i32 = 5;
pub const LTV_ERR_NUMERIC: i32 = 6;
pub const LTV_ERR_INVALID: i32 = 7;
pub const LTV_ERR_BUFFER: i32 = 8;
pub const LTV_ERR_PANIC: i32 = 9;

pub const LTV_CERTIFIED: i32 = 0;
pub const LTV_FALSIFIED: i32 = 1;
pub const LTV_INCONCLUSIVE: i32 = 2;

pub const LTV_PASS: i32 = 0;
pub const LTV_FAIL: i32 = 1;
pub const LTV_HYPOTHESIS_VIOLATED: i32 = 2;

pub const LTV_GRAMIAN_W: i32 = 0;
pub const LTV_GRAMIAN_K: i32 = 1;
pub const LTV_GRAMIAN_M: i32 = 2;
pub const LTV_GRAMIAN_N: i32 = 3;

/// Opaque system handle.
pub struct LtvSystem {
    resolved: Resolved,
    ev: TransitionEvaluator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::Parse { .. } | Error::Json(_) => LTV_ERR_PARSE,
            Error::Dimension(_) | Error::MissingMatrix { .. } => LTV_ERR_DIMENSION,
            Error::OutsideDomain { .. } => LTV_ERR_DOMAIN,
            Error::Eval(_) | Error::StepUnderflow { .. } | Error::TooManySteps { .. } => LTV_ERR_NUMERIC,
            Error::Invalid(_) | Error::Hypothesis { .. } | Error::Io(_) => LTV_ERR_INVALID,
        };
        Failure(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LTV_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            LTV_ERR_PANIC
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LTV_ERR_NULL, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(LTV_ERR_UTF8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(h: *const LtvSystem) -> Result<&'a LtvSystem, Failure> {
    h.as_ref().ok_or_else(|| Failure(LTV_ERR_NULL, "system handle is null".into()))
}

fn null_out(what: &str) -> Failure {
    Failure(LTV_ERR_NULL, format!("{what} is null"))
}

fn new_handle(file: &SystemFile) -> Result<*mut LtvSystem, Failure> {
    let resolved = file.resolve(&Overrides::default())?;
    let ev = TransitionEvaluator::new(resolved.system.clone(), resolved.step_control());
    Ok(Box::into_raw(Box::new(LtvSystem { resolved, ev })))
}

unsafe fn copy_out(m: &nalgebra::DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null_out("output buffer"));
    }
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err(Failure(LTV_ERR_BUFFER, format!("buffer holds {len} values, {need} needed")));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ltv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ltv_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses a system definition document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ltv_system_from_json(json: *const c_char, out: *mut *mut LtvSystem) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null_out("out"));
        }
        let text = read_str(json, "json")?;
        *out = new_handle(&SystemFile::from_json(text)?)?;
        Ok(())
    })
}

/// Opens a built-in catalog system by id (`"S0"` … `"S9"`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ltv_catalog_system(id: *const c_char, out: *mut *mut LtvSystem) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null_out("out"));
        }
        let id = read_str(id, "id")?;
        *out = new_handle(&catalog::find(id)?.file)?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `sys` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ltv_system_free(sys: *mut LtvSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State, input and output dimensions. Any output pointer may be null.
///
/// # Safety
/// `sys` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ltv_system_dims(sys: *const LtvSystem, n: *mut usize, p: *mut usize, m: *mut usize) -> i32 {
    guard(|| {
        let s = &handle(sys)?.resolved.system;
        for (ptr, v) in [(n, s.n()), (p, s.p()), (m, s.m())] {
            if !ptr.is_null() {
                *ptr = v;
            }
        }
        Ok(())
    })
}

/// `Φ(t, s)` into `out` (n×n row-major, `len ≥ n²`).
///
/// # Safety
/// `sys` must be a live handle; `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ltv_transition(sys: *const LtvSystem, t: f64, s: f64, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let h = handle(sys)?;
        copy_out(&h.ev.transition(t, s)?, out, len)
    })
}

/// Gramian `kind` (an `LTV_GRAMIAN_*` value) on `[a, b]` into `out` (n×n row-major).
///
/// # Safety
/// `sys` must be a live handle; `out` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ltv_gramian(sys: *const LtvSystem, kind: i32, a: f64, b: f64, out: *mut f64, len: usize) -> i32 {
    guard(|| {
        let h = handle(sys)?;
        let kind = match kind {
            LTV_GRAMIAN_W => GramianKind::W,
            LTV_GRAMIAN_K => GramianKind::K,
            LTV_GRAMIAN_M => GramianKind::M,
            LTV_GRAMIAN_N => GramianKind::N,
            k => return Err(Failure(LTV_ERR_INVALID, format!("unknown Gramian kind {k}"))),
        };
        if !(a <= b) {
            return Err(Failure(LTV_ERR_INVALID, format!("interval [{a}, {b}] is reversed")));
        }
        copy_out(&gramian(&h.ev, kind, a, b)?.value, out, len)
    })
}

unsafe fn write_json(json_out: *mut *mut c_char, v: &impl serde::Serialize) -> Result<(), Failure> {
    if !json_out.is_null() {
        let text = serde_json::to_string(v).map_err(Error::from)?;
        *json_out = CString::new(text).expect("JSON has no NUL").into_raw();
    }
    Ok(())
}

/// Classifies `property` (`"CO"`, `"UCO"`, `"NUCO"`, `"CC"`, `"UCC"`,
/// `"NUCC"`) on the system's default window. `status` receives an
/// `LTV_CERTIFIED`/`LTV_FALSIFIED`/`LTV_INCONCLUSIVE` value; if `json_out` is
/// non-null it receives the full verdict, to be freed with `ltv_string_free`.
///
/// # Safety
/// `sys` must be a live handle; `property` NUL-terminated; `status` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ltv_classify(sys: *const LtvSystem, property: *const c_char, status: *mut i32, json_out: *mut *mut c_char) -> i32 {
    guard(|| {
        let h = handle(sys)?;
        if status.is_null() {
            return Err(null_out("status"));
        }
        let name = read_str(property, "property")?;
        let p = Property::parse(name).ok_or_else(|| Failure(LTV_ERR_INVALID, format!("unknown property `{name}`")))?;
        let v = classify(&h.ev, p, &h.resolved.classify_settings())?;
        *status = match v.status {
            VerdictStatus::CertifiedOnWindow => LTV_CERTIFIED,
            VerdictStatus::FalsifiedUnderCaps => LTV_FALSIFIED,
            VerdictStatus::Inconclusive => LTV_INCONCLUSIVE,
        };
        write_json(json_out, &v)
    })
}

/// Checks theorem `id` (for example `"GRAMIAN-DUALITY"`) with the system's
/// gains and grids. `status` receives `LTV_PASS`, `LTV_FAIL` or
/// `LTV_HYPOTHESIS_VIOLATED`; `json_out` as in `ltv_classify`.
///
/// # Safety
/// `sys` must be a live handle; `id` NUL-terminated; `status` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ltv_verify(sys: *const LtvSystem, id: *const c_char, status: *mut i32, json_out: *mut *mut c_char) -> i32 {
    guard(|| {
        let h = handle(sys)?;
        if status.is_null() {
            return Err(null_out("status"));
        }
        let name = read_str(id, "theorem id")?;
        let id = TheoremId::parse(name).ok_or_else(|| Failure(LTV_ERR_INVALID, format!("unknown theorem id `{name}`")))?;
        let rep = verify(&h.ev, id, &h.resolved.scenario, &h.resolved.verify_settings())?;
        *status = match rep.status {
            ReportStatus::Pass => LTV_PASS,
            ReportStatus::Fail => LTV_FAIL,
            ReportStatus::HypothesisViolated => LTV_HYPOTHESIS_VIOLATED,
        };
        write_json(json_out, &rep)
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ltv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
