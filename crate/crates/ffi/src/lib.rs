//! C ABI over the varlab operators and experiment runner.
//!
//! Conventions:
//! - every fallible call returns a [`VarlabStatus`]; on failure a message is
//!   available from [`varlab_last_error`] on the same thread;
//! - fields are opaque [`VarlabField`] handles released with [`varlab_field_free`];
//! - strings returned through out-pointers are released with [`varlab_string_free`].
//!
//! Panics never cross the boundary; they are reported as `VARLAB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use varlab::averages::{square_function, Kernel, ScaleSet};
use varlab::harness::run_experiment;
use varlab::harness::RunConfig;
use varlab::lattice::{Field, GridSpec};
use varlab::martingale::cond_expect;
use varlab::variation::{hvar_exact, jump_count, SampledPath};
use varlab::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    InvariantViolated = 4,
    IoError = 5,
    Panic = 6,
}

/// Kernel selector for the averaging operators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarlabKernel {
    Ball = 0,
    Cube = 1,
}

/// Opaque handle to a scalar field on a periodic lattice.
pub struct VarlabField {
    inner: Field,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> VarlabStatus {
    match e {
        Error::Config(_) => VarlabStatus::ConfigError,
        Error::Io(_) => VarlabStatus::IoError,
        _ => VarlabStatus::InvalidArgument,
    }
}

/// Runs `body`, recording errors and containing panics.
fn guard(body: impl FnOnce() -> Result<VarlabStatus, (VarlabStatus, String)>) -> VarlabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            VarlabStatus::Panic
        }
    }
}

fn lift<T>(r: varlab::Result<T>) -> Result<T, (VarlabStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (VarlabStatus, String) {
    (VarlabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (VarlabStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn field_ref<'a>(f: *const VarlabField) -> Result<&'a Field, (VarlabStatus, String)> {
    f.as_ref().map(|h| &h.inner).ok_or_else(|| null("field"))
}

fn emit_field(out: *mut *mut VarlabField, f: Field) -> VarlabStatus {
    // SAFETY: callers check `out` for null before computing `f`.
    unsafe { *out = Box::into_raw(Box::new(VarlabField { inner: f })) };
    VarlabStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn varlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next varlab call on the same thread.
#[no_mangle]
pub extern "C" fn varlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from a varlab out-pointer and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn varlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a field on the `2^log_side` torus in dimension `dim` from `len`
/// values in row-major order (`x0 + side * x1`).
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varlab_field_new(dim: usize, log_side: u32, values: *const f64, len: usize, out: *mut *mut VarlabField) -> VarlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = lift(GridSpec::new(dim, log_side))?;
        let vals = slice(values, len, "values")?.to_vec();
        let f = lift(Field::new(grid, vals))?;
        Ok(emit_field(out, f))
    })
}

/// Releases a field handle. Null is ignored.
///
/// # Safety
/// `f` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn varlab_field_free(f: *mut VarlabField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of lattice points, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn varlab_field_len(f: *const VarlabField) -> usize {
    f.as_ref().map_or(0, |h| h.inner.grid().len())
}

/// Copies the field values into `out`, which must hold exactly the field length.
///
/// # Safety
/// `f` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn varlab_field_values(f: *const VarlabField, out: *mut f64, len: usize) -> VarlabStatus {
    guard(|| {
        let field = field_ref(f)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = field.values();
        if v.len() != len {
            return Err((VarlabStatus::InvalidArgument, format!("buffer holds {len} values, field has {}", v.len())));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), out, len);
        Ok(VarlabStatus::Ok)
    })
}

/// Dyadic conditional expectation onto level-`level` cubes.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varlab_cond_expect(f: *const VarlabField, level: u32, out: *mut *mut VarlabField) -> VarlabStatus {
    guard(|| {
        let field = field_ref(f)?;
        if out.is_null() {
            return Err(null("out"));
        }
        Ok(emit_field(out, lift(cond_expect(field, level))?))
    })
}

/// Smoothed square function over the scales `2^k (1 + m/refinement)`,
/// `k_min <= k <= k_max`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varlab_square_function(f: *const VarlabField, k_min: u32, k_max: u32, refinement: u32, kernel: VarlabKernel, out: *mut *mut VarlabField) -> VarlabStatus {
    guard(|| {
        let field = field_ref(f)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kernel = match kernel {
            VarlabKernel::Ball => Kernel::Ball,
            VarlabKernel::Cube => Kernel::Cube,
        };
        let scales = lift(ScaleSet::new(k_min, k_max, refinement, kernel))?;
        Ok(emit_field(out, lift(square_function(field, &scales))?))
    })
}

/// Exact homogeneous `r`-variation of a scalar path of `len` samples.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varlab_hvar(values: *const f64, len: usize, r: f64, out: *mut f64) -> VarlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = lift(SampledPath::from_values(slice(values, len, "values")?.to_vec()))?;
        *out = lift(hvar_exact(&path, r))?.value;
        Ok(VarlabStatus::Ok)
    })
}

/// Largest number of successive increments exceeding `lambda`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn varlab_jump_count(values: *const f64, len: usize, lambda: f64, out: *mut usize) -> VarlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = lift(SampledPath::from_values(slice(values, len, "values")?.to_vec()))?;
        *out = lift(jump_count(&path, lambda))?.count;
        Ok(VarlabStatus::Ok)
    })
}

/// Runs an experiment from a JSON config and returns the report as JSON.
///
/// With `write_files` set, the three report files are also written to the
/// configured output directory. An invariant violation still produces a
/// report and returns `VARLAB_STATUS_INVARIANT_VIOLATED`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_report` must be
/// writable and receives a string to release with [`varlab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn varlab_run_experiment(config_json: *const c_char, write_files: bool, out_report: *mut *mut c_char) -> VarlabStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out_report.is_null() {
            return Err(null("out_report"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| (VarlabStatus::ConfigError, format!("config is not UTF-8: {e}")))?;
        let cfg = lift(RunConfig::from_json(text))?;
        let report = lift(run_experiment(&cfg))?;
        if write_files {
            lift(report.write_outputs(Path::new(&report.config.output_dir)))?;
        }
        let json = CString::new(report.to_json()).map_err(|e| (VarlabStatus::IoError, e.to_string()))?;
        *out_report = json.into_raw();
        if report.passed() {
            Ok(VarlabStatus::Ok)
        } else {
            let first = report.checks.iter().find(|c| c.violations > 0).map(|c| c.name.clone()).unwrap_or_default();
            set_error(format!("invariant violated: {first}"));
            Ok(VarlabStatus::InvariantViolated)
        }
    })
}
