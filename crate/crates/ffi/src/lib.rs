//! C interface to `hrigid`.
//!
//! Objects are opaque handles created by `hr_*_new`/`hr_*_parse`/`hr_*_sample`
//! and released with the matching `hr_*_free`. Every fallible call returns an
//! [`HrStatus`]; on failure `hr_last_error_message` describes the error for
//! the calling thread. Strings returned through `char **` must be released
//! with `hr_string_free`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hrigid::directions::{
    classify, estimate_profile, sample_direction_set, Case, ClassifierTolerances, DirectionSet,
    SampleBox, DEFAULT_PAIR_BUDGET,
};
use hrigid::expr::{Arity, FieldError, ScalarField};
use hrigid::funceq::{classify_solution, FuncEqSystem, FuncEqTolerances, SystemSpec};
use hrigid::rigidity::{
    full_rigidity_pipeline, rotation_lemma_check, RigidityConfig, RigidityError,
    RotationCheckOptions,
};
use hrigid::sphere::{psi, UnitVec3};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    DomainError = 4,
    ComputationFailed = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrCase {
    A = 0,
    B = 1,
    C = 2,
    D = 3,
    Indeterminate = 4,
}

impl From<Case> for HrCase {
    fn from(c: Case) -> Self {
        match c {
            Case::A => HrCase::A,
            Case::B => HrCase::B,
            Case::C => HrCase::C,
            Case::D => HrCase::D,
            Case::Indeterminate => HrCase::Indeterminate,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrRotationResult {
    pub alpha: f64,
    pub w: f64,
    pub max_error: f64,
}

/// Opaque scalar field.
pub struct HrField {
    inner: ScalarField,
}

/// Opaque sampled direction set.
pub struct HrDirectionSet {
    inner: DirectionSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Failure(HrStatus, String);

impl Failure {
    fn null(what: &str) -> Failure {
        Failure(HrStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Failure {
        Failure(HrStatus::InvalidArgument, msg.into())
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        Failure(HrStatus::ParseError, e.to_string())
    }
}

impl From<hrigid::expr::DomainError> for Failure {
    fn from(e: hrigid::expr::DomainError) -> Self {
        Failure(HrStatus::DomainError, e.to_string())
    }
}

impl From<hrigid::directions::DirectionError> for Failure {
    fn from(e: hrigid::directions::DirectionError) -> Self {
        use hrigid::directions::DirectionError as E;
        let status = match e {
            E::Domain(_) => HrStatus::DomainError,
            _ => HrStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<hrigid::funceq::FuncEqError> for Failure {
    fn from(e: hrigid::funceq::FuncEqError) -> Self {
        use hrigid::funceq::FuncEqError as E;
        let status = match e {
            E::Domain(_) => HrStatus::DomainError,
            E::Field(_) => HrStatus::ParseError,
            E::InvalidSystem(_) => HrStatus::InvalidArgument,
            _ => HrStatus::ComputationFailed,
        };
        Failure(status, e.to_string())
    }
}

impl From<RigidityError> for Failure {
    fn from(e: RigidityError) -> Self {
        let status = match e {
            RigidityError::Domain(_) => HrStatus::DomainError,
            RigidityError::InvalidScale(_)
            | RigidityError::EmptyScales
            | RigidityError::InvalidArgument(_)
            | RigidityError::TooFewPoints(_) => HrStatus::InvalidArgument,
            _ => HrStatus::ComputationFailed,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(HrStatus::ParseError, e.to_string())
    }
}

/// Runs `body`, converting failures and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(body: F) -> HrStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            HrStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(HrStatus::ComputationFailed, "output contains NUL".into()))
}

/// Message describing the last failed call on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses `source` as a field of `arity` variables (1 or 2).
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_field_parse(
    source: *const c_char,
    arity: c_int,
    out: *mut *mut HrField,
) -> HrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        let src = read_str(source, "source")?;
        let arity = match arity {
            1 => Arity::One,
            2 => Arity::Two,
            k => return Err(Failure::invalid(format!("arity must be 1 or 2, got {k}"))),
        };
        let field = ScalarField::parse(src, arity)?;
        *out = Box::into_raw(Box::new(HrField { inner: field }));
        Ok(())
    })
}

/// # Safety
/// `field` must come from `hr_field_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hr_field_free(field: *mut HrField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_field_eval(
    field: *const HrField,
    x: f64,
    y: f64,
    out: *mut f64,
) -> HrStatus {
    guard(|| {
        let field = field.as_ref().ok_or_else(|| Failure::null("field"))?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        *out = field.inner.eval(x, y)?;
        Ok(())
    })
}

/// ψ_c of the unit vector `v` (normalized first).
///
/// # Safety
/// `v` and `out` must point to 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn hr_psi(c: f64, v: *const f64, out: *mut f64) -> HrStatus {
    guard(|| {
        if v.is_null() || out.is_null() {
            return Err(Failure::null("vector"));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Failure::invalid(format!("c must be positive, got {c}")));
        }
        let v = std::slice::from_raw_parts(v, 3);
        let u = UnitVec3::from_xyz(v[0], v[1], v[2]).map_err(|e| Failure::invalid(e.to_string()))?;
        let r = psi(c, &u).to_array();
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&r);
        Ok(())
    })
}

/// Samples the chord directions of the graph of `field` over the box.
///
/// # Safety
/// `field` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_direction_set_sample(
    field: *const HrField,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    n: usize,
    seed: u64,
    out: *mut *mut HrDirectionSet,
) -> HrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        let field = field.as_ref().ok_or_else(|| Failure::null("field"))?;
        let b = SampleBox::new(x0, x1, y0, y1);
        let ds = sample_direction_set(&field.inner, b, n, seed, DEFAULT_PAIR_BUDGET)?;
        *out = Box::into_raw(Box::new(HrDirectionSet { inner: ds }));
        Ok(())
    })
}

/// Number of stored samples (antipodes included); 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hr_direction_set_len(ds: *const HrDirectionSet) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be a live handle and `out` point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn hr_direction_set_get(
    ds: *const HrDirectionSet,
    index: usize,
    out: *mut f64,
) -> HrStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| Failure::null("direction set"))?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let v = ds
            .inner
            .samples
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("index {index} out of range")))?;
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&v.to_array());
        Ok(())
    })
}

/// # Safety
/// `ds` must come from `hr_direction_set_sample` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hr_direction_set_free(ds: *mut HrDirectionSet) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Classifies the arc profile with `bins` azimuth bins and default
/// tolerances.
///
/// # Safety
/// `ds` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_direction_set_classify(
    ds: *const HrDirectionSet,
    bins: usize,
    out: *mut HrCase,
) -> HrStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| Failure::null("direction set"))?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        let profile = estimate_profile(&ds.inner, bins)?;
        *out = classify(&profile, &ClassifierTolerances::default()).case.into();
        Ok(())
    })
}

/// Classifies the solution family of a system given as JSON
/// (`{"g", "grid", "entries"}`); writes the verdict JSON to `out_json`.
///
/// # Safety
/// `system_json` must be NUL-terminated and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_funceq_classify_json(
    system_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HrStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(Failure::null("out_json"));
        }
        *out_json = ptr::null_mut();
        let spec: SystemSpec = serde_json::from_str(read_str(system_json, "system_json")?)?;
        let system = FuncEqSystem::from_spec(&spec)?;
        let verdict = classify_solution(&system, &FuncEqTolerances::default())?.verdict();
        *out_json = into_c_string(serde_json::to_string(&verdict)?)?;
        Ok(())
    })
}

/// Rotated cross-section check for `g(x) + d·y` on `[lo, hi]`.
///
/// # Safety
/// `g` must be a live one-variable handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_rotation_check(
    g: *const HrField,
    d: f64,
    c: f64,
    lo: f64,
    hi: f64,
    fiber_step: f64,
    out: *mut HrRotationResult,
) -> HrStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| Failure::null("g"))?;
        let out = out.as_mut().ok_or_else(|| Failure::null("out"))?;
        if g.inner.arity() != Arity::One {
            return Err(Failure::invalid("g must be a one-variable field"));
        }
        let opts = RotationCheckOptions {
            fiber_step,
            ..RotationCheckOptions::default()
        };
        let r = rotation_lemma_check(&g.inner, d, c, lo, hi, &opts)?;
        *out = HrRotationResult {
            alpha: r.alpha,
            w: r.w,
            max_error: r.max_error,
        };
        Ok(())
    })
}

/// Runs the rigidity pipeline; `config_json` may be null for defaults or a
/// full configuration object. Writes the report JSON to `out_json`.
///
/// # Safety
/// `field` must be a live handle, `scales` point to `n_scales` doubles,
/// `config_json` be null or NUL-terminated, and `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn hr_rigidity_json(
    field: *const HrField,
    scales: *const f64,
    n_scales: usize,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HrStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(Failure::null("out_json"));
        }
        *out_json = ptr::null_mut();
        let field = field.as_ref().ok_or_else(|| Failure::null("field"))?;
        if scales.is_null() && n_scales > 0 {
            return Err(Failure::null("scales"));
        }
        let scales: &[f64] = if n_scales == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(scales, n_scales)
        };
        let cfg: RigidityConfig = if config_json.is_null() {
            RigidityConfig::default()
        } else {
            serde_json::from_str(read_str(config_json, "config_json")?)?
        };
        let report = full_rigidity_pipeline(&field.inner, scales, &cfg)?;
        *out_json = into_c_string(serde_json::to_string(&report)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
