//! C ABI for the qfc library.
//!
//! Handles are opaque pointers created and destroyed by paired
//! constructor/`_free` calls; every fallible function returns a `QFC_*` status
//! code and the last failure message is retrievable per thread via
//! [`qfc_last_error_message`]. The header `include/qfc.h` is generated by
//! cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};

use libc::{c_char, c_double, c_int, size_t};

use qfc::control;
use qfc::density::GriddedDensity;
use qfc::mrsq::MultiResolutionQuantizer;
use qfc::quantizer::ScalarQuantizer;
use qfc::silent::SilentQuantizer;
use qfc::{Error, PdfSpec};

pub const QFC_OK: c_int = 0;
pub const QFC_ERR_INVALID_ARGUMENT: c_int = 1;
pub const QFC_ERR_EMPTY_CELL: c_int = 2;
pub const QFC_ERR_CONVERGENCE: c_int = 3;
pub const QFC_ERR_INFEASIBLE: c_int = 4;
pub const QFC_ERR_NULL_POINTER: c_int = 5;
pub const QFC_ERR_ENCODING: c_int = 6;

/// Opaque density handle.
pub struct QfcDensity(GriddedDensity);
/// Opaque scalar-quantizer handle.
pub struct QfcQuantizer(ScalarQuantizer);
/// Opaque silent-quantizer handle.
pub struct QfcSilentQuantizer(SilentQuantizer);
/// Opaque multi-resolution quantizer handle.
pub struct QfcMrsq(MultiResolutionQuantizer);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(err: &Error) -> c_int {
    let msg = CString::new(err.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    match err {
        Error::EmptyCell { .. } => QFC_ERR_EMPTY_CELL,
        Error::ConvergenceFailure { .. } => QFC_ERR_CONVERGENCE,
        Error::InfeasibleConstraint { .. } => QFC_ERR_INFEASIBLE,
        _ => QFC_ERR_INVALID_ARGUMENT,
    }
}

fn null_error() -> c_int {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new("null pointer argument").unwrap();
    });
    QFC_ERR_NULL_POINTER
}

/// Copies the last error message for the calling thread into `buf` (NUL
/// terminated, truncating) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn qfc_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

// ---------------------------------------------------------------- densities

/// Builds a density from a textual spec such as `gaussian:0,1`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_parse(
    spec: *const c_char,
    tail_mass: c_double,
    grid_points: size_t,
    out: *mut *mut QfcDensity,
) -> c_int {
    if spec.is_null() || out.is_null() {
        return null_error();
    }
    let text = match CStr::from_ptr(spec).to_str() {
        Ok(t) => t,
        Err(_) => {
            LAST_ERROR.with(|s| *s.borrow_mut() = CString::new("spec is not UTF-8").unwrap());
            return QFC_ERR_ENCODING;
        }
    };
    let parsed: Result<PdfSpec, _> = text.parse();
    match parsed.and_then(|p| p.to_density(tail_mass, grid_points)) {
        Ok(d) => {
            *out = Box::into_raw(Box::new(QfcDensity(d)));
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// Gaussian density clipped at the given two-sided tail mass.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_gaussian(
    mean: c_double,
    variance: c_double,
    tail_mass: c_double,
    grid_points: size_t,
    out: *mut *mut QfcDensity,
) -> c_int {
    if out.is_null() {
        return null_error();
    }
    match GriddedDensity::from_gaussian_with_points(mean, variance, tail_mass, grid_points) {
        Ok(d) => {
            *out = Box::into_raw(Box::new(QfcDensity(d)));
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// # Safety
/// `d` must come from a qfc constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_free(d: *mut QfcDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live density handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_mean(d: *const QfcDensity) -> c_double {
    d.as_ref().map_or(f64::NAN, |d| d.0.mean())
}

/// # Safety
/// `d` must be a live density handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_variance(d: *const QfcDensity) -> c_double {
    d.as_ref().map_or(f64::NAN, |d| d.0.variance())
}

/// # Safety
/// `d` must be a live density handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_mass_on(
    d: *const QfcDensity,
    lo: c_double,
    hi: c_double,
) -> c_double {
    d.as_ref().map_or(f64::NAN, |d| d.0.mass_on((lo, hi)))
}

/// Returns 1 if the density passes the discrete log-concavity check at `tol`,
/// 0 if it fails, -1 on a null handle.
///
/// # Safety
/// `d` must be a live density handle or null.
#[no_mangle]
pub unsafe extern "C" fn qfc_density_check_log_concavity(
    d: *const QfcDensity,
    tol: c_double,
) -> c_int {
    match d.as_ref() {
        Some(d) => c_int::from(d.0.check_log_concavity(tol)),
        None => -1,
    }
}

// --------------------------------------------------------------- quantizers

/// Lloyd-Max design at `rate` bits.
///
/// # Safety
/// `d` must be a live density handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_lloyd_max(
    d: *const QfcDensity,
    rate: u32,
    tol: c_double,
    max_iter: size_t,
    out: *mut *mut QfcQuantizer,
) -> c_int {
    let Some(d) = d.as_ref() else { return null_error() };
    if out.is_null() {
        return null_error();
    }
    match qfc::quantizer::lloyd_max(&d.0, rate, tol, max_iter) {
        Ok(q) => {
            *out = Box::into_raw(Box::new(QfcQuantizer(q)));
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// # Safety
/// `q` must come from a qfc constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_free(q: *mut QfcQuantizer) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// # Safety
/// `q` must be a live quantizer handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_num_cells(q: *const QfcQuantizer) -> size_t {
    q.as_ref().map_or(0, |q| q.0.num_cells())
}

/// Copies levels into `buf` if it holds at least `len` entries; returns the
/// number of levels.
///
/// # Safety
/// `q` must be live; `buf` must point to `len` doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_levels(
    q: *const QfcQuantizer,
    buf: *mut c_double,
    len: size_t,
) -> size_t {
    let Some(q) = q.as_ref() else { return 0 };
    let levels = q.0.levels();
    if !buf.is_null() && len >= levels.len() {
        std::ptr::copy_nonoverlapping(levels.as_ptr(), buf, levels.len());
    }
    levels.len()
}

/// Copies reproduction points; same contract as [`qfc_quantizer_levels`].
///
/// # Safety
/// `q` must be live; `buf` must point to `len` doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_points(
    q: *const QfcQuantizer,
    buf: *mut c_double,
    len: size_t,
) -> size_t {
    let Some(q) = q.as_ref() else { return 0 };
    let points = q.0.points();
    if !buf.is_null() && len >= points.len() {
        std::ptr::copy_nonoverlapping(points.as_ptr(), buf, points.len());
    }
    points.len()
}

/// # Safety
/// `q` must be a live quantizer handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_encode(q: *const QfcQuantizer, x: c_double) -> size_t {
    q.as_ref().map_or(0, |q| q.0.encode(x))
}

/// # Safety
/// `q` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_decode(
    q: *const QfcQuantizer,
    index: size_t,
    out: *mut c_double,
) -> c_int {
    let Some(q) = q.as_ref() else { return null_error() };
    if out.is_null() {
        return null_error();
    }
    match q.0.decode(index) {
        Ok(v) => {
            *out = v;
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// Mean squared error of the quantizer against a density.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn qfc_quantizer_distortion(
    q: *const QfcQuantizer,
    d: *const QfcDensity,
) -> c_double {
    match (q.as_ref(), d.as_ref()) {
        (Some(q), Some(d)) => q.0.distortion(&d.0),
        _ => f64::NAN,
    }
}

// ------------------------------------------------------------ silent design

/// Minimum cell-probability constrained three-level design.
///
/// # Safety
/// `d` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_silent_design(
    d: *const QfcDensity,
    delta: c_double,
    tol: c_double,
    max_iter: size_t,
    out: *mut *mut QfcSilentQuantizer,
) -> c_int {
    let Some(d) = d.as_ref() else { return null_error() };
    if out.is_null() {
        return null_error();
    }
    match qfc::silent::min_cell_prob_quantizer(&d.0, delta, tol, max_iter) {
        Ok(s) => {
            *out = Box::into_raw(Box::new(QfcSilentQuantizer(s)));
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// # Safety
/// `s` must come from `qfc_silent_design` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qfc_silent_free(s: *mut QfcSilentQuantizer) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live silent-quantizer handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_silent_index(s: *const QfcSilentQuantizer) -> size_t {
    s.as_ref().map_or(usize::MAX, |s| s.0.silent_index)
}

/// Clones the inner three-cell quantizer into a fresh handle.
///
/// # Safety
/// `s` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_silent_quantizer(
    s: *const QfcSilentQuantizer,
    out: *mut *mut QfcQuantizer,
) -> c_int {
    let Some(s) = s.as_ref() else { return null_error() };
    if out.is_null() {
        return null_error();
    }
    *out = Box::into_raw(Box::new(QfcQuantizer(s.0.quantizer.clone())));
    QFC_OK
}

// ------------------------------------------------------------------- MRSQs

/// Generalized Lloyd-Max design over `n_stages` stages.
///
/// # Safety
/// `d` must be live; `rates` and `weights` must point to `n_stages` entries;
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_design(
    d: *const QfcDensity,
    rates: *const u32,
    weights: *const c_double,
    n_stages: size_t,
    tol: c_double,
    max_iter: size_t,
    out: *mut *mut QfcMrsq,
) -> c_int {
    let Some(d) = d.as_ref() else { return null_error() };
    if rates.is_null() || weights.is_null() || out.is_null() {
        return null_error();
    }
    let rates = std::slice::from_raw_parts(rates, n_stages);
    let weights = std::slice::from_raw_parts(weights, n_stages);
    match qfc::mrsq::generalized_lloyd_max(&d.0, rates, weights, tol, max_iter) {
        Ok(fit) => {
            *out = Box::into_raw(Box::new(QfcMrsq(fit.mrsq)));
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// # Safety
/// `m` must come from `qfc_mrsq_design` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_free(m: *mut QfcMrsq) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live MRSQ handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_stages(m: *const QfcMrsq) -> size_t {
    m.as_ref().map_or(0, |m| m.0.stages())
}

/// Writes the per-stage sub-indices of `w`; `buf` must hold one entry per stage.
///
/// # Safety
/// `m` must be live; `buf` must point to `len` entries.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_encode(
    m: *const QfcMrsq,
    w: c_double,
    buf: *mut u32,
    len: size_t,
) -> c_int {
    let Some(m) = m.as_ref() else { return null_error() };
    if buf.is_null() || len < m.0.stages() {
        return null_error();
    }
    let idx = m.0.encode(w);
    std::ptr::copy_nonoverlapping(idx.as_ptr(), buf, idx.len());
    QFC_OK
}

/// Reproduction point after the first `len` stages of indices.
///
/// # Safety
/// `m` must be live; `prefix` must point to `len` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_decode_prefix(
    m: *const QfcMrsq,
    prefix: *const u32,
    len: size_t,
    out: *mut c_double,
) -> c_int {
    let Some(m) = m.as_ref() else { return null_error() };
    if prefix.is_null() || out.is_null() {
        return null_error();
    }
    let prefix = std::slice::from_raw_parts(prefix, len);
    match m.0.decode_prefix(prefix) {
        Ok(v) => {
            *out = v;
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

/// Distortion of the stage-`stage` description against a density.
///
/// # Safety
/// Both handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qfc_mrsq_stage_distortion(
    m: *const QfcMrsq,
    d: *const QfcDensity,
    stage: size_t,
    out: *mut c_double,
) -> c_int {
    let (Some(m), Some(d)) = (m.as_ref(), d.as_ref()) else { return null_error() };
    if out.is_null() || stage >= m.0.stages() {
        return null_error();
    }
    match m.0.stage_quantizer(stage) {
        Ok(q) => {
            *out = q.distortion(&d.0);
            QFC_OK
        }
        Err(e) => remember(&e),
    }
}

// ------------------------------------------------------- control / analysis

/// Backward Riccati recursion. `state_weights` holds `horizon` entries,
/// `control_weights` holds `horizon - 1`; output buffers take `horizon + 1`
/// (`s`), `horizon` (`k`) and `horizon` (`g`) entries.
///
/// # Safety
/// All pointers must reference buffers of the documented lengths.
#[no_mangle]
pub unsafe extern "C" fn qfc_riccati(
    a: c_double,
    state_weights: *const c_double,
    control_weights: *const c_double,
    horizon: size_t,
    s_out: *mut c_double,
    k_out: *mut c_double,
    g_out: *mut c_double,
) -> c_int {
    if state_weights.is_null()
        || (control_weights.is_null() && horizon > 1)
        || s_out.is_null()
        || k_out.is_null()
        || g_out.is_null()
        || horizon == 0
    {
        return null_error();
    }
    let q = std::slice::from_raw_parts(state_weights, horizon);
    let r: &[f64] = if horizon > 1 {
        std::slice::from_raw_parts(control_weights, horizon - 1)
    } else {
        &[]
    };
    let gains = control::riccati_recursion(a, q, r);
    std::ptr::copy_nonoverlapping(gains.s.as_ptr(), s_out, horizon + 1);
    std::ptr::copy_nonoverlapping(gains.k.as_ptr(), k_out, horizon);
    std::ptr::copy_nonoverlapping(gains.g.as_ptr(), g_out, horizon);
    QFC_OK
}

/// Instantaneous-cost bounds of the variable-rate relaxation; both output
/// buffers take `horizon` entries.
///
/// # Safety
/// `lb_out` and `ub_out` must point to `horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn qfc_prop4_bounds(
    a: c_double,
    rate: c_double,
    sigma2: c_double,
    horizon: size_t,
    lb_out: *mut c_double,
    ub_out: *mut c_double,
) -> c_int {
    if lb_out.is_null() || ub_out.is_null() {
        return null_error();
    }
    let (lb, ub) = control::prop4_bounds(a, rate, sigma2, horizon);
    std::ptr::copy_nonoverlapping(lb.as_ptr(), lb_out, horizon);
    std::ptr::copy_nonoverlapping(ub.as_ptr(), ub_out, horizon);
    QFC_OK
}

/// Bennett high-rate distortion approximation for a density handle.
///
/// # Safety
/// `d` must be a live density handle.
#[no_mangle]
pub unsafe extern "C" fn qfc_bennett_distortion(d: *const QfcDensity, rate: c_double) -> c_double {
    d.as_ref().map_or(f64::NAN, |d| qfc::sim::bennett_distortion(&d.0, rate))
}
