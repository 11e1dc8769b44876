//! C ABI over the `finsler` crate.
//!
//! Metrics and curves cross the boundary as opaque handles built from JSON.
//! Every function returns a [`FinslerStatus`]; on failure the message is
//! available from [`finsler_last_error_message`] on the same thread. Panics
//! never unwind into the caller.
//!
//! Matrices are written row-major into caller-provided buffers of `n * n`
//! doubles; vectors into buffers of `n` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use finsler::{
    averaged_metric, fundamental_tensor, full_gap_report, parallel_transport, CurveSpec, FdConfig, FinslerError,
    GapConfig, MetricSpec, OdeConfig, QuadConfig,
};

/// Incremented on any incompatible change of the functions below.
pub const FINSLER_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FinslerStatus {
    Ok = 0,
    /// A required pointer was null or a size did not match.
    NullOrSize = 1,
    /// The inputs were rejected (malformed JSON, invalid spec, out of domain).
    InvalidInput = 2,
    /// The numerics failed (drift, unstable quadrature, degenerate tensor).
    Numerical = 3,
    Panic = 4,
}

pub struct FinslerMetric(MetricSpec);

pub struct FinslerCurve(CurveSpec);

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FinslerFdConfig {
    pub h0: f64,
    pub richardson_levels: u32,
}

impl From<FinslerFdConfig> for FdConfig {
    fn from(c: FinslerFdConfig) -> Self {
        FdConfig {
            h0: c.h0,
            richardson_levels: c.richardson_levels as usize,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

enum Failure {
    Size(String),
    Lib(FinslerError),
}

impl From<FinslerError> for Failure {
    fn from(e: FinslerError) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FinslerStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            FinslerStatus::Ok
        }
        Ok(Err(Failure::Size(msg))) => {
            set_error(&msg);
            FinslerStatus::NullOrSize
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            if e.is_numerical() {
                FinslerStatus::Numerical
            } else {
                FinslerStatus::InvalidInput
            }
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            FinslerStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Size(format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(FinslerError::invalid(name, "not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Size(format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Size(format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn metric<'a>(m: *const FinslerMetric, n: usize) -> Result<&'a MetricSpec, Failure> {
    let spec = &m.as_ref().ok_or_else(|| Failure::Size("`metric` is null".into()))?.0;
    if spec.dim() != n {
        return Err(Failure::Size(format!("metric has dimension {}, got n = {n}", spec.dim())));
    }
    Ok(spec)
}

unsafe fn curve<'a>(c: *const FinslerCurve) -> Result<&'a CurveSpec, Failure> {
    Ok(&c.as_ref().ok_or_else(|| Failure::Size("`curve` is null".into()))?.0)
}

fn write_matrix(out: &mut [f64], m: &finsler::nalgebra::DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
}

#[no_mangle]
pub extern "C" fn finsler_abi_version() -> u32 {
    FINSLER_ABI_VERSION
}

/// Default finite-difference settings.
#[no_mangle]
pub extern "C" fn finsler_fd_config_default() -> FinslerFdConfig {
    let d = FdConfig::default();
    FinslerFdConfig {
        h0: d.h0,
        richardson_levels: d.richardson_levels as u32,
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn finsler_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a metric spec. On success `*out` owns a handle to release with
/// [`finsler_metric_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finsler_metric_from_json(json: *const c_char, out: *mut *mut FinslerMetric) -> FinslerStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Size("`out` is null".into()));
        }
        *out = ptr::null_mut();
        let spec = MetricSpec::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(FinslerMetric(spec)));
        Ok(())
    })
}

/// # Safety
/// `metric` must come from [`finsler_metric_from_json`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn finsler_metric_free(metric: *mut FinslerMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Chart dimension of a metric, or 0 for a null handle.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn finsler_metric_dimension(metric: *const FinslerMetric) -> usize {
    metric.as_ref().map_or(0, |m| m.0.dim())
}

/// Parses a curve. On success `*out` owns a handle to release with
/// [`finsler_curve_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finsler_curve_from_json(json: *const c_char, out: *mut *mut FinslerCurve) -> FinslerStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Size("`out` is null".into()));
        }
        *out = ptr::null_mut();
        let curve = CurveSpec::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(FinslerCurve(curve)));
        Ok(())
    })
}

/// # Safety
/// `curve` must come from [`finsler_curve_from_json`] and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn finsler_curve_free(curve: *mut FinslerCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// `F(x, y)`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn finsler_evaluate_f(
    metric: *const FinslerMetric,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> FinslerStatus {
    guard(|| {
        let spec = self::metric(metric, n)?;
        let f = spec.evaluate_f(slice(x, n, "x")?, slice(y, n, "y")?)?;
        slice_mut(out, 1, "out")?[0] = f;
        Ok(())
    })
}

/// Fundamental tensor `g(x, y)`, row-major into `out_g`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles and `out_g` to `n * n`.
#[no_mangle]
pub unsafe extern "C" fn finsler_fundamental_tensor(
    metric: *const FinslerMetric,
    x: *const f64,
    y: *const f64,
    n: usize,
    fd: FinslerFdConfig,
    out_g: *mut f64,
) -> FinslerStatus {
    guard(|| {
        let spec = self::metric(metric, n)?;
        let t = fundamental_tensor(spec, slice(x, n, "x")?, slice(y, n, "y")?, &fd.into())?;
        write_matrix(slice_mut(out_g, n * n, "out_g")?, &t.g);
        Ok(())
    })
}

/// Averaged Riemannian metric at `x`, row-major into `out_g`, and the
/// volume of the unit ball into `out_measure` (which may be null).
///
/// # Safety
/// `x` must point to `n` doubles and `out_g` to `n * n`.
#[no_mangle]
pub unsafe extern "C" fn finsler_averaged_metric(
    metric: *const FinslerMetric,
    x: *const f64,
    n: usize,
    angular_order: u32,
    fd: FinslerFdConfig,
    out_g: *mut f64,
    out_measure: *mut f64,
) -> FinslerStatus {
    guard(|| {
        let spec = self::metric(metric, n)?;
        let quad = QuadConfig {
            angular_order: angular_order as usize,
        };
        let avg = averaged_metric(spec, slice(x, n, "x")?, &quad, &fd.into())?;
        write_matrix(slice_mut(out_g, n * n, "out_g")?, &avg.g_bar);
        if !out_measure.is_null() {
            *out_measure = avg.total_measure;
        }
        Ok(())
    })
}

/// Parallel transport of `y` along `curve`: endpoint into `out_endpoint`
/// (`n` doubles), differential row-major into `out_differential` (`n * n`,
/// may be null) and the F drift into `out_drift` (may be null).
///
/// # Safety
/// Pointer arguments must satisfy the sizes above.
#[no_mangle]
pub unsafe extern "C" fn finsler_parallel_transport(
    metric: *const FinslerMetric,
    curve: *const FinslerCurve,
    y: *const f64,
    n: usize,
    steps: u32,
    fd: FinslerFdConfig,
    out_endpoint: *mut f64,
    out_differential: *mut f64,
    out_drift: *mut f64,
) -> FinslerStatus {
    guard(|| {
        let spec = self::metric(metric, n)?;
        let curve = self::curve(curve)?;
        let ode = OdeConfig::with_steps(steps as usize);
        let tr = parallel_transport(spec, curve, slice(y, n, "y")?, &ode, &fd.into())?;
        slice_mut(out_endpoint, n, "out_endpoint")?.copy_from_slice(&tr.endpoint);
        if !out_differential.is_null() {
            write_matrix(slice_mut(out_differential, n * n, "out_differential")?, &tr.differential);
        }
        if !out_drift.is_null() {
            *out_drift = tr.f_drift;
        }
        Ok(())
    })
}

/// Full transport-identity report as JSON, with default settings apart from
/// `seed`. Release the string with [`finsler_string_free`].
///
/// # Safety
/// `nu` must point to `n` doubles and `out_json` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn finsler_gap_report_json(
    metric: *const FinslerMetric,
    curve: *const FinslerCurve,
    nu: *const f64,
    n: usize,
    seed: u64,
    out_json: *mut *mut c_char,
) -> FinslerStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(Failure::Size("`out_json` is null".into()));
        }
        *out_json = ptr::null_mut();
        let spec = self::metric(metric, n)?;
        let curve = self::curve(curve)?;
        let config = GapConfig {
            seed,
            ..GapConfig::default()
        };
        let report = full_gap_report(spec, curve, slice(nu, n, "nu")?, &config)?;
        let json = serde_json::to_string(&report).map_err(FinslerError::from)?;
        *out_json = CString::new(json).expect("JSON has no NUL bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn finsler_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
