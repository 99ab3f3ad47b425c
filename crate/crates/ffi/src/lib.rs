//! C ABI for roadgrip.
//!
//! Densities and mixture tables are exposed as opaque handles created by
//! `*_new` / `*_from_*` functions and released with the matching `*_free`.
//! Fallible calls return an [`RgStatus`]; the message of the most recent
//! failure on the calling thread is available from [`rg_last_error`].
//! Panics never cross the boundary and are reported as [`RgStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use roadgrip::baselines;
use roadgrip::metrics;
use roadgrip::mixture::{self, MixtureTable, SummaryLevels, CLASS_COUNT};
use roadgrip::pl_density::{read_densities_csv, PiecewiseLinearDensity};
use roadgrip::raster::{ClassProbabilityRaster, SUMMARY_CHANNELS};
use roadgrip::Error;

/// Number of class probabilities per pixel.
pub const RG_CLASS_COUNT: usize = 5;
/// Values per pixel in a summary buffer: mean, median, p05, p95, sigma_low, sigma_high.
pub const RG_SUMMARY_CHANNELS: usize = 6;

const _: () = assert!(RG_CLASS_COUNT == CLASS_COUNT && RG_SUMMARY_CHANNELS == SUMMARY_CHANNELS);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

/// Opaque piecewise-linear density.
pub struct RgDensity(PiecewiseLinearDensity);

/// Opaque mixture table over the five surface state classes.
pub struct RgMixtureTable(MixtureTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RgStatus, msg: impl Into<String>) -> RgStatus {
    set_error(msg);
    status
}

fn status_of(err: Error) -> RgStatus {
    let status = match &err {
        Error::InvalidInput(_) => RgStatus::InvalidInput,
        Error::Numerical(_) => RgStatus::Numerical,
        Error::Format { .. } => RgStatus::Format,
        Error::Io(_) => RgStatus::Io,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> RgStatus) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(RgStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Message of the last failed call on this thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, n))
    }
}

/// Builds a continuous density from `n` knots and pdf values.
///
/// # Safety
/// `class_name` must be a NUL-terminated string; `knots` and `values` must point
/// to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_density_new(
    class_name: *const c_char,
    knots: *const f64,
    values: *const f64,
    n: usize,
    auto_normalize: bool,
    out: *mut *mut RgDensity,
) -> RgStatus {
    guard(|| {
        if class_name.is_null() || out.is_null() {
            return fail(RgStatus::NullPointer, "null argument");
        }
        let (Some(k), Some(v)) = (slice_arg(knots, n), slice_arg(values, n)) else {
            return fail(RgStatus::NullPointer, "null knot or value array");
        };
        let Ok(name) = CStr::from_ptr(class_name).to_str() else {
            return fail(RgStatus::InvalidInput, "class name is not UTF-8");
        };
        match PiecewiseLinearDensity::build(name, k.to_vec(), v.to_vec(), auto_normalize) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(RgDensity(d)));
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// # Safety
/// `d` must be NULL or a handle from [`rg_density_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_density_free(d: *mut RgDensity) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// pdf at `g`; NaN for a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn rg_density_pdf(d: *const RgDensity, g: f64) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.pdf(g))
}

/// cdf at `g`; NaN for a NULL handle.
///
/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn rg_density_cdf(d: *const RgDensity, g: f64) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.cdf(g))
}

/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn rg_density_mean(d: *const RgDensity) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.mean())
}

/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn rg_density_median(d: *const RgDensity) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.median())
}

/// # Safety
/// `d` must be NULL or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn rg_density_std_dev(d: *const RgDensity) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.0.std_dev())
}

/// Smallest grip value with cdf ≥ `p`.
///
/// # Safety
/// `d` must be a live density handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_density_quantile(d: *const RgDensity, p: f64, out: *mut f64) -> RgStatus {
    guard(|| {
        let (Some(d), false) = (d.as_ref(), out.is_null()) else {
            return fail(RgStatus::NullPointer, "null argument");
        };
        match d.0.quantile(p) {
            Ok(q) => {
                *out = q;
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Mixture table from `n` density handles, one per class name.
/// The handles are copied; the caller keeps ownership.
///
/// # Safety
/// `densities` must point to `n` live density handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_table_from_densities(
    densities: *const *const RgDensity,
    n: usize,
    out: *mut *mut RgMixtureTable,
) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return fail(RgStatus::NullPointer, "null output pointer");
        }
        let Some(handles) = slice_arg(densities, n) else {
            return fail(RgStatus::NullPointer, "null density array");
        };
        let mut owned = Vec::with_capacity(n);
        for h in handles {
            match h.as_ref() {
                Some(d) => owned.push(d.0.clone()),
                None => return fail(RgStatus::NullPointer, "null density handle"),
            }
        }
        match mixture::build_mixture_table(&owned) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(RgMixtureTable(t)));
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Mixture table from a `class,knot_x,density` CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_table_from_csv(path: *const c_char, out: *mut *mut RgMixtureTable) -> RgStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(RgStatus::NullPointer, "null argument");
        }
        let Ok(p) = CStr::from_ptr(path).to_str() else {
            return fail(RgStatus::InvalidInput, "path is not UTF-8");
        };
        match read_densities_csv(Path::new(p)).and_then(|d| mixture::build_mixture_table(&d)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(RgMixtureTable(t)));
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// # Safety
/// `t` must be NULL or a table handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rg_table_free(t: *mut RgMixtureTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Summary of one pixel: `probs` holds 5 class probabilities in state-code
/// order, `out` receives 6 values.
///
/// # Safety
/// `t` must be a live table; `probs` readable for 5 doubles; `out` writable for 6.
#[no_mangle]
pub unsafe extern "C" fn rg_table_summarize(t: *const RgMixtureTable, probs: *const f64, out: *mut f64) -> RgStatus {
    guard(|| {
        let (Some(t), false, false) = (t.as_ref(), probs.is_null(), out.is_null()) else {
            return fail(RgStatus::NullPointer, "null argument");
        };
        let p = slice::from_raw_parts(probs, CLASS_COUNT);
        match t.0.summarize(p, &SummaryLevels::default()) {
            Ok(s) => {
                ptr::copy_nonoverlapping(s.channels().as_ptr(), out, SUMMARY_CHANNELS);
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Fuses a row-major `height × width × 5` probability buffer into a
/// `height × width × 6` summary buffer using `workers` threads (0 or 1 runs
/// on the calling thread). Output does not depend on `workers`.
///
/// # Safety
/// `probs` must be readable for `height*width*5` doubles and `out` writable
/// for `height*width*6` doubles.
#[no_mangle]
pub unsafe extern "C" fn rg_table_fuse_raster(
    t: *const RgMixtureTable,
    probs: *const f64,
    height: usize,
    width: usize,
    workers: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let Some(t) = t.as_ref() else {
            return fail(RgStatus::NullPointer, "null table");
        };
        let Some(n) = height.checked_mul(width) else {
            return fail(RgStatus::InvalidInput, "raster size overflows");
        };
        if n > 0 && out.is_null() {
            return fail(RgStatus::NullPointer, "null output buffer");
        }
        let Some(p) = slice_arg(probs, n * CLASS_COUNT) else {
            return fail(RgStatus::NullPointer, "null probability buffer");
        };
        let raster = match ClassProbabilityRaster::new(height, width, p.to_vec()) {
            Ok(r) => r,
            Err(e) => return status_of(e),
        };
        match mixture::fuse_raster_with_workers(&t.0, &raster, &SummaryLevels::default(), workers.max(1)) {
            Ok(s) => {
                let dst = slice::from_raw_parts_mut(out, n * SUMMARY_CHANNELS);
                for (chunk, px) in dst.chunks_exact_mut(SUMMARY_CHANNELS).zip(&s.pixels) {
                    chunk.copy_from_slice(&px.channels());
                }
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Inverse standard normal cdf for `p` in (0, 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_normal_quantile(p: f64, out: *mut f64) -> RgStatus {
    guard(|| {
        if out.is_null() {
            return fail(RgStatus::NullPointer, "null output pointer");
        }
        match baselines::normal_quantile(p) {
            Ok(z) => {
                *out = z;
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Pinball loss of prediction `yhat` for target `y` at level `alpha`.
#[no_mangle]
pub extern "C" fn rg_pinball(y: f64, yhat: f64, alpha: f64) -> f64 {
    baselines::pinball(y, yhat, alpha)
}

/// Focal loss of one pixel and its derivative with respect to the true
/// class probability.
///
/// # Safety
/// `probs` must be readable for `k` doubles; `loss` and `grad` writable.
#[no_mangle]
pub unsafe extern "C" fn rg_focal_loss(
    probs: *const f64,
    k: usize,
    y: usize,
    gamma: f64,
    weight: f64,
    loss: *mut f64,
    grad: *mut f64,
) -> RgStatus {
    guard(|| {
        let Some(p) = slice_arg(probs, k) else {
            return fail(RgStatus::NullPointer, "null probability array");
        };
        if loss.is_null() || grad.is_null() {
            return fail(RgStatus::NullPointer, "null output pointer");
        }
        match baselines::focal_loss(p, y, gamma, weight) {
            Ok((l, g)) => {
                *loss = l;
                *grad = g;
                RgStatus::Ok
            }
            Err(e) => status_of(e),
        }
    })
}

/// Interval clamping applied before coverage evaluation.
///
/// # Safety
/// `lo_out` and `hi_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_clamp_interval(lo: f64, hi: f64, lo_out: *mut f64, hi_out: *mut f64) -> RgStatus {
    if lo_out.is_null() || hi_out.is_null() {
        return fail(RgStatus::NullPointer, "null output pointer");
    }
    let (a, b) = metrics::clamp_interval_for_eval(lo, hi);
    *lo_out = a;
    *hi_out = b;
    RgStatus::Ok
}
