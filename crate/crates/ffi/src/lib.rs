//! C ABI for the coverage library.
//!
//! Every fallible function returns a [`PhpStatus`] and writes its result
//! through an out-pointer. On failure a description is available from
//! [`php_last_error_message`] on the same thread. Panics never cross the
//! boundary; they are reported as [`PhpStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use php_coverage::coverage_analytic::{CoverageEvaluator, EvalConfig, Method, SirThreshold};
use php_coverage::coverage_sim::{coverage_from_run, simulate, HoleMode, SimConfig, Tier};
use php_coverage::geometry::{lens_area, LensQuery};
use php_coverage::params::NetworkParams;
use php_coverage::quadrature::QuadConfig;
use php_coverage::serving_distance::{marginal_cdf_z2hat, marginal_pdf_z2hat};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    InvalidArgument = 3,
    Numerical = 4,
    Panic = 5,
}

/// Network parameters in SI units (densities per m², lengths in m).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhpNetworkParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub hole_radius: f64,
    pub alpha: f64,
    pub p1: f64,
    pub p2: f64,
}

impl From<PhpNetworkParams> for NetworkParams {
    fn from(p: PhpNetworkParams) -> Self {
        NetworkParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            hole_radius: p.hole_radius,
            alpha: p.alpha,
            p1: p.p1,
            p2: p.p2,
        }
    }
}

impl From<NetworkParams> for PhpNetworkParams {
    fn from(p: NetworkParams) -> Self {
        PhpNetworkParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            hole_radius: p.hole_radius,
            alpha: p.alpha,
            p1: p.p1,
            p2: p.p2,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhpMethod {
    MacroLower = 0,
    MacroUpper = 1,
    SmallClosestHole = 2,
    SmallAllHoles = 3,
}

impl From<PhpMethod> for Method {
    fn from(m: PhpMethod) -> Self {
        match m {
            PhpMethod::MacroLower => Method::MacroLower,
            PhpMethod::MacroUpper => Method::MacroUpper,
            PhpMethod::SmallClosestHole => Method::SmallClosestHole,
            PhpMethod::SmallAllHoles => Method::SmallAllHoles,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhpTier {
    Macro = 0,
    Small = 1,
}

/// Opaque analytic evaluator bound to one parameter set.
pub struct PhpEvaluator {
    inner: CoverageEvaluator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PhpStatus, msg: impl Into<String>) -> PhpStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating panics into [`PhpStatus::Panic`].
fn guard<F: FnOnce() -> PhpStatus>(f: F) -> PhpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(PhpStatus::Panic, msg)
        }
    }
}

unsafe fn read_params(params: *const PhpNetworkParams) -> Result<NetworkParams, PhpStatus> {
    // SAFETY: caller passes a valid pointer or NULL.
    let p: NetworkParams = match unsafe { params.as_ref() } {
        Some(p) => (*p).into(),
        None => return Err(fail(PhpStatus::NullPointer, "params is NULL")),
    };
    p.validate().map_err(|e| fail(PhpStatus::InvalidParams, e.to_string()))?;
    Ok(p)
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn php_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with a named parameter set (`"setup1"` or `"setup2"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable, or NULL.
#[no_mangle]
pub unsafe extern "C" fn php_params_preset(name: *const c_char, out: *mut PhpNetworkParams) -> PhpStatus {
    guard(|| {
        if name.is_null() || out.is_null() {
            return fail(PhpStatus::NullPointer, "name or out is NULL");
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let name = unsafe { CStr::from_ptr(name) }.to_string_lossy();
        match NetworkParams::preset(&name) {
            Some(p) => {
                // SAFETY: checked non-null.
                unsafe { out.write(p.into()) };
                PhpStatus::Ok
            }
            None => fail(PhpStatus::InvalidArgument, format!("unknown preset `{name}`")),
        }
    })
}

/// Area of the intersection of a disc of radius `r` at the origin with a disc
/// of radius `r_hole` whose center is at distance `d`.
///
/// # Safety
/// `out` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn php_lens_area(r: f64, r_hole: f64, d: f64, out: *mut f64) -> PhpStatus {
    guard(|| {
        if out.is_null() {
            return fail(PhpStatus::NullPointer, "out is NULL");
        }
        if !(r >= 0.0 && r_hole >= 0.0 && d >= 0.0) || !(r.is_finite() && r_hole.is_finite() && d.is_finite()) {
            return fail(PhpStatus::InvalidArgument, "radii and distance must be finite and non-negative");
        }
        // SAFETY: checked non-null.
        unsafe { out.write(lens_area(LensQuery::new(r, r_hole, d))) };
        PhpStatus::Ok
    })
}

/// Marginal density and CDF of the distance to the nearest small cell.
/// Either output pointer may be NULL if that value is not needed.
///
/// # Safety
/// `params` must point to a valid struct; outputs must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn php_small_distance(
    params: *const PhpNetworkParams,
    z: f64,
    pdf_out: *mut f64,
    cdf_out: *mut f64,
) -> PhpStatus {
    guard(|| {
        // SAFETY: forwarded caller guarantee.
        let p = match unsafe { read_params(params) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        if !(z >= 0.0 && z.is_finite()) {
            return fail(PhpStatus::InvalidArgument, "distance must be finite and non-negative");
        }
        let quad = QuadConfig::default();
        let pdf = marginal_pdf_z2hat(z, &p, &quad);
        let cdf = marginal_cdf_z2hat(z, &p, &quad);
        match (pdf, cdf) {
            (Ok(pdf), Ok(cdf)) => {
                // SAFETY: each pointer is checked before writing.
                unsafe {
                    if !pdf_out.is_null() {
                        pdf_out.write(pdf);
                    }
                    if !cdf_out.is_null() {
                        cdf_out.write(cdf);
                    }
                }
                PhpStatus::Ok
            }
            (Err(e), _) | (_, Err(e)) => fail(PhpStatus::Numerical, e.to_string()),
        }
    })
}

/// Creates an evaluator with default accuracy settings. Release it with
/// [`php_evaluator_free`].
///
/// # Safety
/// `params` must point to a valid struct and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn php_evaluator_new(params: *const PhpNetworkParams, out: *mut *mut PhpEvaluator) -> PhpStatus {
    guard(|| {
        if out.is_null() {
            return fail(PhpStatus::NullPointer, "out is NULL");
        }
        // SAFETY: forwarded caller guarantee.
        let p = match unsafe { read_params(params) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match CoverageEvaluator::new(p, EvalConfig::default()) {
            Ok(inner) => {
                // SAFETY: checked non-null.
                unsafe { out.write(Box::into_raw(Box::new(PhpEvaluator { inner }))) };
                PhpStatus::Ok
            }
            Err(e) => fail(PhpStatus::InvalidParams, e.to_string()),
        }
    })
}

/// # Safety
/// `ev` must come from [`php_evaluator_new`] and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn php_evaluator_free(ev: *mut PhpEvaluator) {
    if !ev.is_null() {
        // SAFETY: pointer was produced by Box::into_raw in php_evaluator_new.
        drop(unsafe { Box::from_raw(ev) });
    }
}

/// Analytic coverage probability at an SIR threshold given in dB.
///
/// # Safety
/// `ev` must be a live evaluator and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn php_evaluator_coverage(
    ev: *const PhpEvaluator,
    method: PhpMethod,
    gamma_db: f64,
    out: *mut f64,
) -> PhpStatus {
    guard(|| {
        // SAFETY: caller passes a live evaluator or NULL.
        let Some(ev) = (unsafe { ev.as_ref() }) else {
            return fail(PhpStatus::NullPointer, "evaluator is NULL");
        };
        if out.is_null() {
            return fail(PhpStatus::NullPointer, "out is NULL");
        }
        if !gamma_db.is_finite() {
            return fail(PhpStatus::InvalidArgument, "threshold must be finite");
        }
        match ev.inner.evaluate(method.into(), SirThreshold::from_db(gamma_db)) {
            Ok(r) => {
                // SAFETY: checked non-null.
                unsafe { out.write(r.value) };
                PhpStatus::Ok
            }
            Err(e) => fail(PhpStatus::Numerical, e.to_string()),
        }
    })
}

/// Monte Carlo coverage of one tier at a single threshold, with the 95%
/// confidence half-width. Results depend only on the seed.
///
/// # Safety
/// `params` must point to a valid struct; `mean_out` must be writable;
/// `ci_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn php_simulate_coverage(
    params: *const PhpNetworkParams,
    tier: PhpTier,
    gamma_db: f64,
    n_trials: u64,
    seed: u64,
    mean_out: *mut f64,
    ci_out: *mut f64,
) -> PhpStatus {
    guard(|| {
        // SAFETY: forwarded caller guarantee.
        let p = match unsafe { read_params(params) } {
            Ok(p) => p,
            Err(s) => return s,
        };
        if mean_out.is_null() {
            return fail(PhpStatus::NullPointer, "mean_out is NULL");
        }
        if n_trials == 0 || !gamma_db.is_finite() {
            return fail(PhpStatus::InvalidArgument, "need at least one trial and a finite threshold");
        }
        let cfg = SimConfig::new(&p, n_trials, seed).with_hole_mode(HoleMode::AllHoles);
        let run = match simulate(&p, &cfg) {
            Ok(r) => r,
            Err(e) => return fail(PhpStatus::Numerical, e.to_string()),
        };
        let tier = match tier {
            PhpTier::Macro => Tier::Macro,
            PhpTier::Small => Tier::Small,
        };
        let est = coverage_from_run(&run, tier, &[gamma_db])[0];
        // SAFETY: mean_out checked; ci_out checked before use.
        unsafe {
            mean_out.write(est.mean);
            if !ci_out.is_null() {
                ci_out.write(est.ci_halfwidth);
            }
        }
        PhpStatus::Ok
    })
}
