//! C ABI over `gapflow`.
//!
//! Every fallible call returns a [`GapflowStatus`]; on failure a message is
//! kept per thread and can be read with [`gapflow_last_error`]. Handles are
//! opaque, created by `*_new`/`gapflow_gap_curve` and released by the
//! matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gapflow::fredholm::{fredholm_det, spacing_pdf};
use gapflow::harness::{run_gap, Curve, Method, RunConfig};
use gapflow::{EnsembleSpec, Error, Kind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Parameters outside the domain of the requested quantity.
    DomainError = 3,
    /// A solver failed; a curve handle may still hold partial rows.
    NumericalError = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapflowKind {
    Gaussian = 0,
    Laguerre = 1,
    Jacobi = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapflowMethod {
    Fredholm = 0,
    TwOde = 1,
    Painleve = 2,
    MonteCarlo = 3,
}

/// Opaque ensemble: kind, N and the weight exponents.
pub struct GapflowEnsemble {
    spec: EnsembleSpec,
}

/// Opaque table of rows; the first column is always the endpoint s.
pub struct GapflowCurve {
    curve: Curve,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(err: &Error) -> GapflowStatus {
    match err {
        Error::ParamDomain(_)
        | Error::DegenerateInterval { .. }
        | Error::SingularEndpoint { .. }
        | Error::NoMapping(_)
        | Error::InsufficientSamples(_) => GapflowStatus::DomainError,
        _ => GapflowStatus::NumericalError,
    }
}

fn guarded(f: impl FnOnce() -> GapflowStatus) -> GapflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == GapflowStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("internal panic");
            GapflowStatus::Panic
        }
    }
}

fn fail(err: Error) -> GapflowStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> GapflowStatus {
    set_error(format!("{what} is null"));
    GapflowStatus::NullPointer
}

/// Creates an ensemble handle. `a` is ignored for Gaussian, `b` for
/// Gaussian and Laguerre.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gapflow_ensemble_new(
    kind: GapflowKind,
    n: usize,
    a: f64,
    b: f64,
    out: *mut *mut GapflowEnsemble,
) -> GapflowStatus {
    guarded(|| {
        if out.is_null() {
            return null("out");
        }
        *out = ptr::null_mut();
        let kind = match kind {
            GapflowKind::Gaussian => Kind::Gaussian,
            GapflowKind::Laguerre => Kind::Laguerre,
            GapflowKind::Jacobi => Kind::Jacobi,
        };
        let (a, b) = match kind {
            Kind::Gaussian => (0.0, 0.0),
            Kind::Laguerre => (a, 0.0),
            Kind::Jacobi => (a, b),
        };
        match EnsembleSpec::new(kind, n, a, b) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(GapflowEnsemble { spec }));
                GapflowStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases an ensemble handle. Null is accepted.
///
/// # Safety
/// `ens` must be null or a handle from [`gapflow_ensemble_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gapflow_ensemble_free(ens: *mut GapflowEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// E₂(0; (lo, hi)) by Nyström discretization with `order` nodes. Infinite
/// bounds are allowed where the support is unbounded.
///
/// # Safety
/// `ens` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gapflow_gap_probability(
    ens: *const GapflowEnsemble,
    lo: f64,
    hi: f64,
    order: usize,
    out: *mut f64,
) -> GapflowStatus {
    guarded(|| {
        let Some(e) = ens.as_ref() else { return null("ens") };
        if out.is_null() {
            return null("out");
        }
        let (slo, shi) = e.spec.support();
        let needs_cut = (lo.is_infinite() && slo.is_infinite()) || (hi.is_infinite() && shi.is_infinite());
        let cut = if needs_cut {
            match gapflow::fredholm::truncate_interval(&e.spec, 0.0) {
                Ok(iv) => iv.1,
                Err(err) => return fail(err),
            }
        } else {
            f64::INFINITY
        };
        let lo = lo.max(slo).max(-cut);
        let hi = hi.min(shi).min(cut.max(lo + 1.0));
        if hi <= lo {
            *out = 1.0;
            return GapflowStatus::Ok;
        }
        match fredholm_det(&e.spec, (lo, hi), order) {
            Ok(v) => {
                *out = v;
                GapflowStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Density at a2 of the nearest eigenvalue to the right of one at a1,
/// by mixed differences of step `h`.
///
/// # Safety
/// `ens` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gapflow_spacing_pdf(
    ens: *const GapflowEnsemble,
    a1: f64,
    a2: f64,
    h: f64,
    order: usize,
    out: *mut f64,
) -> GapflowStatus {
    guarded(|| {
        let Some(e) = ens.as_ref() else { return null("ens") };
        if out.is_null() {
            return null("out");
        }
        match spacing_pdf(&e.spec, a1, a2, h, order) {
            Ok(v) => {
                *out = v;
                GapflowStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Settings for [`gapflow_gap_curve`]; start from [`gapflow_curve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GapflowCurveOptions {
    pub method: GapflowMethod,
    pub s_from: f64,
    pub s_to: f64,
    pub points: usize,
    pub order: usize,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    /// Offset from the anchored endpoint for the ODE routes.
    pub delta: f64,
}

#[no_mangle]
pub extern "C" fn gapflow_curve_options_default() -> GapflowCurveOptions {
    GapflowCurveOptions {
        method: GapflowMethod::Fredholm,
        s_from: f64::NAN,
        s_to: f64::NAN,
        points: gapflow::harness::DEFAULT_POINTS,
        order: gapflow::harness::DEFAULT_ORDER,
        tol: gapflow::harness::DEFAULT_TOL,
        seed: gapflow::harness::DEFAULT_SEED,
        samples: gapflow::harness::DEFAULT_SAMPLES,
        delta: gapflow::harness::DEFAULT_DELTA,
    }
}

/// E₂ over an s-grid. A NaN `s_from` or `s_to` selects the default range.
/// On `NumericalError` the curve handle is still written and holds the rows
/// computed before the failure.
///
/// # Safety
/// `ens` must be a live handle, `opts` a valid pointer, and `out` valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn gapflow_gap_curve(
    ens: *const GapflowEnsemble,
    opts: *const GapflowCurveOptions,
    out: *mut *mut GapflowCurve,
) -> GapflowStatus {
    guarded(|| {
        let Some(e) = ens.as_ref() else { return null("ens") };
        let Some(o) = opts.as_ref() else { return null("opts") };
        if out.is_null() {
            return null("out");
        }
        *out = ptr::null_mut();
        let method = match o.method {
            GapflowMethod::Fredholm => Method::Fredholm,
            GapflowMethod::TwOde => Method::TwOde,
            GapflowMethod::Painleve => Method::Painleve,
            GapflowMethod::MonteCarlo => Method::Mc,
        };
        let mut cfg = RunConfig::new(e.spec, method);
        cfg.s_range = (!o.s_from.is_nan() && !o.s_to.is_nan()).then_some((o.s_from, o.s_to));
        cfg.points = o.points;
        cfg.order = o.order;
        cfg.tol = o.tol;
        cfg.seed = o.seed;
        cfg.samples = o.samples;
        cfg.delta = o.delta;
        if let Err(err) = cfg.validate() {
            set_error(err.to_string());
            return GapflowStatus::InvalidArgument;
        }
        let (curve, status) = match run_gap(&cfg) {
            Ok(c) => (c, GapflowStatus::Ok),
            Err(f) => {
                let st = fail(f.error.clone());
                (f.partial, st)
            }
        };
        let names = curve
            .columns
            .iter()
            .map(|c| CString::new(c.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(GapflowCurve { curve, names }));
        status
    })
}

/// Number of rows; 0 for null.
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gapflow_curve_rows(curve: *const GapflowCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.curve.rows.len())
}

/// Number of columns; 0 for null.
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gapflow_curve_columns(curve: *const GapflowCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.names.len())
}

/// Column name, owned by the handle and valid until it is freed; null when
/// out of range.
///
/// # Safety
/// `curve` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gapflow_curve_column_name(curve: *const GapflowCurve, col: usize) -> *const c_char {
    curve
        .as_ref()
        .and_then(|c| c.names.get(col))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Value at (row, col).
///
/// # Safety
/// `curve` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn gapflow_curve_value(
    curve: *const GapflowCurve,
    row: usize,
    col: usize,
    out: *mut f64,
) -> GapflowStatus {
    guarded(|| {
        let Some(c) = curve.as_ref() else { return null("curve") };
        if out.is_null() {
            return null("out");
        }
        match c.curve.rows.get(row).and_then(|r| r.get(col)) {
            Some(v) => {
                *out = *v;
                GapflowStatus::Ok
            }
            None => {
                set_error(format!("cell ({row}, {col}) out of range"));
                GapflowStatus::InvalidArgument
            }
        }
    })
}

/// Releases a curve handle. Null is accepted.
///
/// # Safety
/// `curve` must be null or a handle from [`gapflow_gap_curve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gapflow_curve_free(curve: *mut GapflowCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Message for the last failed call on this thread (empty after a success).
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gapflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn gapflow_status_str(status: GapflowStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        GapflowStatus::Ok => b"ok\0",
        GapflowStatus::NullPointer => b"null pointer\0",
        GapflowStatus::InvalidArgument => b"invalid argument\0",
        GapflowStatus::DomainError => b"parameter outside domain\0",
        GapflowStatus::NumericalError => b"numerical failure\0",
        GapflowStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}
