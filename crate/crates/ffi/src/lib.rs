//! C ABI over `clusterlqr`.
//!
//! Matrices cross the boundary as dense row-major `double` arrays. Every
//! fallible call returns a [`ClqrStatus`]; on failure the message is available
//! from [`clqr_last_error`] until the next failing call on the same thread.
//! Handles are opaque and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clusterlqr::harness::{design_projection, Design, ExperimentConfig, Instance, SystemSource};
use clusterlqr::netgen::{generate_clustered_consensus, ConsensusParams};
use clusterlqr::projection::{count_links, xi_objective, AlphaPolicy};
use clusterlqr::spectral::EigenMethod;
use clusterlqr::{Error, ErrorKind, LtiSystem};

/// Status codes; the nonzero values match the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClqrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Instability = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ClqrStatus {
    match e.kind() {
        ErrorKind::Argument => ClqrStatus::InvalidArgument,
        ErrorKind::Numerical => ClqrStatus::Numerical,
        ErrorKind::Instability => ClqrStatus::Instability,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ClqrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ClqrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            ClqrStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            ClqrStatus::Panic
        }
    }
}

/// A plant together with its full-order LQR solution.
pub struct ClqrSystem {
    inst: Instance,
}

/// A reduced-order controller lifted to full order.
pub struct ClqrController {
    k_hat: Vec<f64>,
    m: usize,
    n: usize,
    labels: Vec<usize>,
    stable: bool,
    rel_error: Option<f64>,
    xi_kappa: f64,
}

unsafe fn read_mat(p: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<faer::Mat<f64>, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = std::slice::from_raw_parts(p, rows * cols);
    Ok(faer::Mat::from_fn(rows, cols, |i, j| s[i * cols + j]))
}

unsafe fn out_ptr<T>(p: *mut T, what: &'static str) -> Result<&'static mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Builds a system from A (n×n), B (n×m), B_d (n×nb), Q (n×n), R (m×m) and
/// solves its full-order LQR problem.
///
/// # Safety
/// Each pointer must reference an array of the stated size; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clqr_system_new(
    n: usize,
    m: usize,
    nb: usize,
    a: *const f64,
    b: *const f64,
    bd: *const f64,
    q: *const f64,
    r: *const f64,
    out: *mut *mut ClqrSystem,
) -> ClqrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let sys = LtiSystem::new(
            read_mat(a, n, n, "a")?,
            read_mat(b, n, m, "b")?,
            read_mat(bd, n, nb, "bd")?,
            read_mat(q, n, n, "q")?,
            read_mat(r, m, m, "r")?,
        )?;
        let inst = Instance::new(sys, None, None)?;
        *out = Box::into_raw(Box::new(ClqrSystem { inst }));
        Ok(())
    })
}

/// Random clustered consensus network with B = I, B_d = e₁, Q = q_scale·I, R = I.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn clqr_consensus_new(
    n: usize,
    groups: usize,
    p_intra: f64,
    ratio: f64,
    q_scale: f64,
    seed: u64,
    out: *mut *mut ClqrSystem,
) -> ClqrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let net = generate_clustered_consensus(&ConsensusParams::new(n, groups, p_intra, ratio, seed))?;
        let mut sys = net.sys;
        sys.q = clusterlqr::linalg::scaled_identity(n, q_scale);
        let sys = LtiSystem::new(sys.a, sys.b, sys.bd, sys.q, sys.r)?;
        let inst = Instance::new(sys, Some(net.graph), Some(net.vbar))?;
        *out = Box::into_raw(Box::new(ClqrSystem { inst }));
        Ok(())
    })
}

/// # Safety
/// `sys` must come from a `clqr_*_new` call and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn clqr_system_free(sys: *mut ClqrSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// State dimension n, or 0 for a null handle.
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn clqr_system_states(sys: *const ClqrSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inst.n())
}

/// Input dimension m, or 0 for a null handle.
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn clqr_system_inputs(sys: *const ClqrSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inst.sys.m())
}

/// Full-order gain K (m×n, row-major) into `buf` of length `len` = m·n.
///
/// # Safety
/// `sys` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn clqr_system_full_gain(sys: *const ClqrSystem, buf: *mut f64, len: usize) -> ClqrStatus {
    guard(|| {
        let s = sys.as_ref().ok_or(Fail::Null("sys"))?;
        let k = &s.inst.full.k;
        copy_rows(k.nrows(), k.ncols(), |i, j| k[(i, j)], buf, len)
    })
}

unsafe fn copy_rows(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64, buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(Fail::Null("buf"));
    }
    if len != rows * cols {
        return Err(Error::Dimension(format!("buffer holds {len} values, need {}", rows * cols)).into());
    }
    let out = std::slice::from_raw_parts_mut(buf, len);
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = f(i, j);
        }
    }
    Ok(())
}

/// Designs a clustered controller with `r` clusters from Φ_κ.
///
/// `design` is one of "cluster", "weight", "alternating", "baseline:coherency",
/// "baseline:openloop_h2". Coherency and weight designs need a consensus system.
///
/// # Safety
/// `sys` must be a live handle, `design` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clqr_design(
    sys: *const ClqrSystem,
    design: *const c_char,
    r: usize,
    kappa: usize,
    seed: u64,
    out: *mut *mut ClqrController,
) -> ClqrStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = sys.as_ref().ok_or(Fail::Null("sys"))?;
        if design.is_null() {
            return Err(Fail::Null("design"));
        }
        let name = CStr::from_ptr(design)
            .to_str()
            .map_err(|_| Error::InvalidArgument("design name is not UTF-8".into()))?;
        let d = Design::parse(name)?;
        let inst = &s.inst;
        if r == 0 || r > inst.n() || kappa == 0 {
            return Err(Error::InvalidArgument(format!("need 1 <= r <= {} and kappa >= 1", inst.n())).into());
        }
        // the system source is unused for in-memory instances
        let mut cfg = ExperimentConfig::with_system(SystemSource::Generator(ConsensusParams::new(1, 1, 1.0, 1.0, seed)), vec![r]);
        cfg.kappa = kappa;
        let factor = inst.low_rank(kappa, EigenMethod::Auto)?;
        let p = design_projection(inst, &factor, d, r, seed, &cfg)?;
        let ev = inst.evaluate(&p, AlphaPolicy::Auto)?;
        let (m, n) = (ev.k_hat.nrows(), ev.k_hat.ncols());
        let ctrl = ClqrController {
            k_hat: (0..m * n).map(|t| ev.k_hat[(t / n, t % n)]).collect(),
            m,
            n,
            labels: p.partition().labels(),
            stable: ev.stable,
            rel_error: ev.rel_error,
            xi_kappa: xi_objective(&p, &factor),
        };
        *out = Box::into_raw(Box::new(ctrl));
        Ok(())
    })
}

/// # Safety
/// `ctrl` must come from `clqr_design` and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_free(ctrl: *mut ClqrController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Lifted gain K̂ (m×n, row-major) into `buf` of length m·n.
///
/// # Safety
/// `ctrl` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_gain(ctrl: *const ClqrController, buf: *mut f64, len: usize) -> ClqrStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or(Fail::Null("ctrl"))?;
        copy_rows(c.m, c.n, |i, j| c.k_hat[i * c.n + j], buf, len)
    })
}

/// Zero-based cluster label of each state into `buf` of length n.
///
/// # Safety
/// `ctrl` must be a live handle and `buf` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_labels(ctrl: *const ClqrController, buf: *mut usize, len: usize) -> ClqrStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or(Fail::Null("ctrl"))?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        if len != c.labels.len() {
            return Err(Error::Dimension(format!("buffer holds {len} labels, need {}", c.labels.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&c.labels);
        Ok(())
    })
}

/// 1 when A − BK̂ is Hurwitz, 0 otherwise (including a null handle).
///
/// # Safety
/// `ctrl` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_stable(ctrl: *const ClqrController) -> i32 {
    ctrl.as_ref().map_or(0, |c| c.stable as i32)
}

/// Relative H₂ model-matching error; `CLQR_STATUS_INSTABILITY` for an unstable loop.
///
/// # Safety
/// `ctrl` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_rel_error(ctrl: *const ClqrController, out: *mut f64) -> ClqrStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or(Fail::Null("ctrl"))?;
        let out = out_ptr(out, "out")?;
        *out = c.rel_error.ok_or_else(|| Error::Instability("closed loop is unstable".into()))?;
        Ok(())
    })
}

/// Low-rank clustering objective ξ_κ of the design, NaN for a null handle.
///
/// # Safety
/// `ctrl` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn clqr_controller_xi(ctrl: *const ClqrController) -> f64 {
    ctrl.as_ref().map_or(f64::NAN, |c| c.xi_kappa)
}

/// Communication links of the two-layer controller and of full LQR.
///
/// # Safety
/// Both output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn clqr_link_count(n: u64, r: u64, two_layer: *mut u64, full_lqr: *mut u64) -> ClqrStatus {
    guard(|| {
        let t = out_ptr(two_layer, "two_layer")?;
        let f = out_ptr(full_lqr, "full_lqr")?;
        let c = count_links(n, r)?;
        *t = c.two_layer;
        *f = c.full_lqr;
        Ok(())
    })
}

/// Message of the last failure on this thread; empty when none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn clqr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn clqr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
