//! C interface. Objects are opaque handles created by `*_new` and released
//! by the matching `*_free`. Every fallible call returns an [`IrfStatus`];
//! on failure [`irf_last_error`] holds a message for the calling thread.
//!
//! An augmented state crosses the boundary as a flat array
//! `[x (d), v (d), u_v (d), u_a]` of length `3d + 1`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use irf_mixflow::flows::{flow_log_density, flow_samples, FlowFamily, FlowSpec};
use irf_mixflow::irf::{irf_forward, irf_inverse, AugmentedState, IrfParam};
use irf_mixflow::kernels::{hmc_kernel, mala_kernel, rwmh_kernel, InvolutiveKernel};
use irf_mixflow::reference::{AugmentedReference, MeanFieldGaussian};
use irf_mixflow::targets::{self, Target};
use irf_mixflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Panic = 5,
}

pub struct IrfTarget {
    inner: Arc<dyn Target>,
}

pub struct IrfKernel {
    inner: InvolutiveKernel,
}

pub struct IrfFlow {
    inner: FlowSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: IrfStatus, msg: impl Into<String>) -> IrfStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> IrfStatus {
    let status = match &e {
        _ if e.is_numerical() => IrfStatus::Numerical,
        Error::Config(_) => IrfStatus::Config,
        _ => IrfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> IrfStatus) -> IrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(IrfStatus::Panic, "panic inside irf_mixflow"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, IrfStatus> {
    if p.is_null() {
        return Err(fail(IrfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(IrfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], IrfStatus> {
    if p.is_null() {
        return Err(fail(IrfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! lib {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn irf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn irf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a synthetic target: `banana`, `funnel`, `cross`, `warped` or
/// `gaussian`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn irf_target_new(name: *const c_char, out: *mut *mut IrfTarget) -> IrfStatus {
    guard(|| {
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let name = tri!(str_arg(name, "name"));
        let inner = lib!(targets::by_name(name));
        *out = Box::into_raw(Box::new(IrfTarget { inner }));
        IrfStatus::Ok
    })
}

/// # Safety
/// `t` must come from [`irf_target_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irf_target_free(t: *mut IrfTarget) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be a live target handle.
#[no_mangle]
pub unsafe extern "C" fn irf_target_dim(t: *const IrfTarget) -> usize {
    t.as_ref().map_or(0, |t| t.inner.dim())
}

/// `ln γ(x)` for `x` of length `d`.
///
/// # Safety
/// `t` must be a live target handle, `x` readable for `d` values and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn irf_target_log_density(
    t: *const IrfTarget,
    x: *const f64,
    d: usize,
    out: *mut f64,
) -> IrfStatus {
    guard(|| {
        let Some(t) = t.as_ref() else {
            return fail(IrfStatus::NullPointer, "target is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        if d != t.inner.dim() {
            return fail(IrfStatus::InvalidArgument, format!("x has length {d}, target has dimension {}", t.inner.dim()));
        }
        let x = tri!(slice_arg(x, d, "x"));
        *out = t.inner.log_density(x);
        IrfStatus::Ok
    })
}

/// Builds `rwmh`, `mala` or `hmc` on a target; `leapfrog` is read by `hmc`
/// only. The kernel keeps its own reference to the target.
///
/// # Safety
/// `t` must be a live target handle, `kind` NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn irf_kernel_new(
    t: *const IrfTarget,
    kind: *const c_char,
    eps: f64,
    leapfrog: usize,
    out: *mut *mut IrfKernel,
) -> IrfStatus {
    guard(|| {
        let Some(t) = t.as_ref() else {
            return fail(IrfStatus::NullPointer, "target is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let kind = tri!(str_arg(kind, "kind"));
        let target = t.inner.clone();
        let inner = lib!(match kind {
            "rwmh" => rwmh_kernel(target, eps),
            "mala" => mala_kernel(target, eps),
            "hmc" => hmc_kernel(target, eps, leapfrog),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        });
        *out = Box::into_raw(Box::new(IrfKernel { inner }));
        IrfStatus::Ok
    })
}

/// # Safety
/// `k` must come from [`irf_kernel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irf_kernel_free(k: *mut IrfKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Length of a flat augmented state, `3d + 1`.
///
/// # Safety
/// `k` must be a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn irf_state_len(k: *const IrfKernel) -> usize {
    k.as_ref().map_or(0, |k| 3 * k.inner.dim() + 1)
}

unsafe fn apply(
    k: *const IrfKernel,
    state: *const f64,
    len: usize,
    theta_v: *const f64,
    theta_a: f64,
    out: *mut f64,
    inverse: bool,
) -> IrfStatus {
    guard(|| {
        let Some(k) = k.as_ref() else {
            return fail(IrfStatus::NullPointer, "kernel is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let d = k.inner.dim();
        if len != 3 * d + 1 {
            return fail(IrfStatus::InvalidArgument, format!("state has length {len}, expected {}", 3 * d + 1));
        }
        let s = lib!(AugmentedState::from_flat(d, tri!(slice_arg(state, len, "state"))));
        if !s.is_valid() {
            return fail(IrfStatus::InvalidArgument, "state must be finite with uniforms in [0, 1)");
        }
        let theta = lib!(IrfParam::new(tri!(slice_arg(theta_v, d, "theta_v")).to_vec(), theta_a));
        let next = lib!(if inverse { irf_inverse(&k.inner, &s, &theta) } else { irf_forward(&k.inner, &s, &theta) });
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&next.to_flat());
        IrfStatus::Ok
    })
}

/// One IRF step `f_θ(s)`. `out` may alias `state`.
///
/// # Safety
/// `k` must be a live kernel handle; `state` and `out` must hold `len`
/// values and `theta_v` must hold `d`.
#[no_mangle]
pub unsafe extern "C" fn irf_forward_step(
    k: *const IrfKernel,
    state: *const f64,
    len: usize,
    theta_v: *const f64,
    theta_a: f64,
    out: *mut f64,
) -> IrfStatus {
    apply(k, state, len, theta_v, theta_a, out, false)
}

/// The exact inverse `f_θ⁻¹(s)`. `out` may alias `state`.
///
/// # Safety
/// As for [`irf_forward_step`].
#[no_mangle]
pub unsafe extern "C" fn irf_inverse_step(
    k: *const IrfKernel,
    state: *const f64,
    len: usize,
    theta_v: *const f64,
    theta_a: f64,
    out: *mut f64,
) -> IrfStatus {
    apply(k, state, len, theta_v, theta_a, out, true)
}

/// A flow of `family` (`homogeneous`, `irf`, `backward_irf`,
/// `ensemble_irf`, `uncorrected_homogeneous`) over the mean-field Gaussian
/// reference `N(mean, diag(exp(2 log_sd)))`. Homogeneous families use the
/// default constant shift; the IRF families draw their frozen stream from
/// `seed`.
///
/// # Safety
/// `k` must be a live kernel handle, `family` NUL-terminated, `mean` and
/// `log_sd` readable for `d` values, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irf_flow_new(
    k: *const IrfKernel,
    family: *const c_char,
    length: usize,
    streams: usize,
    seed: u64,
    mean: *const f64,
    log_sd: *const f64,
    out: *mut *mut IrfFlow,
) -> IrfStatus {
    guard(|| {
        let Some(k) = k.as_ref() else {
            return fail(IrfStatus::NullPointer, "kernel is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let d = k.inner.dim();
        let family: FlowFamily = lib!(tri!(str_arg(family, "family")).parse());
        let mean = tri!(slice_arg(mean, d, "mean")).to_vec();
        let log_sd = tri!(slice_arg(log_sd, d, "log_sd")).to_vec();
        if mean.iter().chain(&log_sd).any(|v| !v.is_finite()) {
            return fail(IrfStatus::InvalidArgument, "reference parameters must be finite");
        }
        let r = AugmentedReference::new(MeanFieldGaussian::new(mean, log_sd), k.inner.clone());
        let theta = IrfParam::homogeneous_default(d);
        let inner = lib!(FlowSpec::new(family, r, length, streams, theta, seed));
        *out = Box::into_raw(Box::new(IrfFlow { inner }));
        IrfStatus::Ok
    })
}

/// # Safety
/// `f` must come from [`irf_flow_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn irf_flow_free(f: *mut IrfFlow) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// `n` draws written row-major into `out` (`n · (3d + 1)` values). Draw `i`
/// depends only on `seed` and `i`. Fails as a whole if any draw fails.
///
/// # Safety
/// `f` must be a live flow handle and `out` writable for `n · (3d + 1)`
/// values.
#[no_mangle]
pub unsafe extern "C" fn irf_flow_sample(f: *const IrfFlow, n: usize, seed: u64, out: *mut f64) -> IrfStatus {
    guard(|| {
        let Some(f) = f.as_ref() else {
            return fail(IrfStatus::NullPointer, "flow is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let width = 3 * f.inner.reference.dim() + 1;
        let dst = std::slice::from_raw_parts_mut(out, n * width);
        for (row, s) in dst.chunks_exact_mut(width).zip(flow_samples(&f.inner, n, seed)) {
            row.copy_from_slice(&lib!(s).to_flat());
        }
        IrfStatus::Ok
    })
}

/// `ln q̄_T(s)` of a flat state.
///
/// # Safety
/// `f` must be a live flow handle, `state` readable for `len` values and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irf_flow_log_density(
    f: *const IrfFlow,
    state: *const f64,
    len: usize,
    out: *mut f64,
) -> IrfStatus {
    guard(|| {
        let Some(f) = f.as_ref() else {
            return fail(IrfStatus::NullPointer, "flow is null");
        };
        if out.is_null() {
            return fail(IrfStatus::NullPointer, "out is null");
        }
        let d = f.inner.reference.dim();
        if len != 3 * d + 1 {
            return fail(IrfStatus::InvalidArgument, format!("state has length {len}, expected {}", 3 * d + 1));
        }
        let s = lib!(AugmentedState::from_flat(d, tri!(slice_arg(state, len, "state"))));
        *out = lib!(flow_log_density(&f.inner, &s));
        IrfStatus::Ok
    })
}
