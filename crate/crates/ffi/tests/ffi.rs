use std::ffi::{CStr, CString};
use std::ptr;

use irf_mixflow_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = irf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Rig {
    t: *mut IrfTarget,
    k: *mut IrfKernel,
}

impl Rig {
    fn new(target: &str, kind: &str, eps: f64) -> Self {
        let mut t = ptr::null_mut();
        let mut k = ptr::null_mut();
        unsafe {
            assert_eq!(irf_target_new(cs(target).as_ptr(), &mut t), IrfStatus::Ok);
            assert_eq!(irf_kernel_new(t, cs(kind).as_ptr(), eps, 10, &mut k), IrfStatus::Ok);
        }
        Rig { t, k }
    }
}

impl Drop for Rig {
    fn drop(&mut self) {
        unsafe {
            irf_kernel_free(self.k);
            irf_target_free(self.t);
        }
    }
}

#[test]
fn forward_then_inverse_round_trips() {
    for kind in ["rwmh", "mala", "hmc"] {
        let rig = Rig::new("banana", kind, 0.2);
        let len = unsafe { irf_state_len(rig.k) };
        assert_eq!(len, 7);
        // v plausible under ρ(·|x) for all three kernels
        let s = [0.3, -4.0, 0.35, -4.1, 0.25, 0.75, 0.4];
        let theta_v = [0.125, 0.9];
        let mut fwd = [0.0; 7];
        let mut back = [0.0; 7];
        unsafe {
            assert_eq!(irf_forward_step(rig.k, s.as_ptr(), len, theta_v.as_ptr(), 0.3, fwd.as_mut_ptr()), IrfStatus::Ok);
            assert_eq!(irf_inverse_step(rig.k, fwd.as_ptr(), len, theta_v.as_ptr(), 0.3, back.as_mut_ptr()), IrfStatus::Ok);
        }
        assert_ne!(fwd, s);
        let err: f64 = s.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10, "{kind}: {err}");
    }
}

#[test]
fn in_place_step_matches_out_of_place() {
    let rig = Rig::new("cross", "rwmh", 0.5);
    let s = [0.1, 0.2, -0.3, 0.4, 0.6, 0.7, 0.2];
    let theta_v = [0.4, 0.1];
    let mut out = [0.0; 7];
    let mut inplace = s;
    unsafe {
        irf_forward_step(rig.k, s.as_ptr(), 7, theta_v.as_ptr(), 0.5, out.as_mut_ptr());
        let p = inplace.as_mut_ptr();
        assert_eq!(irf_forward_step(rig.k, p, 7, theta_v.as_ptr(), 0.5, p), IrfStatus::Ok);
    }
    assert_eq!(out, inplace);
}

#[test]
fn errors_carry_status_and_message() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(irf_target_new(cs("teapot").as_ptr(), &mut t), IrfStatus::Config);
        assert!(last_error().contains("teapot"));
        assert!(t.is_null());
        assert_eq!(irf_target_new(ptr::null(), &mut t), IrfStatus::NullPointer);
    }
    let rig = Rig::new("funnel", "rwmh", 0.3);
    let mut k = ptr::null_mut();
    let mut out = [0.0; 7];
    unsafe {
        assert_eq!(irf_kernel_new(rig.t, cs("gibbs").as_ptr(), 0.3, 1, &mut k), IrfStatus::Config);
        assert_eq!(irf_kernel_new(rig.t, cs("rwmh").as_ptr(), -1.0, 1, &mut k), IrfStatus::InvalidArgument);
        let s = [0.0; 5];
        let th = [0.1, 0.1];
        assert_eq!(irf_forward_step(rig.k, s.as_ptr(), 5, th.as_ptr(), 0.1, out.as_mut_ptr()), IrfStatus::InvalidArgument);
        let s = [0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 1.5];
        assert_eq!(irf_forward_step(rig.k, s.as_ptr(), 7, th.as_ptr(), 0.1, out.as_mut_ptr()), IrfStatus::InvalidArgument);
        let bad_theta = [1.2, 0.1];
        let s = [0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5];
        assert_eq!(
            irf_forward_step(rig.k, s.as_ptr(), 7, bad_theta.as_ptr(), 0.1, out.as_mut_ptr()),
            IrfStatus::InvalidArgument
        );
        assert_eq!(irf_forward_step(ptr::null(), s.as_ptr(), 7, th.as_ptr(), 0.1, out.as_mut_ptr()), IrfStatus::NullPointer);
    }
}

#[test]
fn target_density_matches_library() {
    let rig = Rig::new("banana", "rwmh", 0.3);
    let x = [1.0, -3.0];
    let mut out = 0.0;
    unsafe {
        assert_eq!(irf_target_dim(rig.t), 2);
        assert_eq!(irf_target_log_density(rig.t, x.as_ptr(), 2, &mut out), IrfStatus::Ok);
    }
    let lib = irf_mixflow::targets::banana();
    assert_eq!(out, lib.log_density(&x));
}

#[test]
fn flow_samples_and_densities() {
    let rig = Rig::new("cross", "rwmh", 0.5);
    let mean = [0.0, 0.0];
    let log_sd = [0.5, 0.5];
    for family in ["homogeneous", "irf", "backward_irf", "ensemble_irf", "uncorrected_homogeneous"] {
        let mut f = ptr::null_mut();
        unsafe {
            assert_eq!(
                irf_flow_new(rig.k, cs(family).as_ptr(), 5, 3, 11, mean.as_ptr(), log_sd.as_ptr(), &mut f),
                IrfStatus::Ok,
                "{family}"
            );
            let mut a = vec![0.0; 4 * 7];
            let mut b = vec![0.0; 4 * 7];
            assert_eq!(irf_flow_sample(f, 4, 2, a.as_mut_ptr()), IrfStatus::Ok);
            assert_eq!(irf_flow_sample(f, 4, 2, b.as_mut_ptr()), IrfStatus::Ok);
            assert_eq!(a, b);
            for row in a.chunks(7) {
                let mut lq = f64::NAN;
                assert_eq!(irf_flow_log_density(f, row.as_ptr(), 7, &mut lq), IrfStatus::Ok);
                assert!(lq.is_finite(), "{family}: {lq}");
            }
            irf_flow_free(f);
        }
    }
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(
            irf_flow_new(rig.k, cs("mixture").as_ptr(), 5, 1, 0, mean.as_ptr(), log_sd.as_ptr(), &mut f),
            IrfStatus::Config
        );
    }
}

#[test]
fn free_accepts_null_and_version_is_set() {
    unsafe {
        irf_target_free(ptr::null_mut());
        irf_kernel_free(ptr::null_mut());
        irf_flow_free(ptr::null_mut());
        assert_eq!(irf_state_len(ptr::null()), 0);
    }
    let v = unsafe { CStr::from_ptr(irf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/irf_mixflow.h")).unwrap();
    for name in [
        "IrfStatus",
        "typedef struct IrfTarget IrfTarget",
        "irf_target_new",
        "irf_kernel_new",
        "irf_forward_step",
        "irf_inverse_step",
        "irf_flow_new",
        "irf_flow_sample",
        "irf_flow_log_density",
        "irf_last_error",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

#[test]
fn c_example_compiles_against_header() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", &format!("{dir}/include"), &format!("{dir}/examples/round_trip.c")])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
