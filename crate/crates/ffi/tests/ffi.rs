use std::ffi::{CStr, CString};
use std::ptr;

use rcm_align_ffi::*;

fn last_error() -> String {
    let p = rcm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kinematics() {
    let mut p = [0.0; 3];
    let mut j = [0.0; 9];
    let mut theta = 0.0;
    unsafe {
        assert_eq!(rcm_dh_forward(0.0, 0.0, 0.1, 0.03, p.as_mut_ptr()), RcmStatus::Ok);
        assert_eq!(
            rcm_incision_jacobian(std::f64::consts::FRAC_PI_6, 0.0, 0.0, 0.02, j.as_mut_ptr()),
            RcmStatus::Ok
        );
        assert_eq!(rcm_pivot_angle(0.0, 0.3, &mut theta), RcmStatus::Ok);
    }
    assert!((p.iter().map(|x| x * x).sum::<f64>().sqrt() - 0.03).abs() < 1e-15);
    let expected = [-0.017321, 0.0, 0.5, 0.0, 0.02, 0.0, -0.01, 0.0, -0.86603];
    for (a, b) in j.iter().zip(expected) {
        assert!((a - b).abs() < 1e-5);
    }
    assert!((theta - 0.3).abs() < 1e-15);
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        assert_eq!(
            rcm_dh_forward(0.0, 0.0, 0.0, 0.03, ptr::null_mut()),
            RcmStatus::NullPointer
        );
        assert!(last_error().contains("out"));
        let mut p = [0.0; 3];
        assert_eq!(
            rcm_dh_forward(f64::NAN, 0.0, 0.0, 0.03, p.as_mut_ptr()),
            RcmStatus::InvalidArgument
        );
        let mut ds = ptr::null_mut();
        let missing = CString::new("/no/such/file.csv").unwrap();
        assert_eq!(rcm_dataset_load(missing.as_ptr(), &mut ds), RcmStatus::Io);
        assert!(ds.is_null());
        rcm_dataset_free(ptr::null_mut());
        rcm_model_free(ptr::null_mut());
    }
}

#[test]
fn fuse() {
    let lo = [750.0, 700.0];
    let hi = [850.0, 800.0];
    let mut out = RcmStiffness::default();
    unsafe {
        assert_eq!(rcm_fuse_k(lo.as_ptr(), hi.as_ptr(), 2, &mut out), RcmStatus::Ok);
        assert_eq!((out.lower, out.upper, out.k_hat), (750.0, 800.0, 775.0));
        let lo = [700.0, 850.0];
        let hi = [800.0, 950.0];
        assert_eq!(
            rcm_fuse_k(lo.as_ptr(), hi.as_ptr(), 2, &mut out),
            RcmStatus::EmptyIntersection
        );
        assert_eq!(
            rcm_fuse_k(ptr::null(), ptr::null(), 0, &mut out),
            RcmStatus::InvalidArgument
        );
    }
}

#[test]
fn dataset_round_trip_and_estimation() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            rcm_dataset_simulate_teleop(0.03, 900.0, 10.0, 4, true, &mut ds),
            RcmStatus::Ok
        );
        let mut n = 0;
        assert_eq!(rcm_dataset_len(ds, &mut n), RcmStatus::Ok);
        assert_eq!(n, 2000);

        let mut f = [0.0; 3];
        assert_eq!(
            rcm_estimate_force(ptr::null(), ds, 500, 0.03, f.as_mut_ptr()),
            RcmStatus::Ok
        );
        assert!(f.iter().any(|x| *x != 0.0));
        assert_eq!(
            rcm_estimate_force(ptr::null(), ds, n, 0.03, f.as_mut_ptr()),
            RcmStatus::InvalidArgument
        );
        assert_eq!(
            rcm_estimate_force(ptr::null(), ds, 500, 0.0, f.as_mut_ptr()),
            RcmStatus::Singular
        );

        let mut r = RcmPhase2Result::default();
        assert_eq!(
            rcm_phase2_optimize_d(ds, ptr::null(), false, 900.0, 2.0, &mut r),
            RcmStatus::Ok
        );
        assert!((r.d_hat - 0.03).abs() < 1e-6, "{r:?}");
        assert_eq!(r.samples_used + r.samples_rejected, n);
        assert_eq!(
            rcm_phase2_optimize_d(ds, ptr::null(), true, 900.0, 1e9, &mut r),
            RcmStatus::InsufficientExcitation
        );
        rcm_dataset_free(ds);
    }
}

#[test]
fn header_declares_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rcm_align.h")).unwrap();
    for name in [
        "rcm_dh_forward",
        "rcm_incision_jacobian",
        "rcm_pivot_angle",
        "rcm_dataset_load",
        "rcm_dataset_free",
        "rcm_model_load",
        "rcm_estimate_force",
        "rcm_phase2_optimize_d",
        "rcm_fuse_k",
        "rcm_last_error",
        "RCM_STATUS_OK",
        "typedef struct RcmDataset RcmDataset",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rcm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
