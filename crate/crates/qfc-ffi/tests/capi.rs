//! Exercises the C ABI the way a foreign binding would: through raw pointers
//! and status codes only.

use std::ffi::CString;
use std::ptr;

use qfc_ffi::*;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "expected {b} got {a} (tol {tol})");
}

#[test]
fn density_and_lloyd_max_round_trip() {
    unsafe {
        let spec = CString::new("gaussian:0,1").unwrap();
        let mut d: *mut QfcDensity = ptr::null_mut();
        assert_eq!(qfc_density_parse(spec.as_ptr(), 1e-12, 1 << 14, &mut d), QFC_OK);
        close(qfc_density_mean(d), 0.0, 1e-9);
        close(qfc_density_variance(d), 1.0, 1e-6);
        close(qfc_density_mass_on(d, -1.0, 1.0), 0.6826894921, 1e-4);
        assert_eq!(qfc_density_check_log_concavity(d, 1e-6), 1);

        let mut q: *mut QfcQuantizer = ptr::null_mut();
        assert_eq!(qfc_lloyd_max(d, 1, 1e-12, 10_000, &mut q), QFC_OK);
        assert_eq!(qfc_quantizer_num_cells(q), 2);
        let mut pts = [0.0; 2];
        assert_eq!(qfc_quantizer_points(q, pts.as_mut_ptr(), 2), 2);
        close(pts[0], -0.797884560802865, 1e-4);
        close(pts[1], 0.797884560802865, 1e-4);
        close(
            qfc_quantizer_distortion(q, d),
            1.0 - 2.0 / std::f64::consts::PI,
            1e-4,
        );
        assert_eq!(qfc_quantizer_encode(q, -0.3), 0);
        let mut v = 0.0;
        assert_eq!(qfc_quantizer_decode(q, 1, &mut v), QFC_OK);
        close(v, pts[1], 1e-12);
        assert_ne!(qfc_quantizer_decode(q, 7, &mut v), QFC_OK);
        let mut buf = [0i8; 128];
        let n = qfc_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(n > 0);

        qfc_quantizer_free(q);
        qfc_density_free(d);
    }
}

#[test]
fn silent_design_reports_constraint() {
    unsafe {
        let spec = CString::new("uniform:0,1").unwrap();
        let mut d: *mut QfcDensity = ptr::null_mut();
        assert_eq!(qfc_density_parse(spec.as_ptr(), 1e-12, 4096, &mut d), QFC_OK);
        let mut s: *mut QfcSilentQuantizer = ptr::null_mut();
        assert_eq!(qfc_silent_design(d, 0.5, 1e-12, 10_000, &mut s), QFC_OK);
        assert_eq!(qfc_silent_index(s), 1);
        let mut q: *mut QfcQuantizer = ptr::null_mut();
        assert_eq!(qfc_silent_quantizer(s, &mut q), QFC_OK);
        close(qfc_quantizer_distortion(q, d), 0.0130208333, 1e-6);
        qfc_quantizer_free(q);
        qfc_silent_free(s);
        qfc_density_free(d);
    }
}

#[test]
fn mrsq_design_encode_decode() {
    unsafe {
        let spec = CString::new("uniform:0,1").unwrap();
        let mut d: *mut QfcDensity = ptr::null_mut();
        assert_eq!(qfc_density_parse(spec.as_ptr(), 1e-12, 4096, &mut d), QFC_OK);
        let rates = [1u32, 1u32];
        let weights = [1.0, 1.0];
        let mut m: *mut QfcMrsq = ptr::null_mut();
        assert_eq!(
            qfc_mrsq_design(d, rates.as_ptr(), weights.as_ptr(), 2, 1e-12, 10_000, &mut m),
            QFC_OK
        );
        assert_eq!(qfc_mrsq_stages(m), 2);
        let mut idx = [0u32; 2];
        assert_eq!(qfc_mrsq_encode(m, 0.6, idx.as_mut_ptr(), 2), QFC_OK);
        assert_eq!(idx, [1, 0]);
        let mut v = 0.0;
        assert_eq!(qfc_mrsq_decode_prefix(m, idx.as_ptr(), 1, &mut v), QFC_OK);
        close(v, 0.75, 1e-5);
        assert_eq!(qfc_mrsq_decode_prefix(m, idx.as_ptr(), 2, &mut v), QFC_OK);
        close(v, 0.625, 1e-5);
        let mut dist = 0.0;
        assert_eq!(qfc_mrsq_stage_distortion(m, d, 1, &mut dist), QFC_OK);
        close(dist, 1.0 / 192.0, 1e-6);
        qfc_mrsq_free(m);
        qfc_density_free(d);
    }
}

#[test]
fn riccati_and_bounds_buffers() {
    unsafe {
        let q = [1.0; 5];
        let r = [0.0; 4];
        let mut s = [0.0; 6];
        let mut k = [0.0; 5];
        let mut g = [0.0; 5];
        assert_eq!(
            qfc_riccati(1.5, q.as_ptr(), r.as_ptr(), 5, s.as_mut_ptr(), k.as_mut_ptr(), g.as_mut_ptr()),
            QFC_OK
        );
        close(s[0], 1.0, 1e-12);
        close(k[0], 1.5, 1e-12);
        close(g[0], 2.25, 1e-12);
        close(k[4], 0.0, 1e-12);
        close(g[4], 0.0, 1e-12);

        let mut lb = [0.0; 3];
        let mut ub = [0.0; 3];
        assert_eq!(qfc_prop4_bounds(1.2, 1.0, 1.0, 3, lb.as_mut_ptr(), ub.as_mut_ptr()), QFC_OK);
        close(lb[0], 1.0, 1e-12);
        close(lb[1], 1.36, 1e-12);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert_eq!(qfc_density_parse(ptr::null(), 1e-12, 64, ptr::null_mut()), QFC_ERR_NULL_POINTER);
        assert!(qfc_density_mean(ptr::null()).is_nan());
        assert_eq!(qfc_density_check_log_concavity(ptr::null(), 1e-6), -1);
        let spec = CString::new("gaussian:0,-1").unwrap();
        let mut d: *mut QfcDensity = ptr::null_mut();
        assert_eq!(
            qfc_density_parse(spec.as_ptr(), 1e-12, 64, &mut d),
            QFC_ERR_INVALID_ARGUMENT
        );
        let mut buf = [0i8; 256];
        let n = qfc_last_error_message(buf.as_mut_ptr(), buf.len());
        assert!(n > 0);
    }
}
