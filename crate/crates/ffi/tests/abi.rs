//! Exercises the C ABI through the exported symbols: handle lifecycles,
//! error codes, and a small end-to-end run.

use std::ffi::CString;
use std::ptr;

use tfac_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0i8; 512];
    let n = unsafe { tfac_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&b| b as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn mesh_handle_lifecycle_and_errors() {
    unsafe {
        let mut mesh: *mut TfacMesh = ptr::null_mut();
        assert_eq!(tfac_mesh_graded(1.0, 4, 2.0, &mut mesh), TfacStatus::Ok);
        let mut n = 0usize;
        assert_eq!(tfac_mesh_n_steps(mesh, &mut n), TfacStatus::Ok);
        assert_eq!(n, 4);
        let mut t = 0.0f64;
        assert_eq!(tfac_mesh_node(mesh, 2, &mut t), TfacStatus::Ok);
        assert_eq!(t, 0.25);
        assert_eq!(
            tfac_mesh_node(mesh, 9, &mut t),
            TfacStatus::InvalidArgument
        );
        assert!(last_error().contains("beyond"));
        tfac_mesh_free(mesh);

        // invalid parameters surface as status codes with detail
        let mut bad: *mut TfacMesh = ptr::null_mut();
        assert_eq!(
            tfac_mesh_graded(1.0, 4, 0.5, &mut bad),
            TfacStatus::InvalidArgument
        );
        assert!(last_error().contains("gamma"));
        assert_eq!(
            tfac_mesh_n_steps(ptr::null(), &mut n),
            TfacStatus::NullPointer
        );
    }
}

#[test]
fn soe_build_read_certify() {
    unsafe {
        let mut soe: *mut TfacSoe = ptr::null_mut();
        assert_eq!(
            tfac_soe_build(0.5, 1e-10, 1e-4, 1.0, &mut soe),
            TfacStatus::Ok
        );
        let mut nq = 0usize;
        assert_eq!(tfac_soe_n_modes(soe, &mut nq), TfacStatus::Ok);
        assert!(nq > 0 && nq <= 512);
        let mut dev = f64::NAN;
        assert_eq!(tfac_soe_max_deviation(soe, &mut dev), TfacStatus::Ok);
        assert!(dev <= 1e-10);
        let mut thetas = vec![0.0; nq];
        let mut weights = vec![0.0; nq];
        assert_eq!(
            tfac_soe_modes(soe, thetas.as_mut_ptr(), weights.as_mut_ptr(), nq),
            TfacStatus::Ok
        );
        assert!(thetas.iter().all(|&t| t > 0.0));
        assert!(weights.iter().all(|&w| w > 0.0));
        // wrong buffer size is rejected
        assert_eq!(
            tfac_soe_modes(soe, thetas.as_mut_ptr(), weights.as_mut_ptr(), nq + 1),
            TfacStatus::InvalidArgument
        );
        let mut certified = f64::NAN;
        assert_eq!(tfac_soe_certify(soe, 2000, &mut certified), TfacStatus::Ok);
        assert!(certified <= 1e-10);
        tfac_soe_free(soe);

        let mut fail: *mut TfacSoe = ptr::null_mut();
        assert_eq!(
            tfac_soe_build(1.5, 1e-10, 1e-4, 1.0, &mut fail),
            TfacStatus::InvalidArgument
        );
    }
}

#[test]
fn config_driven_run_round_trip() {
    let config = CString::new(
        "experiment = bubbles\ngrid.M = 16\nmesh.N0 = 8\nmesh.T = 0.5\nalpha = 0.7\n",
    )
    .unwrap();
    let preset = CString::new("bubbles").unwrap();
    unsafe {
        let mut run: *mut TfacRun = ptr::null_mut();
        assert_eq!(
            tfac_run_config(config.as_ptr(), preset.as_ptr(), &mut run),
            TfacStatus::Ok
        );
        let mut n = 0usize;
        assert_eq!(tfac_run_n_records(run, &mut n), TfacStatus::Ok);
        assert!(n > 8);
        let mut rec = TfacRecord {
            level: 0,
            t: 0.0,
            tau: 0.0,
            unorm: 0.0,
            energy: 0.0,
            iters: 0,
            change_inf: 0.0,
        };
        assert_eq!(tfac_run_record(run, n - 1, &mut rec), TfacStatus::Ok);
        assert!((rec.t - 0.5).abs() < 1e-12);
        assert!(rec.unorm <= 1.0 + 1e-12);
        let (mut m1, mut m2) = (0usize, 0usize);
        assert_eq!(tfac_run_field_dims(run, &mut m1, &mut m2), TfacStatus::Ok);
        assert_eq!((m1, m2), (16, 16));
        let mut field = vec![0.0f64; m1 * m2];
        assert_eq!(
            tfac_run_field(run, field.as_mut_ptr(), field.len()),
            TfacStatus::Ok
        );
        assert!(field.iter().all(|v| v.is_finite()));
        tfac_run_free(run);

        // unknown config keys fail with detail
        let bad = CString::new("nope = 1\n").unwrap();
        let mut run2: *mut TfacRun = ptr::null_mut();
        assert_eq!(
            tfac_run_config(bad.as_ptr(), preset.as_ptr(), &mut run2),
            TfacStatus::InvalidArgument
        );
        assert!(last_error().contains("nope"));
    }
}
