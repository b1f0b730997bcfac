//! Exercises the C ABI end to end from Rust: handle lifecycles, error
//! codes, the error-message slot, file round-trips, and the JSON
//! experiment entry point.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use sqg_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let needed = unsafe { sqg_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(needed >= 1);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_a_nonempty_c_string() {
    let v = unsafe { CStr::from_ptr(sqg_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn grid_and_field_lifecycle() {
    unsafe {
        let mut grid: *mut SqgGrid = ptr::null_mut();
        assert_eq!(sqg_grid_new(64, 32.0, &mut grid), SqgStatus::Ok);
        let mut n = 0usize;
        assert_eq!(sqg_grid_size(grid, &mut n), SqgStatus::Ok);
        assert_eq!(n, 64);

        let mut field: *mut SqgField = ptr::null_mut();
        assert_eq!(
            sqg_field_gaussian(grid, 0.0, 0.0, 1.5, 1.0, 0.3, &mut field),
            SqgStatus::Ok
        );
        let mut fn_ = 0usize;
        assert_eq!(sqg_field_size(field, &mut fn_), SqgStatus::Ok);
        assert_eq!(fn_, 64);

        let mut norm = 0.0f64;
        assert_eq!(sqg_field_lp_norm(field, 2.0, &mut norm), SqgStatus::Ok);
        assert!(norm > 0.0);
        let mut sup = 0.0f64;
        assert_eq!(
            sqg_field_lp_norm(field, f64::INFINITY, &mut sup),
            SqgStatus::Ok
        );
        // unit-mass bump: peak value is 1 / (2 pi sigma_x sigma_y)
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 1.5 * 1.0);
        assert!((sup - peak).abs() < 1e-12, "sup {sup} vs peak {peak}");

        // too-small buffer is refused, exact buffer succeeds
        let mut tiny = [0.0f64; 4];
        assert_eq!(
            sqg_field_values(field, tiny.as_mut_ptr(), tiny.len()),
            SqgStatus::BufferTooSmall
        );
        let mut values = vec![0.0f64; 64 * 64];
        assert_eq!(
            sqg_field_values(field, values.as_mut_ptr(), values.len()),
            SqgStatus::Ok
        );
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - sup).abs() < 1e-15);

        sqg_field_free(field);
        sqg_grid_free(grid);
    }
}

#[test]
fn invalid_arguments_set_codes_and_messages() {
    unsafe {
        let mut grid: *mut SqgGrid = ptr::null_mut();
        // not a power of two
        assert_eq!(
            sqg_grid_new(65, 32.0, &mut grid),
            SqgStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());
        // null out-pointer
        assert_eq!(
            sqg_grid_new(64, 32.0, ptr::null_mut()),
            SqgStatus::NullPointer
        );

        assert_eq!(sqg_grid_new(64, 32.0, &mut grid), SqgStatus::Ok);
        let mut field: *mut SqgField = ptr::null_mut();
        assert_eq!(
            sqg_field_gaussian(grid, 0.0, 0.0, 1.0, 1.0, 0.0, &mut field),
            SqgStatus::Ok
        );

        let mut out: *mut SqgField = ptr::null_mut();
        // dissipation order outside [1, 2]
        assert_eq!(
            sqg_heat_kernel(grid, 1.0, 3.0, &mut out),
            SqgStatus::InvalidArgument
        );
        let msg = last_error();
        assert!(msg.contains('3') || !msg.is_empty(), "message: {msg}");

        let mut norm = 0.0;
        assert_eq!(
            sqg_field_lp_norm(field, 0.5, &mut norm),
            SqgStatus::InvalidArgument
        );

        // a success clears the error slot
        assert_eq!(sqg_field_lp_norm(field, 2.0, &mut norm), SqgStatus::Ok);
        assert_eq!(last_error(), "");

        sqg_field_free(field);
        sqg_grid_free(grid);
    }
}

#[test]
fn dump_load_round_trip_preserves_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("snapshot.sqg").to_str().unwrap().to_owned()).unwrap();
    unsafe {
        let mut grid: *mut SqgGrid = ptr::null_mut();
        assert_eq!(sqg_grid_new(32, 16.0, &mut grid), SqgStatus::Ok);
        let mut field: *mut SqgField = ptr::null_mut();
        assert_eq!(
            sqg_field_gaussian(grid, 1.0, -0.5, 2.0, 1.0, 0.7, &mut field),
            SqgStatus::Ok
        );
        assert_eq!(
            sqg_field_dump(field, 2.5, 1.5, path.as_ptr()),
            SqgStatus::Ok
        );

        let mut loaded: *mut SqgField = ptr::null_mut();
        let (mut t, mut alpha) = (0.0f64, 0.0f64);
        assert_eq!(
            sqg_field_load(path.as_ptr(), &mut loaded, &mut t, &mut alpha),
            SqgStatus::Ok
        );
        assert_eq!(t, 2.5);
        assert_eq!(alpha, 1.5);

        let mut a = vec![0.0f64; 32 * 32];
        let mut b = vec![0.0f64; 32 * 32];
        assert_eq!(
            sqg_field_values(field, a.as_mut_ptr(), a.len()),
            SqgStatus::Ok
        );
        assert_eq!(
            sqg_field_values(loaded, b.as_mut_ptr(), b.len()),
            SqgStatus::Ok
        );
        assert_eq!(a, b, "snapshot round-trip must be bit-exact");

        // loading a missing file reports an I/O failure
        let missing = CString::new(dir.path().join("nope.sqg").to_str().unwrap()).unwrap();
        let mut ptr2: *mut SqgField = ptr::null_mut();
        assert_eq!(
            sqg_field_load(
                missing.as_ptr(),
                &mut ptr2,
                ptr::null_mut(),
                ptr::null_mut()
            ),
            SqgStatus::IoFailure
        );

        sqg_field_free(loaded);
        sqg_field_free(field);
        sqg_grid_free(grid);
    }
}

#[test]
fn evolution_and_correction_through_the_boundary() {
    unsafe {
        let mut grid: *mut SqgGrid = ptr::null_mut();
        assert_eq!(sqg_grid_new(64, 32.0, &mut grid), SqgStatus::Ok);
        let mut field: *mut SqgField = ptr::null_mut();
        assert_eq!(
            sqg_field_gaussian(grid, 0.0, 0.0, 2.0, 1.0, 0.0, &mut field),
            SqgStatus::Ok
        );

        let mut before = 0.0;
        assert_eq!(sqg_field_lp_norm(field, 2.0, &mut before), SqgStatus::Ok);

        let mut evolved: *mut SqgField = ptr::null_mut();
        assert_eq!(sqg_evolve(field, 2.0, 1.0, &mut evolved), SqgStatus::Ok);
        let mut after = 0.0;
        assert_eq!(sqg_field_lp_norm(evolved, 2.0, &mut after), SqgStatus::Ok);
        assert!(after < before, "dissipation must shrink the L2 norm");

        let mut jnorm = 0.0;
        assert_eq!(
            sqg_correction_norm(field, 2.0, 2.0, 16, &mut jnorm),
            SqgStatus::Ok
        );
        assert!(jnorm.is_finite() && jnorm >= 0.0);

        sqg_field_free(evolved);
        sqg_field_free(field);
        sqg_grid_free(grid);
    }
}

#[test]
fn json_experiment_runs_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"{{
          "experiment": "kernel-scaling",
          "grid_n": 64, "grid_L": 64.0,
          "t_min": 2.0, "t_max": 20.0, "samples": 5,
          "p_list": [2],
          "out_dir": {:?}
        }}"#,
        dir.path().join("out").to_str().unwrap()
    );
    let config = CString::new(config).unwrap();
    unsafe {
        let mut record: *mut c_char = ptr::null_mut();
        assert_eq!(
            sqg_experiment_run_json(config.as_ptr(), &mut record),
            SqgStatus::Ok
        );
        let text = CStr::from_ptr(record).to_str().unwrap().to_owned();
        sqg_string_free(record);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["experiment"], serde_json::json!("kernel-scaling"));
        assert_eq!(parsed["all_passed"], serde_json::json!(true));
        assert!(dir.path().join("out").join("kernel-scaling.csv").exists());

        // malformed configuration is an argument error
        let bad = CString::new("{ \"experiment\": \"kernel-scaling\", \"junk\": 1 }").unwrap();
        let mut record2: *mut c_char = ptr::null_mut();
        assert_eq!(
            sqg_experiment_run_json(bad.as_ptr(), &mut record2),
            SqgStatus::InvalidArgument
        );
    }
}
