use std::ffi::{CStr, CString};
use std::ptr;

use varlab_ffi::*;

fn last_error() -> String {
    let p = varlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn hvar_and_jumps_match_known_values() {
    let path = [0.0, 1.0, 0.0, 1.0];
    let mut v = 0.0;
    assert_eq!(unsafe { varlab_hvar(path.as_ptr(), 4, 2.0, &mut v) }, VarlabStatus::Ok);
    assert!((v - 3f64.sqrt()).abs() < 1e-15);
    let mut n = 0usize;
    assert_eq!(unsafe { varlab_jump_count(path.as_ptr(), 4, 0.5, &mut n) }, VarlabStatus::Ok);
    assert_eq!(n, 3);
}

#[test]
fn field_lifecycle_and_cond_expect() {
    let vals: Vec<f64> = (1..=8).map(f64::from).collect();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { varlab_field_new(1, 3, vals.as_ptr(), 8, &mut f) }, VarlabStatus::Ok);
    assert_eq!(unsafe { varlab_field_len(f) }, 8);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { varlab_cond_expect(f, 2, &mut e) }, VarlabStatus::Ok);
    let mut out = [0.0; 8];
    assert_eq!(unsafe { varlab_field_values(e, out.as_mut_ptr(), 8) }, VarlabStatus::Ok);
    assert_eq!(out, [2.5, 2.5, 2.5, 2.5, 6.5, 6.5, 6.5, 6.5]);
    let mut short = [0.0; 4];
    assert_eq!(unsafe { varlab_field_values(e, short.as_mut_ptr(), 4) }, VarlabStatus::InvalidArgument);
    unsafe {
        varlab_field_free(e);
        varlab_field_free(f);
        varlab_field_free(ptr::null_mut());
    }
}

#[test]
fn square_function_of_constant_vanishes() {
    let vals = vec![3.0; 64];
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { varlab_field_new(1, 6, vals.as_ptr(), 64, &mut f) }, VarlabStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { varlab_square_function(f, 0, 2, 4, VarlabKernel::Ball, &mut s) }, VarlabStatus::Ok);
    let mut out = vec![1.0; 64];
    assert_eq!(unsafe { varlab_field_values(s, out.as_mut_ptr(), 64) }, VarlabStatus::Ok);
    assert!(out.iter().all(|v| v.abs() < 1e-12));
    unsafe {
        varlab_field_free(s);
        varlab_field_free(f);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut f = ptr::null_mut();
    let vals = [1.0; 3];
    assert_eq!(unsafe { varlab_field_new(3, 4, vals.as_ptr(), 3, &mut f) }, VarlabStatus::InvalidArgument);
    assert!(last_error().contains("dimension"));
    assert!(f.is_null());
    assert_eq!(unsafe { varlab_field_new(1, 2, vals.as_ptr(), 3, &mut f) }, VarlabStatus::InvalidArgument);
    assert_eq!(unsafe { varlab_hvar(ptr::null(), 3, 2.0, ptr::null_mut()) }, VarlabStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { varlab_hvar(ptr::null(), 3, 2.0, &mut v) }, VarlabStatus::NullPointer);
    assert_eq!(unsafe { varlab_hvar(vals.as_ptr(), 3, 0.5, &mut v) }, VarlabStatus::InvalidArgument);
    // a successful call clears the message
    assert_eq!(unsafe { varlab_hvar(vals.as_ptr(), 3, 2.0, &mut v) }, VarlabStatus::Ok);
    assert!(varlab_last_error().is_null());
}

#[test]
fn run_experiment_returns_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "experiment": "verify_square_strong",
        "grid": { "dim": 1, "log_side": 8 },
        "weight": { "kind": "flat" },
        "ensemble": { "count": 4 },
        "seed": 3,
        "output_dir": dir.path(),
    });
    let c = CString::new(cfg.to_string()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { varlab_run_experiment(c.as_ptr(), true, &mut out) }, VarlabStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(out) }.to_str().unwrap()).unwrap();
    unsafe { varlab_string_free(out) };
    assert_eq!(report["name"], "verify_square_strong");
    assert_eq!(report["trials"].as_array().unwrap().len(), 4);
    for name in ["report.json", "summary.csv", "plotdata.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn run_experiment_rejects_bad_config() {
    let c = CString::new(r#"{"experiment": "verify_square_strong", "grid": {"dim": 1, "log_side": 8}, "exponents": {"p": 1.0}}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { varlab_run_experiment(c.as_ptr(), false, &mut out) }, VarlabStatus::ConfigError);
    assert!(out.is_null());
    assert!(last_error().contains("1 < p"));
    let c = CString::new(r#"{"experiment": "nope", "grid": {"dim": 1, "log_side": 8}, "bogus": 1}"#).unwrap();
    assert_eq!(unsafe { varlab_run_experiment(c.as_ptr(), false, &mut out) }, VarlabStatus::ConfigError);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(varlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles the C example against the generated header and static library.
#[test]
fn c_program_links_against_static_library() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libvarlab_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("hvar 1.7320508075688772 jumps 3 e0 1.5 e7 7.5"), "{text}");
}
