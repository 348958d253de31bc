use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use rfsm_ffi::*;

fn last_error() -> String {
    let p = rfsm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn partition_handle() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(rfsm_partition_new(2, 32, &mut p), RfsmStatus::Ok);
        let mut n = 0;
        assert_eq!(rfsm_partition_len(p, &mut n), RfsmStatus::Ok);
        assert_eq!(n, 32);
        let mut total = 0.0;
        for k in 0..n {
            let mut a = 0.0;
            assert_eq!(rfsm_partition_cell_area(p, k, &mut a), RfsmStatus::Ok);
            total += a;
        }
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
        let north = [0.0, 0.0, 1.0];
        let mut k = usize::MAX;
        assert_eq!(rfsm_partition_locate(p, north.as_ptr(), 3, &mut k), RfsmStatus::Ok);
        assert_eq!(k, 0);
        assert_eq!(rfsm_partition_locate(p, north.as_ptr(), 2, &mut k), RfsmStatus::DimensionMismatch);
        assert_eq!(rfsm_partition_cell_area(p, 32, &mut total), RfsmStatus::InvalidArgument);
        rfsm_partition_free(p);
        rfsm_partition_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_codes_with_messages() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(rfsm_partition_new(2, 1, &mut p), RfsmStatus::InvalidArgument);
        assert!(last_error().contains("N >= 2"));
        assert_eq!(rfsm_partition_len(ptr::null(), &mut 0), RfsmStatus::NullPointer);
        assert!(last_error().contains("NULL"));
        let mut cfg = ptr::null_mut();
        let bad = CString::new("no_such_experiment").unwrap();
        assert_eq!(rfsm_config_preset(bad.as_ptr(), 1, &mut cfg), RfsmStatus::InvalidArgument);
        assert!(cfg.is_null());
        let mut out = 0.0;
        assert_eq!(rfsm_mean_resultant_length(3, -1.0, &mut out), RfsmStatus::InvalidArgument);
    }
}

#[test]
fn closed_form_constants() {
    unsafe {
        let s = [0.125, 0.125];
        let (mut r, mut y, mut ferro) = (0.0, [0.0; 2], false);
        assert_eq!(
            rfsm_classify_regime(2, 8.0, RfsmScaling::Unit, s.as_ptr(), &mut r, y.as_mut_ptr(), &mut ferro),
            RfsmStatus::Ok
        );
        assert!(ferro);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((y[0] - 0.125f64.sqrt()).abs() < 1e-15);
        // d = 1, beta = 4, scaled: r*^2 = 1 - 1/4
        let s1 = [1.0];
        let mut y1 = [0.0];
        rfsm_classify_regime(1, 4.0, RfsmScaling::InverseSqrtVolume, s1.as_ptr(), &mut r, y1.as_mut_ptr(), &mut ferro);
        assert!((r * r - 0.75).abs() < 1e-15 && y1[0] == 0.0);
        let mut a = 0.0;
        assert_eq!(rfsm_mean_resultant_length(3, 2.0, &mut a), RfsmStatus::Ok);
        // coth(2) - 1/2
        assert!((a - (1.0 / 2.0f64.tanh() - 0.5)).abs() < 1e-12);
        // isotropic covariance gives the uniform density 1/(2π) on S¹
        let cov = [0.3, 0.0, 0.0, 0.3];
        let w = [0.6, 0.8];
        assert_eq!(rfsm_aw_density(2, cov.as_ptr(), w.as_ptr(), &mut a), RfsmStatus::Ok);
        assert!((a - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }
}

#[test]
fn config_strings_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().join("run").to_str().unwrap()).unwrap();
    unsafe {
        let kind = CString::new("partition_check").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(rfsm_config_load(kind.as_ptr(), ptr::null(), 5, out.as_ptr(), &mut cfg), RfsmStatus::Ok);
        assert_eq!(rfsm_config_set_workers(cfg, 2), RfsmStatus::Ok);
        assert_eq!(rfsm_config_validate(cfg), RfsmStatus::Ok);

        let mut len = 0;
        let mut small = [0 as std::ffi::c_char; 4];
        assert_eq!(rfsm_config_to_json(cfg, small.as_mut_ptr(), small.len(), &mut len), RfsmStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; len];
        assert_eq!(rfsm_config_to_json(cfg, buf.as_mut_ptr(), len, ptr::null_mut()), RfsmStatus::Ok);
        let json = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(json.contains("\"partition_check\"") && json.contains("\"workers\":2"));

        let mut m = ptr::null_mut();
        assert_eq!(rfsm_run(cfg, &mut m), RfsmStatus::Ok);
        let mut passed = false;
        assert_eq!(rfsm_manifest_verify(m, &mut passed), RfsmStatus::Ok);
        assert!(passed);
        let mut count = 0;
        rfsm_manifest_record_count(m, &mut count);
        assert_eq!(count, 2);
        let mut name = [0 as std::ffi::c_char; 64];
        rfsm_manifest_record_metric(m, 0, name.as_mut_ptr(), 64, ptr::null_mut());
        assert_eq!(CStr::from_ptr(name.as_ptr()).to_str().unwrap(), "equal_area_max_dev");
        let mut rec = RfsmRecord::default();
        assert_eq!(rfsm_manifest_record(m, 0, &mut rec), RfsmStatus::Ok);
        assert!(rec.pass && rec.value <= 1e-10);
        assert_eq!(rfsm_manifest_record(m, 2, &mut rec), RfsmStatus::InvalidArgument);
        rfsm_manifest_free(m);

        // reload from the directory, then tamper with a result file
        let mut m2 = ptr::null_mut();
        assert_eq!(rfsm_manifest_load(out.as_ptr(), &mut m2), RfsmStatus::Ok);
        std::fs::write(dir.path().join("run/partition_8.json"), "{}").unwrap();
        rfsm_manifest_verify(m2, &mut passed);
        assert!(!passed);
        rfsm_manifest_free(m2);
        rfsm_config_free(cfg);
    }
}

#[test]
fn failed_stage_still_returns_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("ns.toml");
    // paramagnetic temperature: the Gibbs validation stage cannot define a direction
    std::fs::write(&toml, "[model]\nd = 2\nbeta = 1.0\nscaling = \"inverse_sqrt_volume\"\n[sizes]\nhorizon = 400\nvolumes = 2\npaths = 4\nsamples = 20\nbrownian_steps = 1000\ncells = 8\nwindow = 4\n").unwrap();
    let (kind, path, out) = (
        CString::new("metastate_ns").unwrap(),
        CString::new(toml.to_str().unwrap()).unwrap(),
        CString::new(dir.path().join("run").to_str().unwrap()).unwrap(),
    );
    unsafe {
        let mut cfg = ptr::null_mut();
        let st = rfsm_config_load(kind.as_ptr(), path.as_ptr(), 9, out.as_ptr(), &mut cfg);
        assert_eq!(st, RfsmStatus::Ok, "{}", last_error());
        let mut m = ptr::null_mut();
        assert_eq!(rfsm_run(cfg, &mut m), RfsmStatus::StageFailed);
        assert!(last_error().contains("gibbs_proxy"));
        assert!(!m.is_null());
        let mut passed = true;
        rfsm_manifest_verify(m, &mut passed);
        assert!(!passed);
        rfsm_manifest_free(m);
        rfsm_config_free(cfg);
    }
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/ffi-<hash> -> target/<profile>/librfsm_ffi.a
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("librfsm_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(crate_dir.join("include/rfsm.h")).unwrap();
    for f in ["rfsm_run", "rfsm_partition_new", "rfsm_last_error", "RFSM_STATUS_STAGE_FAILED", "typedef struct RfsmConfig RfsmConfig"] {
        assert!(header.contains(f), "header lacks {f}");
    }
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping C link check");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping C link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-D_DEFAULT_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).arg(dir.path().join("run")).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("PASS equal_area_max_dev"));
}
