//! C ABI over `rfsm`.
//!
//! Objects cross the boundary as opaque handles created by `rfsm_*_new` /
//! `rfsm_*_load` and released by the matching `rfsm_*_free`. Every fallible
//! call returns an [`RfsmStatus`]; on failure the message is available from
//! [`rfsm_last_error`] on the same thread until the next failing call.
//! Panics never unwind into C: they are reported as `RFSM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rfsm::experiment_harness::{
    run_experiment, verify_in, ExperimentConfig, ExperimentKind, Overrides, RunManifest, RunStatus,
};
use rfsm::measure_tools::{aw_density, eq_partition, SpherePartition};
use rfsm::model_core::{classify_regime, FieldScaling, ModelParams};
use rfsm::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Point outside its domain, degenerate disorder, paramagnetic direction, ...
    Domain = 4,
    NoConvergence = 5,
    Io = 6,
    Format = 7,
    /// An experiment stage failed; the run directory holds partial results.
    StageFailed = 8,
    /// A string did not fit; the required size (with NUL) was written to `len`.
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfsmScaling {
    Unit = 0,
    InverseSqrtVolume = 1,
}

/// Numeric part of one acceptance record.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RfsmRecord {
    pub value: f64,
    pub comparator: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// An experiment configuration.
pub struct RfsmConfig(ExperimentConfig);

/// A finished (or failed) run, together with its output directory.
pub struct RfsmManifest {
    manifest: RunManifest,
    dir: PathBuf,
}

/// An equal-area partition of S¹ or S².
pub struct RfsmPartition(SpherePartition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(RfsmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::InvalidCovariance(_) => RfsmStatus::InvalidArgument,
            Error::DimensionMismatch(_) => RfsmStatus::DimensionMismatch,
            Error::NoConvergence { .. } | Error::SamplerNotConverged { .. } | Error::QuadratureTooCoarse { .. } => {
                RfsmStatus::NoConvergence
            }
            Error::Stage { .. } => RfsmStatus::StageFailed,
            Error::Io { .. } => RfsmStatus::Io,
            Error::Format(_) => RfsmStatus::Format,
            _ => RfsmStatus::Domain,
        };
        Fail(code, e.to_string())
    }
}

fn fail(code: RfsmStatus, msg: impl Into<String>) -> Fail {
    Fail(code, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RfsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfsmStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            RfsmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(RfsmStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(RfsmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RfsmStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(RfsmStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(RfsmStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(RfsmStatus::NullPointer, format!("{what} is NULL")));
    }
    out.write(v);
    Ok(())
}

/// Copies `s` NUL-terminated into `buf`; `len` receives the size needed.
unsafe fn put_str(s: &str, buf: *mut c_char, cap: usize, len: *mut usize) -> Result<(), Fail> {
    let need = s.len() + 1;
    if !len.is_null() {
        len.write(need);
    }
    if need > cap || buf.is_null() {
        return Err(fail(RfsmStatus::BufferTooSmall, format!("string needs {need} bytes, buffer has {cap}")));
    }
    std::ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

fn kind_arg(name: &str) -> Result<ExperimentKind, Fail> {
    ExperimentKind::parse(name).ok_or_else(|| fail(RfsmStatus::InvalidArgument, format!("unknown experiment `{name}`")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rfsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn rfsm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Default configuration of experiment `kind` (e.g. "partition_check").
///
/// # Safety
/// `kind` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_preset(kind: *const c_char, seed: u64, out: *mut *mut RfsmConfig) -> RfsmStatus {
    guard(|| {
        let kind = kind_arg(str_arg(kind, "kind")?)?;
        let cfg = ExperimentConfig::preset(kind, seed);
        put(out, Box::into_raw(Box::new(RfsmConfig(cfg))), "out")
    })
}

/// Preset overlaid by the TOML file at `path` (may be NULL), then by `seed`
/// and `out_dir` (may be NULL), exactly as the command line does.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_load(
    kind: *const c_char,
    path: *const c_char,
    seed: u64,
    out_dir: *const c_char,
    out: *mut *mut RfsmConfig,
) -> RfsmStatus {
    guard(|| {
        let kind = kind_arg(str_arg(kind, "kind")?)?;
        let file = opt_str_arg(path, "path")?.map(Path::new);
        let ov = Overrides { seed, out: opt_str_arg(out_dir, "out_dir")?.map(PathBuf::from), workers: None };
        let cfg = ExperimentConfig::load(kind, file, &ov)?;
        put(out, Box::into_raw(Box::new(RfsmConfig(cfg))), "out")
    })
}

/// # Safety
/// `cfg` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_set_out(cfg: *mut RfsmConfig, dir: *const c_char) -> RfsmStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.0.out = PathBuf::from(str_arg(dir, "dir")?);
        Ok(())
    })
}

/// `workers = 0` means the global thread pool.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_set_workers(cfg: *mut RfsmConfig, workers: usize) -> RfsmStatus {
    guard(|| {
        handle_mut(cfg, "cfg")?.0.workers = (workers > 0).then_some(workers);
        Ok(())
    })
}

/// Checks the configuration without running it.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_validate(cfg: *const RfsmConfig) -> RfsmStatus {
    guard(|| Ok(handle(cfg, "cfg")?.0.validate()?))
}

/// The configuration as JSON.
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `cap` bytes; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_to_json(
    cfg: *const RfsmConfig,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> RfsmStatus {
    guard(|| {
        let text = rfsm::experiment_harness::persist::to_json_string(&handle(cfg, "cfg")?.0, false)?;
        put_str(&text, buf, cap, len)
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfsm_config_free(cfg: *mut RfsmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the experiment, writing results under the configured directory.
///
/// If a stage fails the return value is `RFSM_STATUS_STAGE_FAILED`, and
/// `*out` still receives the manifest of the partial run when one was written
/// (otherwise NULL).
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_run(cfg: *const RfsmConfig, out: *mut *mut RfsmManifest) -> RfsmStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        put(out, std::ptr::null_mut(), "out")?;
        let dir = cfg.out.clone();
        match run_experiment(cfg) {
            Ok(manifest) => put(out, Box::into_raw(Box::new(RfsmManifest { manifest, dir })), "out"),
            Err(e) => {
                let path = dir.join(rfsm::experiment_harness::MANIFEST_FILE);
                if let Ok(manifest) = RunManifest::load(&path) {
                    if matches!(manifest.status, RunStatus::Failed { .. }) {
                        out.write(Box::into_raw(Box::new(RfsmManifest { manifest, dir })));
                    }
                }
                Err(e.into())
            }
        }
    })
}

/// Loads `manifest.json` (or the run directory containing it).
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_load(path: *const c_char, out: *mut *mut RfsmManifest) -> RfsmStatus {
    guard(|| {
        let mut p = PathBuf::from(str_arg(path, "path")?);
        if p.is_dir() {
            p = p.join(rfsm::experiment_harness::MANIFEST_FILE);
        }
        let manifest = RunManifest::load(&p)?;
        let dir = p.parent().unwrap_or(Path::new(".")).to_path_buf();
        put(out, Box::into_raw(Box::new(RfsmManifest { manifest, dir })), "out")
    })
}

/// # Safety
/// `m` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_record_count(m: *const RfsmManifest, out: *mut usize) -> RfsmStatus {
    guard(|| put(out, handle(m, "manifest")?.manifest.records.len(), "out"))
}

/// # Safety
/// `m` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_record(m: *const RfsmManifest, index: usize, out: *mut RfsmRecord) -> RfsmStatus {
    guard(|| {
        let records = &handle(m, "manifest")?.manifest.records;
        let r = records
            .get(index)
            .ok_or_else(|| fail(RfsmStatus::InvalidArgument, format!("record {index} of {}", records.len())))?;
        put(out, RfsmRecord { value: r.value, comparator: r.comparator, tolerance: r.tolerance, pass: r.pass }, "out")
    })
}

/// Name of record `index`.
///
/// # Safety
/// `m` must be a live handle; `buf` must hold `cap` bytes; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_record_metric(
    m: *const RfsmManifest,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    len: *mut usize,
) -> RfsmStatus {
    guard(|| {
        let records = &handle(m, "manifest")?.manifest.records;
        let r = records
            .get(index)
            .ok_or_else(|| fail(RfsmStatus::InvalidArgument, format!("record {index} of {}", records.len())))?;
        put_str(&r.metric, buf, cap, len)
    })
}

/// Re-judges the records and re-hashes the result files; `*passed` is true
/// only if every check passes and nothing is missing or altered.
///
/// # Safety
/// `m` must be a live handle; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_verify(m: *const RfsmManifest, passed: *mut bool) -> RfsmStatus {
    guard(|| {
        let m = handle(m, "manifest")?;
        put(passed, verify_in(&m.manifest, &m.dir).passed(), "passed")
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfsm_manifest_free(m: *mut RfsmManifest) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Equal-area partition of S^sphere_dim (1 or 2) into `n` cells.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_partition_new(sphere_dim: usize, n: usize, out: *mut *mut RfsmPartition) -> RfsmStatus {
    guard(|| {
        let p = eq_partition(sphere_dim, n)?;
        put(out, Box::into_raw(Box::new(RfsmPartition(p))), "out")
    })
}

/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_partition_len(p: *const RfsmPartition, out: *mut usize) -> RfsmStatus {
    guard(|| put(out, handle(p, "partition")?.0.len(), "out"))
}

/// Index of the cell containing the unit vector `point` (`len` = sphere_dim + 1).
///
/// # Safety
/// `p` must be a live handle; `point` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_partition_locate(
    p: *const RfsmPartition,
    point: *const f64,
    len: usize,
    out: *mut usize,
) -> RfsmStatus {
    guard(|| {
        let k = handle(p, "partition")?.0.locate(slice_arg(point, len, "point")?)?;
        put(out, k, "out")
    })
}

/// # Safety
/// `p` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_partition_cell_area(p: *const RfsmPartition, k: usize, out: *mut f64) -> RfsmStatus {
    guard(|| {
        let p = &handle(p, "partition")?.0;
        if k >= p.len() {
            return Err(fail(RfsmStatus::InvalidArgument, format!("cell {k} of {}", p.len())));
        }
        put(out, p.cell_area(k), "out")
    })
}

/// # Safety
/// `p` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfsm_partition_free(p: *mut RfsmPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Closed-form critical constants for field second moments `second_moments[0..d]`.
/// Writes r* and y* (d doubles); `*ferromagnetic` tells which regime applies.
///
/// # Safety
/// `second_moments` and `y_star` must hold `d` doubles; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_classify_regime(
    d: usize,
    beta: f64,
    scaling: RfsmScaling,
    second_moments: *const f64,
    r_star: *mut f64,
    y_star: *mut f64,
    ferromagnetic: *mut bool,
) -> RfsmStatus {
    guard(|| {
        let scaling = match scaling {
            RfsmScaling::Unit => FieldScaling::Unit,
            RfsmScaling::InverseSqrtVolume => FieldScaling::InverseSqrtVolume,
        };
        let p = ModelParams::new(d, beta, scaling)?;
        let reg = classify_regime(&p, slice_arg(second_moments, d, "second_moments")?);
        if y_star.is_null() {
            return Err(fail(RfsmStatus::NullPointer, "y_star is NULL"));
        }
        std::ptr::copy_nonoverlapping(reg.constants.y_star.as_ptr(), y_star, d);
        put(r_star, reg.constants.r_star, "r_star")?;
        put(ferromagnetic, reg.class == rfsm::model_core::RegimeClass::FerromagneticSphere, "ferromagnetic")
    })
}

/// Density on S^{d−1} of the direction of a centred Gaussian with covariance
/// `cov` (d×d, row-major), evaluated at the unit vector `omega`.
///
/// # Safety
/// `cov` must hold d² doubles, `omega` d doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_aw_density(d: usize, cov: *const f64, omega: *const f64, out: *mut f64) -> RfsmStatus {
    guard(|| {
        let v = aw_density(slice_arg(cov, d * d, "cov")?, slice_arg(omega, d, "omega")?)?;
        put(out, v, "out")
    })
}

/// Mean resultant length A_d(κ) of the tilted sphere law.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rfsm_mean_resultant_length(d: usize, kappa: f64, out: *mut f64) -> RfsmStatus {
    guard(|| {
        if d == 0 || !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(fail(RfsmStatus::InvalidArgument, format!("need d >= 1 and kappa >= 0, got d = {d}, kappa = {kappa}")));
        }
        put(out, rfsm::limit_states::mean_resultant_length(d, kappa), "out")
    })
}
