//! C ABI for the time-fractional Allen-Cahn solver.
//!
//! Objects cross the boundary as opaque handles created and released by the
//! paired `_new`/`_free` functions; every fallible call returns a [`TfacStatus`]
//! and writes results through out-pointers. The most recent error detail is
//! kept per thread and can be copied out with [`tfac_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tfac::cli::RunConfig;
use tfac::frackernel::soe::{build_soe, scan_max_deviation, SoeApprox};
use tfac::mesh::{concat_mesh, graded_mesh, random_tail_mesh, TimeMesh};
use tfac::schemes::{march, MarchOutput};
use tfac::Error;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ToleranceUnachievable = 3,
    PicardDiverged = 4,
    AssertionFailed = 5,
    NumericalError = 6,
    Panic = 7,
}

fn status_of(err: &Error) -> TfacStatus {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Io(_) => {
            TfacStatus::InvalidArgument
        }
        Error::ToleranceUnachievable { .. } => TfacStatus::ToleranceUnachievable,
        Error::PicardDiverged { .. } => TfacStatus::PicardDiverged,
        Error::AssumptionViolated(_) | Error::DegenerateOrder(_) => TfacStatus::AssertionFailed,
        Error::Overflow(_) | Error::NonPositiveShift(_) => TfacStatus::NumericalError,
    }
}

fn guard<T>(f: impl FnOnce() -> Result<T, TfacStatus>) -> Result<T, TfacStatus> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(_) => {
            set_error("internal panic crossed the FFI boundary");
            Err(TfacStatus::Panic)
        }
    }
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `cap`); returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn tfac_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

// ---------------------------------------------------------------------------
// time meshes

/// Opaque nonuniform time mesh.
pub struct TfacMesh(TimeMesh);

/// Graded mesh `t_k = T0 (k/N0)^gamma`.
///
/// # Safety
/// `out` must be a valid pointer; the result must be released with
/// [`tfac_mesh_free`].
#[no_mangle]
pub unsafe extern "C" fn tfac_mesh_graded(
    t0: f64,
    n0: usize,
    gamma: f64,
    out: *mut *mut TfacMesh,
) -> TfacStatus {
    if out.is_null() {
        return TfacStatus::NullPointer;
    }
    match guard(|| {
        graded_mesh(t0, n0, gamma).map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(TfacMesh(mesh)));
            TfacStatus::Ok
        }
        Err(s) => s,
    }
}

/// Graded head on `[0, T0]` plus a seeded random tail filling `[T0, T]`.
///
/// # Safety
/// `out` must be a valid pointer; the result must be released with
/// [`tfac_mesh_free`].
#[no_mangle]
pub unsafe extern "C" fn tfac_mesh_graded_random(
    t0: f64,
    t_final: f64,
    n0: usize,
    n1: usize,
    gamma: f64,
    seed: u64,
    out: *mut *mut TfacMesh,
) -> TfacStatus {
    if out.is_null() {
        return TfacStatus::NullPointer;
    }
    match guard(|| {
        let build = || -> tfac::Result<TimeMesh> {
            let head = graded_mesh(t0, n0, gamma)?;
            let tail = random_tail_mesh(t0, t_final, n1, seed)?;
            concat_mesh(&head, &tail)
        };
        build().map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }) {
        Ok(mesh) => {
            *out = Box::into_raw(Box::new(TfacMesh(mesh)));
            TfacStatus::Ok
        }
        Err(s) => s,
    }
}

/// Number of steps N.
///
/// # Safety
/// `mesh` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_mesh_n_steps(mesh: *const TfacMesh, out: *mut usize) -> TfacStatus {
    if mesh.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    *out = (*mesh).0.n_steps();
    TfacStatus::Ok
}

/// Node `t_k` for `0 <= k <= N`.
///
/// # Safety
/// `mesh` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_mesh_node(
    mesh: *const TfacMesh,
    k: usize,
    out: *mut f64,
) -> TfacStatus {
    if mesh.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    let m = &(*mesh).0;
    if k > m.n_steps() {
        set_error(format!("node index {k} beyond N = {}", m.n_steps()));
        return TfacStatus::InvalidArgument;
    }
    *out = m.node(k);
    TfacStatus::Ok
}

/// # Safety
/// `mesh` must come from a `tfac_mesh_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tfac_mesh_free(mesh: *mut TfacMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

// ---------------------------------------------------------------------------
// sum-of-exponentials kernel compression

/// Opaque SOE approximation of `omega_{1-alpha}` on `[dt, T]`.
pub struct TfacSoe(SoeApprox);

/// Builds the kernel compression; certified against the requested absolute
/// tolerance at construction.
///
/// # Safety
/// `out` must be a valid pointer; release with [`tfac_soe_free`].
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_build(
    alpha: f64,
    eps: f64,
    dt: f64,
    t_final: f64,
    out: *mut *mut TfacSoe,
) -> TfacStatus {
    if out.is_null() {
        return TfacStatus::NullPointer;
    }
    match guard(|| {
        build_soe(alpha, eps, dt, t_final).map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }) {
        Ok(soe) => {
            *out = Box::into_raw(Box::new(TfacSoe(soe)));
            TfacStatus::Ok
        }
        Err(s) => s,
    }
}

/// # Safety
/// `soe` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_n_modes(soe: *const TfacSoe, out: *mut usize) -> TfacStatus {
    if soe.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    *out = (*soe).0.n_modes();
    TfacStatus::Ok
}

/// Max deviation achieved on the construction scan grid.
///
/// # Safety
/// `soe` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_max_deviation(
    soe: *const TfacSoe,
    out: *mut f64,
) -> TfacStatus {
    if soe.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    *out = (*soe).0.max_deviation;
    TfacStatus::Ok
}

/// Copies the exponents and weights into caller buffers of length `len`
/// (which must equal the mode count).
///
/// # Safety
/// `thetas` and `weights` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_modes(
    soe: *const TfacSoe,
    thetas: *mut f64,
    weights: *mut f64,
    len: usize,
) -> TfacStatus {
    if soe.is_null() || thetas.is_null() || weights.is_null() {
        return TfacStatus::NullPointer;
    }
    let s = &(*soe).0;
    if len != s.n_modes() {
        set_error(format!("buffer length {len} != mode count {}", s.n_modes()));
        return TfacStatus::InvalidArgument;
    }
    ptr::copy_nonoverlapping(s.thetas.as_ptr(), thetas, len);
    ptr::copy_nonoverlapping(s.weights.as_ptr(), weights, len);
    TfacStatus::Ok
}

/// Re-certifies the deviation on an `npoints` log grid (extended-precision
/// scan) and writes the measured maximum.
///
/// # Safety
/// `soe` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_certify(
    soe: *const TfacSoe,
    npoints: usize,
    out: *mut f64,
) -> TfacStatus {
    if soe.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    if npoints < 2 {
        set_error("certification grid needs at least two points");
        return TfacStatus::InvalidArgument;
    }
    match guard(|| Ok(scan_max_deviation(&(*soe).0, npoints))) {
        Ok(dev) => {
            *out = dev;
            TfacStatus::Ok
        }
        Err(s) => s,
    }
}

/// # Safety
/// `soe` must come from [`tfac_soe_build`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tfac_soe_free(soe: *mut TfacSoe) {
    if !soe.is_null() {
        drop(Box::from_raw(soe));
    }
}

// ---------------------------------------------------------------------------
// complete runs driven by the run-config text format

/// Opaque finished run: per-level diagnostics plus the final field.
pub struct TfacRun(MarchOutput);

/// One per-level diagnostics record.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfacRecord {
    pub level: usize,
    pub t: f64,
    pub tau: f64,
    pub unorm: f64,
    pub energy: f64,
    pub iters: usize,
    pub change_inf: f64,
}

/// Parses the `key = value` run-config text (same format as the CLI), applies
/// it over the named experiment preset, marches the problem and returns the
/// finished run.
///
/// # Safety
/// `config_text` and `preset` must be NUL-terminated strings; `out` must be a
/// valid pointer; release with [`tfac_run_free`].
#[no_mangle]
pub unsafe extern "C" fn tfac_run_config(
    config_text: *const c_char,
    preset: *const c_char,
    out: *mut *mut TfacRun,
) -> TfacStatus {
    if config_text.is_null() || preset.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    let parse = |p: *const c_char| -> Result<&str, TfacStatus> {
        unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
            set_error("config text is not valid UTF-8");
            TfacStatus::InvalidArgument
        })
    };
    match guard(|| {
        let text = parse(config_text)?;
        let preset = parse(preset)?;
        let run = || -> tfac::Result<MarchOutput> {
            let cfg = RunConfig::load_str(text, preset)?;
            let sc = cfg.scheme_config()?;
            let stepping = cfg.stepping()?;
            let u0 = cfg.initial_field()?;
            march(&sc, &stepping, &u0, None, &cfg.snapshot_times, |_, _, _| {})
        };
        run().map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }) {
        Ok(output) => {
            *out = Box::into_raw(Box::new(TfacRun(output)));
            TfacStatus::Ok
        }
        Err(s) => s,
    }
}

/// # Safety
/// `run` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_run_n_records(run: *const TfacRun, out: *mut usize) -> TfacStatus {
    if run.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    *out = (*run).0.records.len();
    TfacStatus::Ok
}

/// # Safety
/// `run` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tfac_run_record(
    run: *const TfacRun,
    index: usize,
    out: *mut TfacRecord,
) -> TfacStatus {
    if run.is_null() || out.is_null() {
        return TfacStatus::NullPointer;
    }
    let records = &(*run).0.records;
    let Some(r) = records.get(index) else {
        set_error(format!("record {index} beyond {}", records.len()));
        return TfacStatus::InvalidArgument;
    };
    *out = TfacRecord {
        level: r.level,
        t: r.t,
        tau: r.tau,
        unorm: r.unorm,
        energy: r.energy,
        iters: r.iters,
        change_inf: r.change_inf,
    };
    TfacStatus::Ok
}

/// Grid extents of the final field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tfac_run_field_dims(
    run: *const TfacRun,
    m1: *mut usize,
    m2: *mut usize,
) -> TfacStatus {
    if run.is_null() || m1.is_null() || m2.is_null() {
        return TfacStatus::NullPointer;
    }
    let g = (*run).0.field.grid;
    *m1 = g.m1;
    *m2 = g.m2;
    TfacStatus::Ok
}

/// Copies the final field (row-major, j outer) into a caller buffer of length
/// `len = M1 * M2`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tfac_run_field(
    run: *const TfacRun,
    buf: *mut f64,
    len: usize,
) -> TfacStatus {
    if run.is_null() || buf.is_null() {
        return TfacStatus::NullPointer;
    }
    let values = (*run).0.field.values();
    if len != values.len() {
        set_error(format!("buffer length {len} != field size {}", values.len()));
        return TfacStatus::InvalidArgument;
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, len);
    TfacStatus::Ok
}

/// # Safety
/// `run` must come from [`tfac_run_config`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tfac_run_free(run: *mut TfacRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
