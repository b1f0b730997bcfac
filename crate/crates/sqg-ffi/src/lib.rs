//! C ABI over the sqg simulation and analysis library.
//!
//! Conventions:
//! - every function returns an [`SqgStatus`] code; `SQG_STATUS_OK` is zero;
//! - objects cross the boundary as opaque handles created by `*_new`-style
//!   constructors and released by the matching `*_free`;
//! - out-parameters are written only on success;
//! - on any failure a thread-local message is retained and can be copied
//!   out with [`sqg_last_error`];
//! - panics never unwind across the boundary; they surface as
//!   `SQG_STATUS_INTERNAL_PANIC`.
//!
//! # Safety
//!
//! Every `unsafe extern "C"` function shares one contract: pointer
//! arguments must be null or valid for the access implied by their type
//! (readable NUL-terminated strings, writable out-slots, buffers of the
//! stated capacity), and handle arguments must have been produced by this
//! library and not yet freed. Null handles and out-pointers are detected
//! and reported as `SQG_STATUS_NULL_POINTER`; dangling or foreign pointers
//! cannot be.

// The shared contract above covers every entry point; per-function
// `# Safety` sections would repeat it verbatim.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use sqg_core::analysis::lp_norm;
use sqg_core::asymptotics::nonlinear_correction_j;
use sqg_core::data::rotated_gaussian;
use sqg_core::harness::{dump_field, load_field, run, ExperimentConfig};
use sqg_core::kernel::{heat_kernel, AlphaParam};
use sqg_core::solver::{evolve, SolverConfig};
use sqg_core::spectral::{fft_forward, fft_inverse, Grid2D, PhysicalField};
use sqg_core::SqgError;

/// Status code returned by every library call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqgStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was outside its documented domain.
    InvalidArgument = 2,
    /// The computation could not meet its accuracy or stability contract.
    NumericsFailure = 3,
    /// A file could not be read, written, or parsed.
    IoFailure = 4,
    /// A caller-supplied buffer was too small.
    BufferTooSmall = 5,
    /// An internal invariant failed; this is a bug in the library.
    InternalPanic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).ok();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

fn status_of(err: &SqgError) -> SqgStatus {
    match err {
        SqgError::DomainError(_)
        | SqgError::ConfigInvalid(_)
        | SqgError::GridInvalid(_)
        | SqgError::ConeViolated(_)
        | SqgError::OutOfBand { .. }
        | SqgError::InsufficientSamples { .. }
        | SqgError::SingularPoint => SqgStatus::InvalidArgument,
        SqgError::Io(_) | SqgError::FormatError { .. } => SqgStatus::IoFailure,
        _ => SqgStatus::NumericsFailure,
    }
}

fn fail(err: SqgError) -> SqgStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn invalid(msg: &str) -> SqgStatus {
    set_error(msg);
    SqgStatus::InvalidArgument
}

/// Runs `body` with panic containment and error-slot bookkeeping.
fn guarded(body: impl FnOnce() -> SqgStatus) -> SqgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == SqgStatus::Ok {
                clear_error();
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            SqgStatus::InternalPanic
        }
    }
}

macro_rules! require_nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer: ", stringify!($ptr)));
            return SqgStatus::NullPointer;
        }
    };
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, SqgStatus> {
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(s),
        Err(_) => Err(invalid("string argument is not valid UTF-8")),
    }
}

fn parse_alpha(alpha: f64) -> Result<AlphaParam, SqgStatus> {
    AlphaParam::new(alpha).map_err(fail)
}

/// Periodic grid handle: `n x n` points on a square box.
pub struct SqgGrid {
    inner: Arc<Grid2D>,
}

/// Real scalar field sampled on a grid handle.
pub struct SqgField {
    phys: PhysicalField,
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the most recent error message for this thread into `buf`.
///
/// Returns the full length of the message including the trailing NUL. When
/// `buf` is null or `cap` is zero, nothing is copied and the required
/// length is returned; 1 means the slot is empty. The copy is truncated to
/// `cap - 1` characters and always NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sqg_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let msg = slot.as_deref().map(CStr::to_bytes).unwrap_or(b"");
        let needed = msg.len() + 1;
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        needed
    })
}

/// Creates a periodic grid with `n x n` points (`n` a power of two, at
/// least 16) on a square box of side `box_length`.
#[no_mangle]
pub unsafe extern "C" fn sqg_grid_new(
    n: usize,
    box_length: f64,
    out: *mut *mut SqgGrid,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(out);
        match Grid2D::new(n, box_length) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SqgGrid { inner }));
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a grid handle. Null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn sqg_grid_free(grid: *mut SqgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Writes the per-side point count of `grid` to `out_n`.
#[no_mangle]
pub unsafe extern "C" fn sqg_grid_size(grid: *const SqgGrid, out_n: *mut usize) -> SqgStatus {
    guarded(|| {
        require_nonnull!(grid);
        require_nonnull!(out_n);
        *out_n = (*grid).inner.n_points();
        SqgStatus::Ok
    })
}

/// Samples a rotated anisotropic Gaussian bump on `grid`.
///
/// `center_*` place the bump, `sigma_*` are the principal widths (both
/// positive), `angle` rotates the principal axes in radians.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_gaussian(
    grid: *const SqgGrid,
    center_x: f64,
    center_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    angle: f64,
    out: *mut *mut SqgField,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(grid);
        require_nonnull!(out);
        match rotated_gaussian(
            &(*grid).inner,
            (center_x, center_y),
            (sigma_x, sigma_y),
            angle,
        ) {
            Ok(phys) => {
                *out = Box::into_raw(Box::new(SqgField { phys }));
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a field handle. Null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_free(field: *mut SqgField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Writes the per-side point count of the field's grid to `out_n`; the
/// flattened sample count is its square.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_size(field: *const SqgField, out_n: *mut usize) -> SqgStatus {
    guarded(|| {
        require_nonnull!(field);
        require_nonnull!(out_n);
        *out_n = (*field).phys.grid().n_points();
        SqgStatus::Ok
    })
}

/// Copies the field samples, row-major, into `buf` (capacity `cap`
/// doubles). Fails with `SQG_STATUS_BUFFER_TOO_SMALL` when `cap` is less
/// than the flattened sample count.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_values(
    field: *const SqgField,
    buf: *mut f64,
    cap: usize,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(field);
        require_nonnull!(buf);
        let values = (*field).phys.values();
        if cap < values.len() {
            set_error(&format!(
                "buffer holds {cap} doubles but the field has {}",
                values.len()
            ));
            return SqgStatus::BufferTooSmall;
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        SqgStatus::Ok
    })
}

/// Writes the L^p norm of the field to `out_value`. `p` must be at least 1;
/// pass INFINITY for the sup norm.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_lp_norm(
    field: *const SqgField,
    p: f64,
    out_value: *mut f64,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(field);
        require_nonnull!(out_value);
        if p.is_nan() || p < 1.0 {
            return invalid("p must be at least 1 (or INFINITY)");
        }
        *out_value = lp_norm(&(*field).phys, p);
        SqgStatus::Ok
    })
}

/// Writes the field to `path` in the library's text snapshot format,
/// stamping it with time `t` and dissipation order `alpha`.
#[no_mangle]
pub unsafe extern "C" fn sqg_field_dump(
    field: *const SqgField,
    t: f64,
    alpha: f64,
    path: *const c_char,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(field);
        require_nonnull!(path);
        let path = match cstr_arg(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match dump_field(&(*field).phys, t, alpha, Path::new(path)) {
            Ok(()) => SqgStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Loads a field snapshot from `path`. On success writes a new handle to
/// `out` and the stamped time and dissipation order to `out_t` /
/// `out_alpha` (each may be null when the caller does not need it).
#[no_mangle]
pub unsafe extern "C" fn sqg_field_load(
    path: *const c_char,
    out: *mut *mut SqgField,
    out_t: *mut f64,
    out_alpha: *mut f64,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(path);
        require_nonnull!(out);
        let path = match cstr_arg(path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match load_field(Path::new(path)) {
            Ok((phys, t, alpha)) => {
                if !out_t.is_null() {
                    *out_t = t;
                }
                if !out_alpha.is_null() {
                    *out_alpha = alpha;
                }
                *out = Box::into_raw(Box::new(SqgField { phys }));
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Evaluates the dissipation kernel of order `alpha` at time `t > 0` on
/// `grid` and returns it as a new field handle.
#[no_mangle]
pub unsafe extern "C" fn sqg_heat_kernel(
    grid: *const SqgGrid,
    t: f64,
    alpha: f64,
    out: *mut *mut SqgField,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(grid);
        require_nonnull!(out);
        let a = match parse_alpha(alpha) {
            Ok(a) => a,
            Err(status) => return status,
        };
        match heat_kernel(t, a, &(*grid).inner) {
            Ok(snap) => {
                *out = Box::into_raw(Box::new(SqgField {
                    phys: snap.field().clone(),
                }));
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Advances `initial` under the dissipative transport dynamics of order
/// `alpha` to time `t > 0` (step size chosen automatically) and returns
/// the evolved field as a new handle.
#[no_mangle]
pub unsafe extern "C" fn sqg_evolve(
    initial: *const SqgField,
    alpha: f64,
    t: f64,
    out: *mut *mut SqgField,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(initial);
        require_nonnull!(out);
        let a = match parse_alpha(alpha) {
            Ok(a) => a,
            Err(status) => return status,
        };
        let theta0 = fft_forward(&(*initial).phys);
        let result = SolverConfig::auto_dt(a, t, &theta0)
            .and_then(|cfg| evolve(&theta0, &cfg, &[t]))
            .and_then(|traj| fft_inverse(&traj.samples()[0]));
        match result {
            Ok(phys) => {
                *out = Box::into_raw(Box::new(SqgField { phys }));
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes the L^2 norm of the leading nonlinear correction of the
/// large-time expansion, evaluated at time `t > 1`, to `out_value`.
/// `quad_nodes` Gauss points are used per integration panel (8 to 64;
/// 16 is a sound default for smooth data).
#[no_mangle]
pub unsafe extern "C" fn sqg_correction_norm(
    initial: *const SqgField,
    alpha: f64,
    t: f64,
    quad_nodes: usize,
    out_value: *mut f64,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(initial);
        require_nonnull!(out_value);
        let a = match parse_alpha(alpha) {
            Ok(a) => a,
            Err(status) => return status,
        };
        let theta0 = fft_forward(&(*initial).phys);
        match nonlinear_correction_j(&theta0, a, t, quad_nodes) {
            Ok(j) => {
                *out_value = j.l2_norm();
                SqgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs a full experiment described by a JSON configuration string (the
/// same schema the `sqg` command-line tool accepts), writing report
/// artifacts as configured. On success, stores a NUL-terminated JSON run
/// record in `*out_record`; release it with `sqg_string_free`.
///
/// Note: a completed run whose criteria fail still returns
/// `SQG_STATUS_OK`; inspect the `all_passed` element of the record.
#[no_mangle]
pub unsafe extern "C" fn sqg_experiment_run_json(
    config_json: *const c_char,
    out_record: *mut *mut c_char,
) -> SqgStatus {
    guarded(|| {
        require_nonnull!(config_json);
        require_nonnull!(out_record);
        let text = match cstr_arg(config_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = match ExperimentConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let record = match run(&config) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let json = match serde_json::to_string_pretty(&record) {
            Ok(j) => j,
            Err(e) => {
                set_error(&format!("record serialization failed: {e}"));
                return SqgStatus::InternalPanic;
            }
        };
        match CString::new(json) {
            Ok(c) => {
                *out_record = c.into_raw();
                SqgStatus::Ok
            }
            Err(_) => {
                set_error("record serialization produced an interior NUL");
                SqgStatus::InternalPanic
            }
        }
    })
}

/// Releases a string returned by this library. Null is accepted and
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn sqg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
