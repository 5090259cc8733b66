//! C ABI for fitting and evaluating counterfactual transport models.
//!
//! All functions return a [`CcxStatus`]; on any failure the thread-local
//! message from [`ccx_last_error_message`] describes what went wrong.
//! Handles are opaque and must be released with their matching free
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cocycles::causal::{impute, Target};
use cocycles::cmmd::{fit_candidate, LossSpec, SelectedModel, TrainConfig};
use cocycles::cocycle::CocycleModel;
use cocycles::data::Dataset;
use cocycles::harness::arch::{architecture, ConditionerFamily};
use cocycles::cmmd::Candidate;

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ShapeMismatch = 4,
    RuntimeError = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn ccx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Opaque fitted model handle.
pub struct CcxModel {
    inner: CocycleModel,
}

fn guard<F: FnOnce() -> CcxStatus>(f: F) -> CcxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic inside library call");
            CcxStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, CcxStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(CcxStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        CcxStatus::InvalidUtf8
    })
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], CcxStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        set_error("null array argument");
        return Err(CcxStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn ccx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Rebuilds a model from its persisted JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_from_json(
    json: *const c_char,
    out: *mut *mut CcxModel,
) -> CcxStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return CcxStatus::NullPointer;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match CocycleModel::from_json(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CcxModel { inner: m }));
                CcxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                CcxStatus::ParseError
            }
        }
    })
}

/// Serializes a model to JSON. Free the string with [`ccx_string_free`].
///
/// # Safety
/// `model` must be a live handle from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_to_json(
    model: *const CcxModel,
    out: *mut *mut c_char,
) -> CcxStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return CcxStatus::NullPointer;
        }
        match (*model).inner.to_json() {
            Ok(json) => {
                let c = CString::new(json).unwrap_or_default();
                *out = c.into_raw();
                CcxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                CcxStatus::RuntimeError
            }
        }
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_free(model: *mut CcxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Context dimension (treatment + covariates) of a model.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_context_dim(
    model: *const CcxModel,
    out: *mut usize,
) -> CcxStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return CcxStatus::NullPointer;
        }
        *out = (*model).inner.layout.context_dim();
        CcxStatus::Ok
    })
}

/// Outcome dimension of a model.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_outcome_dim(
    model: *const CcxModel,
    out: *mut usize,
) -> CcxStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return CcxStatus::NullPointer;
        }
        *out = (*model).inner.outcome_dim();
        CcxStatus::Ok
    })
}

/// Evaluates the transport `T[ctx_to, ctx_from](y)` for one outcome vector.
/// `ctx_to` and `ctx_from` hold `ctx_len` values; `y` and `out` hold `y_len`.
///
/// # Safety
/// All pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_transport(
    model: *const CcxModel,
    ctx_to: *const f64,
    ctx_from: *const f64,
    ctx_len: usize,
    y: *const f64,
    y_len: usize,
    out: *mut f64,
) -> CcxStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return CcxStatus::NullPointer;
        }
        let (to, from, y) = match (
            slice_arg(ctx_to, ctx_len),
            slice_arg(ctx_from, ctx_len),
            slice_arg(y, y_len),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => return CcxStatus::NullPointer,
        };
        match (*model).inner.transport(to, from, y) {
            Ok(v) => {
                ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
                CcxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                CcxStatus::ShapeMismatch
            }
        }
    })
}

/// Imputes counterfactual outcomes at a fixed treatment level for `n` units.
/// `x`, `z`, `y` are row-major with the stated column counts (`z` may be
/// null when `z_dim` is 0); `out` receives `n * y_dim` values.
///
/// # Safety
/// All pointers must reference arrays of the stated shapes.
#[no_mangle]
pub unsafe extern "C" fn ccx_model_impute_level(
    model: *const CcxModel,
    x: *const f64,
    x_dim: usize,
    z: *const f64,
    z_dim: usize,
    y: *const f64,
    y_dim: usize,
    n: usize,
    level: *const f64,
    out: *mut f64,
) -> CcxStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            set_error("null argument");
            return CcxStatus::NullPointer;
        }
        let (x, z, y, level) = match (
            slice_arg(x, n * x_dim),
            slice_arg(z, n * z_dim),
            slice_arg(y, n * y_dim),
            slice_arg(level, x_dim),
        ) {
            (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
            _ => return CcxStatus::NullPointer,
        };
        let data = match rows(x, x_dim, n)
            .and_then(|xr| Ok((xr, rows(z, z_dim, n)?, rows(y, y_dim, n)?)))
            .and_then(|(xr, zr, yr)| Dataset::new(zr, xr, yr).map_err(|e| e.to_string()))
        {
            Ok(d) => d,
            Err(msg) => {
                set_error(&msg);
                return CcxStatus::ShapeMismatch;
            }
        };
        match impute(&(*model).inner, &data, &[Target::Level { x: level.to_vec() }]) {
            Ok(panel) => {
                for (i, row) in panel.imputed[0].iter().enumerate() {
                    ptr::copy_nonoverlapping(row.as_ptr(), out.add(i * y_dim), y_dim);
                }
                CcxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                CcxStatus::RuntimeError
            }
        }
    })
}

fn rows(flat: &[f64], dim: usize, n: usize) -> Result<Vec<Vec<f64>>, String> {
    if dim == 0 {
        return Ok(Vec::new());
    }
    if flat.len() != n * dim {
        return Err(format!("expected {} values, got {}", n * dim, flat.len()));
    }
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

/// Training objective selector for [`ccx_fit_cmmd`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcxLoss {
    CmmdV = 0,
    CmmdU = 1,
}

/// Fits a cocycle of the named architecture (`linear`, `additive-mlp`,
/// `triangular-affine`, `masked-affine`, `spline`) on row-major data.
/// `discrete_levels` > 0 selects constant-table conditioners over that many
/// treatment levels; 0 means a continuous conditioner. A `batch_size` of 0
/// uses the default min(n, 128).
///
/// # Safety
/// Array pointers must reference arrays of the stated shapes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ccx_fit_cmmd(
    architecture_id: *const c_char,
    discrete_levels: usize,
    loss: CcxLoss,
    x: *const f64,
    x_dim: usize,
    z: *const f64,
    z_dim: usize,
    y: *const f64,
    y_dim: usize,
    n: usize,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut CcxModel,
) -> CcxStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return CcxStatus::NullPointer;
        }
        let arch = match read_str(architecture_id) {
            Ok(a) => a,
            Err(s) => return s,
        };
        let (x, z, y) = match (
            slice_arg(x, n * x_dim),
            slice_arg(z, n * z_dim),
            slice_arg(y, n * y_dim),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => return CcxStatus::NullPointer,
        };
        let family = if discrete_levels > 0 {
            ConditionerFamily::Discrete { levels: discrete_levels }
        } else {
            ConditionerFamily::Continuous
        };
        let built = (|| -> cocycles::Result<CocycleModel> {
            let data = Dataset::new(
                rows(z, z_dim, n).map_err(cocycles::CocycleError::InvalidConfig)?,
                rows(x, x_dim, n).map_err(cocycles::CocycleError::InvalidConfig)?,
                rows(y, y_dim, n).map_err(cocycles::CocycleError::InvalidConfig)?,
            )?;
            let spec = architecture(arch, y_dim, x_dim + z_dim, family)?;
            let cand = Candidate { id: arch.to_string(), spec, learning_rate: None };
            let cfg = TrainConfig {
                batch_size: (batch_size > 0).then_some(batch_size),
                epochs,
                learning_rate,
                seed,
            };
            let loss = match loss {
                CcxLoss::CmmdV => LossSpec::CmmdV,
                CcxLoss::CmmdU => LossSpec::CmmdU,
            };
            match fit_candidate(&cand, &data, loss, &cfg, seed)? {
                SelectedModel::Cocycle(m) => Ok(m),
                SelectedModel::Scm(s) => Ok(s.model),
            }
        })();
        match built {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CcxModel { inner: m }));
                CcxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                CcxStatus::RuntimeError
            }
        }
    })
}
