//! C ABI over the lanmsff engine.
//!
//! Conventions:
//! - Handles are opaque pointers created and destroyed by this library.
//!   A handle is confined to one thread.
//! - Every fallible call returns a [`LanmsffStatus`]; on failure a
//!   human-readable message is available from
//!   [`lanmsff_last_error_message`] until the next call on the same thread.
//! - Strings returned as `char*` are owned by the caller and must be
//!   released with [`lanmsff_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use lanmsff::error::Error;
use lanmsff::model::{audit_parameters, load_weights, save_weights, LanmsffConfig, Model};

/// Opaque model handle.
pub struct LanmsffModel {
    inner: Model,
}

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LanmsffStatus {
    Ok = 0,
    /// A pointer argument was null or an argument was structurally invalid.
    InvalidArgument = 1,
    /// The configuration violates an architecture constraint.
    InvalidConfig = 2,
    /// Malformed input data or weight file.
    DataError = 3,
    /// Filesystem failure.
    IoError = 4,
    /// Any other runtime failure.
    RuntimeError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(err: &Error) -> LanmsffStatus {
    match err {
        Error::InvalidConfig(_) => LanmsffStatus::InvalidConfig,
        Error::Io(_) => LanmsffStatus::IoError,
        Error::Data { .. }
        | Error::Json(_)
        | Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::ConfigHashMismatch { .. }
        | Error::TruncatedPayload(_)
        | Error::ChecksumMismatch { .. } => LanmsffStatus::DataError,
        _ => LanmsffStatus::RuntimeError,
    }
}

fn fail(err: Error) -> LanmsffStatus {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

fn invalid(msg: &str) -> LanmsffStatus {
    set_error(msg.to_string());
    LanmsffStatus::InvalidArgument
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(ptr: *const c_char) -> Result<Option<&'a str>, LanmsffStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Some(s)),
        Err(_) => Err(invalid("string argument is not valid UTF-8")),
    }
}

fn parse_config(json: Option<&str>) -> Result<LanmsffConfig, LanmsffStatus> {
    match json {
        None => Ok(LanmsffConfig::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| {
            set_error(format!("config JSON: {e}"));
            LanmsffStatus::InvalidConfig
        }),
    }
}

/// Version string of the library; static storage, do not free.
#[no_mangle]
pub extern "C" fn lanmsff_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last failure on this thread, or null. Valid until the next
/// library call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn lanmsff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned by a `lanmsff_*`
/// function documented as caller-owned, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a model. `config_json` is the canonical configuration document
/// (null for the published default architecture); `seed` drives weight
/// initialization. On success writes a handle to `out_model`.
///
/// # Safety
/// `config_json` must be null or a valid NUL-terminated string; `out_model`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_new(
    config_json: *const c_char,
    seed: u64,
    out_model: *mut *mut LanmsffModel,
) -> LanmsffStatus {
    clear_error();
    if out_model.is_null() {
        return invalid("out_model is null");
    }
    let config = match opt_str(config_json).and_then(parse_config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match Model::build(&config, seed) {
        Ok(model) => {
            *out_model = Box::into_raw(Box::new(LanmsffModel { inner: model }));
            LanmsffStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Loads weights saved by [`lanmsff_model_save`]. The configuration must
/// match the file's config hash.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `config_json` null or valid;
/// `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_load(
    path: *const c_char,
    config_json: *const c_char,
    out_model: *mut *mut LanmsffModel,
) -> LanmsffStatus {
    clear_error();
    if out_model.is_null() {
        return invalid("out_model is null");
    }
    let Ok(Some(path)) = opt_str(path) else {
        return invalid("path is null or not UTF-8");
    };
    let config = match opt_str(config_json).and_then(parse_config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match load_weights(&PathBuf::from(path), &config) {
        Ok(model) => {
            *out_model = Box::into_raw(Box::new(LanmsffModel { inner: model }));
            LanmsffStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Serializes the model's weights (32-bit floats, checksummed container).
///
/// # Safety
/// `model` must be a live handle from this library; `path` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_save(model: *const LanmsffModel, path: *const c_char) -> LanmsffStatus {
    clear_error();
    let Some(model) = model.as_ref() else {
        return invalid("model is null");
    };
    let Ok(Some(path)) = opt_str(path) else {
        return invalid("path is null or not UTF-8");
    };
    match save_weights(&model.inner, &PathBuf::from(path)) {
        Ok(()) => LanmsffStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Destroys a handle. Passing null is a no-op.
///
/// # Safety
/// `model` must be null or a live handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_free(model: *mut LanmsffModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of output classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_num_classes(model: *const LanmsffModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.num_classes)
}

/// Expected input edge length (images are square), or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_input_size(model: *const LanmsffModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.input_size)
}

/// Expected input channel count, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_input_channels(model: *const LanmsffModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.input_channels)
}

/// Parameter count; `trainable_only` excludes the frozen normalization
/// statistics.
///
/// # Safety
/// `model` must be null (returns 0) or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_param_count(model: *const LanmsffModel, trainable_only: bool) -> u64 {
    model.as_ref().map_or(0, |m| {
        if trainable_only {
            m.inner.trainable_param_count() as u64
        } else {
            m.inner.total_param_count() as u64
        }
    })
}

/// Runs inference on `batch` images packed as
/// `batch * channels * size * size` doubles in [0, 1], NCHW order, and
/// writes `batch * num_classes` class probabilities to `out_probs`.
///
/// # Safety
/// `model` must be a live handle; `pixels` must point to `pixels_len`
/// doubles; `out_probs` must have room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_predict(
    model: *const LanmsffModel,
    pixels: *const f64,
    pixels_len: usize,
    batch: usize,
    out_probs: *mut f64,
    out_len: usize,
) -> LanmsffStatus {
    clear_error();
    let Some(model) = model.as_ref() else {
        return invalid("model is null");
    };
    if pixels.is_null() || out_probs.is_null() {
        return invalid("pixels or out_probs is null");
    }
    let cfg = &model.inner.config;
    let per_image = cfg.input_channels * cfg.input_size * cfg.input_size;
    if batch == 0 || pixels_len != batch * per_image {
        return invalid("pixels_len does not equal batch * channels * size * size");
    }
    if out_len != batch * cfg.num_classes {
        return invalid("out_len does not equal batch * num_classes");
    }
    let data = std::slice::from_raw_parts(pixels, pixels_len).to_vec();
    let shape = [batch, cfg.input_channels, cfg.input_size, cfg.input_size];
    let tensor = match lanmsff::tensor::Tensor::new(&shape, data) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    match model.inner.predict_probs(&tensor) {
        Ok(probs) => {
            let pd = probs.data();
            std::slice::from_raw_parts_mut(out_probs, out_len).copy_from_slice(&pd);
            LanmsffStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Full parameter audit as a JSON document. The caller owns the returned
/// string (free with [`lanmsff_string_free`]); null on failure.
///
/// # Safety
/// `model` must be null (returns null) or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_model_audit_json(model: *const LanmsffModel) -> *mut c_char {
    clear_error();
    let Some(model) = model.as_ref() else {
        set_error("model is null".into());
        return ptr::null_mut();
    };
    let report = audit_parameters(&model.inner);
    match serde_json::to_string_pretty(&report.to_json()) {
        Ok(s) => CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut()),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Information density: accuracy percent per million parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_information_density(
    accuracy_pct: f64,
    param_count: u64,
    out: *mut f64,
) -> LanmsffStatus {
    clear_error();
    if out.is_null() {
        return invalid("out is null");
    }
    match lanmsff::eval::information_density(accuracy_pct, param_count as usize) {
        Ok(v) => {
            *out = v;
            LanmsffStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Pose variance: population variance of the per-pose accuracies together
/// with the overall accuracy.
///
/// # Safety
/// `accuracies` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lanmsff_pose_variance(
    accuracies: *const f64,
    n: usize,
    overall: f64,
    out: *mut f64,
) -> LanmsffStatus {
    clear_error();
    if out.is_null() || (accuracies.is_null() && n > 0) {
        return invalid("null pointer argument");
    }
    let accs = std::slice::from_raw_parts(accuracies, n);
    match lanmsff::eval::pose_variance(accs, overall) {
        Ok(v) => {
            *out = v;
            LanmsffStatus::Ok
        }
        Err(e) => fail(e),
    }
}
