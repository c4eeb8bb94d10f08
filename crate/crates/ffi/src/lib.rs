//! C ABI for the fingerspelling classifier.
//!
//! Every function returns an [`SlrStatus`]. On failure a description is kept
//! per thread and can be read with [`slr_last_error_message`]. Models are
//! opaque [`SlrModel`] handles owned by the caller and released with
//! [`slr_model_free`]. Strings returned by the library are released with
//! [`slr_string_free`]. Panics never cross the boundary; they surface as
//! `SLR_STATUS_PANIC`.
//!
//! Landmarks are passed as interleaved `x0, y0, x1, y1, ...` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slr_core::features::{NUM_FEATURES, NUM_LANDMARKS};
use slr_core::model::{load_model, ModelError};
use slr_core::serve::handle_message;
use slr_core::{extract_features, predict, FeatureError, LandmarkFrame, ModelParams, NUM_CLASSES};

/// Number of landmarks per frame.
pub const SLR_NUM_LANDMARKS: usize = 21;
/// Length of a feature vector.
pub const SLR_NUM_FEATURES: usize = 42;
/// Number of output classes (letters A to Z).
pub const SLR_NUM_CLASSES: usize = 26;

// The header needs literal values; keep them tied to the core constants.
const _: () = assert!(SLR_NUM_LANDMARKS == NUM_LANDMARKS);
const _: () = assert!(SLR_NUM_FEATURES == NUM_FEATURES);
const _: () = assert!(SLR_NUM_CLASSES == NUM_CLASSES);

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    BadLandmarkCount = 5,
    NonFinite = 6,
    DegenerateHand = 7,
    Panic = 8,
}

/// A loaded classifier. Immutable after loading, so one handle may be shared
/// by several threads.
pub struct SlrModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    let c = CString::new(message).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SlrStatus, message: impl Into<String>) -> SlrStatus {
    set_last_error(message);
    status
}

fn feature_status(e: &FeatureError) -> SlrStatus {
    match e {
        FeatureError::EmptyInput | FeatureError::BadLandmarkCount(_) => SlrStatus::BadLandmarkCount,
        FeatureError::NonFinite => SlrStatus::NonFinite,
        FeatureError::DegenerateHand => SlrStatus::DegenerateHand,
    }
}

fn model_status(e: &ModelError) -> SlrStatus {
    match e {
        ModelError::Io { .. } => SlrStatus::Io,
        ModelError::Feature(f) => feature_status(f),
        _ => SlrStatus::Format,
    }
}

fn guard(f: impl FnOnce() -> SlrStatus) -> SlrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            fail(SlrStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Builds a frame from `n_points` interleaved pairs at `xy`.
///
/// # Safety
/// `xy` must point to `2 * n_points` readable doubles.
unsafe fn frame_from_raw(xy: *const f64, n_points: usize) -> Result<LandmarkFrame, SlrStatus> {
    if xy.is_null() {
        return Err(fail(SlrStatus::NullPointer, "landmark pointer is null"));
    }
    if n_points != NUM_LANDMARKS {
        return Err(fail(
            SlrStatus::BadLandmarkCount,
            FeatureError::BadLandmarkCount(n_points).to_string(),
        ));
    }
    let coords = std::slice::from_raw_parts(xy, 2 * n_points);
    LandmarkFrame::from_interleaved(coords).map_err(|e| fail(feature_status(&e), e.to_string()))
}

/// Loads a model weight file and stores a new handle in `*out`.
///
/// `*out` is set to null on failure.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn slr_model_load(path: *const c_char, out: *mut *mut SlrModel) -> SlrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlrStatus::NullPointer, "output pointer is null");
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return fail(SlrStatus::NullPointer, "path is null");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(SlrStatus::InvalidUtf8, "path is not valid UTF-8");
        };
        match load_model(Path::new(path)) {
            Ok(params) => {
                *out = Box::into_raw(Box::new(SlrModel { params }));
                SlrStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Releases a handle from [`slr_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slr_model_free(model: *mut SlrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Normalizes a frame into `SLR_NUM_FEATURES` values written to `out`.
///
/// # Safety
/// `xy` must hold `2 * n_points` doubles; `out` must hold `SLR_NUM_FEATURES`.
#[no_mangle]
pub unsafe extern "C" fn slr_extract_features(xy: *const f64, n_points: usize, out: *mut f64) -> SlrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlrStatus::NullPointer, "output pointer is null");
        }
        let frame = match frame_from_raw(xy, n_points) {
            Ok(f) => f,
            Err(s) => return s,
        };
        match extract_features(&frame) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(out, NUM_FEATURES).copy_from_slice(v.as_slice());
                SlrStatus::Ok
            }
            Err(e) => fail(feature_status(&e), e.to_string()),
        }
    })
}

/// Classifies a frame.
///
/// Writes the winning class index (0 for 'A' through 25 for 'Z') and its
/// probability. If `out_probs` is not null it receives all
/// `SLR_NUM_CLASSES` probabilities.
///
/// # Safety
/// `model` must be a live handle, `xy` must hold `2 * n_points` doubles and
/// `out_probs` must be null or hold `SLR_NUM_CLASSES` doubles.
#[no_mangle]
pub unsafe extern "C" fn slr_predict(
    model: *const SlrModel,
    xy: *const f64,
    n_points: usize,
    out_index: *mut u32,
    out_confidence: *mut f64,
    out_probs: *mut f64,
) -> SlrStatus {
    guard(|| {
        if model.is_null() || out_index.is_null() || out_confidence.is_null() {
            return fail(SlrStatus::NullPointer, "model or output pointer is null");
        }
        let frame = match frame_from_raw(xy, n_points) {
            Ok(f) => f,
            Err(s) => return s,
        };
        match predict(&(*model).params, &frame) {
            Ok(p) => {
                *out_index = p.label.index() as u32;
                *out_confidence = p.confidence;
                if !out_probs.is_null() {
                    std::slice::from_raw_parts_mut(out_probs, NUM_CLASSES).copy_from_slice(&p.probs);
                }
                SlrStatus::Ok
            }
            Err(e) => fail(model_status(&e), e.to_string()),
        }
    })
}

/// Answers one protocol message, exactly as the server would.
///
/// `*out` receives a newly allocated JSON response (prediction or error)
/// to be released with [`slr_string_free`]. Protocol-level errors are part of
/// the response, so the status is `SLR_STATUS_OK` for any input bytes.
///
/// # Safety
/// `model` must be a live handle, `message` a nul-terminated string and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn slr_handle_message(
    model: *const SlrModel,
    message: *const c_char,
    out: *mut *mut c_char,
) -> SlrStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlrStatus::NullPointer, "output pointer is null");
        }
        *out = ptr::null_mut();
        if model.is_null() || message.is_null() {
            return fail(SlrStatus::NullPointer, "model or message is null");
        }
        let bytes = CStr::from_ptr(message).to_bytes();
        let json = handle_message(&(*model).params, bytes).to_json();
        *out = CString::new(json).expect("JSON has no nul bytes").into_raw();
        SlrStatus::Ok
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message describing the last failure on the calling thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn slr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
