//! C ABI over the report-classification library.
//!
//! Callers work with opaque handles created by the `_load` functions and
//! released by the matching `_free` functions. Every fallible call returns
//! a [`RadclassStatus`]; on failure a human-readable message is stored per
//! thread and can be read with [`radclass_last_error`]. Strings returned
//! through out-parameters are owned by the caller and must be released
//! with [`radclass_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use radclass::pipeline::{score_map, BaselinePipeline, PipelineError, TrainedPipeline};

/// Outcome of a C API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadclassStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read or written.
    Io = 3,
    /// An artifact could not be parsed or failed validation.
    Parse = 4,
    /// The operation itself failed; see `radclass_last_error`.
    Runtime = 5,
}

/// Opaque handle to a trained classifier artifact.
pub struct RadclassModel {
    inner: TrainedPipeline,
}

/// Opaque handle to a fitted n-gram threshold baseline artifact.
pub struct RadclassBaseline {
    inner: BaselinePipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes stripped");
    });
}

fn status_of(err: &PipelineError) -> RadclassStatus {
    match err {
        PipelineError::Io(_) => RadclassStatus::Io,
        PipelineError::Json(_) | PipelineError::SchemaVersion { .. } => RadclassStatus::Parse,
        _ => RadclassStatus::Runtime,
    }
}

fn fail(status: RadclassStatus, message: &str) -> RadclassStatus {
    set_error(message);
    status
}

/// Runs `body` with panics converted into `Runtime` errors so unwinding
/// never crosses the ABI boundary.
fn guarded(body: impl FnOnce() -> RadclassStatus) -> RadclassStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(RadclassStatus::Runtime, "internal panic"),
    }
}

/// Converts a C string argument, recording an error on failure.
///
/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, RadclassStatus> {
    if ptr.is_null() {
        return Err(fail(
            RadclassStatus::NullArgument,
            &format!("{name} is null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail(
            RadclassStatus::InvalidUtf8,
            &format!("{name} is not valid UTF-8"),
        )
    })
}

fn give_string(out: *mut *mut c_char, value: String) -> RadclassStatus {
    let owned = match CString::new(value) {
        Ok(owned) => owned,
        Err(_) => return fail(RadclassStatus::Runtime, "output contained a NUL byte"),
    };
    unsafe { *out = owned.into_raw() };
    RadclassStatus::Ok
}

/// Returns the error message of the most recent failed call on this
/// thread, or an empty string. The pointer stays valid until the next
/// failed call on the same thread.
#[no_mangle]
pub extern "C" fn radclass_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by a radclass function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn radclass_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a classifier artifact written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable
/// memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn radclass_model_load(
    path: *const c_char,
    out: *mut *mut RadclassModel,
) -> RadclassStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RadclassStatus::NullArgument, "out is null");
        }
        let path = match utf8_arg(path, "path") {
            Ok(path) => path,
            Err(status) => return status,
        };
        match TrainedPipeline::load(Path::new(path)) {
            Ok(pipeline) => {
                *out = Box::into_raw(Box::new(RadclassModel { inner: pipeline }));
                RadclassStatus::Ok
            }
            Err(err) => fail(status_of(&err), &format!("loading {path}: {err}")),
        }
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must have come from `radclass_model_load` and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn radclass_model_free(model: *mut RadclassModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classifies one report text. On success `*out_json` receives a JSON
/// object `{"label": ..., "scores": {class: score, ...}}` owned by the
/// caller.
///
/// # Safety
/// `model` must be a live handle; `text` must be NUL-terminated; `out_json`
/// must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn radclass_model_predict_json(
    model: *const RadclassModel,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> RadclassStatus {
    guarded(|| {
        if model.is_null() || out_json.is_null() {
            return fail(RadclassStatus::NullArgument, "model or out_json is null");
        }
        let text = match utf8_arg(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let pipeline = &(*model).inner;
        let prediction = match pipeline.predict_text(text) {
            Ok(prediction) => prediction,
            Err(err) => return fail(status_of(&err), &format!("predicting: {err}")),
        };
        let Some(label) = pipeline.class_name(prediction.class_index) else {
            return fail(RadclassStatus::Runtime, "prediction outside the label schema");
        };
        let record = serde_json::json!({
            "label": label,
            "scores": score_map(pipeline.classes(), &prediction),
        });
        give_string(out_json, record.to_string())
    })
}

/// Describes a loaded model. On success `*out_json` receives a JSON object
/// `{"task": ..., "family": ..., "classes": [...], "vocabulary": n}` owned
/// by the caller.
///
/// # Safety
/// `model` must be a live handle; `out_json` must point to writable memory
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn radclass_model_info_json(
    model: *const RadclassModel,
    out_json: *mut *mut c_char,
) -> RadclassStatus {
    guarded(|| {
        if model.is_null() || out_json.is_null() {
            return fail(RadclassStatus::NullArgument, "model or out_json is null");
        }
        let pipeline = &(*model).inner;
        let info = serde_json::json!({
            "task": pipeline.task(),
            "family": pipeline.family().to_string(),
            "classes": pipeline.classes(),
            "vocabulary": pipeline.vocabulary().len(),
        });
        give_string(out_json, info.to_string())
    })
}

/// Loads an n-gram baseline artifact written by the baseline fitter.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable
/// memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn radclass_baseline_load(
    path: *const c_char,
    out: *mut *mut RadclassBaseline,
) -> RadclassStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RadclassStatus::NullArgument, "out is null");
        }
        let path = match utf8_arg(path, "path") {
            Ok(path) => path,
            Err(status) => return status,
        };
        match BaselinePipeline::load(Path::new(path)) {
            Ok(pipeline) => {
                *out = Box::into_raw(Box::new(RadclassBaseline { inner: pipeline }));
                RadclassStatus::Ok
            }
            Err(err) => fail(status_of(&err), &format!("loading {path}: {err}")),
        }
    })
}

/// Releases a baseline handle. Null is ignored.
///
/// # Safety
/// `baseline` must have come from `radclass_baseline_load` and not be
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn radclass_baseline_free(baseline: *mut RadclassBaseline) {
    if !baseline.is_null() {
        drop(Box::from_raw(baseline));
    }
}

/// Applies the baseline to one report text. On success `*out_json`
/// receives a JSON object `{"label": ..., "positive": bool, "fraction":
/// f}` owned by the caller.
///
/// # Safety
/// `baseline` must be a live handle; `text` must be NUL-terminated;
/// `out_json` must point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn radclass_baseline_classify_json(
    baseline: *const RadclassBaseline,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> RadclassStatus {
    guarded(|| {
        if baseline.is_null() || out_json.is_null() {
            return fail(RadclassStatus::NullArgument, "baseline or out_json is null");
        }
        let text = match utf8_arg(text, "text") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let pipeline = &(*baseline).inner;
        let (positive, fraction) = match pipeline.classify_text(text) {
            Ok(result) => result,
            Err(err) => return fail(status_of(&err), &format!("classifying: {err}")),
        };
        let record = serde_json::json!({
            "label": pipeline.class_name(positive),
            "positive": positive,
            "fraction": fraction,
        });
        give_string(out_json, record.to_string())
    })
}
