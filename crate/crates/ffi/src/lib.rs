//! C ABI over `mwad-core`.
//!
//! Every function returns an [`MwadStatus`]. On failure, a message for the
//! calling thread is available from [`mwad_last_error_message`]. Detectors are
//! opaque handles created by [`mwad_detector_load`] and released with
//! [`mwad_detector_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mwad_core::config::RunConfig;
use mwad_core::eval::{confusion, metrics};
use mwad_core::model::TargetMode;
use mwad_core::numeric::Tensor;
use mwad_core::scoring::{classify, score_series, threshold_range};
use mwad_core::training::Checkpoint;
use mwad_core::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MwadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Incompatible = 5,
    Dimension = 6,
    InsufficientLength = 7,
    BufferTooSmall = 8,
    Runtime = 9,
    Panic = 10,
}

/// A loaded checkpoint ready to score raw rows.
pub struct MwadDetector {
    checkpoint: Checkpoint,
    target: TargetMode,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MwadThresholdRange {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub slide_step: f64,
    pub lower: f64,
    pub upper: f64,
    pub candidate_count: usize,
    /// 1 when every score is equal.
    pub degenerate: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MwadMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> MwadStatus {
    match e {
        Error::Io { .. } => MwadStatus::Io,
        Error::Format(_) => MwadStatus::Format,
        Error::Incompatible { .. } => MwadStatus::Incompatible,
        Error::Dimension { .. } => MwadStatus::Dimension,
        Error::InsufficientLength { .. } => MwadStatus::InsufficientLength,
        Error::Validation(_) | Error::Contract(_) | Error::Config(_) => MwadStatus::InvalidArgument,
        _ => MwadStatus::Runtime,
    }
}

struct Fail(MwadStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Fail {
    Fail(MwadStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MwadStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MwadStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MwadStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mwad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mwad_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a checkpoint file into a new detector.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mwad_detector_load(path: *const c_char, out: *mut *mut MwadDetector) -> MwadStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(MwadStatus::InvalidArgument, "path is not utf-8".into()))?;
        let checkpoint = Checkpoint::load(Path::new(path))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&checkpoint.config)?;
        let target = cfg.target_mode;
        *out = Box::into_raw(Box::new(MwadDetector { checkpoint, target }));
        Ok(())
    })
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `det` must come from [`mwad_detector_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mwad_detector_free(det: *mut MwadDetector) {
    if !det.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(det))));
    }
}

/// Number of feature columns the detector expects.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwad_detector_feature_count(det: *const MwadDetector, out: *mut usize) -> MwadStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("detector"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = det.checkpoint.model.feature_count();
        Ok(())
    })
}

/// Rows at the start of every scored block that receive no score.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwad_detector_unscored_prefix(det: *const MwadDetector, out: *mut usize) -> MwadStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("detector"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = det.checkpoint.model.unscored_prefix();
        Ok(())
    })
}

/// Scores raw (unnormalized) rows given row-major as `n_rows × n_cols`.
/// Writes `n_rows − prefix` scores into `scores` (capacity `scores_len`);
/// score `i` belongs to row `prefix + i`. `written` receives the count, or
/// the required capacity on `BufferTooSmall`.
///
/// # Safety
/// `rows` must hold `n_rows·n_cols` values and `scores` `scores_len`.
#[no_mangle]
pub unsafe extern "C" fn mwad_detector_score(
    det: *const MwadDetector,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    scores: *mut f64,
    scores_len: usize,
    written: *mut usize,
) -> MwadStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("detector"))?;
        let written = written.as_mut().ok_or_else(|| null("written"))?;
        *written = 0;
        let ck = &det.checkpoint;
        let n = ck.model.feature_count();
        if n_cols != n {
            return Err(Error::Dimension {
                expected: n,
                found: n_cols,
            }
            .into());
        }
        let total = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Fail(MwadStatus::InvalidArgument, "row count overflows".into()))?;
        let data = slice(rows, total, "rows")?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Fail(MwadStatus::InvalidArgument, "rows contain non-finite values".into()));
        }
        let prefix = ck.model.unscored_prefix();
        if n_rows < ck.model.min_series_len() {
            return Err(Error::InsufficientLength {
                what: "scored rows",
                needed: ck.model.min_series_len(),
                got: n_rows,
            }
            .into());
        }
        let needed = n_rows - prefix;
        if scores_len < needed {
            *written = needed;
            return Err(Fail(
                MwadStatus::BufferTooSmall,
                format!("{needed} scores need room, buffer holds {scores_len}"),
            ));
        }
        let x = ck.normalization.apply(&Tensor::from_vec(n_rows, n_cols, data.to_vec())?)?;
        let s = score_series(&x, &ck.model, det.target)?;
        slice_mut(scores, scores_len, "scores")?[..s.len()].copy_from_slice(&s);
        *written = s.len();
        Ok(())
    })
}

/// Threshold search range of a score vector.
///
/// # Safety
/// `scores` must hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwad_threshold_range(scores: *const f64, len: usize, out: *mut MwadThresholdRange) -> MwadStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = threshold_range(slice(scores, len, "scores")?)?;
        *out = MwadThresholdRange {
            min: r.min,
            max: r.max,
            mean: r.mean,
            slide_step: r.slide_step,
            lower: r.lower,
            upper: r.upper,
            candidate_count: r.candidates.len(),
            degenerate: u8::from(r.degenerate),
        };
        Ok(())
    })
}

/// `out[i] = 1` when `scores[i] > threshold`, else 0.
///
/// # Safety
/// `scores` and `out` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn mwad_classify(scores: *const f64, len: usize, threshold: f64, out: *mut u8) -> MwadStatus {
    guard(|| {
        let s = slice(scores, len, "scores")?;
        let o = slice_mut(out, len, "out")?;
        o.copy_from_slice(&classify(s, threshold));
        Ok(())
    })
}

/// Confusion counts and metrics of 0/1 predictions against 0/1 labels.
///
/// # Safety
/// `predicted` and `actual` must each hold `len` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwad_metrics(
    predicted: *const u8,
    actual: *const u8,
    len: usize,
    out: *mut MwadMetrics,
) -> MwadStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = metrics(confusion(slice(predicted, len, "predicted")?, slice(actual, len, "actual")?)?);
        let c = m.confusion;
        *out = MwadMetrics {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
        };
        Ok(())
    })
}
