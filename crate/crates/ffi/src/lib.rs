//! C interface to `hgsurv`.
//!
//! Objects cross the boundary as opaque handles created by `*_load` /
//! `*_generate` and released with the matching `*_free`. Every fallible call
//! returns an [`HgsStatus`]; on failure, [`hgs_last_error`] describes what went
//! wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hgsurv::datamodel::Cohort;
use hgsurv::membank::MemoryBank;
use hgsurv::metrics::{c_index, logrank_test, SurvPoint};
use hgsurv::model::{prepare, Checkpoint, Missing, PreparedRecord};
use hgsurv::synth::{generate, SynthConfig};
use hgsurv::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgsStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Io = 3,
    Parse = 4,
    Runtime = 5,
    Panic = 6,
}

/// Which modality to withhold in [`hgs_model_predict`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HgsMissing {
    None = 0,
    Path = 1,
    Gene = 2,
}

/// Opaque cohort handle.
pub struct HgsCohort {
    inner: Cohort,
}

/// Opaque trained model: parameters, training config and optional bank.
pub struct HgsModel {
    checkpoint: Checkpoint,
    bank: Option<MemoryBank>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> HgsStatus {
    match err {
        Error::Io { .. } => HgsStatus::Io,
        Error::Parse { .. } | Error::Json(_) => HgsStatus::Parse,
        e if e.is_validation() => HgsStatus::InvalidArgument,
        _ => HgsStatus::Runtime,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (HgsStatus, String)>) -> HgsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HgsStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HgsStatus::Panic
        }
    }
}

fn lift<T>(r: hgsurv::Result<T>) -> Result<T, (HgsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HgsStatus, String) {
    (HgsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (HgsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HgsStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (HgsStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn points(times: *const f64, events: *const u8, risks: *const f64, n: usize) -> Result<Vec<SurvPoint>, (HgsStatus, String)> {
    let t = slice_arg(times, n, "times")?;
    let e = slice_arg(events, n, "events")?;
    let r = if risks.is_null() { None } else { Some(slice_arg(risks, n, "risks")?) };
    Ok((0..n)
        .map(|i| SurvPoint {
            time: t[i],
            event: e[i] != 0,
            risk: r.map_or(0.0, |r| r[i]),
        })
        .collect())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hgs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hgs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Harrell's C-index. `events[i]` is nonzero when the event was observed.
///
/// # Safety
/// Each array must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hgs_c_index(
    times: *const f64,
    events: *const u8,
    risks: *const f64,
    n: usize,
    out: *mut f64,
) -> HgsStatus {
    guard(|| {
        if out.is_null() || risks.is_null() {
            return Err(null("risks or out"));
        }
        let c = lift(c_index(&points(times, events, risks, n)?))?;
        *out = c;
        Ok(())
    })
}

/// Two-group log-rank test; writes the chi-square statistic and p-value.
///
/// # Safety
/// Each array must hold the stated number of elements; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hgs_logrank(
    times_a: *const f64,
    events_a: *const u8,
    n_a: usize,
    times_b: *const f64,
    events_b: *const u8,
    n_b: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> HgsStatus {
    guard(|| {
        if statistic.is_null() || p_value.is_null() {
            return Err(null("output"));
        }
        let a = points(times_a, events_a, ptr::null(), n_a)?;
        let b = points(times_b, events_b, ptr::null(), n_b)?;
        let lr = lift(logrank_test(&a, &b))?;
        *statistic = lr.statistic;
        *p_value = lr.p_value;
        Ok(())
    })
}

/// Read a cohort directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_load(dir: *const c_char, out: *mut *mut HgsCohort) -> HgsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cohort = lift(hgsurv::io::read_cohort(path_arg(dir, "dir")?))?;
        *out = Box::into_raw(Box::new(HgsCohort { inner: cohort }));
        Ok(())
    })
}

/// Synthetic cohort with default settings apart from the given ones.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_generate(
    n_patients: usize,
    seed: u64,
    signal_strength: f64,
    censor_rate: f64,
    out: *mut *mut HgsCohort,
) -> HgsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = SynthConfig {
            n_patients,
            seed,
            signal_strength,
            censor_rate,
            folds: SynthConfig::default().folds.min(n_patients.max(1)),
            ..Default::default()
        };
        let synth = lift(generate(&config))?;
        *out = Box::into_raw(Box::new(HgsCohort { inner: synth.cohort }));
        Ok(())
    })
}

/// Write a cohort directory.
///
/// # Safety
/// `cohort` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_write(cohort: *const HgsCohort, dir: *const c_char) -> HgsStatus {
    guard(|| {
        let cohort = cohort.as_ref().ok_or_else(|| null("cohort"))?;
        lift(hgsurv::io::write_cohort(&cohort.inner, path_arg(dir, "dir")?))
    })
}

/// Number of patients; 0 for a null handle.
///
/// # Safety
/// `cohort` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_len(cohort: *const HgsCohort) -> usize {
    cohort.as_ref().map_or(0, |c| c.inner.patients.len())
}

/// Copy survival times and event flags into caller buffers of length `len`.
///
/// # Safety
/// `cohort` must come from this library; buffers must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_labels(
    cohort: *const HgsCohort,
    times: *mut f64,
    events: *mut u8,
    len: usize,
) -> HgsStatus {
    guard(|| {
        let cohort = cohort.as_ref().ok_or_else(|| null("cohort"))?;
        if times.is_null() || events.is_null() {
            return Err(null("output buffer"));
        }
        let n = cohort.inner.patients.len();
        if len != n {
            return Err((HgsStatus::InvalidArgument, format!("buffer length {len}, cohort has {n}")));
        }
        for (i, p) in cohort.inner.patients.iter().enumerate() {
            *times.add(i) = p.label.time;
            *events.add(i) = u8::from(p.label.censor.is_event());
        }
        Ok(())
    })
}

/// # Safety
/// `cohort` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn hgs_cohort_free(cohort: *mut HgsCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Load a checkpoint and, when `bank_path` is non-null, its memory bank.
///
/// # Safety
/// Paths must be NUL-terminated (or null for the bank); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hgs_model_load(
    checkpoint_path: *const c_char,
    bank_path: *const c_char,
    out: *mut *mut HgsModel,
) -> HgsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let checkpoint = lift(Checkpoint::load(path_arg(checkpoint_path, "checkpoint_path")?))?;
        let bank = if bank_path.is_null() {
            None
        } else {
            Some(lift(MemoryBank::load(path_arg(bank_path, "bank_path")?))?)
        };
        *out = Box::into_raw(Box::new(HgsModel { checkpoint, bank }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn hgs_model_free(model: *mut HgsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Risk score of every patient in `cohort`, in cohort order, with `missing`
/// withheld. Withholding a modality requires a model loaded with a bank.
///
/// # Safety
/// Handles must come from this library; `risks` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn hgs_model_predict(
    model: *const HgsModel,
    cohort: *const HgsCohort,
    missing: HgsMissing,
    risks: *mut f64,
    len: usize,
) -> HgsStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let cohort = cohort.as_ref().ok_or_else(|| null("cohort"))?;
        if risks.is_null() {
            return Err(null("risks"));
        }
        let n = cohort.inner.patients.len();
        if len != n {
            return Err((HgsStatus::InvalidArgument, format!("buffer length {len}, cohort has {n}")));
        }
        let ck = &model.checkpoint;
        lift(ck.check_shape(cohort.inner.d, ck.bins))?;
        let records = lift(
            cohort
                .inner
                .patients
                .iter()
                .map(|p| prepare(p, &ck.config))
                .collect::<hgsurv::Result<Vec<PreparedRecord>>>(),
        )?;
        let missing = match missing {
            HgsMissing::None => Missing::None,
            HgsMissing::Path => Missing::Path,
            HgsMissing::Gene => Missing::Gene,
        };
        let outputs = lift(
            records
                .iter()
                .map(|r| hgsurv::model::forward(&ck.params, &r.withhold(missing), &ck.config, model.bank.as_ref()))
                .collect::<hgsurv::Result<Vec<_>>>(),
        )?;
        for (i, pass) in outputs.iter().enumerate() {
            *risks.add(i) = hgsurv::survival::risk_score(&pass.output);
        }
        Ok(())
    })
}
