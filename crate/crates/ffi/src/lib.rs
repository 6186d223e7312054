//! C ABI over `fedminimax`.
//!
//! Every function returns an [`FmStatus`]; on failure the message is
//! available from [`fm_last_error`] on the same thread. Handles are opaque
//! and must be released with their `*_free` function. Strings returned as
//! `char *` are owned by the caller and released with [`fm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fedminimax::algorithms::{run_with, Variant};
use fedminimax::cli::theorem_report;
use fedminimax::config::{self, RunConfig};
use fedminimax::metrics::{self, RunTrace};
use fedminimax::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Unsupported = 4,
    Diverged = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Parsed run configuration.
pub struct FmConfig {
    inner: RunConfig,
}

/// Trace of one finished run.
pub struct FmTrace {
    inner: RunTrace,
}

/// Constraint report for one variant.
pub struct FmReport {
    names: Vec<CString>,
    lhs: Vec<f64>,
    rhs: Vec<f64>,
    satisfied: Vec<bool>,
}

/// One trace row; metrics a problem does not define are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FmRecord {
    pub t: u64,
    pub is_sync: bool,
    pub dist_x_sq: f64,
    pub dist_y_sq: f64,
    pub grad_norm_f: f64,
    pub est_err_x: f64,
    pub est_err_y: f64,
    pub consensus_x: f64,
    pub objective: f64,
    pub auc: f64,
    pub sfo: u64,
    pub comm: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FmCounters {
    pub sfo_per_client: u64,
    pub comm_rounds: u64,
    pub local_steps: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FmConstraint {
    /// Owned by the report; valid until the report is freed.
    pub name: *const c_char,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FmStatus {
    match e {
        Error::Config { .. } | Error::Parse(_) => FmStatus::Config,
        Error::Unsupported { .. } => FmStatus::Unsupported,
        Error::Diverged(_) => FmStatus::Diverged,
        Error::Io(_) => FmStatus::Io,
        Error::OutOfRange { .. } => FmStatus::OutOfRange,
        _ => FmStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FmStatus, String)>) -> FmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FmStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FmStatus, String) {
    (FmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (FmStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (FmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn fm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn fm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses config text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_config_parse(text: *const c_char, out: *mut *mut FmConfig) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = config::parse_config(str_arg(text, "text")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FmConfig { inner: cfg }));
        Ok(())
    })
}

/// Loads a shipped preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_config_preset(name: *const c_char, out: *mut *mut FmConfig) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = config::preset(str_arg(name, "name")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FmConfig { inner: cfg }));
        Ok(())
    })
}

/// Sets one key, e.g. `("algorithm.gamma", "0.05")`. The config is left
/// unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; `path` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fm_config_set(cfg: *mut FmConfig, path: *const c_char, value: *const c_char) -> FmStatus {
    guard(|| {
        let cfg = out_ptr(cfg, "cfg")?;
        let ov = [(str_arg(path, "path")?.to_string(), str_arg(value, "value")?.to_string())];
        cfg.inner = config::parse_config_with_overrides(&config::render_config(&cfg.inner), &ov).map_err(lib_err)?;
        Ok(())
    })
}

/// Canonical config text; free with [`fm_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_config_render(cfg: *const FmConfig, out: *mut *mut c_char) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = owned_string(config::render_config(&handle(cfg, "cfg")?.inner));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fm_config_free(cfg: *mut FmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn variant_arg(cfg: &RunConfig, variant: *const c_char) -> Result<Variant, (FmStatus, String)> {
    if variant.is_null() {
        Ok(cfg.variants[0])
    } else {
        str_arg(variant, "variant")?.parse().map_err(lib_err)
    }
}

/// Runs one variant (null: the config's first) with the given seed.
///
/// # Safety
/// `cfg` must be a live handle; `variant` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_run(
    cfg: *const FmConfig,
    variant: *const c_char,
    seed: u64,
    out: *mut *mut FmTrace,
) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = &handle(cfg, "cfg")?.inner;
        let hp = cfg.hyper_params(variant_arg(cfg, variant)?, seed);
        let problem = cfg.problem.build().map_err(lib_err)?;
        let trace = run_with(&problem, &hp, &cfg.output.metric_options()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(FmTrace { inner: trace }));
        Ok(())
    })
}

/// Number of records, one per step `t = 1..=T`.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_len(trace: *const FmTrace, out: *mut usize) -> FmStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(trace, "trace")?.inner.records.len();
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_record(trace: *const FmTrace, index: usize, out: *mut FmRecord) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let recs = &handle(trace, "trace")?.inner.records;
        let r = recs.get(index).ok_or_else(|| {
            lib_err(Error::OutOfRange {
                what: "record",
                index,
                limit: recs.len(),
            })
        })?;
        *out = FmRecord {
            t: r.t,
            is_sync: r.is_sync,
            dist_x_sq: r.dist_x_sq.unwrap_or(f64::NAN),
            dist_y_sq: r.dist_y_sq.unwrap_or(f64::NAN),
            grad_norm_f: r.grad_norm_f.unwrap_or(f64::NAN),
            est_err_x: r.est_err_x,
            est_err_y: r.est_err_y,
            consensus_x: r.consensus_x,
            objective: r.objective,
            auc: r.auc.unwrap_or(f64::NAN),
            sfo: r.sfo,
            comm: r.comm,
        };
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_counters(trace: *const FmTrace, out: *mut FmCounters) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = handle(trace, "trace")?.inner.counters;
        *out = FmCounters {
            sfo_per_client: c.sfo_per_client,
            comm_rounds: c.comm_rounds,
            local_steps: c.local_steps,
        };
        Ok(())
    })
}

/// Copies the final averaged primal iterate into `buf`. `dim` receives the
/// iterate length; fails with `OutOfRange` when `len` is too small.
///
/// # Safety
/// `trace` must be a live handle; `buf` must hold `len` doubles (may be
/// null when `len` is 0); `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_final_x(
    trace: *const FmTrace,
    buf: *mut f64,
    len: usize,
    dim: *mut usize,
) -> FmStatus {
    guard(|| {
        let dim = out_ptr(dim, "dim")?;
        let x = handle(trace, "trace")?.inner.final_x.as_slice();
        *dim = x.len();
        if len < x.len() {
            return Err(lib_err(Error::OutOfRange {
                what: "buffer length",
                index: len,
                limit: x.len(),
            }));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, x.len()).copy_from_slice(x);
        Ok(())
    })
}

/// Writes the trace as CSV.
///
/// # Safety
/// `trace` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_write_csv(trace: *const FmTrace, path: *const c_char) -> FmStatus {
    guard(|| {
        let trace = &handle(trace, "trace")?.inner;
        metrics::emit_csv(trace, Path::new(str_arg(path, "path")?)).map_err(lib_err)
    })
}

/// # Safety
/// `trace` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fm_trace_free(trace: *mut FmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Checks one variant's hyperparameters (null: the config's first) against
/// the convergence constraints.
///
/// # Safety
/// `cfg` must be a live handle; `variant` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_validate(
    cfg: *const FmConfig,
    variant: *const c_char,
    out: *mut *mut FmReport,
) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = &handle(cfg, "cfg")?.inner;
        let v = variant_arg(cfg, variant)?;
        let problem = cfg.problem.build().map_err(lib_err)?;
        let report = theorem_report(cfg, &problem, v).map_err(lib_err)?;
        let cs = &report.constraints;
        *out = Box::into_raw(Box::new(FmReport {
            names: cs.iter().map(|c| CString::new(c.name).expect("static names")).collect(),
            lhs: cs.iter().map(|c| c.lhs).collect(),
            rhs: cs.iter().map(|c| c.rhs).collect(),
            satisfied: cs.iter().map(|c| c.satisfied).collect(),
        }));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_report_len(report: *const FmReport, out: *mut usize) -> FmStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(report, "report")?.names.len();
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_report_entry(report: *const FmReport, index: usize, out: *mut FmConstraint) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let r = handle(report, "report")?;
        if index >= r.names.len() {
            return Err(lib_err(Error::OutOfRange {
                what: "constraint",
                index,
                limit: r.names.len(),
            }));
        }
        *out = FmConstraint {
            name: r.names[index].as_ptr(),
            lhs: r.lhs[index],
            rhs: r.rhs[index],
            satisfied: r.satisfied[index],
        };
        Ok(())
    })
}

/// `true` iff every constraint holds.
///
/// # Safety
/// `report` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_report_overall(report: *const FmReport, out: *mut bool) -> FmStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(report, "report")?.satisfied.iter().all(|&s| s);
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fm_report_free(report: *mut FmReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Rank AUC of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_auc(scores: *const f64, labels: *const f64, n: usize, out: *mut f64) -> FmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if n > 0 && (scores.is_null() || labels.is_null()) {
            return Err(null("scores or labels"));
        }
        let (s, l) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(scores, n),
                std::slice::from_raw_parts(labels, n),
            )
        };
        *out = metrics::auc_from_scores(s, l);
        Ok(())
    })
}
