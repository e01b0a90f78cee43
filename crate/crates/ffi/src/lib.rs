//! C ABI over the `vgang` library.
//!
//! Tasksets and traces cross the boundary as opaque handles. Every fallible
//! call returns a [`VgStatus`]; on failure `vg_last_error_message` describes
//! the error on the calling thread. Strings returned by the library must be
//! released with `vg_string_free`, handles with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vgang::analysis::schedulability_test;
use vgang::gangform::{config_count_bound, form_taskset, stirling2, Algorithm, InterferenceOracle, NoInterference};
use vgang::generator::{generate_taskset, GenSpec, TasksetType};
use vgang::interference::{apply_interference, GangDemandModel, PolicyKind};
use vgang::model::{Fraction, Taskset, Ticks};
use vgang::simulator::{makespan, miss_stats, simulate, SimConfig, SimPolicy, SimTrace};
use vgang::Error;

/// Opaque taskset handle.
pub struct VgTaskset(Taskset);

/// Opaque simulation trace handle.
pub struct VgTrace(SimTrace);

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    SchemaViolation = 3,
    InvalidTask = 4,
    InvalidConfig = 5,
    InvalidSpec = 6,
    ConfigSpaceTooLarge = 7,
    Overflow = 8,
    IncompleteTrace = 9,
    UnreachableTarget = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VgAlgorithm {
    Bfc = 0,
    Gpc = 1,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VgPolicy {
    RtGang = 0,
    RtgSync = 1,
    UnsyncVgang = 2,
    GangFtp = 3,
    Threaded = 4,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VgTasksetType {
    Light = 0,
    Mixed = 1,
    Heavy = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> VgStatus {
    match err {
        Error::Json(_) => VgStatus::SchemaViolation,
        Error::InvalidTask { .. }
        | Error::PeriodMismatch { .. }
        | Error::NotViable { .. }
        | Error::DuplicateId(_)
        | Error::EmptyGang
        | Error::TaskNotInGang(_)
        | Error::TaskNotInTaskset(_) => VgStatus::InvalidTask,
        Error::InvalidConfig(_) => VgStatus::InvalidConfig,
        Error::InvalidSpec(_) => VgStatus::InvalidSpec,
        Error::ConfigSpaceTooLarge { .. } => VgStatus::ConfigSpaceTooLarge,
        Error::Overflow(_) => VgStatus::Overflow,
        Error::IncompleteTrace(_) => VgStatus::IncompleteTrace,
        Error::UnreachableTarget { .. } => VgStatus::UnreachableTarget,
        Error::Csv(_) | Error::Io(_) => VgStatus::Io,
    }
}

enum Failure {
    Status(VgStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null_arg(name: &str) -> Failure {
    Failure::Status(VgStatus::NullArgument, format!("`{name}` is null"))
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VgStatus::Ok,
        Ok(Err(Failure::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Ok(Err(Failure::Lib(err))) => {
            set_error(err.to_string());
            status_of(&err)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            set_error(format!("internal panic: {msg}"));
            VgStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure::Status(VgStatus::InvalidUtf8, format!("`{name}` is not UTF-8: {e}")))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null_arg(name))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null_arg(name));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("library output contains no nul bytes").into_raw()
}

fn fraction(name: &str, value: f64) -> Result<Fraction, Failure> {
    Fraction::from_f64(value)
        .ok_or_else(|| Failure::Status(VgStatus::InvalidSpec, format!("`{name}` must be finite and non-negative")))
}

fn sim_policy(p: VgPolicy) -> SimPolicy {
    match p {
        VgPolicy::RtGang => SimPolicy::RtGang,
        VgPolicy::RtgSync => SimPolicy::RtgSync,
        VgPolicy::UnsyncVgang => SimPolicy::UnsyncVgang,
        VgPolicy::GangFtp => SimPolicy::GangFtp,
        VgPolicy::Threaded => SimPolicy::Threaded,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a taskset from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_taskset_from_json(json: *const c_char, out: *mut *mut VgTaskset) -> VgStatus {
    guard(|| {
        let ts = Taskset::from_json(read_str(json, "json")?)?;
        put(out, Box::into_raw(Box::new(VgTaskset(ts))), "out")
    })
}

/// Serializes a taskset; free the result with `vg_string_free`.
///
/// # Safety
/// `ts` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_taskset_to_json(ts: *const VgTaskset, out: *mut *mut c_char) -> VgStatus {
    guard(|| {
        let json = deref(ts, "ts")?.0.to_json()?;
        put(out, owned_string(json), "out")
    })
}

/// # Safety
/// `ts` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn vg_taskset_free(ts: *mut VgTaskset) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

/// Number of entities (plain tasks plus gangs), or 0 for null.
///
/// # Safety
/// `ts` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vg_taskset_len(ts: *const VgTaskset) -> usize {
    ts.as_ref().map_or(0, |t| t.0.len())
}

/// Generates a random taskset.
///
/// `n_per_period` of 0 keeps the default range of tasks per period.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_generate(
    m: u32,
    util: f64,
    kind: VgTasksetType,
    n_per_period: u32,
    seed: u64,
    out: *mut *mut VgTaskset,
) -> VgStatus {
    guard(|| {
        let kind = match kind {
            VgTasksetType::Light => TasksetType::Light,
            VgTasksetType::Mixed => TasksetType::Mixed,
            VgTasksetType::Heavy => TasksetType::Heavy,
        };
        let mut spec = GenSpec::new(m, fraction("util", util)?, kind, seed);
        if n_per_period > 0 {
            spec = spec.with_tasks_per_period(n_per_period);
        }
        let ts = generate_taskset(&spec)?;
        put(out, Box::into_raw(Box::new(VgTaskset(ts))), "out")
    })
}

/// Forms virtual gangs from every same-period group of plain tasks. With
/// `interference` set, gang WCETs are measured with the co-runner
/// demand model; brute force falls back to greedy packing when too large.
///
/// # Safety
/// `ts` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_form(
    ts: *const VgTaskset,
    algorithm: VgAlgorithm,
    interference: bool,
    tolerance: f64,
    out: *mut *mut VgTaskset,
) -> VgStatus {
    guard(|| {
        let ts = &deref(ts, "ts")?.0;
        let algorithm = match algorithm {
            VgAlgorithm::Bfc => Algorithm::Bfc,
            VgAlgorithm::Gpc => Algorithm::Gpc,
        };
        let oracle: &dyn InterferenceOracle = if interference { &GangDemandModel } else { &NoInterference };
        let (formed, _) = form_taskset(ts, algorithm, oracle, fraction("tolerance", tolerance)?, true)?;
        put(out, Box::into_raw(Box::new(VgTaskset(formed))), "out")
    })
}

/// Returns a copy of `ts` with WCETs inflated for co-runner interference
/// under `policy`. The synchronized and unsynchronized virtual-gang
/// policies share one model.
///
/// # Safety
/// `ts` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_apply_interference(
    ts: *const VgTaskset,
    policy: VgPolicy,
    out: *mut *mut VgTaskset,
) -> VgStatus {
    guard(|| {
        let kind = match policy {
            VgPolicy::RtGang => PolicyKind::RtGang,
            VgPolicy::RtgSync | VgPolicy::UnsyncVgang => PolicyKind::RtgSync,
            VgPolicy::GangFtp => PolicyKind::GangFtp,
            VgPolicy::Threaded => PolicyKind::Threaded,
        };
        let inflated = apply_interference(&deref(ts, "ts")?.0, kind)?;
        put(out, Box::into_raw(Box::new(VgTaskset(inflated))), "out")
    })
}

/// Response-time analysis under one-gang-at-a-time scheduling.
///
/// # Safety
/// `ts` must be a live handle; `schedulable` must be writable; `report` may
/// be null, otherwise it receives the JSON report (free with `vg_string_free`).
#[no_mangle]
pub unsafe extern "C" fn vg_analyze(
    ts: *const VgTaskset,
    schedulable: *mut bool,
    report: *mut *mut c_char,
) -> VgStatus {
    guard(|| {
        let verdict = schedulability_test(&deref(ts, "ts")?.0);
        put(schedulable, verdict.schedulable, "schedulable")?;
        if !report.is_null() {
            let json = verdict.to_json().map_err(Error::from)?;
            report.write(owned_string(json));
        }
        Ok(())
    })
}

/// Simulates `ts` with synchronous release. `horizon` of 0 simulates one
/// hyperperiod (capped).
///
/// # Safety
/// `ts` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_simulate(
    ts: *const VgTaskset,
    policy: VgPolicy,
    horizon: u64,
    out: *mut *mut VgTrace,
) -> VgStatus {
    guard(|| {
        let mut cfg = SimConfig::new(sim_policy(policy));
        if horizon > 0 {
            cfg = cfg.with_horizon(Ticks::new(horizon));
        }
        let trace = simulate(&deref(ts, "ts")?.0, &cfg)?;
        put(out, Box::into_raw(Box::new(VgTrace(trace))), "out")
    })
}

/// # Safety
/// `trace` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn vg_trace_free(trace: *mut VgTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Latest first-job completion minus earliest release.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_trace_makespan(trace: *const VgTrace, out: *mut u64) -> VgStatus {
    guard(|| {
        let span = makespan(&deref(trace, "trace")?.0)?;
        put(out, span.get(), "out")
    })
}

/// Number of deadline misses in the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_trace_misses(trace: *const VgTrace, out: *mut u64) -> VgStatus {
    guard(|| {
        let stats = miss_stats(&deref(trace, "trace")?.0);
        put(out, stats.misses as u64, "out")
    })
}

/// Trace events as JSON lines; free the result with `vg_string_free`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_trace_to_jsonl(trace: *const VgTrace, out: *mut *mut c_char) -> VgStatus {
    guard(|| {
        let mut buf = Vec::new();
        deref(trace, "trace")?.0.write_jsonl(&mut buf)?;
        let text = String::from_utf8(buf).expect("serde_json writes UTF-8");
        put(out, owned_string(text), "out")
    })
}

fn narrow(value: u128) -> Result<u64, Failure> {
    u64::try_from(value).map_err(|_| Failure::Status(VgStatus::Overflow, format!("{value} does not fit in 64 bits")))
}

/// Stirling number of the second kind S(n, k).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_stirling2(n: u32, k: u32, out: *mut u64) -> VgStatus {
    guard(|| put(out, narrow(stirling2(n, k)?)?, "out"))
}

/// Number of partitions of `n` single-core tasks into viable gangs on `m` cores.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vg_config_count_bound(n: u32, m: u32, out: *mut u64) -> VgStatus {
    guard(|| put(out, narrow(config_count_bound(n, m)?)?, "out"))
}
