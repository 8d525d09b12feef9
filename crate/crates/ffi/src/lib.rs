//! C ABI over the transient-verify core.
//!
//! Every fallible function returns a [`TvStatus`] and writes results through
//! out-pointers. Trajectories and reports are opaque handles owned by the
//! caller once returned, and must be released with their `_free` function.
//! Strings returned by the library are released with [`tv_string_free`].
//! Panics never cross the boundary; they surface as `TV_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use transient_verify::fp::{self, FpError, MValue, PrecisionMode};
use transient_verify::integrator::{integrate, IntegrateError, IntegrationSpec, Trajectory};
use transient_verify::lorenz::{classify_destiny, fixed_points, Destiny, LorenzParams, RhsVariant, SettleCriterion, State3};
use transient_verify::pipeline::{run_validity_test, Conclusion, PipelineConfig, PipelineError, ValidityReport};

/// Bumped whenever a signature or struct layout in this header changes.
pub const TV_ABI_VERSION: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Overflow = 3,
    NotANumber = 4,
    Divergence = 5,
    InvalidConfig = 6,
    DiagnosticsFailed = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvMode {
    P32 = 0,
    P64 = 1,
    Pdd = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvVariant {
    Ya = 0,
    Yb = 1,
    Yc = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvDestiny {
    CPlus = 0,
    CMinus = 1,
    Undecided = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvConclusion {
    Validated = 0,
    NecessaryConditionFailed = 1,
    LadderExhausted = 2,
}

/// A double-double value; `lo` is zero outside the double-double mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvValue {
    pub hi: f64,
    pub lo: f64,
}

/// Inputs of [`tv_simulate`]. `mode` takes a `TvMode` value and `variant` a
/// `TvVariant` value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvSimulateParams {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
    pub ic: [f64; 3],
    pub dt: f64,
    pub t_max: f64,
    pub record_stride: u64,
    pub mode: u32,
    pub variant: u32,
}

/// Opaque trajectory handle.
pub struct TvTrajectory {
    inner: Trajectory,
    destiny: Destiny,
    settle_time: f64,
}

/// Opaque validity-report handle.
pub struct TvReport {
    inner: ValidityReport,
}

fn guard(f: impl FnOnce() -> TvStatus) -> TvStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(TvStatus::Panic)
}

fn fp_status(e: FpError) -> TvStatus {
    match e {
        FpError::Overflow(_) => TvStatus::Overflow,
        FpError::NaN(_) => TvStatus::NotANumber,
    }
}

fn mode_from(raw: u32) -> Option<PrecisionMode> {
    match raw {
        0 => Some(PrecisionMode::P32),
        1 => Some(PrecisionMode::P64),
        2 => Some(PrecisionMode::PDD),
        _ => None,
    }
}

fn variant_from(raw: u32) -> Option<RhsVariant> {
    match raw {
        0 => Some(RhsVariant::YA),
        1 => Some(RhsVariant::YB),
        2 => Some(RhsVariant::YC),
        _ => None,
    }
}

fn destiny_to(d: Destiny) -> TvDestiny {
    match d {
        Destiny::CPlus => TvDestiny::CPlus,
        Destiny::CMinus => TvDestiny::CMinus,
        Destiny::Undecided => TvDestiny::Undecided,
    }
}

#[no_mangle]
pub extern "C" fn tv_abi_version() -> u32 {
    TV_ABI_VERSION
}

/// Static, NUL-terminated description of a `TvStatus` value.
#[no_mangle]
pub extern "C" fn tv_status_message(status: u32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer argument",
        2 => c"invalid argument",
        3 => c"result overflows the precision mode's range",
        4 => c"result is not a number",
        5 => c"trajectory diverged; partial result returned",
        6 => c"invalid configuration",
        7 => c"diagnostics failed",
        8 => c"index out of range",
        9 => c"internal error",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Rounds `x` to the nearest binary32 value, ties to even.
#[no_mangle]
pub unsafe extern "C" fn tv_round_p32(x: f64, out: *mut f64) -> TvStatus {
    guard(|| {
        if out.is_null() {
            return TvStatus::NullPointer;
        }
        match fp::round_p32(x) {
            Ok(v) => {
                *out = v;
                TvStatus::Ok
            }
            Err(e) => fp_status(e),
        }
    })
}

type ModeOp = fn(PrecisionMode, MValue, MValue) -> Result<MValue, FpError>;

unsafe fn binary_op(op: ModeOp, mode: u32, a: TvValue, b: TvValue, out: *mut TvValue) -> TvStatus {
    guard(|| {
        if out.is_null() {
            return TvStatus::NullPointer;
        }
        let Some(mode) = mode_from(mode) else { return TvStatus::InvalidArgument };
        let lift = |v: TvValue| -> Result<MValue, FpError> {
            match mode {
                PrecisionMode::PDD => {
                    let hi = mode.value(v.hi)?;
                    fp::m_add(mode, hi, MValue::from_f64(v.lo))
                }
                _ => mode.value(v.hi),
            }
        };
        match lift(a).and_then(|a| lift(b).and_then(|b| op(mode, a, b))) {
            Ok(v) => {
                *out = TvValue { hi: v.hi, lo: v.lo };
                TvStatus::Ok
            }
            Err(e) => fp_status(e),
        }
    })
}

/// `a + b` in `mode` (a `TvMode` value). Inputs are first rounded into the mode.
#[no_mangle]
pub unsafe extern "C" fn tv_m_add(mode: u32, a: TvValue, b: TvValue, out: *mut TvValue) -> TvStatus {
    binary_op(fp::m_add, mode, a, b, out)
}

#[no_mangle]
pub unsafe extern "C" fn tv_m_sub(mode: u32, a: TvValue, b: TvValue, out: *mut TvValue) -> TvStatus {
    binary_op(fp::m_sub, mode, a, b, out)
}

#[no_mangle]
pub unsafe extern "C" fn tv_m_mul(mode: u32, a: TvValue, b: TvValue, out: *mut TvValue) -> TvStatus {
    binary_op(fp::m_mul, mode, a, b, out)
}

#[no_mangle]
pub unsafe extern "C" fn tv_m_div(mode: u32, a: TvValue, b: TvValue, out: *mut TvValue) -> TvStatus {
    binary_op(fp::m_div, mode, a, b, out)
}

/// Integrates one trajectory. On `TV_STATUS_DIVERGENCE` the handle still
/// receives the samples recorded before the failure.
#[no_mangle]
pub unsafe extern "C" fn tv_simulate(params: *const TvSimulateParams, out: *mut *mut TvTrajectory) -> TvStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return TvStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let p = *params;
        let (Some(mode), Some(variant)) = (mode_from(p.mode), variant_from(p.variant)) else {
            return TvStatus::InvalidArgument;
        };
        let Ok(lorenz) = LorenzParams::new(p.sigma, p.r, p.b) else { return TvStatus::InvalidArgument };
        let Ok(fps) = fixed_points(&lorenz) else { return TvStatus::InvalidArgument };
        let spec = IntegrationSpec { dt: p.dt, t_max: p.t_max, record_stride: p.record_stride, stop_on_settle: None };
        let ic = State3::new(p.ic[0], p.ic[1], p.ic[2]);
        let (traj, status) = match integrate(&lorenz, &ic, &spec, variant, mode, &fps) {
            Ok(t) => (t, TvStatus::Ok),
            Err(IntegrateError::Divergence { partial, .. }) => (*partial, TvStatus::Divergence),
            Err(IntegrateError::InvalidInitialCondition(e)) => return fp_status(e),
            Err(IntegrateError::InvalidSpec(_)) => return TvStatus::InvalidArgument,
        };
        let (destiny, settle_time) = match status {
            TvStatus::Ok => match classify_destiny(&traj, &fps, &SettleCriterion::default()) {
                Ok(c) => c,
                Err(_) => return TvStatus::InvalidArgument,
            },
            _ => (Destiny::Undecided, f64::INFINITY),
        };
        *out = Box::into_raw(Box::new(TvTrajectory { inner: traj, destiny, settle_time }));
        status
    })
}

/// Number of recorded samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn tv_trajectory_len(traj: *const TvTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies sample `index` into `t` and `state` (three doubles).
#[no_mangle]
pub unsafe extern "C" fn tv_trajectory_sample(
    traj: *const TvTrajectory,
    index: usize,
    t: *mut f64,
    state: *mut f64,
) -> TvStatus {
    guard(|| {
        let Some(traj) = traj.as_ref() else { return TvStatus::NullPointer };
        if t.is_null() || state.is_null() {
            return TvStatus::NullPointer;
        }
        if index >= traj.inner.len() {
            return TvStatus::OutOfRange;
        }
        let s = traj.inner.states[index];
        *t = traj.inner.times[index];
        *state = s.x;
        *state.add(1) = s.y;
        *state.add(2) = s.z;
        TvStatus::Ok
    })
}

/// Destiny and settle time (infinite when undecided).
#[no_mangle]
pub unsafe extern "C" fn tv_trajectory_destiny(
    traj: *const TvTrajectory,
    destiny: *mut TvDestiny,
    settle_time: *mut f64,
) -> TvStatus {
    guard(|| {
        let Some(traj) = traj.as_ref() else { return TvStatus::NullPointer };
        if destiny.is_null() || settle_time.is_null() {
            return TvStatus::NullPointer;
        }
        *destiny = destiny_to(traj.destiny);
        *settle_time = traj.settle_time;
        TvStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tv_trajectory_free(traj: *mut TvTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs the validity test on a JSON config (NUL-terminated UTF-8). Omitted
/// fields take their defaults.
#[no_mangle]
pub unsafe extern "C" fn tv_check_json(config_json: *const c_char, out: *mut *mut TvReport) -> TvStatus {
    guard(|| {
        if config_json.is_null() || out.is_null() {
            return TvStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(config_json).to_str() else { return TvStatus::InvalidConfig };
        let Ok(cfg) = serde_json::from_str::<PipelineConfig>(text) else { return TvStatus::InvalidConfig };
        match run_validity_test(&cfg) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(TvReport { inner: report }));
                TvStatus::Ok
            }
            Err(PipelineError::Config(_)) | Err(PipelineError::Lorenz(_)) => TvStatus::InvalidConfig,
            Err(PipelineError::Diagnostics(_)) => TvStatus::DiagnosticsFailed,
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tv_report_conclusion(report: *const TvReport, out: *mut TvConclusion) -> TvStatus {
    guard(|| {
        let Some(report) = report.as_ref() else { return TvStatus::NullPointer };
        if out.is_null() {
            return TvStatus::NullPointer;
        }
        *out = match report.inner.conclusion {
            Conclusion::Validated => TvConclusion::Validated,
            Conclusion::NecessaryConditionFailed => TvConclusion::NecessaryConditionFailed,
            Conclusion::LadderExhausted => TvConclusion::LadderExhausted,
        };
        TvStatus::Ok
    })
}

/// The report as JSON. Release the string with [`tv_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tv_report_to_json(report: *const TvReport, out: *mut *mut c_char) -> TvStatus {
    guard(|| {
        let Some(report) = report.as_ref() else { return TvStatus::NullPointer };
        if out.is_null() {
            return TvStatus::NullPointer;
        }
        let json = serde_json::to_string(&report.inner).expect("report serializes");
        *out = CString::new(json).expect("JSON has no interior NUL").into_raw();
        TvStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tv_report_free(report: *mut TvReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
