//! C ABI for the collision-resolution simulator.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! this library. Every fallible call returns a [`SucrStatus`]; on failure a
//! description is available from [`sucr_last_error_message`] on the same
//! thread until the next failing call. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use sucr_core::channel::SystemParams;
use sucr_core::estimators::{approx_estimate, log_f1, log_f2, ml_estimate};
use sucr_core::harness::{
    emit_results, run_experiment_with_threads, ExperimentConfig, ExperimentResult, OutputFormat,
    Preset,
};
use sucr_core::protocol::{collision_probability, DlObservation};
use sucr_core::resolution::{decide, BiasPolicy, Decision};
use sucr_core::SucrError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SucrStatus {
    Ok = 0,
    NullPointer = 1,
    /// An argument is outside the domain of the operation.
    InvalidArgument = 2,
    ConfigError = 3,
    EstimationError = 4,
    IoError = 5,
    /// Bad UTF-8, bad TOML syntax or a serialization failure.
    EncodingError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SucrFormat {
    Csv = 0,
    Json = 1,
}

/// One result row. `pa_used` is NaN when the experiment has no access
/// probability (the two-user sweep).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SucrRow {
    pub sweep_value: f64,
    pub pa_used: f64,
    pub p_resolved: f64,
    pub p_false_positive: f64,
    pub p_false_negative: f64,
    pub ci_halfwidth: f64,
    pub trials_effective: u64,
}

/// Radio parameters.
pub struct SucrParams(SystemParams);

/// Experiment configuration.
pub struct SucrConfig(ExperimentConfig);

/// Experiment output.
pub struct SucrResult(ExperimentResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &SucrError) -> SucrStatus {
    match err {
        SucrError::Domain { .. } | SucrError::DegenerateInput(_) => SucrStatus::InvalidArgument,
        SucrError::Estimation(_) => SucrStatus::EstimationError,
        SucrError::Config(_) => SucrStatus::ConfigError,
        SucrError::Io { .. } => SucrStatus::IoError,
        SucrError::Serialization(_) => SucrStatus::EncodingError,
    }
}

fn fail(status: SucrStatus, msg: impl Into<String>) -> SucrStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F>(f: F) -> SucrStatus
where
    F: FnOnce() -> Result<(), SucrStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SucrStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SucrStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: sucr_core::Result<T>) -> Result<T, SucrStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, SucrStatus> {
    p.as_ref()
        .ok_or_else(|| fail(SucrStatus::NullPointer, "null handle"))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, SucrStatus> {
    p.as_mut()
        .ok_or_else(|| fail(SucrStatus::NullPointer, "null output pointer"))
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, SucrStatus> {
    if p.is_null() {
        return Err(fail(SucrStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(SucrStatus::EncodingError, format!("invalid UTF-8: {e}")))
}

/// Message of the most recent failure on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sucr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a validated parameter set.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn sucr_params_new(
    antennas: usize,
    ul_pilot_power: f64,
    dl_pilot_power: f64,
    noise_power: f64,
    pilots: usize,
    users: usize,
    access_probability: f64,
    out: *mut *mut SucrParams,
) -> SucrStatus {
    guard(|| {
        let out = out_ref(out)?;
        let p = SystemParams {
            antennas,
            ul_pilot_power,
            dl_pilot_power,
            noise_power,
            pilots,
            users,
            access_probability,
        };
        lift(p.validate())?;
        *out = Box::into_raw(Box::new(SucrParams(p)));
        Ok(())
    })
}

/// Default parameters: 100 antennas, unit powers, 10 pilots, 50 UEs,
/// `P_a = 1`.
#[no_mangle]
pub extern "C" fn sucr_params_default() -> *mut SucrParams {
    Box::into_raw(Box::new(SucrParams(SystemParams::default())))
}

/// # Safety
/// `params` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sucr_params_free(params: *mut SucrParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

unsafe fn observation(
    params: *const SucrParams,
    z_re: f64,
    z_im: f64,
    beta: f64,
) -> Result<DlObservation, SucrStatus> {
    let p = deref(params)?.0;
    if !(z_re.is_finite() && z_im.is_finite()) {
        return Err(fail(SucrStatus::InvalidArgument, "observation must be finite"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(fail(SucrStatus::InvalidArgument, "beta must be positive"));
    }
    Ok(DlObservation {
        z: Complex64::new(z_re, z_im),
        beta,
        params: p,
    })
}

/// Maximum-likelihood estimate of the contention sum-gain from `z`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_ml_estimate(
    params: *const SucrParams,
    z_re: f64,
    z_im: f64,
    beta: f64,
    out: *mut f64,
) -> SucrStatus {
    guard(|| {
        let obs = observation(params, z_re, z_im, beta)?;
        *out_ref(out)? = lift(ml_estimate(&obs))?;
        Ok(())
    })
}

/// Closed-form estimate of the contention sum-gain from `Re z`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_approx_estimate(
    params: *const SucrParams,
    z_re: f64,
    z_im: f64,
    beta: f64,
    out: *mut f64,
) -> SucrStatus {
    guard(|| {
        let obs = observation(params, z_re, z_im, beta)?;
        *out_ref(out)? = approx_estimate(&obs);
        Ok(())
    })
}

/// Log-density of `Re z` given `alpha`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_log_f1(
    params: *const SucrParams,
    z_re: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> SucrStatus {
    guard(|| {
        let p = deref(params)?.0;
        *out_ref(out)? = lift(log_f1(z_re, alpha, beta, &p))?;
        Ok(())
    })
}

/// Log-density of `Im z` given `alpha`.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_log_f2(
    params: *const SucrParams,
    z_im: f64,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> SucrStatus {
    guard(|| {
        let p = deref(params)?.0;
        if !(beta > 0.0 && alpha >= beta && alpha.is_finite()) {
            return Err(fail(SucrStatus::InvalidArgument, "need alpha >= beta > 0"));
        }
        *out_ref(out)? = log_f2(z_im, alpha, beta, &p);
        Ok(())
    })
}

/// Activation rule: 1 if the UE stays active, 0 if it pulls out, -1 on
/// invalid input.
#[no_mangle]
pub extern "C" fn sucr_decide(beta: f64, alpha_hat: f64, delta: f64, antennas: usize) -> c_int {
    let Ok(bias) = BiasPolicy::new(delta) else {
        set_last_error(format!("bias delta must be finite, got {delta}"));
        return -1;
    };
    if antennas == 0 || !(beta > 0.0) || !(alpha_hat > 0.0) {
        set_last_error("need beta > 0, alpha_hat > 0 and antennas >= 1".into());
        return -1;
    }
    match decide(beta, alpha_hat, bias, antennas) {
        Decision::Active => 1,
        Decision::Inactive => 0,
    }
}

/// Probability that two or more UEs pick a given pilot.
///
/// # Safety
/// `params` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_collision_probability(
    params: *const SucrParams,
    out: *mut f64,
) -> SucrStatus {
    guard(|| {
        let p = deref(params)?.0;
        *out_ref(out)? = collision_probability(&p);
        Ok(())
    })
}

/// Default config of a preset: "two-user", "antennas", "bias" or "custom".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_config_preset(
    name: *const c_char,
    out: *mut *mut SucrConfig,
) -> SucrStatus {
    guard(|| {
        let preset: Preset = lift(read_str(name)?.parse())?;
        *out_ref(out)? = Box::into_raw(Box::new(SucrConfig(ExperimentConfig::preset_default(preset))));
        Ok(())
    })
}

/// Parses and validates a TOML config.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_config_from_toml(
    toml: *const c_char,
    out: *mut *mut SucrConfig,
) -> SucrStatus {
    guard(|| {
        let cfg = lift(ExperimentConfig::from_toml_str(read_str(toml)?))?;
        *out_ref(out)? = Box::into_raw(Box::new(SucrConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sucr_config_set_trials(config: *mut SucrConfig, trials: u64) -> SucrStatus {
    guard(|| {
        if trials == 0 {
            return Err(fail(SucrStatus::ConfigError, "trials must be at least 1"));
        }
        out_ref(config)?.0.trials = trials;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sucr_config_set_seed(config: *mut SucrConfig, seed: u64) -> SucrStatus {
    guard(|| {
        out_ref(config)?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sucr_config_free(config: *mut SucrConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured experiment. `threads = 0` uses every core; the
/// result does not depend on the thread count.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_run(
    config: *const SucrConfig,
    threads: usize,
    out: *mut *mut SucrResult,
) -> SucrStatus {
    guard(|| {
        let cfg = &deref(config)?.0;
        let out = out_ref(out)?;
        let threads = (threads > 0).then_some(threads);
        let result = lift(run_experiment_with_threads(cfg, threads))?;
        *out = Box::into_raw(Box::new(SucrResult(result)));
        Ok(())
    })
}

/// Number of rows, or 0 for a NULL handle.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sucr_result_len(result: *const SucrResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.rows.len())
}

/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sucr_result_row(
    result: *const SucrResult,
    index: usize,
    out: *mut SucrRow,
) -> SucrStatus {
    guard(|| {
        let rows = &deref(result)?.0.rows;
        let r = rows.get(index).ok_or_else(|| {
            fail(
                SucrStatus::InvalidArgument,
                format!("row {index} out of range for {} rows", rows.len()),
            )
        })?;
        *out_ref(out)? = SucrRow {
            sweep_value: r.sweep_value,
            pa_used: r.pa_used.unwrap_or(f64::NAN),
            p_resolved: r.p_resolved,
            p_false_positive: r.p_false_positive,
            p_false_negative: r.p_false_negative,
            ci_halfwidth: r.ci_halfwidth,
            trials_effective: r.trials_effective,
        };
        Ok(())
    })
}

/// Writes `result` to `path`. JSON output embeds `config`.
///
/// # Safety
/// `result` and `config` must be live handles and `path` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn sucr_result_write(
    result: *const SucrResult,
    config: *const SucrConfig,
    path: *const c_char,
    format: SucrFormat,
) -> SucrStatus {
    guard(|| {
        let result = &deref(result)?.0;
        let cfg = &deref(config)?.0;
        let path = Path::new(read_str(path)?);
        let format = match format {
            SucrFormat::Csv => OutputFormat::Csv,
            SucrFormat::Json => OutputFormat::Json,
        };
        lift(emit_results(result, cfg, path, format))
    })
}

/// # Safety
/// `result` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sucr_result_free(result: *mut SucrResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
