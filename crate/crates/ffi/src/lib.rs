//! C ABI over the `dtwn` simulator.
//!
//! Objects cross the boundary as opaque pointers created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`DtwnStatus`]; on failure the message is kept per thread and
//! can be copied out with [`dtwn_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dtwn::env::{DtwnEnv, StepOutcome};
use dtwn::harness::{run_experiment, Experiment, RunReport};
use dtwn::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtwnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    Diverged = 7,
    Ledger = 8,
    Checkpoint = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for DtwnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Toml(_) | Error::AccuracyConstraint { .. } => DtwnStatus::Config,
            Error::Io(_) | Error::Csv(_) => DtwnStatus::Io,
            Error::DimensionMismatch { .. } => DtwnStatus::DimensionMismatch,
            Error::NonFinite(_) => DtwnStatus::NonFinite,
            Error::Diverged(_) => DtwnStatus::Diverged,
            Error::Ledger(_) => DtwnStatus::Ledger,
            Error::Checkpoint(_) => DtwnStatus::Checkpoint,
            _ => DtwnStatus::InvalidArgument,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: DtwnStatus, msg: impl Into<String>) -> DtwnStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), DtwnStatus>>(f: F) -> DtwnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            DtwnStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(DtwnStatus::Panic, msg)
        }
    }
}

fn lift<T>(r: dtwn::Result<T>) -> Result<T, DtwnStatus> {
    r.map_err(|e| fail(DtwnStatus::from(&e), e.to_string()))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, DtwnStatus> {
    if p.is_null() {
        return Err(fail(DtwnStatus::NullPointer, "null path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| fail(DtwnStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn obj<'a, T>(p: *mut T) -> Result<&'a mut T, DtwnStatus> {
    p.as_mut().ok_or_else(|| fail(DtwnStatus::NullPointer, "null handle"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, DtwnStatus> {
    p.as_mut().ok_or_else(|| fail(DtwnStatus::NullPointer, "null output pointer"))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dtwn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Upper bound on global rounds, `ceil(1 / (1 − θ_G))`.
///
/// # Safety
/// `rounds` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_global_iteration_bound(theta_g: f64, rounds: *mut u64) -> DtwnStatus {
    guard(|| {
        *out(rounds)? = lift(dtwn::latency::global_iteration_bound(theta_g))?;
        Ok(())
    })
}

/// Loaded experiment configuration.
pub struct DtwnExperiment {
    inner: Experiment,
}

/// # Safety
/// `path` must be a NUL-terminated string; `exp` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_experiment_load(path: *const c_char, exp: *mut *mut DtwnExperiment) -> DtwnStatus {
    guard(|| {
        let slot = out(exp)?;
        *slot = ptr::null_mut();
        let inner = lift(Experiment::load(path_arg(path)?))?;
        *slot = Box::into_raw(Box::new(DtwnExperiment { inner }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be a handle from [`dtwn_experiment_load`].
#[no_mangle]
pub unsafe extern "C" fn dtwn_experiment_set_seed(exp: *mut DtwnExperiment, seed: u64) -> DtwnStatus {
    guard(|| {
        obj(exp)?.inner.config.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a handle from [`dtwn_experiment_load`].
#[no_mangle]
pub unsafe extern "C" fn dtwn_experiment_set_episodes(exp: *mut DtwnExperiment, episodes: usize, eval_episodes: usize) -> DtwnStatus {
    guard(|| {
        let e = obj(exp)?;
        e.inner.config.episodes = episodes;
        e.inner.config.eval_episodes = eval_episodes;
        Ok(())
    })
}

/// Runs the configured pipeline, writing outputs under `out_dir`.
///
/// # Safety
/// `exp` must be a live handle, `out_dir` a NUL-terminated string and
/// `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_experiment_run(exp: *mut DtwnExperiment, out_dir: *const c_char, report: *mut *mut DtwnReport) -> DtwnStatus {
    guard(|| {
        let slot = out(report)?;
        *slot = ptr::null_mut();
        let e = obj(exp)?;
        let r = lift(run_experiment(&e.inner, &path_arg(out_dir)?, true))?;
        *slot = Box::into_raw(Box::new(DtwnReport { inner: r }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtwn_experiment_free(exp: *mut DtwnExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Result of a run.
pub struct DtwnReport {
    inner: RunReport,
}

/// Number of training episodes in the report.
///
/// # Safety
/// `report` must be a live handle and `n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_report_episodes(report: *mut DtwnReport, n: *mut usize) -> DtwnStatus {
    guard(|| {
        *out(n)? = obj(report)?.inner.history.len();
        Ok(())
    })
}

/// Median evaluation iteration time of `policy` ("learned", "random" or
/// "average").
///
/// # Safety
/// `report` must be a live handle, `policy` a NUL-terminated string and
/// `median` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_report_eval_median(report: *mut DtwnReport, policy: *const c_char, median: *mut f64) -> DtwnStatus {
    guard(|| {
        let r = obj(report)?;
        let name = path_arg(policy)?;
        let name = name.to_string_lossy();
        let m = r.inner.eval_median(&name).ok_or_else(|| fail(DtwnStatus::InvalidArgument, format!("no evaluation for policy {name}")))?;
        *out(median)? = m;
        Ok(())
    })
}

/// Copies the cumulative average cost series into `buf`. `len` receives
/// the series length; fails with `BufferTooSmall` if `cap` is short.
///
/// # Safety
/// `buf` must point to `cap` writable doubles (or be null with `cap` 0).
#[no_mangle]
pub unsafe extern "C" fn dtwn_report_cumulative_cost(report: *mut DtwnReport, buf: *mut f64, cap: usize, len: *mut usize) -> DtwnStatus {
    guard(|| {
        let series = lift(obj(report)?.inner.cumulative_cost())?;
        *out(len)? = series.len();
        copy_out(&series, buf, cap)
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtwn_report_free(report: *mut DtwnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), DtwnStatus> {
    if cap < src.len() {
        return Err(fail(DtwnStatus::BufferTooSmall, format!("need {} values, buffer holds {cap}", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(fail(DtwnStatus::NullPointer, "null buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Step-by-step environment for external controllers.
pub struct DtwnEnvironment {
    inner: DtwnEnv,
}

/// Dimensions of an environment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DtwnEnvDims {
    pub num_agents: usize,
    pub num_twins: usize,
    pub state_dim: usize,
    /// Policy outputs per agent.
    pub action_dim: usize,
}

/// Outcome of one step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DtwnStepResult {
    pub t_iteration: f64,
    pub t_local_training: f64,
    pub t_param_tx: f64,
    pub t_block_validation: f64,
    pub objective: f64,
    pub mean_reward: f64,
    pub global_loss: f64,
    pub verified_models: usize,
    pub done: bool,
}

impl From<&StepOutcome> for DtwnStepResult {
    fn from(o: &StepOutcome) -> Self {
        let b = &o.breakdown;
        Self {
            t_iteration: b.t_iteration,
            t_local_training: b.t_local_training,
            t_param_tx: b.t_param_tx,
            t_block_validation: b.t_block_validation,
            objective: b.objective,
            mean_reward: o.rewards.iter().sum::<f64>() / o.rewards.len().max(1) as f64,
            global_loss: o.global_loss,
            verified_models: o.verified_models,
            done: o.done,
        }
    }
}

/// Builds the environment described by an experiment.
///
/// # Safety
/// `exp` must be a live handle and `env` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_env_new(exp: *mut DtwnExperiment, env: *mut *mut DtwnEnvironment) -> DtwnStatus {
    guard(|| {
        let slot = out(env)?;
        *slot = ptr::null_mut();
        let inner = lift(obj(exp)?.inner.build_env())?;
        *slot = Box::into_raw(Box::new(DtwnEnvironment { inner }));
        Ok(())
    })
}

/// # Safety
/// `env` must be a live handle and `dims` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_env_dims(env: *mut DtwnEnvironment, dims: *mut DtwnEnvDims) -> DtwnStatus {
    guard(|| {
        let e = &obj(env)?.inner;
        *out(dims)? = DtwnEnvDims {
            num_agents: e.num_agents(),
            num_twins: e.num_twins(),
            state_dim: e.state_dim(),
            action_dim: e.action_dim(),
        };
        Ok(())
    })
}

/// Starts an episode and writes the state features into `state`.
///
/// # Safety
/// `state` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dtwn_env_reset(env: *mut DtwnEnvironment, episode_seed: u64, state: *mut f64, cap: usize) -> DtwnStatus {
    guard(|| {
        let s = lift(obj(env)?.inner.reset(episode_seed))?.features();
        copy_out(&s, state, cap)
    })
}

/// Applies policy outputs in `[-1, 1]`, laid out agent-major
/// (`num_agents * action_dim` values). Writes the next state features and
/// the step outcome.
///
/// # Safety
/// `outputs` must point to `len` doubles, `next_state` to `cap` writable
/// doubles and `result` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dtwn_env_step(
    env: *mut DtwnEnvironment,
    outputs: *const f64,
    len: usize,
    next_state: *mut f64,
    cap: usize,
    result: *mut DtwnStepResult,
) -> DtwnStatus {
    guard(|| {
        let e = &mut obj(env)?.inner;
        if outputs.is_null() {
            return Err(fail(DtwnStatus::NullPointer, "null action buffer"));
        }
        let (m, a) = (e.num_agents(), e.action_dim());
        if len != m * a {
            return Err(fail(DtwnStatus::DimensionMismatch, format!("expected {} outputs, got {len}", m * a)));
        }
        if cap < e.state_dim() {
            return Err(fail(DtwnStatus::BufferTooSmall, format!("state needs {} values, buffer holds {cap}", e.state_dim())));
        }
        let res = out(result)?;
        let flat = std::slice::from_raw_parts(outputs, len);
        let per_agent: Vec<Vec<f64>> = flat.chunks(a).map(<[f64]>::to_vec).collect();
        let joint = lift(e.decode(&per_agent))?;
        let o = lift(e.step(&joint))?;
        copy_out(&o.next_state.features(), next_state, cap)?;
        *res = DtwnStepResult::from(&o);
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtwn_env_free(env: *mut DtwnEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}
