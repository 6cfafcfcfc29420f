//! C ABI over checkpointed agents: load a bundle, sample actions with
//! log-likelihoods, run Q-argmax action selection, and query Q values.
//!
//! Conventions:
//! - every entry point returns an [`MfpoStatus`]; outputs go through
//!   caller-provided buffers,
//! - handles are opaque and freed with [`mfpo_agent_free`],
//! - sampling takes an explicit `seed` so callers control reproducibility,
//! - no call unwinds across the boundary.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use mfpo::checkpoint::load_agent;
use mfpo::train::{select_action_eval, Agent};
use mfpo::velest::QFunction;

/// Opaque handle to a loaded agent bundle.
pub struct MfpoAgent {
    agent: Agent,
}

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfpoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    DimensionMismatch = 4,
    SamplingFailed = 5,
    InvalidArgument = 6,
    InternalPanic = 7,
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn mfpo_status_message(status: MfpoStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        MfpoStatus::Ok => b"ok\0",
        MfpoStatus::NullPointer => b"null pointer argument\0",
        MfpoStatus::InvalidUtf8 => b"path is not valid UTF-8\0",
        MfpoStatus::LoadFailed => b"checkpoint could not be loaded\0",
        MfpoStatus::DimensionMismatch => b"buffer length does not match agent dimensions\0",
        MfpoStatus::SamplingFailed => b"sampling produced a non-finite value\0",
        MfpoStatus::InvalidArgument => b"invalid argument\0",
        MfpoStatus::InternalPanic => b"internal panic\0",
    };
    s.as_ptr() as *const c_char
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn mfpo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a checkpoint bundle directory. On success writes a handle to
/// `out_agent`; the caller owns it and must release it with
/// [`mfpo_agent_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out_agent` a valid
/// pointer to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_load(
    path: *const c_char,
    out_agent: *mut *mut MfpoAgent,
) -> MfpoStatus {
    if path.is_null() || out_agent.is_null() {
        return MfpoStatus::NullPointer;
    }
    let path_str = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => return MfpoStatus::InvalidUtf8,
    };
    match catch_unwind(|| load_agent(Path::new(path_str))) {
        Ok(Ok(loaded)) => {
            let handle = Box::new(MfpoAgent {
                agent: loaded.agent,
            });
            *out_agent = Box::into_raw(handle);
            MfpoStatus::Ok
        }
        Ok(Err(_)) => MfpoStatus::LoadFailed,
        Err(_) => MfpoStatus::InternalPanic,
    }
}

/// Releases a handle returned by [`mfpo_agent_load`]. Null is a no-op.
///
/// # Safety
/// `agent` must be a pointer previously returned by [`mfpo_agent_load`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_free(agent: *mut MfpoAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// State dimension of the loaded agent; 0 for a null handle.
///
/// # Safety
/// `agent` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_state_dim(agent: *const MfpoAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.agent.policy.state_dim)
}

/// Action dimension of the loaded agent; 0 for a null handle.
///
/// # Safety
/// `agent` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_action_dim(agent: *const MfpoAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.agent.policy.action_dim)
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Samples one action from the policy given `state`, writing the action to
/// `action_out` (length `action_len`) and, when `log_likelihood_out` is
/// non-null, its estimated log-likelihood.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `agent` must be a live
/// handle.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_sample_action(
    agent: *const MfpoAgent,
    state: *const f64,
    state_len: usize,
    seed: u64,
    action_out: *mut f64,
    action_len: usize,
    log_likelihood_out: *mut f64,
) -> MfpoStatus {
    let handle = match agent.as_ref() {
        Some(h) => h,
        None => return MfpoStatus::NullPointer,
    };
    let state = match slice_arg(state, state_len) {
        Some(s) => s,
        None => return MfpoStatus::NullPointer,
    };
    if action_out.is_null() {
        return MfpoStatus::NullPointer;
    }
    if state_len != handle.agent.policy.state_dim || action_len != handle.agent.policy.action_dim {
        return MfpoStatus::DimensionMismatch;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mfpo::meanflow::sample_action(
            &handle.agent.policy,
            &handle.agent.divnet,
            state,
            handle.agent.t_steps,
            &mut rng,
        )
    }));
    match result {
        Ok(Ok(sampled)) => {
            std::ptr::copy_nonoverlapping(sampled.action.as_ptr(), action_out, action_len);
            if !log_likelihood_out.is_null() {
                *log_likelihood_out = sampled.log_likelihood;
            }
            MfpoStatus::Ok
        }
        Ok(Err(_)) => MfpoStatus::SamplingFailed,
        Err(_) => MfpoStatus::InternalPanic,
    }
}

/// Samples `candidates` actions and writes the one with the highest critic
/// value (ties keep the earliest candidate).
///
/// # Safety
/// Pointers must be valid for the stated lengths; `agent` must be a live
/// handle.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_select_action(
    agent: *const MfpoAgent,
    state: *const f64,
    state_len: usize,
    candidates: u32,
    seed: u64,
    action_out: *mut f64,
    action_len: usize,
) -> MfpoStatus {
    let handle = match agent.as_ref() {
        Some(h) => h,
        None => return MfpoStatus::NullPointer,
    };
    let state = match slice_arg(state, state_len) {
        Some(s) => s,
        None => return MfpoStatus::NullPointer,
    };
    if action_out.is_null() {
        return MfpoStatus::NullPointer;
    }
    if candidates == 0 {
        return MfpoStatus::InvalidArgument;
    }
    if state_len != handle.agent.policy.state_dim || action_len != handle.agent.policy.action_dim {
        return MfpoStatus::DimensionMismatch;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        select_action_eval(
            &handle.agent.policy,
            &handle.agent.divnet,
            &handle.agent.critic,
            state,
            candidates as usize,
            handle.agent.t_steps,
            &mut rng,
        )
    }));
    match result {
        Ok(Ok(action)) => {
            std::ptr::copy_nonoverlapping(action.as_ptr(), action_out, action_len);
            MfpoStatus::Ok
        }
        Ok(Err(_)) => MfpoStatus::SamplingFailed,
        Err(_) => MfpoStatus::InternalPanic,
    }
}

/// Writes the critic's scalar Q value at `(state, action)` to `q_out`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `agent` must be a live
/// handle.
#[no_mangle]
pub unsafe extern "C" fn mfpo_agent_q_value(
    agent: *const MfpoAgent,
    state: *const f64,
    state_len: usize,
    action: *const f64,
    action_len: usize,
    q_out: *mut f64,
) -> MfpoStatus {
    let handle = match agent.as_ref() {
        Some(h) => h,
        None => return MfpoStatus::NullPointer,
    };
    let (state, action) = match (slice_arg(state, state_len), slice_arg(action, action_len)) {
        (Some(s), Some(a)) => (s, a),
        _ => return MfpoStatus::NullPointer,
    };
    if q_out.is_null() {
        return MfpoStatus::NullPointer;
    }
    if state_len != handle.agent.critic.state_dim || action_len != handle.agent.critic.action_dim {
        return MfpoStatus::DimensionMismatch;
    }
    match catch_unwind(AssertUnwindSafe(|| handle.agent.critic.q_value(state, action))) {
        Ok(q) => {
            *q_out = q;
            MfpoStatus::Ok
        }
        Err(_) => MfpoStatus::InternalPanic,
    }
}
