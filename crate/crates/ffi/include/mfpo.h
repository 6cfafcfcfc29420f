#ifndef MFPO_H
#define MFPO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum MfpoStatus {
  MfpoStatus_Ok = 0,
  MfpoStatus_NullPointer = 1,
  MfpoStatus_InvalidUtf8 = 2,
  MfpoStatus_LoadFailed = 3,
  MfpoStatus_DimensionMismatch = 4,
  MfpoStatus_SamplingFailed = 5,
  MfpoStatus_InvalidArgument = 6,
  MfpoStatus_InternalPanic = 7,
} MfpoStatus;

/**
 * Opaque handle to a loaded agent bundle.
 */
typedef struct MfpoAgent MfpoAgent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *mfpo_status_message(enum MfpoStatus status);

/**
 * Library version as a static C string.
 */
const char *mfpo_version(void);

/**
 * Loads a checkpoint bundle directory. On success writes a handle to
 * `out_agent`; the caller owns it and must release it with
 * [`mfpo_agent_free`].
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out_agent` a valid
 * pointer to writable memory.
 */
enum MfpoStatus mfpo_agent_load(const char *path, struct MfpoAgent **out_agent);

/**
 * Releases a handle returned by [`mfpo_agent_load`]. Null is a no-op.
 *
 * # Safety
 * `agent` must be a pointer previously returned by [`mfpo_agent_load`]
 * that has not been freed yet.
 */
void mfpo_agent_free(struct MfpoAgent *agent);

/**
 * State dimension of the loaded agent; 0 for a null handle.
 *
 * # Safety
 * `agent` must be a live handle or null.
 */
uintptr_t mfpo_agent_state_dim(const struct MfpoAgent *agent);

/**
 * Action dimension of the loaded agent; 0 for a null handle.
 *
 * # Safety
 * `agent` must be a live handle or null.
 */
uintptr_t mfpo_agent_action_dim(const struct MfpoAgent *agent);

/**
 * Samples one action from the policy given `state`, writing the action to
 * `action_out` (length `action_len`) and, when `log_likelihood_out` is
 * non-null, its estimated log-likelihood.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `agent` must be a live
 * handle.
 */
enum MfpoStatus mfpo_agent_sample_action(const struct MfpoAgent *agent,
                                         const double *state,
                                         uintptr_t state_len,
                                         uint64_t seed,
                                         double *action_out,
                                         uintptr_t action_len,
                                         double *log_likelihood_out);

/**
 * Samples `candidates` actions and writes the one with the highest critic
 * value (ties keep the earliest candidate).
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `agent` must be a live
 * handle.
 */
enum MfpoStatus mfpo_agent_select_action(const struct MfpoAgent *agent,
                                         const double *state,
                                         uintptr_t state_len,
                                         uint32_t candidates,
                                         uint64_t seed,
                                         double *action_out,
                                         uintptr_t action_len);

/**
 * Writes the critic's scalar Q value at `(state, action)` to `q_out`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `agent` must be a live
 * handle.
 */
enum MfpoStatus mfpo_agent_q_value(const struct MfpoAgent *agent,
                                   const double *state,
                                   uintptr_t state_len,
                                   const double *action,
                                   uintptr_t action_len,
                                   double *q_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFPO_H */
