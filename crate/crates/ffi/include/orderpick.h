#ifndef ORDERPICK_H
#define ORDERPICK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpStatus {
  OP_STATUS_OK = 0,
  OP_STATUS_NULL_POINTER = 1,
  OP_STATUS_INVALID_ARGUMENT = 2,
  OP_STATUS_INFEASIBLE_ACTION = 3,
  OP_STATUS_SHAPE_MISMATCH = 4,
  OP_STATUS_CORRUPT_CHECKPOINT = 5,
  OP_STATUS_IO = 6,
  OP_STATUS_INTERNAL = 7,
  OP_STATUS_PANIC = 8,
} OpStatus;

/**
 * Simulator with the default warehouse and Poisson arrivals.
 */
typedef struct OpEnv OpEnv;

/**
 * Loaded Q-network.
 */
typedef struct OpQNet OpQNet;

typedef struct OpStepResult {
  double reward;
  double elapsed;
  uint32_t picked;
  double moved;
  double clock;
} OpStepResult;

/**
 * Shift metrics; `atdo` and `aoct` are NaN when no order completed.
 */
typedef struct OpMetrics {
  double atdo;
  double aoct;
  double puo;
  double total_distance;
  uint64_t completed;
  uint64_t arrived;
} OpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t op_last_error(char *buf, size_t len);

/**
 * Creates an environment on the default warehouse with arrival rate
 * `lambda` and unload weight `alpha`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`op_env_free`].
 */
enum OpStatus op_env_new(double lambda, double alpha, uint64_t seed, struct OpEnv **out);

/**
 * # Safety
 * `env` must come from [`op_env_new`] and not be used afterwards. Null is ignored.
 */
void op_env_free(struct OpEnv *env);

/**
 * Length of the state vector, `4 + 2N`.
 *
 * # Safety
 * `env` must be a live handle or null (returns 0).
 */
size_t op_env_state_len(const struct OpEnv *env);

/**
 * Writes the current state features into `out[0..len]`.
 *
 * # Safety
 * `env` must be a live handle and `out` must point to `len` writable doubles.
 */
enum OpStatus op_env_state(const struct OpEnv *env, double *out, size_t len);

/**
 * Writes the feasibility of actions 0..5 as 0/1 into `out[0..5]`.
 *
 * # Safety
 * `env` must be a live handle and `out` must point to 5 writable bytes.
 */
enum OpStatus op_env_mask(const struct OpEnv *env, uint8_t *out);

/**
 * Applies `action` (0 stay, 1 right, 2 left, 3 up, 4 down).
 *
 * # Safety
 * `env` must be a live handle; `out` may be null.
 */
enum OpStatus op_env_step(struct OpEnv *env, uint8_t action, struct OpStepResult *out);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer; free the
 * handle with [`op_qnet_free`].
 */
enum OpStatus op_qnet_load(const char *path, struct OpQNet **out);

/**
 * # Safety
 * `net` must come from [`op_qnet_load`] and not be used afterwards. Null is ignored.
 */
void op_qnet_free(struct OpQNet *net);

/**
 * Q-values of one state (`len` = picker plus order features) into `out[0..5]`.
 *
 * # Safety
 * `x` must point to `len` doubles and `out` to 5 writable doubles.
 */
enum OpStatus op_qnet_forward(const struct OpQNet *net, const double *x, size_t len, double *out);

/**
 * Length in meters of the shortest depot-to-depot tour through the given
 * slots on the default warehouse. Slots are 1-based `(aisles[i], depths[i])`.
 *
 * # Safety
 * `aisles` and `depths` must point to `n` values each; `out` must be valid.
 */
enum OpStatus op_optimal_route_length(const uint32_t *aisles,
                                      const uint32_t *depths,
                                      size_t n,
                                      double *out);

/**
 * Simulates one shift of the named baseline on the default warehouse.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OpStatus op_run_baseline(const char *name,
                              double lambda,
                              uint64_t seed,
                              double shift_seconds,
                              struct OpMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDERPICK_H */
